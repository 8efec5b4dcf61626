//! Banded LU without pivoting, enough for the M-matrix-like systems that
//! implicit steps produce (tridiagonal in 1D, bandwidth `nx` in 2D).

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn clear_row(&mut self, i: usize) {
        let w = 2 * self.bw + 1;
        self.data[i * w..(i + 1) * w].iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.bw < i || j > i + self.bw {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Solves `M x = b` in place (`b` becomes `x`), destroying the matrix.
    /// Returns `false` if a zero pivot was met.
    pub fn solve_in_place(&mut self, b: &mut [f64]) -> bool {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return false;
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..end {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
                b[i] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let end = (k + bw + 1).min(n);
            let mut s = b[k];
            for j in k + 1..end {
                s -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.data[self.idx(k, k)];
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 5;
        let mut m = BandedMatrix::zeros(n, 1);
        for i in 0..n {
            m.add(i, i, 4.0);
            if i > 0 {
                m.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut b: Vec<f64> =
            (0..n).map(|i| (0..n).map(|j| m.get(i, j) * x[j]).sum()).collect();
        assert!(m.solve_in_place(&mut b));
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn wider_band_solve() {
        let n = 9;
        let bw = 3;
        let mut m = BandedMatrix::zeros(n, bw);
        for i in 0..n {
            m.add(i, i, 10.0);
            for d in 1..=bw {
                if i >= d {
                    m.add(i, i - d, -1.0 / d as f64);
                }
                if i + d < n {
                    m.add(i, i + d, -0.5 / d as f64);
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.get(i, j) * x[j]).sum()).collect();
        assert!(m.solve_in_place(&mut b));
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut m = BandedMatrix::zeros(2, 1);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        assert!(!m.solve_in_place(&mut [1.0, 1.0]));
    }
}
