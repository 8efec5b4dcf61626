//! Finite-difference assembly of `A_t u = 1/2 sum_ij d_j(a_ij d_i u)` with
//! homogeneous Dirichlet conditions.
//!
//! Diagonal entries of `a` are averaged harmonically onto cell faces, which
//! keeps flux continuity for discontinuous coefficients and gives the
//! three-point (1D) or five-point (2D) M-matrix stencil. The off-diagonal
//! `a_12` in 2D is discretized by centered differences; that part is not
//! monotone in general and the operator records a warning when it is used.

use crate::grid::Grid;
use crate::problem::CoefficientField;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("face coefficient {value} <= 0 between nodes {left} and {right} (axis {axis})")]
    NonEllipticAtNode { axis: usize, left: usize, right: usize, value: f64 },
}

/// Sparse `A_t` restricted to interior unknowns, in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    /// Harmonic-mean face coefficients per axis (without the factor 1/2).
    /// Axis 0 faces are indexed `i + j * (nx0 + 1)` for the face between
    /// node columns `i` and `i + 1` on interior row `j`; axis 1 analogously.
    faces: [Vec<f64>; 2],
    bandwidth: usize,
    warnings: Vec<String>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return a.min(b);
    }
    2.0 * a * b / (a + b)
}

impl SpatialOperator {
    pub fn size(&self) -> usize {
        self.n
    }
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
    pub fn face_coefficients(&self, axis: usize) -> &[f64] {
        &self.faces[axis]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.cols[p], self.vals[p]))
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yi = s;
        }
    }

    /// `(A x)_i`.
    pub fn apply_row(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in self.row_ptr[i]..self.row_ptr[i + 1] {
            s += self.vals[p] * x[self.cols[p]];
        }
        s
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        m
    }
}

/// Assembles `A_t` on `grid` at time `t`.
pub fn build_operator(coeffs: &CoefficientField, grid: &Grid, t: f64) -> Result<SpatialOperator, OperatorError> {
    let dim = grid.dim();
    let n = grid.n_interior();
    // nodal coefficients on every node, including the boundary
    let nodal: Vec<_> = (0..grid.n_nodes())
        .map(|i| {
            let x = grid.node_coords(i);
            coeffs.eval(t, &x[..dim])
        })
        .collect();

    let nx0 = grid.nx()[0];
    let nx1 = if dim == 2 { grid.nx()[1] } else { 1 };
    let mut faces = [Vec::new(), Vec::new()];
    // axis 0 faces: i in 0..=nx0, rows j in 1..=nx1 (j = 0 in 1D)
    for jr in 0..nx1 {
        let j = if dim == 2 { jr + 1 } else { 0 };
        for i in 0..=nx0 {
            let l = grid.node_index([i, j]);
            let r = grid.node_index([i + 1, j]);
            let v = harmonic(nodal[l].0[0][0], nodal[r].0[0][0]);
            if !(v > 0.0) {
                return Err(OperatorError::NonEllipticAtNode { axis: 0, left: l, right: r, value: v });
            }
            faces[0].push(v);
        }
    }
    if dim == 2 {
        for j in 0..=nx1 {
            for ir in 0..nx0 {
                let i = ir + 1;
                let l = grid.node_index([i, j]);
                let r = grid.node_index([i, j + 1]);
                let v = harmonic(nodal[l].0[1][1], nodal[r].0[1][1]);
                if !(v > 0.0) {
                    return Err(OperatorError::NonEllipticAtNode { axis: 1, left: l, right: r, value: v });
                }
                faces[1].push(v);
            }
        }
    }

    let h = grid.h();
    let cross = dim == 2 && nodal.iter().any(|a| a.0[0][1] != 0.0 || a.0[1][0] != 0.0);
    let mut warnings = Vec::new();
    if cross {
        warnings.push("off-diagonal coefficients discretized by centered differences; M-matrix property not guaranteed".into());
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = vec![0.0; n];
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(9);
    for p in 0..n {
        entries.clear();
        let idx = grid.interior_to_node(p);
        let [i, j] = grid.node_ij(idx);
        let push = |ii: usize, jj: usize, w: f64, entries: &mut Vec<(usize, f64)>| {
            let q = grid.node_to_interior(grid.node_index([ii, jj]));
            if let Some(q) = q {
                if let Some(e) = entries.iter_mut().find(|e| e.0 == q) {
                    e.1 += w;
                } else {
                    entries.push((q, w));
                }
            }
        };
        // axis 0
        let jr = if dim == 2 { j - 1 } else { 0 };
        let west = faces[0][(i - 1) + jr * (nx0 + 1)];
        let east = faces[0][i + jr * (nx0 + 1)];
        let s0 = 0.5 / (h[0] * h[0]);
        let mut d = -(west + east) * s0;
        push(i - 1, j, west * s0, &mut entries);
        push(i + 1, j, east * s0, &mut entries);
        if dim == 2 {
            let south = faces[1][(i - 1) + (j - 1) * nx0];
            let north = faces[1][(i - 1) + j * nx0];
            let s1 = 0.5 / (h[1] * h[1]);
            d -= (south + north) * s1;
            push(i, j - 1, south * s1, &mut entries);
            push(i, j + 1, north * s1, &mut entries);
            if cross {
                // 1/2 [d_x(a12 d_y u) + d_y(a21 d_x u)], centered
                let c = 0.5 / (4.0 * h[0] * h[1]);
                let a12 = |ii: usize, jj: usize| nodal[grid.node_index([ii, jj])].0[0][1];
                let a21 = |ii: usize, jj: usize| nodal[grid.node_index([ii, jj])].0[1][0];
                let (e, w) = (a12(i + 1, j), a12(i - 1, j));
                push(i + 1, j + 1, c * e, &mut entries);
                push(i + 1, j - 1, -c * e, &mut entries);
                push(i - 1, j + 1, -c * w, &mut entries);
                push(i - 1, j - 1, c * w, &mut entries);
                let (nn, ss) = (a21(i, j + 1), a21(i, j - 1));
                push(i + 1, j + 1, c * nn, &mut entries);
                push(i - 1, j + 1, -c * nn, &mut entries);
                push(i + 1, j - 1, -c * ss, &mut entries);
                push(i - 1, j - 1, c * ss, &mut entries);
            }
        }
        diag[p] = d;
        entries.push((p, d));
        entries.sort_by_key(|e| e.0);
        for &(q, w) in entries.iter() {
            cols.push(q);
            vals.push(w);
        }
        row_ptr.push(cols.len());
    }
    let bandwidth = match (dim, cross) {
        (1, _) => 1,
        (_, false) => nx0,
        (_, true) => nx0 + 1,
    };
    Ok(SpatialOperator { n, row_ptr, cols, vals, diag, faces, bandwidth, warnings })
}

/// Operators for every time slice, shared when the coefficients do not
/// depend on time.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    ops: Vec<SpatialOperator>,
    shared: bool,
}

impl OperatorFamily {
    pub fn build(coeffs: &CoefficientField, grid: &Grid) -> Result<Self, OperatorError> {
        if coeffs.is_time_dependent() {
            let ops = (0..=grid.nt()).map(|k| build_operator(coeffs, grid, grid.time(k))).collect::<Result<_, _>>()?;
            Ok(OperatorFamily { ops, shared: false })
        } else {
            Ok(OperatorFamily { ops: vec![build_operator(coeffs, grid, 0.0)?], shared: true })
        }
    }

    pub fn at(&self, k: usize) -> &SpatialOperator {
        if self.shared {
            &self.ops[0]
        } else {
            &self.ops[k]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{SpaceTimeDomain, Smoothness, Tensor};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid1(nx: usize) -> Grid {
        Grid::uniform(&SpaceTimeDomain::unit_interval(1.0), nx, 4).unwrap()
    }

    #[test]
    fn constant_coefficient_row_carries_half_factor() {
        let op = build_operator(&CoefficientField::identity(), &grid1(3), 0.0).unwrap();
        // h = 0.25 for nx = 3; rows are 1/2 [1, -2, 1] / h^2
        let g = grid1(3);
        assert_eq!(g.h()[0], 0.25);
        assert_eq!(op.to_dense()[1], vec![8.0, -16.0, 8.0]);
        let g = Grid::uniform(&SpaceTimeDomain::new(1, &[2.0], 1.0).unwrap(), 3, 1).unwrap();
        assert_eq!(g.h()[0], 0.5);
        let op = build_operator(&CoefficientField::identity(), &g, 0.0).unwrap();
        assert_eq!(op.to_dense()[1], vec![2.0, -4.0, 2.0]);
    }

    #[test]
    fn harmonic_face_average() {
        assert!((harmonic(1.0, 4.0) - 1.6).abs() < 1e-15);
        let coeffs = CoefficientField::new(
            Arc::new(|_, x: &[f64]| Tensor::scalar(if x[0] < 0.5 { 1.0 } else { 4.0 })),
            4.0,
            Smoothness::Measurable,
            false,
        )
        .unwrap();
        let g = grid1(3); // nodes 0, .25, .5, .75, 1
        let op = build_operator(&coeffs, &g, 0.0).unwrap();
        // face between x=0.25 (a=1) and x=0.5 (a=4)
        assert!((op.face_coefficients(0)[1] - 1.6).abs() < 1e-15);
        assert!((op.get(0, 1) - 0.5 * 1.6 / 0.0625).abs() < 1e-12);
    }

    #[test]
    fn five_point_stencil_in_2d() {
        let d = SpaceTimeDomain::new(2, &[2.0, 2.0], 1.0).unwrap();
        let g = Grid::uniform(&d, 3, 1).unwrap();
        let op = build_operator(&CoefficientField::identity(), &g, 0.0).unwrap();
        let center = 4; // interior (1,1) of 3x3
        let row: Vec<(usize, f64)> = op.row(center).collect();
        assert_eq!(row, vec![(1, 2.0), (3, 2.0), (4, -8.0), (5, 2.0), (7, 2.0)]);
        assert!(op.is_symmetric());
        assert!(op.warnings().is_empty());
    }

    #[test]
    fn discrete_sine_is_an_eigenvector() {
        let c = 2.5;
        let coeffs = CoefficientField::constant(Tensor::scalar(c), 2.5).unwrap();
        let g = grid1(31);
        let op = build_operator(&coeffs, &g, 0.0).unwrap();
        let h = g.h()[0];
        for k in 1..5 {
            let v: Vec<f64> = (0..31).map(|p| (PI * k as f64 * g.interior_coords(p)[0]).sin()).collect();
            let mut av = vec![0.0; 31];
            op.apply(&v, &mut av);
            let lam = -(c / 2.0) * (4.0 / (h * h)) * (PI * k as f64 * h / 2.0).sin().powi(2);
            for p in 0..31 {
                assert!((av[p] - lam * v[p]).abs() < 1e-12 * lam.abs(), "k={k} p={p}");
            }
        }
    }

    #[test]
    fn m_matrix_sign_pattern_and_row_sums() {
        let coeffs = CoefficientField::new(
            Arc::new(|_, x: &[f64]| Tensor::scalar(1.0 + 0.5 * (PI * x[0]).sin())),
            2.0,
            Smoothness::C1,
            false,
        )
        .unwrap();
        let g = grid1(20);
        let op = build_operator(&coeffs, &g, 0.0).unwrap();
        for i in 0..op.size() {
            let mut sum = 0.0;
            for (j, v) in op.row(i) {
                if i == j {
                    assert!(v < 0.0);
                } else {
                    assert!(v >= 0.0);
                }
                sum += v;
            }
            if i == 0 || i + 1 == op.size() {
                assert!(sum < 0.0);
            } else {
                assert!(sum.abs() < 1e-9);
            }
        }
        assert!(op.is_symmetric());
    }

    #[test]
    fn cross_terms_are_symmetric_and_flagged() {
        let d = SpaceTimeDomain::new(2, &[1.0, 1.0], 1.0).unwrap();
        let g = Grid::uniform(&d, 5, 1).unwrap();
        let coeffs = CoefficientField::new(
            Arc::new(|_, x: &[f64]| {
                let off = 0.2 * x[0] * x[1];
                Tensor([[1.0, off], [off, 1.5]])
            }),
            2.0,
            Smoothness::C1,
            false,
        )
        .unwrap();
        let op = build_operator(&coeffs, &g, 0.0).unwrap();
        assert_eq!(op.warnings().len(), 1);
        assert!(op.is_symmetric());
    }

    #[test]
    fn zero_coefficient_is_rejected() {
        let coeffs =
            CoefficientField::new(Arc::new(|_, _| Tensor::scalar(0.0)), 1.0, Smoothness::Measurable, false).unwrap();
        assert!(matches!(build_operator(&coeffs, &grid1(4), 0.0), Err(OperatorError::NonEllipticAtNode { .. })));
    }
}
