//! One implicit time slice: find `u` with
//!
//! ```text
//! R(u) = u/dt - A u - b + N(u),     h1 <= u <= h2,
//! R_i >= 0 where u_i = h1_i,  R_i <= 0 where u_i = h2_i,  R_i = 0 elsewhere,
//! ```
//!
//! where `N` is a nodewise nondecreasing nonlinearity (minus the driver, plus
//! penalty terms). Two solvers are provided: semismooth Newton on
//! `min(max(R, c(u - h2)), c(u - h1)) = 0` (policy iteration when `N` is
//! linear), and projected Gauss-Seidel.

use crate::linalg::BandedMatrix;
use crate::operator::SpatialOperator;

/// Value and derivative of the nodal nonlinearity `N_i(u_i)`.
pub type Reaction<'a> = &'a (dyn Fn(usize, f64) -> (f64, f64) + Sync);

#[derive(Clone, Copy)]
pub struct SliceSystem<'a> {
    pub op: &'a SpatialOperator,
    pub inv_dt: f64,
    pub rhs: &'a [f64],
    pub reaction: Option<Reaction<'a>>,
    pub lower: Option<&'a [f64]>,
    pub upper: Option<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceFailure {
    pub node: usize,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, max_halvings: 30 }
    }
}

impl<'a> SliceSystem<'a> {
    pub fn n(&self) -> usize {
        self.op.size()
    }

    fn lower_at(&self, i: usize) -> f64 {
        self.lower.map_or(f64::NEG_INFINITY, |l| l[i])
    }

    fn upper_at(&self, i: usize) -> f64 {
        self.upper.map_or(f64::INFINITY, |h| h[i])
    }

    /// Diagonal of `I/dt - A`.
    fn scale(&self, i: usize) -> f64 {
        self.inv_dt - self.op.diag()[i]
    }

    /// Unconstrained residual `R_i(u)`.
    pub fn residual_at(&self, i: usize, u: &[f64]) -> f64 {
        let mut r = self.inv_dt * u[i] - self.op.apply_row(i, u) - self.rhs[i];
        if let Some(n) = self.reaction {
            r += n(i, u[i]).0;
        }
        r
    }

    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.residual_at(i, u)).collect()
    }

    fn branch_and_phi(&self, i: usize, u: f64, r: f64) -> (Branch, f64) {
        let c = self.scale(i);
        let h1 = self.lower_at(i);
        let h2 = self.upper_at(i);
        let (mut branch, mut inner) = (Branch::Free, r);
        if h2.is_finite() {
            let up = c * (u - h2);
            if up >= r {
                branch = Branch::Upper;
                inner = up;
            }
        }
        if h1.is_finite() {
            let lo = c * (u - h1);
            if lo <= inner {
                return (Branch::Lower, lo);
            }
        }
        (branch, inner)
    }

    /// Max-norm of the complementarity function.
    pub fn merit(&self, u: &[f64]) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for i in 0..self.n() {
            let r = self.residual_at(i, u);
            let (_, phi) = self.branch_and_phi(i, u[i], r);
            let a = if phi.is_nan() { f64::INFINITY } else { phi.abs() };
            if a > worst.0 {
                worst = (a, i);
            }
        }
        worst
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        let h1 = self.lower_at(i);
        let h2 = self.upper_at(i);
        if v < h1 {
            h1
        } else if v > h2 {
            h2
        } else {
            v
        }
    }

    /// Semismooth Newton from `u` (overwritten with the solution).
    pub fn newton(&self, u: &mut [f64], opts: &NewtonOptions) -> Result<NewtonOutcome, SliceFailure> {
        let n = self.n();
        for i in 0..n {
            u[i] = self.clamp(i, u[i]);
        }
        let bw = self.op.bandwidth();
        let mut mat = BandedMatrix::zeros(n, bw);
        let mut step = vec![0.0; n];
        let mut branches = vec![Branch::Free; n];
        let mut trial = vec![0.0; n];
        let tol_for = |scale: f64| opts.tol.max(16.0 * f64::EPSILON * scale);
        let mut iterations = 0;
        loop {
            // branch selection and right-hand side
            let mut merit = 0.0f64;
            let mut worst_node = 0;
            let mut size = 0.0f64;
            for i in 0..n {
                let r = self.residual_at(i, u);
                let (b, phi) = self.branch_and_phi(i, u[i], r);
                branches[i] = b;
                let a = if phi.is_nan() { f64::INFINITY } else { phi.abs() };
                if a > merit {
                    merit = a;
                    worst_node = i;
                }
                size = size.max(self.scale(i) * u[i].abs()).max(self.rhs[i].abs());
                step[i] = match b {
                    Branch::Free => -r,
                    Branch::Lower => self.lower_at(i) - u[i],
                    Branch::Upper => self.upper_at(i) - u[i],
                };
            }
            if merit <= tol_for(size) {
                return Ok(NewtonOutcome { iterations, residual: merit });
            }
            if iterations >= opts.max_iter || !merit.is_finite() {
                return Err(SliceFailure { node: worst_node, residual: merit, iterations });
            }
            iterations += 1;
            for i in 0..n {
                mat.clear_row(i);
                match branches[i] {
                    Branch::Free => {
                        for (j, a) in self.op.row(i) {
                            mat.add(i, j, -a);
                        }
                        let mut d = self.inv_dt;
                        if let Some(nl) = self.reaction {
                            d += nl(i, u[i]).1;
                        }
                        mat.add(i, i, d);
                    }
                    _ => mat.add(i, i, 1.0),
                }
            }
            if !mat.solve_in_place(&mut step) {
                return Err(SliceFailure { node: worst_node, residual: merit, iterations });
            }
            // damped update; a full step is taken if no halving helps
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                for i in 0..n {
                    trial[i] = if t == 1.0 && branches[i] != Branch::Free {
                        if branches[i] == Branch::Lower {
                            self.lower_at(i)
                        } else {
                            self.upper_at(i)
                        }
                    } else {
                        u[i] + t * step[i]
                    };
                    trial[i] = self.clamp(i, trial[i]);
                }
                if self.merit(&trial).0 < merit {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                for i in 0..n {
                    trial[i] = match branches[i] {
                        Branch::Lower => self.lower_at(i),
                        Branch::Upper => self.upper_at(i),
                        Branch::Free => self.clamp(i, u[i] + step[i]),
                    };
                }
            }
            u.copy_from_slice(&trial);
        }
    }

    /// Projected Gauss-Seidel sweeps until the largest update is `<= tol`.
    ///
    /// Every `check_every` sweeps the merit is compared with its previous
    /// value; if it fell by less than `stall_reduction` (relative) the
    /// iteration is declared stalled.
    pub fn projected_gauss_seidel(&self, u: &mut [f64], opts: &PgsOptions) -> PgsOutcome {
        let n = self.n();
        for i in 0..n {
            u[i] = self.clamp(i, u[i]);
        }
        let mut last_merit = self.merit(u).0;
        let mut sweeps = 0;
        loop {
            let mut max_update = 0.0f64;
            for i in 0..n {
                let mut off = 0.0;
                let mut a_ii = 0.0;
                for (j, a) in self.op.row(i) {
                    if j == i {
                        a_ii = a;
                    } else {
                        off += a * u[j];
                    }
                }
                let c = self.inv_dt - a_ii;
                let s = self.rhs[i] + off;
                let mut v = match self.reaction {
                    None => s / c,
                    Some(nl) => {
                        let mut v = u[i];
                        for _ in 0..30 {
                            let (val, der) = nl(i, v);
                            let f = c * v + val - s;
                            let dv = f / (c + der);
                            v -= dv;
                            if dv.abs() <= 1e-15 * (1.0 + v.abs()) {
                                break;
                            }
                        }
                        v
                    }
                };
                v = self.clamp(i, v);
                max_update = max_update.max((v - u[i]).abs());
                u[i] = v;
            }
            sweeps += 1;
            if max_update <= opts.tol {
                return PgsOutcome { sweeps, stalled: false, converged: true };
            }
            if sweeps % opts.check_every == 0 {
                let m = self.merit(u).0;
                if m > (1.0 - opts.stall_reduction) * last_merit {
                    return PgsOutcome { sweeps, stalled: true, converged: false };
                }
                last_merit = m;
            }
            if sweeps >= opts.max_sweeps {
                return PgsOutcome { sweeps, stalled: false, converged: false };
            }
        }
    }

    /// Nodes where `u` sits on a barrier (within `tol`).
    pub fn active_sets(&self, u: &[f64], tol: f64) -> (Vec<bool>, Vec<bool>) {
        let lo = (0..self.n()).map(|i| self.lower_at(i).is_finite() && u[i] - self.lower_at(i) <= tol).collect();
        let hi = (0..self.n()).map(|i| self.upper_at(i).is_finite() && self.upper_at(i) - u[i] <= tol).collect();
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PgsOptions {
    pub tol: f64,
    pub check_every: usize,
    pub stall_reduction: f64,
    pub max_sweeps: usize,
}

impl Default for PgsOptions {
    fn default() -> Self {
        PgsOptions { tol: 1e-10, check_every: 1000, stall_reduction: 1e-2, max_sweeps: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgsOutcome {
    pub sweeps: usize,
    pub stalled: bool,
    pub converged: bool,
}
