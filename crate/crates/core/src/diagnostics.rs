//! Checkable identities and inequalities: minimality, entropy inequality,
//! comparison, norm estimates and convergence rates.

use crate::grid::{Grid, GridFunction};
use crate::measure::{project_interior, project_measure, DiscreteMeasure, MeasureError, SampleMode};
use crate::operator::{OperatorError, OperatorFamily};
use crate::penalized::{PenaltyScheme, ReactionMeasure, SolveError};
use crate::problem::{tv_norm, BarrierPair, ProblemSpec, SpaceTimeFn};
use crate::vi::solve_vi;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("reaction measure charges slice {slice}, node {node} where the barrier is infinite")]
    InfiniteBarrierUnderMeasure { slice: usize, node: usize },
    #[error("all gaps are below 1e-12; no rate can be fitted")]
    DegenerateFit,
    #[error("need at least 3 rows with positive gaps, got {0}")]
    TooFewRows(usize),
    #[error("dominance not satisfied: {0}")]
    DominanceNotSatisfied(String),
    #[error("grid functions do not match the grid")]
    GridMismatch,
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: f64,
    pub sup_gap_to_oracle: f64,
    pub tv_pos: f64,
    pub tv_neg: f64,
    pub minimality_pos: f64,
    pub minimality_neg: f64,
    /// Nodes that moved against the expected direction since the previous row.
    pub monotonicity_violations: usize,
    pub worst_monotonicity_violation: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub scheme: PenaltyScheme,
    pub direction: Option<Direction>,
    pub rows: Vec<ConvergenceRow>,
    pub oracle_tv_pos: f64,
    pub oracle_tv_neg: f64,
    pub rate: Option<f64>,
}

impl ConvergenceReport {
    pub fn total_monotonicity_violations(&self) -> usize {
        self.rows.iter().map(|r| r.monotonicity_violations).sum()
    }

    pub fn gaps_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sup_gap_to_oracle <= w[0].sup_gap_to_oracle)
    }

    pub fn max_tv(&self) -> f64 {
        self.rows.iter().map(|r| r.tv_pos + r.tv_neg).fold(0.0, f64::max)
    }
}

/// Least-squares slope of `log(gap)` against `log(n)`.
pub fn rate_fit(report: &ConvergenceReport) -> Result<f64, DiagnosticsError> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.sup_gap_to_oracle > 1e-12 && r.n > 0.0)
        .map(|r| (r.n.ln(), r.sup_gap_to_oracle.ln()))
        .collect();
    if pts.is_empty() {
        return Err(DiagnosticsError::DegenerateFit);
    }
    if pts.len() < 3 {
        return Err(DiagnosticsError::TooFewRows(pts.len()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(DiagnosticsError::DegenerateFit);
    }
    Ok(sxy / sxx)
}

fn barrier_slice(h: &Option<SpaceTimeFn>, grid: &Grid, k: usize, mode: SampleMode) -> Result<Option<Vec<f64>>, MeasureError> {
    h.as_ref().map(|h| project_interior(|t, x| h(t, x), grid, grid.time(k), mode)).transpose()
}

/// `r_pos = sum (u - h1) nu_plus` and `r_neg = sum (h2 - u) nu_minus` over
/// densities (times cell volume and `dt`) and atoms (against `u(t_k-)`).
pub fn minimality_residual(
    u: &GridFunction,
    nu: &ReactionMeasure,
    barriers: &BarrierPair,
    grid: &Grid,
) -> Result<(f64, f64), DiagnosticsError> {
    if !u.grid().same_shape(grid) || !nu.grid().same_shape(grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let vol = grid.cell_volume();
    let (mut r_pos, mut r_neg) = (0.0, 0.0);
    for k in 0..=grid.nt() {
        let atom = nu.atom_at(k);
        let has_density = k < grid.nt();
        let charged_pos = (has_density && nu.pos(k).iter().any(|&v| v > 0.0)) || atom.is_some_and(|a| a.pos.iter().any(|&v| v > 0.0));
        let charged_neg = (has_density && nu.neg(k).iter().any(|&v| v > 0.0)) || atom.is_some_and(|a| a.neg.iter().any(|&v| v > 0.0));
        if !charged_pos && !charged_neg {
            continue;
        }
        let uk = u.interior(k);
        let h1 = barrier_slice(&barriers.lower, grid, k, SampleMode::LowerBarrier)?;
        let h2 = barrier_slice(&barriers.upper, grid, k, SampleMode::UpperBarrier)?;
        for i in 0..uk.len() {
            let mut p = 0.0;
            let mut q = 0.0;
            if has_density {
                p += nu.pos(k)[i] * grid.dt();
                q += nu.neg(k)[i] * grid.dt();
            }
            if let Some(a) = atom {
                p += a.pos[i];
                q += a.neg[i];
            }
            if p > 0.0 {
                let l = h1.as_ref().map_or(f64::NEG_INFINITY, |h| h[i]);
                if !l.is_finite() {
                    return Err(DiagnosticsError::InfiniteBarrierUnderMeasure { slice: k, node: i });
                }
                r_pos += (uk[i] - l) * p * vol;
            }
            if q > 0.0 {
                let h = h2.as_ref().map_or(f64::INFINITY, |h| h[i]);
                if !h.is_finite() {
                    return Err(DiagnosticsError::InfiniteBarrierUnderMeasure { slice: k, node: i });
                }
                r_neg += (h - uk[i]) * q * vol;
            }
        }
    }
    Ok((r_pos, r_neg))
}

/// Test function `eta` and truncation level `k` of the entropy inequality.
#[derive(Clone)]
pub struct EntropyTest {
    pub label: String,
    pub eta: SpaceTimeFn,
    pub k: f64,
}

impl std::fmt::Debug for EntropyTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EntropyTest({}, k={})", self.label, self.k)
    }
}

/// Fixed library of smooth test functions vanishing on the boundary, each
/// paired with the truncation levels 0.5, 1 and 2.
pub fn entropy_library(spec: &ProblemSpec) -> Vec<EntropyTest> {
    let l = spec.domain.lengths().to_vec();
    let horizon = spec.domain.horizon();
    let dim = spec.dim();
    let bump = move |x: &[f64], m: f64| -> f64 {
        let mut v = (m * std::f64::consts::PI * x[0] / l[0]).sin();
        if dim == 2 {
            v *= (std::f64::consts::PI * x[1] / l[1]).sin();
        }
        v
    };
    let bump = Arc::new(bump);
    let mut etas: Vec<(&str, SpaceTimeFn)> = vec![("zero", Arc::new(|_, _| 0.0))];
    let b = bump.clone();
    etas.push(("0.1*s1", Arc::new(move |_, x| 0.1 * b(x, 1.0))));
    let b = bump.clone();
    etas.push(("0.5*s1^2*t", Arc::new(move |t, x| 0.5 * b(x, 1.0).powi(2) * t / horizon)));
    let b = bump.clone();
    etas.push(("-0.2*s2*(1-t)", Arc::new(move |t, x| -0.2 * b(x, 2.0) * (1.0 - t / horizon))));
    let b = bump.clone();
    etas.push(("0.3*s1*cos(pi t)", Arc::new(move |t, x| 0.3 * b(x, 1.0) * (std::f64::consts::PI * t / horizon).cos())));
    let b = bump;
    etas.push(("-0.4*s3", Arc::new(move |_, x| -0.4 * b(x, 3.0))));
    let mut out = Vec::new();
    for (label, eta) in etas {
        for k in [0.5, 1.0, 2.0] {
            out.push(EntropyTest { label: label.to_string(), eta: eta.clone(), k });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyResult {
    /// Smallest margin `rhs - lhs` over the library.
    pub worst_margin: f64,
    pub worst_test: String,
    pub margins: Vec<(String, f64, f64)>,
}

/// Solver tolerance of the entropy margin.
pub const ENTROPY_TOL: f64 = 1e-8;

fn truncate(s: f64, k: f64) -> f64 {
    s.clamp(-k, k)
}

fn theta(s: f64, k: f64) -> f64 {
    if s.abs() <= k {
        0.5 * s * s
    } else {
        k * s.abs() - 0.5 * k * k
    }
}

/// Discrete entropy inequality for `u` against each test in `tests`.
///
/// With `w_k = u_k - eta_k`, `T = T_k(w)`, `Theta` its primitive, and the
/// value before the jump `w~_k` on slices carrying atoms:
///
/// ```text
/// lhs = sum Theta(w~_0) - sum Theta(w_nt) + sum_{atoms 0<j<nt} [Theta(w~_j) - Theta(w_j)]
///       - sum_k sum T(w~_k)(eta_{k+1} - eta_k) + sum_k dt <-A u~_k, T(w~_k)>
/// rhs = sum_k dt <f(t_k, u~_k) + g_k + nu_k, T(w~_k)>
/// ```
///
/// (spatial sums over interior nodes times the cell volume). For the
/// discrete solution `rhs - lhs >= 0` by convexity of `Theta`; the margin
/// `rhs - lhs` is returned per test.
pub fn entropy_residual(
    u: &GridFunction,
    nu: Option<&ReactionMeasure>,
    spec: &ProblemSpec,
    grid: &Grid,
    tests: &[EntropyTest],
) -> Result<EntropyResult, DiagnosticsError> {
    if !u.grid().same_shape(grid) || nu.is_some_and(|n| !n.grid().same_shape(grid)) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let nt = grid.nt();
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let dt = grid.dt();
    let ops = OperatorFamily::build(&spec.coeffs, grid)?;
    let mu = project_measure(&spec.measure, grid)?;
    let slices: Vec<Vec<f64>> = (0..=nt).map(|k| u.interior(k)).collect();
    // values before the jump on slices with atoms
    let pre: Vec<Vec<f64>> = (0..=nt)
        .map(|k| {
            let mut v = slices[k].clone();
            if k < nt {
                if let Some(a) = mu.atom_at(k) {
                    v.iter_mut().zip(&a.rho).for_each(|(x, r)| *x -= r);
                }
                if let Some(a) = nu.and_then(|n| n.atom_at(k)) {
                    v.iter_mut().zip(a.pos.iter().zip(&a.neg)).for_each(|(x, (p, q))| *x -= p - q);
                }
            }
            v
        })
        .collect();
    let coords: Vec<[f64; 2]> = (0..grid.n_interior()).map(|p| grid.interior_coords(p)).collect();
    // source terms F_k = f(t_k, u~_k) + g_k + nu_k
    let sources: Vec<Vec<f64>> = (0..nt)
        .map(|k| {
            let t = grid.time(k);
            (0..coords.len())
                .map(|i| {
                    let mut s = spec.driver.eval(t, &coords[i][..dim], pre[k][i]) + mu.density[k][i];
                    if let Some(n) = nu {
                        s += n.pos(k)[i] - n.neg(k)[i];
                    }
                    s
                })
                .collect()
        })
        .collect();
    let au: Vec<Vec<f64>> = (0..nt)
        .map(|k| {
            let mut out = vec![0.0; coords.len()];
            ops.at(k).apply(&pre[k], &mut out);
            out
        })
        .collect();

    let mut margins = Vec::with_capacity(tests.len());
    for test in tests {
        let eta: Vec<Vec<f64>> = (0..=nt)
            .map(|k| coords.iter().map(|x| (test.eta)(grid.time(k), &x[..dim])).collect())
            .collect();
        let kk = test.k;
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..coords.len() {
            lhs += theta(pre[0][i] - eta[0][i], kk) - theta(slices[nt][i] - eta[nt][i], kk);
        }
        for j in 1..nt {
            if pre[j] != slices[j] {
                for i in 0..coords.len() {
                    lhs += theta(pre[j][i] - eta[j][i], kk) - theta(slices[j][i] - eta[j][i], kk);
                }
            }
        }
        for k in 0..nt {
            for i in 0..coords.len() {
                let tw = truncate(pre[k][i] - eta[k][i], kk);
                lhs -= tw * (eta[k + 1][i] - eta[k][i]);
                lhs -= dt * au[k][i] * tw;
                rhs += dt * sources[k][i] * tw;
            }
        }
        let margin = (rhs - lhs) * vol;
        margins.push((format!("{} k={}", test.label, kk), kk, margin));
    }
    let (worst_test, worst_margin) = margins
        .iter()
        .map(|(l, _, m)| (l.clone(), *m))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_default();
    Ok(EntropyResult { worst_margin, worst_test, margins })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub violations: usize,
    /// `max(u_lo - u_hi)` over all nodes.
    pub worst_gap: f64,
}

/// Tolerance for `u_lo <= u_hi`.
pub const COMPARISON_TOL: f64 = 1e-10;

fn dominated(lo: &[f64], hi: &[f64], what: &str) -> Result<(), DiagnosticsError> {
    for (i, (a, b)) in lo.iter().zip(hi).enumerate() {
        if a > b {
            return Err(DiagnosticsError::DominanceNotSatisfied(format!("{what}: {a} > {b} at node {i}")));
        }
    }
    Ok(())
}

fn atoms_dominated(lo: &DiscreteMeasure, hi: &DiscreteMeasure, n: usize) -> Result<(), DiagnosticsError> {
    let zero = vec![0.0; n];
    let mut indices: Vec<usize> = lo.atoms.iter().chain(&hi.atoms).map(|a| a.index).collect();
    indices.sort_unstable();
    indices.dedup();
    for k in indices {
        let a = lo.atom_at(k).map_or(&zero, |a| &a.rho);
        let b = hi.atom_at(k).map_or(&zero, |a| &a.rho);
        dominated(a, b, &format!("atom on slice {k}"))?;
    }
    Ok(())
}

/// Checks nodewise dominance of the data, solves both problems with the
/// complementarity oracle and counts nodes with `u_lo > u_hi + 1e-10`.
pub fn comparison_trial(spec_lo: &ProblemSpec, spec_hi: &ProblemSpec, grid: &Grid) -> Result<ComparisonResult, DiagnosticsError> {
    let dim = grid.dim();
    let phi_lo = project_interior(|_, x| spec_lo.terminal_at(x), grid, grid.horizon(), SampleMode::Data)?;
    let phi_hi = project_interior(|_, x| spec_hi.terminal_at(x), grid, grid.horizon(), SampleMode::Data)?;
    dominated(&phi_lo, &phi_hi, "terminal")?;
    let mu_lo = project_measure(&spec_lo.measure, grid)?;
    let mu_hi = project_measure(&spec_hi.measure, grid)?;
    for k in 0..grid.nt() {
        dominated(&mu_lo.density[k], &mu_hi.density[k], &format!("density on step {k}"))?;
    }
    atoms_dominated(&mu_lo, &mu_hi, grid.n_interior())?;
    for k in 0..=grid.nt() {
        let l = |b: &BarrierPair| barrier_slice(&b.lower, grid, k, SampleMode::LowerBarrier);
        let h = |b: &BarrierPair| barrier_slice(&b.upper, grid, k, SampleMode::UpperBarrier);
        let n = grid.n_interior();
        let lo1 = l(&spec_lo.barriers)?.unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
        let hi1 = l(&spec_hi.barriers)?.unwrap_or_else(|| vec![f64::NEG_INFINITY; n]);
        dominated(&lo1, &hi1, &format!("lower barrier on slice {k}"))?;
        let lo2 = h(&spec_lo.barriers)?.unwrap_or_else(|| vec![f64::INFINITY; n]);
        let hi2 = h(&spec_hi.barriers)?.unwrap_or_else(|| vec![f64::INFINITY; n]);
        dominated(&lo2, &hi2, &format!("upper barrier on slice {k}"))?;
    }
    // the driver must be common: compare on a deterministic sample
    for k in [0, grid.nt() / 2, grid.nt()] {
        let t = grid.time(k);
        for p in (0..grid.n_interior()).step_by((grid.n_interior() / 16).max(1)) {
            let x = grid.interior_coords(p);
            for y in [-3.0, -0.5, 0.0, 0.7, 2.5] {
                let a = spec_lo.driver.eval(t, &x[..dim], y);
                let b = spec_hi.driver.eval(t, &x[..dim], y);
                if a != b {
                    return Err(DiagnosticsError::DominanceNotSatisfied(format!(
                        "drivers differ at t={t}, x={:?}, y={y}: {a} vs {b}",
                        &x[..dim]
                    )));
                }
            }
        }
    }
    let lo = solve_vi(spec_lo, grid)?;
    let hi = solve_vi(spec_hi, grid)?;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in lo.u.slices().iter().zip(hi.u.slices()) {
        for (x, y) in a.iter().zip(b) {
            let gap = x - y;
            if gap > COMPARISON_TOL {
                violations += 1;
            }
            worst = worst.max(gap);
        }
    }
    Ok(ComparisonResult { violations, worst_gap: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Check {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
    /// True when `kappa <= 0`, where the constant 1 is asserted.
    pub asserted: bool,
}

/// Slack on the L1 estimate covering quadrature.
pub const L1_SLACK: f64 = 1.02;

/// `sum |f(t_k, x, u_k)| vol dt` against `||phi||_1 + ||f(.,.,0)||_1 +
/// ||mu||_TV (+ ||nu||_TV)`, with constant 1 for `kappa <= 0` and
/// `exp(kappa T)` (report only) otherwise.
pub fn l1_estimate_check(spec: &ProblemSpec, grid: &Grid, u: &GridFunction, nu: Option<&ReactionMeasure>) -> Result<L1Check, DiagnosticsError> {
    if !u.grid().same_shape(grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let dim = grid.dim();
    let w = grid.cell_volume() * grid.dt();
    let mut lhs = 0.0;
    if !spec.driver.is_zero() {
        for k in 0..grid.nt() {
            let t = grid.time(k);
            let uk = u.interior(k);
            for (p, &v) in uk.iter().enumerate() {
                let x = grid.interior_coords(p);
                lhs += spec.driver.eval(t, &x[..dim], v).abs() * w;
            }
        }
    }
    let phi: f64 = (0..grid.n_nodes())
        .map(|i| spec.terminal_at(&grid.node_coords(i)[..dim]).abs() * grid.dual_volume(i))
        .sum();
    let mut rhs = phi + spec.driver.f_zero_norm(grid) + tv_norm(&spec.measure, grid);
    if let Some(n) = nu {
        rhs += n.tv();
    }
    let kappa = spec.driver.kappa();
    let asserted = kappa <= 0.0;
    let constant = if asserted { 1.0 } else { (kappa * grid.horizon()).exp() };
    Ok(L1Check { lhs, rhs, constant, pass: lhs <= L1_SLACK * constant * rhs, asserted })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationEnergy {
    pub k: f64,
    pub energy: f64,
    pub bound: f64,
    pub pass: bool,
    /// Zero driver and nonnegative data: the setting of the bound.
    pub applicable: bool,
}

/// `sum_k dt sum_faces a_f |grad T_k(u)|^2 vol` against
/// `4k (||phi||_1 + ||mu||_TV) * 1.1`. Failures are warnings.
pub fn truncation_energy_check(spec: &ProblemSpec, grid: &Grid, u: &GridFunction, k: f64) -> Result<TruncationEnergy, DiagnosticsError> {
    if !u.grid().same_shape(grid) {
        return Err(DiagnosticsError::GridMismatch);
    }
    let dim = grid.dim();
    let ops = OperatorFamily::build(&spec.coeffs, grid)?;
    let mut energy = 0.0;
    for s in 0..grid.nt() {
        let tk: Vec<f64> = u.interior(s).iter().map(|&v| truncate(v, k)).collect();
        let mut at = vec![0.0; tk.len()];
        ops.at(s).apply(&tk, &mut at);
        // -<A T, T> carries the factor 1/2 of the operator
        energy += -2.0 * at.iter().zip(&tk).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume() * grid.dt();
    }
    let phi_vals: Vec<f64> = (0..grid.n_nodes()).map(|i| spec.terminal_at(&grid.node_coords(i)[..dim])).collect();
    let phi: f64 = phi_vals.iter().enumerate().map(|(i, v)| v.abs() * grid.dual_volume(i)).sum();
    let mu = project_measure(&spec.measure, grid)?;
    let nonneg = phi_vals.iter().all(|&v| v >= 0.0)
        && mu.density.iter().flatten().all(|&v| v >= 0.0)
        && mu.atoms.iter().flat_map(|a| &a.rho).all(|&v| v >= 0.0);
    let bound = 4.0 * k * (phi + tv_norm(&spec.measure, grid)) * 1.1;
    Ok(TruncationEnergy { k, energy, bound, pass: energy <= bound, applicable: spec.driver.is_zero() && nonneg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalized::{solve_cauchy_dirichlet, PenaltyScheme};
    use crate::problem::{Driver, SpaceTimeDomain};
    use std::f64::consts::PI;

    fn row(n: f64, gap: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            sup_gap_to_oracle: gap,
            tv_pos: 0.0,
            tv_neg: 0.0,
            minimality_pos: 0.0,
            minimality_neg: 0.0,
            monotonicity_violations: 0,
            worst_monotonicity_violation: 0.0,
            newton_iterations: 0,
        }
    }

    fn report(rows: Vec<ConvergenceRow>) -> ConvergenceReport {
        ConvergenceReport {
            problem: "synthetic".into(),
            scheme: PenaltyScheme::Symmetric,
            direction: None,
            rows,
            oracle_tv_pos: 0.0,
            oracle_tv_neg: 0.0,
            rate: None,
        }
    }

    #[test]
    fn rate_of_inverse_n() {
        let r = report([1.0, 4.0, 16.0, 64.0].iter().map(|&n| row(n, 0.3 / n)).collect());
        assert!((rate_fit(&r).unwrap() + 1.0).abs() < 1e-12);
        let c = report([1.0, 4.0, 16.0].iter().map(|&n| row(n, 0.01)).collect());
        assert!(rate_fit(&c).unwrap().abs() < 1e-12);
        let z = report([1.0, 4.0, 16.0].iter().map(|&n| row(n, 0.0)).collect());
        assert_eq!(rate_fit(&z), Err(DiagnosticsError::DegenerateFit));
    }

    fn heat() -> ProblemSpec {
        ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()))
    }

    #[test]
    fn zero_measure_has_zero_minimality() {
        let spec = heat();
        let g = Grid::uniform(&spec.domain, 7, 4).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let r = minimality_residual(&u, &ReactionMeasure::zero(&g), &spec.barriers, &g).unwrap();
        assert_eq!(r, (0.0, 0.0));
    }

    #[test]
    fn entropy_margins() {
        let spec = heat();
        let g = Grid::uniform(&spec.domain, 31, 64).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let lib = entropy_library(&spec);
        let r = entropy_residual(&u, None, &spec, &g, &lib).unwrap();
        assert!(r.worst_margin >= -ENTROPY_TOL, "{r:?}");
        let zero = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|_: &[f64]| 0.0));
        let u0 = GridFunction::zeros(&g);
        let r0 = entropy_residual(&u0, None, &zero, &g, &lib[..3]).unwrap();
        assert_eq!(r0.worst_margin, 0.0);
    }

    #[test]
    fn entropy_shift_invariance_beyond_window() {
        let spec = heat();
        let g = Grid::uniform(&spec.domain, 15, 16).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let shifted = |c: f64| EntropyTest { label: "shift".into(), eta: Arc::new(move |_, x| c + 0.1 * (PI * x[0]).sin()), k: 0.5 };
        let a = entropy_residual(&u, None, &spec, &g, &[shifted(10.0)]).unwrap().worst_margin;
        let b = entropy_residual(&u, None, &spec, &g, &[shifted(20.0)]).unwrap().worst_margin;
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn l1_branches() {
        let mut spec = heat();
        spec.driver = Driver::linear(-1.0);
        let g = Grid::uniform(&spec.domain, 31, 64).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let c = l1_estimate_check(&spec, &g, &u, None).unwrap();
        assert!(c.asserted && c.pass && c.constant == 1.0);
        spec.driver = Driver::linear(1.0);
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let c = l1_estimate_check(&spec, &g, &u, None).unwrap();
        assert!(!c.asserted && (c.constant - 1f64.exp()).abs() < 1e-15);
        let zero = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|_: &[f64]| 0.0));
        let z = l1_estimate_check(&zero, &g, &GridFunction::zeros(&g), None).unwrap();
        assert_eq!((z.lhs, z.rhs, z.pass), (0.0, 0.0, true));
    }

    #[test]
    fn truncation_energy_bound() {
        let spec = heat();
        let g = Grid::uniform(&spec.domain, 31, 64).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        for k in [0.1, 0.5, 1.0] {
            let e = truncation_energy_check(&spec, &g, &u, k).unwrap();
            assert!(e.applicable && e.pass, "{e:?}");
        }
    }

    #[test]
    fn comparison_identical_and_shifted() {
        let spec = heat();
        let g = Grid::uniform(&spec.domain, 15, 16).unwrap();
        assert_eq!(comparison_trial(&spec, &spec, &g).unwrap().violations, 0);
        let mut hi = heat();
        hi.terminal = Arc::new(|x: &[f64]| (PI * x[0]).sin() + 1.0);
        assert_eq!(comparison_trial(&spec, &hi, &g).unwrap().violations, 0);
        assert!(matches!(comparison_trial(&hi, &spec, &g), Err(DiagnosticsError::DominanceNotSatisfied(_))));
    }
}
