//! Euler-Maruyama simulation of the diffusion generated by `A_t`, killed on
//! leaving `D`, and Monte Carlo evaluation of the Feynman-Kac functional
//!
//! ```text
//! u(s,x) = E[ phi(X_T) 1{no exit} + int_s^{T^exit} f(t, X_t, u(t, X_t)) dt
//!             + A^mu + A^nu ]
//! ```
//!
//! Each path owns an RNG stream derived from `(seed, path index)`, so results
//! do not depend on the number of worker threads.

use crate::grid::{Grid, GridFunction};
use crate::measure::{project_measure, MeasureError};
use crate::penalized::{check_grid, solve_cauchy_dirichlet, ReactionMeasure, SolveError};
use crate::problem::{CoefficientField, ProblemSpec, Smoothness, SpaceFn, Tensor};
use crate::vi::solve_vi;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("Monte Carlo needs C1 coefficients")]
    NonC1Coefficients,
    #[error("grid does not match the problem or the path bundle")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Finite-difference step for the drift.
pub const DRIFT_FD_STEP: f64 = 1e-5;
/// Discretization allowance in the z statistic.
pub const DEFAULT_DELTA: f64 = 2e-3;

/// `b_i = 1/2 sum_j d_j a_ij` by central differences.
pub fn drift(coeffs: &CoefficientField, t: f64, x: &[f64], dim: usize) -> [f64; 2] {
    let mut b = [0.0; 2];
    if coeffs.constant_value().is_some() {
        return b;
    }
    let h = DRIFT_FD_STEP;
    for j in 0..dim {
        let mut xp = [x[0], if dim == 2 { x[1] } else { 0.0 }];
        let mut xm = xp;
        xp[j] += h;
        xm[j] -= h;
        let ap = coeffs.eval(t, &xp[..dim]);
        let am = coeffs.eval(t, &xm[..dim]);
        for (i, bi) in b.iter_mut().enumerate().take(dim) {
            *bi += 0.5 * (ap.get(i, j) - am.get(i, j)) / (2.0 * h);
        }
    }
    b
}

/// Stepping core shared by stored and streaming simulation.
struct Stepper<'a> {
    coeffs: &'a CoefficientField,
    dim: usize,
    lengths: [f64; 2],
    sqrt_dt: f64,
    dt: f64,
    /// Constant `sigma * sqrt(dt)` when the coefficients are constant.
    constant_sigma: Option<Tensor>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ProblemSpec, dt: f64) -> Self {
        let dim = spec.dim();
        let mut lengths = [1.0; 2];
        lengths[..dim].copy_from_slice(spec.domain.lengths());
        let sqrt_dt = dt.sqrt();
        let constant_sigma = spec.coeffs.constant_value().map(|a| {
            let s = a.sqrt(dim);
            Tensor([[s.0[0][0] * sqrt_dt, s.0[0][1] * sqrt_dt], [s.0[1][0] * sqrt_dt, s.0[1][1] * sqrt_dt]])
        });
        Stepper { coeffs: &spec.coeffs, dim, lengths, sqrt_dt, dt, constant_sigma }
    }

    /// Advances `x` by one step; returns `false` if the new point left `D`.
    #[inline]
    fn step(&self, t: f64, x: &mut [f64; 2], rng: &mut ChaCha8Rng) -> bool {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = if self.dim == 2 { StandardNormal.sample(rng) } else { 0.0 };
        match &self.constant_sigma {
            Some(s) => {
                if self.dim == 1 {
                    x[0] += s.0[0][0] * z0;
                } else {
                    let d0 = s.0[0][0] * z0 + s.0[0][1] * z1;
                    let d1 = s.0[1][0] * z0 + s.0[1][1] * z1;
                    x[0] += d0;
                    x[1] += d1;
                }
            }
            None => {
                let a = self.coeffs.eval(t, &x[..self.dim]);
                let s = a.sqrt(self.dim);
                let b = drift(self.coeffs, t, &x[..self.dim], self.dim);
                if self.dim == 1 {
                    x[0] += b[0] * self.dt + s.0[0][0] * self.sqrt_dt * z0;
                } else {
                    let d0 = b[0] * self.dt + (s.0[0][0] * z0 + s.0[0][1] * z1) * self.sqrt_dt;
                    let d1 = b[1] * self.dt + (s.0[1][0] * z0 + s.0[1][1] * z1) * self.sqrt_dt;
                    x[0] += d0;
                    x[1] += d1;
                }
            }
        }
        (0..self.dim).all(|a| x[a] > 0.0 && x[a] < self.lengths[a])
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Number of steps and the step that lands exactly on `T`.
fn time_steps(horizon: f64, s: f64, dt_mc: f64) -> Result<(usize, f64), McError> {
    if !(dt_mc > 0.0 && dt_mc.is_finite()) {
        return Err(McError::InvalidParameter(format!("dt_mc must be positive, got {dt_mc}")));
    }
    if !(s >= 0.0 && s < horizon) {
        return Err(McError::InvalidParameter(format!("start time {s} outside [0, T)")));
    }
    let n = ((horizon - s) / dt_mc).round().max(1.0) as usize;
    Ok((n, (horizon - s) / n as f64))
}

/// Stored paths. Each path holds its positions up to and including the
/// first sample outside `D` (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub start: (f64, Vec<f64>),
    /// Actual step, `(T - s) / n_steps`.
    pub dt_mc: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub paths: Vec<Vec<[f64; 2]>>,
    /// Index of the first sample outside `D`, `None` if the path survived.
    pub exit_index: Vec<Option<usize>>,
}

impl PathBundle {
    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
    pub fn time(&self, j: usize) -> f64 {
        self.start.0 + j as f64 * self.dt_mc
    }
    /// Exit times `(exit_index) * dt` since the start, `None` when alive at `T`.
    pub fn exit_times(&self) -> Vec<Option<f64>> {
        self.exit_index.iter().map(|e| e.map(|j| j as f64 * self.dt_mc)).collect()
    }
}

fn check_start(spec: &ProblemSpec, x: &[f64]) -> Result<(), McError> {
    let dim = spec.dim();
    if x.len() != dim || (0..dim).any(|a| !(x[a] > 0.0 && x[a] < spec.domain.lengths()[a])) {
        return Err(McError::InvalidParameter(format!("start point {x:?} not inside the domain")));
    }
    Ok(())
}

pub fn simulate_paths(spec: &ProblemSpec, s: f64, x: &[f64], n: usize, dt_mc: f64, seed: u64) -> Result<PathBundle, McError> {
    if spec.coeffs.smoothness() != Smoothness::C1 {
        return Err(McError::NonC1Coefficients);
    }
    check_start(spec, x)?;
    let (n_steps, dt) = time_steps(spec.domain.horizon(), s, dt_mc)?;
    let stepper = Stepper::new(spec, dt);
    let x0 = [x[0], if x.len() > 1 { x[1] } else { 0.0 }];
    let sims: Vec<(Vec<[f64; 2]>, Option<usize>)> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut pos = x0;
            let mut path = Vec::with_capacity(n_steps.min(4096) + 1);
            path.push(pos);
            for j in 0..n_steps {
                let alive = stepper.step(s + j as f64 * dt, &mut pos, &mut rng);
                path.push(pos);
                if !alive {
                    return (path, Some(j + 1));
                }
            }
            (path, None)
        })
        .collect();
    let (paths, exit_index) = sims.into_iter().unzip();
    Ok(PathBundle { start: (s, x.to_vec()), dt_mc: dt, n_steps, seed, paths, exit_index })
}

/// Grid data sampled along paths: interior vectors per step plus atoms
/// placed on path step indices.
struct Integrand<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    dim: usize,
    u: Option<Vec<Vec<f64>>>,
    mu: Option<Vec<Vec<f64>>>,
    nu: Option<Vec<Vec<f64>>>,
    mu_atoms: Vec<(usize, SpaceFn)>,
    nu_atoms: Vec<(usize, Vec<f64>)>,
}

impl<'a> Integrand<'a> {
    fn new(
        spec: &'a ProblemSpec,
        grid: &'a Grid,
        u: &GridFunction,
        nu: &ReactionMeasure,
        s: f64,
        dt: f64,
    ) -> Result<Self, McError> {
        if !u.grid().same_shape(grid) || !nu.grid().same_shape(grid) {
            return Err(McError::GridMismatch);
        }
        let disc = project_measure(&spec.measure, grid)?;
        let has_density = spec.measure.density().is_some();
        let u_slices = (!spec.driver.is_zero()).then(|| (0..=grid.nt()).map(|k| u.interior(k)).collect());
        let mu = has_density.then(|| disc.density.clone());
        let nu_net: Vec<Vec<f64>> = (0..grid.nt()).map(|k| nu.net(k)).collect();
        let nu_dens = nu_net.iter().any(|v| v.iter().any(|&x| x != 0.0)).then_some(nu_net);
        let step_of = |t: f64| ((t - s) / dt).round();
        let mu_atoms = spec
            .measure
            .atoms()
            .iter()
            .filter(|a| a.t >= s - 1e-12)
            .map(|a| (step_of(a.t) as usize, a.rho.clone()))
            .collect();
        let nu_atoms = nu
            .atoms()
            .iter()
            .filter(|a| grid.time(a.index) >= s - 1e-12)
            .map(|a| (step_of(grid.time(a.index)) as usize, a.pos.iter().zip(&a.neg).map(|(p, q)| p - q).collect()))
            .collect();
        Ok(Integrand { spec, grid, dim: grid.dim(), u: u_slices, mu, nu: nu_dens, mu_atoms, nu_atoms })
    }

    /// Running densities `(f, mu, nu)` at `(t, x)`.
    #[inline]
    fn running(&self, t: f64, x: &[f64; 2]) -> (f64, f64, f64) {
        if self.u.is_none() && self.mu.is_none() && self.nu.is_none() {
            return (0.0, 0.0, 0.0);
        }
        let k = self.grid.step_containing(t);
        let xs = &x[..self.dim];
        let f = self.u.as_ref().map_or(0.0, |u| {
            let y = self.grid.interpolate(&u[k], xs);
            self.spec.driver.eval(t, xs, y)
        });
        let m = self.mu.as_ref().map_or(0.0, |m| self.grid.interpolate(&m[k], xs));
        let n = self.nu.as_ref().map_or(0.0, |v| self.grid.interpolate(&v[k], xs));
        (f, m, n)
    }

    /// Atom contributions `(mu, nu)` at path step `j`.
    fn atoms(&self, j: usize, x: &[f64; 2]) -> (f64, f64) {
        let xs = &x[..self.dim];
        let m = self.mu_atoms.iter().filter(|a| a.0 == j).map(|a| (a.1)(xs)).sum();
        let n = self.nu_atoms.iter().filter(|a| a.0 == j).map(|a| self.grid.interpolate(&a.1, xs)).sum();
        (m, n)
    }

    fn has_atoms(&self) -> bool {
        !self.mu_atoms.is_empty() || !self.nu_atoms.is_empty()
    }
}

/// Per-path functionals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionalAccumulator {
    pub f_integral: Vec<f64>,
    pub a_mu: Vec<f64>,
    pub a_nu: Vec<f64>,
    pub terminal: Vec<f64>,
}

impl FunctionalAccumulator {
    pub fn totals(&self) -> Vec<f64> {
        (0..self.terminal.len()).map(|p| self.f_integral[p] + self.a_mu[p] + self.a_nu[p] + self.terminal[p]).collect()
    }

    pub fn estimate(&self, dt_mc: f64) -> McEstimate {
        McEstimate::from_samples(&self.totals(), dt_mc)
    }
}

/// Functionals over the whole path.
pub fn accumulate(
    bundle: &PathBundle,
    u: &GridFunction,
    nu: &ReactionMeasure,
    spec: &ProblemSpec,
) -> Result<FunctionalAccumulator, McError> {
    accumulate_window(bundle, u, nu, spec, 0, bundle.n_steps + 1)
}

/// Functionals restricted to path indices `j in [from, to)`: left-endpoint
/// running terms for `j < n_steps`, atoms at `j`, and the terminal payoff
/// at `j = n_steps`. Windows are additive.
pub fn accumulate_window(
    bundle: &PathBundle,
    u: &GridFunction,
    nu: &ReactionMeasure,
    spec: &ProblemSpec,
    from: usize,
    to: usize,
) -> Result<FunctionalAccumulator, McError> {
    let grid = u.grid();
    check_grid(spec, grid).map_err(|_| McError::GridMismatch)?;
    let dt = bundle.dt_mc;
    let ig = Integrand::new(spec, grid, u, nu, bundle.start.0, dt)?;
    let dim = spec.dim();
    let n = bundle.len();
    let mut acc = FunctionalAccumulator {
        f_integral: vec![0.0; n],
        a_mu: vec![0.0; n],
        a_nu: vec![0.0; n],
        terminal: vec![0.0; n],
    };
    for p in 0..n {
        let path = &bundle.paths[p];
        // indices at which the path is alive
        let alive_until = bundle.exit_index[p].unwrap_or(bundle.n_steps + 1);
        for j in from..to.min(alive_until) {
            let x = &path[j];
            if j < bundle.n_steps {
                let (f, m, v) = ig.running(bundle.time(j), x);
                acc.f_integral[p] += f * dt;
                acc.a_mu[p] += m * dt;
                acc.a_nu[p] += v * dt;
            }
            let (m, v) = ig.atoms(j, x);
            acc.a_mu[p] += m;
            acc.a_nu[p] += v;
            if j == bundle.n_steps {
                acc.terminal[p] = spec.terminal_at(&x[..dim]);
            }
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub dt_mc: f64,
}

impl McEstimate {
    /// Sequential mean and sample standard deviation over `samples`.
    pub fn from_samples(samples: &[f64], dt_mc: f64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        McEstimate { mean, std_error: (var / n as f64).sqrt(), n, dt_mc }
    }
}

/// Streaming totals, one per path, without storing positions.
pub fn path_totals(
    spec: &ProblemSpec,
    u: &GridFunction,
    nu: &ReactionMeasure,
    s: f64,
    x: &[f64],
    n: usize,
    dt_mc: f64,
    seed: u64,
) -> Result<(Vec<f64>, f64), McError> {
    if spec.coeffs.smoothness() != Smoothness::C1 {
        return Err(McError::NonC1Coefficients);
    }
    check_start(spec, x)?;
    let grid = u.grid();
    check_grid(spec, grid).map_err(|_| McError::GridMismatch)?;
    let (n_steps, dt) = time_steps(spec.domain.horizon(), s, dt_mc)?;
    let stepper = Stepper::new(spec, dt);
    let ig = Integrand::new(spec, grid, u, nu, s, dt)?;
    let x0 = [x[0], if x.len() > 1 { x[1] } else { 0.0 }];
    let dim = spec.dim();
    let has_atoms = ig.has_atoms();
    let totals = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut pos = x0;
            let mut running = 0.0;
            let mut atoms = 0.0;
            for j in 0..n_steps {
                let t = s + j as f64 * dt;
                let (f, m, v) = ig.running(t, &pos);
                running += f + m + v;
                if has_atoms {
                    let (am, av) = ig.atoms(j, &pos);
                    atoms += am + av;
                }
                if !stepper.step(t, &mut pos, &mut rng) {
                    return running * dt + atoms;
                }
            }
            if has_atoms {
                let (am, av) = ig.atoms(n_steps, &pos);
                atoms += am + av;
            }
            running * dt + atoms + spec.terminal_at(&pos[..dim])
        })
        .collect();
    Ok((totals, dt))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkPoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub estimate: McEstimate,
    pub z: f64,
    pub pass: bool,
}

/// PDE value at `(s, x)`: spatial interpolation on the slice nearest `s`.
pub fn pde_value(u: &GridFunction, s: f64, x: &[f64]) -> f64 {
    let k = u.grid().nearest_slice(s);
    u.interpolate(k, x)
}

/// Solves the PDE (complementarity oracle when barriers are present) and
/// compares with Monte Carlo at each point.
pub fn feynman_kac_check(
    spec: &ProblemSpec,
    grid: &Grid,
    points: &[(f64, Vec<f64>)],
    n: usize,
    dt_mc: f64,
    seed: u64,
    delta: f64,
) -> Result<Vec<FkPoint>, McError> {
    let (u, nu) = if spec.barriers.is_empty() {
        (solve_cauchy_dirichlet(spec, grid)?, ReactionMeasure::zero(grid))
    } else {
        let sol = solve_vi(spec, grid)?;
        (sol.u, sol.nu)
    };
    feynman_kac_with(spec, &u, &nu, points, n, dt_mc, seed, delta)
}

/// [`feynman_kac_check`] against a given solution.
pub fn feynman_kac_with(
    spec: &ProblemSpec,
    u: &GridFunction,
    nu: &ReactionMeasure,
    points: &[(f64, Vec<f64>)],
    n: usize,
    dt_mc: f64,
    seed: u64,
    delta: f64,
) -> Result<Vec<FkPoint>, McError> {
    if n < 2 {
        return Err(McError::InvalidParameter("need at least two paths".into()));
    }
    points
        .iter()
        .map(|(s, x)| {
            let (totals, dt) = path_totals(spec, u, nu, *s, x, n, dt_mc, seed)?;
            let estimate = McEstimate::from_samples(&totals, dt);
            let value = pde_value(u, *s, x);
            let z = (value - estimate.mean).abs() / (estimate.std_error + delta);
            Ok(FkPoint { s: *s, x: x.clone(), u: value, estimate, z, pass: z <= 3.0 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Atom, MeasureData, SpaceTimeDomain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn zero_heat(horizon: f64) -> ProblemSpec {
        ProblemSpec::heat(SpaceTimeDomain::unit_interval(horizon), Arc::new(|_: &[f64]| 0.0))
    }

    #[test]
    fn mean_exit_time() {
        let spec = zero_heat(20.0);
        let x = 0.3;
        let b = simulate_paths(&spec, 0.0, &[x], 4000, 1e-4, 11).unwrap();
        let times: Vec<f64> = b.exit_times().iter().map(|t| t.unwrap_or(20.0)).collect();
        let est = McEstimate::from_samples(&times, b.dt_mc);
        // the discrete exit is late by O(sqrt(dt))
        let bias = 0.6 * 1e-2;
        assert!((est.mean - x * (1.0 - x)).abs() <= 3.0 * est.std_error + bias, "{est:?}");
    }

    #[test]
    fn one_step_variance() {
        let spec = zero_heat(0.01);
        let b = simulate_paths(&spec, 0.0, &[0.5], 20_000, 0.01, 3).unwrap();
        assert_eq!(b.n_steps, 1);
        let inc: Vec<f64> = b.paths.iter().map(|p| p[1][0] - 0.5).collect();
        let est = McEstimate::from_samples(&inc, 0.01);
        let var = inc.iter().map(|d| (d - est.mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
        assert!((var - 0.01).abs() < 5e-4, "{var}");
    }

    #[test]
    fn drift_of_sine_coefficient() {
        let a = CoefficientField::new(
            Arc::new(|_, x: &[f64]| Tensor::scalar(1.0 + 0.5 * (PI * x[0]).sin())),
            2.0,
            Smoothness::C1,
            false,
        )
        .unwrap();
        assert!(drift(&a, 0.0, &[0.5], 1)[0].abs() < 1e-8);
        let b = drift(&a, 0.0, &[0.2], 1)[0];
        assert!((b - 0.25 * PI * (PI * 0.2).cos()).abs() < 1e-8);
    }

    #[test]
    fn non_c1_rejected() {
        let mut spec = zero_heat(1.0);
        spec.coeffs = CoefficientField::new(Arc::new(|_, _| Tensor::scalar(1.0)), 1.0, Smoothness::Measurable, false).unwrap();
        assert_eq!(simulate_paths(&spec, 0.0, &[0.5], 2, 0.1, 0), Err(McError::NonC1Coefficients));
    }

    #[test]
    fn seed_determinism() {
        let spec = zero_heat(1.0);
        let a = simulate_paths(&spec, 0.0, &[0.4], 50, 1e-3, 5).unwrap();
        let b = simulate_paths(&spec, 0.0, &[0.4], 50, 1e-3, 5).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&spec, 0.0, &[0.4], 50, 1e-3, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unit_atom_and_terminal_only() {
        let mut spec = zero_heat(1.0);
        spec.measure = MeasureData::new(None, vec![Atom { t: 0.5, rho: Arc::new(|_| 1.0) }]).unwrap();
        let g = Grid::uniform(&spec.domain, 15, 20).unwrap();
        let u = GridFunction::zeros(&g);
        let nu = ReactionMeasure::zero(&g);
        let b = simulate_paths(&spec, 0.0, &[0.5], 200, 1e-3, 1).unwrap();
        let acc = accumulate(&b, &u, &nu, &spec).unwrap();
        for p in 0..b.len() {
            let alive = b.exit_index[p].is_none_or(|e| e > 500);
            assert_eq!(acc.a_mu[p], if alive { 1.0 } else { 0.0 });
            assert_eq!(acc.f_integral[p], 0.0);
            assert_eq!(acc.terminal[p], 0.0);
        }
    }

    #[test]
    fn window_additivity() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()));
        spec.measure = MeasureData::new(
            Some(Arc::new(|t, x| t + x[0])),
            vec![Atom { t: 0.5, rho: Arc::new(|x| x[0]) }],
        )
        .unwrap();
        spec.driver = crate::problem::Driver::linear(-1.0);
        let g = Grid::uniform(&spec.domain, 15, 20).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let nu = ReactionMeasure::zero(&g);
        let b = simulate_paths(&spec, 0.0, &[0.5], 100, 1e-3, 2).unwrap();
        let full = accumulate(&b, &u, &nu, &spec).unwrap();
        let a = accumulate_window(&b, &u, &nu, &spec, 0, 400).unwrap();
        let c = accumulate_window(&b, &u, &nu, &spec, 400, b.n_steps + 1).unwrap();
        for p in 0..b.len() {
            let sum = a.totals()[p] + c.totals()[p];
            assert!((sum - full.totals()[p]).abs() <= 1e-13 * (1.0 + sum.abs()));
        }
    }

    #[test]
    fn streaming_matches_stored() {
        let spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()));
        let g = Grid::uniform(&spec.domain, 15, 20).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let nu = ReactionMeasure::zero(&g);
        let b = simulate_paths(&spec, 0.2, &[0.5], 64, 1e-3, 9).unwrap();
        let stored = accumulate(&b, &u, &nu, &spec).unwrap().totals();
        let (streamed, _) = path_totals(&spec, &u, &nu, 0.2, &[0.5], 64, 1e-3, 9).unwrap();
        assert_eq!(stored, streamed);
    }

    #[test]
    fn zero_problem_has_zero_z() {
        let spec = zero_heat(1.0);
        let g = Grid::uniform(&spec.domain, 15, 20).unwrap();
        let pts = feynman_kac_check(&spec, &g, &[(0.0, vec![0.5])], 100, 1e-2, 0, DEFAULT_DELTA).unwrap();
        assert_eq!(pts[0].z, 0.0);
        assert!(pts[0].pass);
    }
}
