//! Problem instances and their numerically checkable hypotheses.
//!
//! A [`ProblemSpec`] is the full data of a semilinear parabolic obstacle
//! problem on `[0,T] x D`: the divergence-form operator
//! `A_t = 1/2 sum_ij d_j(a_ij d_i)`, the driver `f(t,x,y)`, terminal data,
//! a measure made of an integrable density plus time atoms, and up to two
//! barriers. Everything is immutable once built and cheap to clone.

use crate::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type SpaceTimeFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DriverFn = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(f64, &[f64]) -> Tensor + Send + Sync>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("hard hypothesis violation: {}", .0.summary())]
    HardViolation(Box<ValidationReport>),
}

/// Symmetric coefficient matrix; dimension-1 problems use `a[0][0]` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor(pub [[f64; 2]; 2]);

impl Tensor {
    pub fn scalar(a: f64) -> Self {
        Tensor([[a, 0.0], [0.0, 0.0]])
    }

    pub fn identity() -> Self {
        Tensor([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// Eigenvalues of the leading `dim x dim` block, ascending.
    pub fn eigenvalues(&self, dim: usize) -> [f64; 2] {
        let a = self.0;
        if dim == 1 {
            return [a[0][0], a[0][0]];
        }
        let tr = a[0][0] + a[1][1];
        let off = 0.5 * (a[0][1] + a[1][0]);
        let half_diff = 0.5 * (a[0][0] - a[1][1]);
        let r = (half_diff * half_diff + off * off).sqrt();
        [0.5 * tr - r, 0.5 * tr + r]
    }

    /// Symmetric principal square root (closed form for 2x2).
    pub fn sqrt(&self, dim: usize) -> Tensor {
        let a = self.0;
        if dim == 1 {
            return Tensor::scalar(a[0][0].sqrt());
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let s = det.max(0.0).sqrt();
        let t = (a[0][0] + a[1][1] + 2.0 * s).sqrt();
        Tensor([[(a[0][0] + s) / t, a[0][1] / t], [a[1][0] / t, (a[1][1] + s) / t]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceTimeDomain {
    dim: usize,
    lengths: Vec<f64>,
    horizon: f64,
}

impl SpaceTimeDomain {
    pub fn new(dim: usize, lengths: &[f64], horizon: f64) -> Result<Self, ProblemError> {
        if !(1..=2).contains(&dim) {
            return Err(ProblemError::InvalidDomain(format!("dimension must be 1 or 2, got {dim}")));
        }
        if lengths.len() != dim {
            return Err(ProblemError::InvalidDomain(format!("expected {dim} axis lengths, got {}", lengths.len())));
        }
        if lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(ProblemError::InvalidDomain("axis lengths must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(ProblemError::InvalidDomain("horizon T must be positive".into()));
        }
        Ok(SpaceTimeDomain { dim, lengths: lengths.to_vec(), horizon })
    }

    pub fn unit_interval(horizon: f64) -> Self {
        Self::new(1, &[1.0], horizon).expect("valid unit interval")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Smoothness {
    Measurable,
    C1,
}

#[derive(Clone)]
pub struct CoefficientField {
    a: TensorFn,
    lambda: f64,
    smoothness: Smoothness,
    time_dependent: bool,
    constant: Option<Tensor>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("lambda", &self.lambda)
            .field("smoothness", &self.smoothness)
            .field("constant", &self.constant)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(a: TensorFn, lambda: f64, smoothness: Smoothness, time_dependent: bool) -> Result<Self, ProblemError> {
        if !(lambda >= 1.0) {
            return Err(ProblemError::InvalidCoefficients(format!("ellipticity constant must be >= 1, got {lambda}")));
        }
        Ok(CoefficientField { a, lambda, smoothness, time_dependent, constant: None })
    }

    pub fn constant(tensor: Tensor, lambda: f64) -> Result<Self, ProblemError> {
        let mut c = Self::new(Arc::new(move |_, _| tensor), lambda, Smoothness::C1, false)?;
        c.constant = Some(tensor);
        Ok(c)
    }

    pub fn identity() -> Self {
        Self::constant(Tensor::identity(), 1.0).expect("identity is elliptic")
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Tensor {
        (self.a)(t, x)
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }
    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }
    pub fn constant_value(&self) -> Option<Tensor> {
        self.constant
    }
}

#[derive(Clone)]
pub struct Driver {
    f: DriverFn,
    kappa: f64,
    zero: bool,
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Driver").field("kappa", &self.kappa).field("zero", &self.zero).finish()
    }
}

impl Driver {
    pub fn new(f: DriverFn, kappa: f64) -> Self {
        Driver { f, kappa, zero: false }
    }

    pub fn zero() -> Self {
        Driver { f: Arc::new(|_, _, _| 0.0), kappa: 0.0, zero: true }
    }

    /// `f(t,x,y) = c * y`, monotone with `kappa = max(c, 0)`.
    pub fn linear(c: f64) -> Self {
        Driver::new(Arc::new(move |_, _, y| c * y), c.max(0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eval(&self, t: f64, x: &[f64], y: f64) -> f64 {
        if self.zero {
            0.0
        } else {
            (self.f)(t, x, y)
        }
    }

    /// `df/dy` by central differences.
    pub fn dy(&self, t: f64, x: &[f64], y: f64) -> f64 {
        if self.zero {
            return 0.0;
        }
        let eps = 1e-6 * (1.0 + y.abs());
        ((self.f)(t, x, y + eps) - (self.f)(t, x, y - eps)) / (2.0 * eps)
    }

    /// Discrete `||f(.,.,0)||_{L1(D_T)}` over interior nodes and the
    /// implicit slices `k = 0..nt-1`.
    pub fn f_zero_norm(&self, grid: &Grid) -> f64 {
        if self.zero {
            return 0.0;
        }
        let w = grid.cell_volume() * grid.dt();
        let mut s = 0.0;
        for k in 0..grid.nt() {
            let t = grid.time(k);
            for p in 0..grid.n_interior() {
                let x = grid.interior_coords(p);
                s += self.eval(t, &x[..grid.dim()], 0.0).abs() * w;
            }
        }
        s
    }
}

#[derive(Clone)]
pub struct Atom {
    pub t: f64,
    pub rho: SpaceFn,
}

/// Density `g` on `D_T` plus time atoms `delta_{t_k} x rho_k(x) dx`.
#[derive(Clone, Default)]
pub struct MeasureData {
    density: Option<SpaceTimeFn>,
    atoms: Vec<Atom>,
}

impl fmt::Debug for MeasureData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasureData")
            .field("has_density", &self.density.is_some())
            .field("atom_times", &self.atoms.iter().map(|a| a.t).collect::<Vec<_>>())
            .finish()
    }
}

impl MeasureData {
    pub fn zero() -> Self {
        MeasureData::default()
    }

    pub fn new(density: Option<SpaceTimeFn>, atoms: Vec<Atom>) -> Result<Self, ProblemError> {
        for (i, a) in atoms.iter().enumerate() {
            if !a.t.is_finite() {
                return Err(ProblemError::InvalidMeasure(format!("atom {i} has non-finite time")));
            }
            if atoms[..i].iter().any(|b| b.t == a.t) {
                return Err(ProblemError::InvalidMeasure(format!("duplicate atom time {}", a.t)));
            }
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(MeasureData { density, atoms })
    }

    pub fn density(&self) -> Option<&SpaceTimeFn> {
        self.density.as_ref()
    }
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn is_zero(&self) -> bool {
        self.density.is_none() && self.atoms.is_empty()
    }

    pub fn density_at(&self, t: f64, x: &[f64]) -> f64 {
        self.density.as_ref().map_or(0.0, |g| g(t, x))
    }

    /// The measure `c * mu`.
    pub fn scaled(&self, c: f64) -> MeasureData {
        let density = self.density.clone().map(|g| -> SpaceTimeFn { Arc::new(move |t, x| c * g(t, x)) });
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let rho = a.rho.clone();
                Atom { t: a.t, rho: Arc::new(move |x| c * rho(x)) }
            })
            .collect();
        MeasureData { density, atoms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BarrierContinuity {
    QuasiContinuousProxy,
    MerelyMeasurable,
}

/// Lower and upper barriers. `None` is the absent barrier (`-inf` / `+inf`);
/// a present barrier may still take infinite values on part of `D_T`.
#[derive(Clone)]
pub struct BarrierPair {
    pub lower: Option<SpaceTimeFn>,
    pub upper: Option<SpaceTimeFn>,
    pub continuity: BarrierContinuity,
}

impl fmt::Debug for BarrierPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierPair")
            .field("lower", &self.lower.is_some())
            .field("upper", &self.upper.is_some())
            .field("continuity", &self.continuity)
            .finish()
    }
}

impl BarrierPair {
    pub fn none() -> Self {
        BarrierPair { lower: None, upper: None, continuity: BarrierContinuity::QuasiContinuousProxy }
    }

    pub fn lower(h1: SpaceTimeFn) -> Self {
        BarrierPair { lower: Some(h1), upper: None, continuity: BarrierContinuity::QuasiContinuousProxy }
    }

    pub fn both(h1: SpaceTimeFn, h2: SpaceTimeFn) -> Self {
        BarrierPair { lower: Some(h1), upper: Some(h2), continuity: BarrierContinuity::QuasiContinuousProxy }
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    pub fn lower_at(&self, t: f64, x: &[f64]) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, |h| h(t, x))
    }

    pub fn upper_at(&self, t: f64, x: &[f64]) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |h| h(t, x))
    }
}

/// Separating function `v` with `h1 <= v <= h2`, its source density and the
/// terminal value it dominates.
#[derive(Clone)]
pub struct SeparationWitness {
    pub v: SpaceTimeFn,
    pub lambda_density: SpaceTimeFn,
    pub phi_hat: SpaceFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: SpaceTimeDomain,
    pub coeffs: CoefficientField,
    pub driver: Driver,
    pub terminal: SpaceFn,
    pub measure: MeasureData,
    pub barriers: BarrierPair,
    pub witness: Option<SeparationWitness>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("coeffs", &self.coeffs)
            .field("driver", &self.driver)
            .field("measure", &self.measure)
            .field("barriers", &self.barriers)
            .field("witness", &self.witness.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// Unconstrained problem with identity diffusion, zero driver and zero
    /// measure; adjust the public fields from there.
    pub fn heat(domain: SpaceTimeDomain, terminal: SpaceFn) -> Self {
        ProblemSpec {
            name: "heat".into(),
            domain,
            coeffs: CoefficientField::identity(),
            driver: Driver::zero(),
            terminal,
            measure: MeasureData::zero(),
            barriers: BarrierPair::none(),
            witness: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn terminal_at(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }

    /// Checks that atom times lie in `(0, T]`.
    pub fn check_structure(&self) -> Result<(), ProblemError> {
        let horizon = self.domain.horizon();
        for a in self.measure.atoms() {
            if !(a.t > 0.0 && a.t <= horizon) {
                return Err(ProblemError::InvalidMeasure(format!("atom time {} outside (0, {horizon}]", a.t)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Largest sampled violation (0 when nothing was violated).
    pub worst_violation: f64,
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub problem: String,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn hard_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.hard).all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            "all checks passed".into()
        } else {
            format!("failed: {}", failed.join(", "))
        }
    }
}

const MONOTONICITY_SAMPLES: usize = 10_000;
const VALIDATION_SEED: u64 = 0x5eed_0b57;

struct Check {
    name: &'static str,
    hard: bool,
    worst: f64,
    detail: String,
}

impl Check {
    fn new(name: &'static str, hard: bool) -> Self {
        Check { name, hard, worst: 0.0, detail: String::new() }
    }

    fn record(&mut self, violation: f64, what: impl FnOnce() -> String) {
        if violation > self.worst || violation.is_nan() {
            self.worst = if violation.is_nan() { f64::INFINITY } else { violation };
            self.detail = what();
        }
    }

    fn finish(self) -> HypothesisCheck {
        HypothesisCheck {
            name: self.name.into(),
            passed: self.worst <= 0.0,
            worst_violation: self.worst,
            hard: self.hard,
            detail: self.detail,
        }
    }
}

/// Samples the structural hypotheses on `grid`.
///
/// Ellipticity, symmetry and barrier ordering are hard gates: if any fails
/// the report is returned inside [`ProblemError::HardViolation`].
pub fn validate(spec: &ProblemSpec, grid: &Grid) -> Result<ValidationReport, ProblemError> {
    let dim = spec.dim();
    let lambda = spec.coeffs.lambda();
    let nodes: Vec<[f64; 2]> = (0..grid.n_nodes()).map(|i| grid.node_coords(i)).collect();
    let times: Vec<f64> = (0..=grid.nt()).map(|k| grid.time(k)).collect();
    let mut checks = Vec::new();

    let mut ellip = Check::new("ellipticity", true);
    let mut symm = Check::new("symmetry", true);
    let mut order = Check::new("barrier_order", true);
    let eig_tol = 1e-12;
    for &t in &times {
        for x in &nodes {
            let x = &x[..dim];
            let a = spec.coeffs.eval(t, x);
            let ev = a.eigenvalues(dim);
            let v = (1.0 / lambda - ev[0]).max(ev[1] - lambda) - eig_tol;
            ellip.record(v, || format!("eigenvalues {ev:?} at t={t}, x={x:?}"));
            if dim == 2 && a.0[0][1] != a.0[1][0] {
                symm.record((a.0[0][1] - a.0[1][0]).abs(), || format!("a12 != a21 at t={t}, x={x:?}"));
            }
            let (h1, h2) = (spec.barriers.lower_at(t, x), spec.barriers.upper_at(t, x));
            let gap = if h1 == f64::NEG_INFINITY || h2 == f64::INFINITY { f64::NEG_INFINITY } else { h1 - h2 };
            let gap = if h1 == f64::INFINITY || h2 == f64::NEG_INFINITY || h1.is_nan() || h2.is_nan() {
                f64::INFINITY
            } else {
                gap
            };
            order.record(gap, || format!("h1={h1} > h2={h2} at t={t}, x={x:?}"));
        }
    }
    let hard_ok = ellip.worst <= 0.0 && symm.worst <= 0.0 && order.worst <= 0.0;
    checks.push(ellip.finish());
    checks.push(symm.finish());
    checks.push(order.finish());

    // (H3) one-sided monotonicity on random pairs
    let mut mono = Check::new("monotonicity", false);
    let mut cont = Check::new("continuity_in_y", false);
    let y_range = 10.0_f64.max(
        nodes.iter().map(|x| spec.terminal_at(&x[..dim]).abs()).filter(|v| v.is_finite()).fold(0.0, f64::max) * 2.0,
    );
    if !spec.driver.is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let kappa = spec.driver.kappa();
        for _ in 0..MONOTONICITY_SAMPLES {
            let t = rng.random::<f64>() * grid.horizon();
            let mut x = [0.0; 2];
            for (a, xa) in x.iter_mut().enumerate().take(dim) {
                *xa = rng.random::<f64>() * grid.lengths()[a];
            }
            let x = &x[..dim];
            let y = (rng.random::<f64>() * 2.0 - 1.0) * y_range;
            let y2 = (rng.random::<f64>() * 2.0 - 1.0) * y_range;
            let d = (spec.driver.eval(t, x, y) - spec.driver.eval(t, x, y2)) * (y - y2);
            let bound = kappa * (y - y2) * (y - y2);
            let tol = 1e-9 * (1.0 + d.abs() + bound.abs());
            mono.record(d - bound - tol, || format!("t={t}, x={x:?}, y={y}, y'={y2}"));
            let eps = 1e-8 * (1.0 + y.abs());
            let fy = spec.driver.eval(t, x, y);
            let jump = (spec.driver.eval(t, x, y + eps) - fy).abs();
            cont.record(jump - 1e-4 * (1.0 + fy.abs()), || format!("jump {jump} at t={t}, x={x:?}, y={y}"));
        }
    }
    checks.push(mono.finish());
    checks.push(cont.finish());

    let mut integrable = Check::new("terminal_integrable", false);
    let phi_l1: f64 = (0..grid.n_nodes())
        .map(|i| spec.terminal_at(&nodes[i][..dim]).abs() * grid.dual_volume(i))
        .sum();
    integrable.record(if phi_l1.is_finite() { 0.0 } else { f64::INFINITY }, || "phi not integrable".into());
    checks.push(integrable.finish());

    let mut f0 = Check::new("f_zero_integrable", false);
    let f0n = spec.driver.f_zero_norm(grid);
    f0.record(if f0n.is_finite() { 0.0 } else { f64::INFINITY }, || "f(.,.,0) not integrable".into());
    checks.push(f0.finish());

    let mut meas = Check::new("measure_finite", false);
    let tv = tv_norm(&spec.measure, grid);
    meas.record(if tv.is_finite() { 0.0 } else { f64::INFINITY }, || "measure has infinite total variation".into());
    let horizon = grid.horizon();
    for a in spec.measure.atoms() {
        if !(a.t > 0.0 && a.t <= horizon) {
            meas.record(f64::INFINITY, || format!("atom time {} outside (0, T]", a.t));
        }
    }
    checks.push(meas.finish());

    let mut compat = Check::new("terminal_compatibility", false);
    for x in &nodes {
        let x = &x[..dim];
        let phi = spec.terminal_at(x);
        let lo = spec.barriers.lower_at(horizon, x) - phi;
        let hi = phi - spec.barriers.upper_at(horizon, x);
        compat.record(lo.max(hi), || format!("phi={phi} outside barriers at x={x:?}"));
    }
    checks.push(compat.finish());

    let mut step = Check::new("time_step", false);
    step.record(grid.dt() * spec.driver.kappa() - 0.5, || {
        format!("dt={} exceeds 0.5/kappa for kappa={}", grid.dt(), spec.driver.kappa())
    });
    checks.push(step.finish());

    if let Some(w) = &spec.witness {
        let mut sep = Check::new("separation_witness", false);
        for &t in &times {
            for x in &nodes {
                let x = &x[..dim];
                let v = (w.v)(t, x);
                let lo = spec.barriers.lower_at(t, x) - v;
                let hi = v - spec.barriers.upper_at(t, x);
                let neg = -(w.lambda_density)(t, x);
                sep.record(lo.max(hi).max(neg), || format!("witness violated at t={t}, x={x:?}"));
            }
        }
        for x in &nodes {
            let x = &x[..dim];
            let d = spec.terminal_at(x) - (w.phi_hat)(x);
            sep.record(d, || format!("phi_hat < phi at x={x:?}"));
        }
        checks.push(sep.finish());
    }

    let report = ValidationReport { problem: spec.name.clone(), checks };
    if hard_ok {
        Ok(report)
    } else {
        Err(ProblemError::HardViolation(Box::new(report)))
    }
}

/// Total variation of `mu` on `grid`: midpoint rule in time, clipped dual
/// cells (trapezoid) in space, for the density and for each atom.
pub fn tv_norm(measure: &MeasureData, grid: &Grid) -> f64 {
    let dim = grid.dim();
    let mut total = 0.0;
    if let Some(g) = measure.density() {
        for k in 0..grid.nt() {
            let t = (k as f64 + 0.5) * grid.dt();
            for i in 0..grid.n_nodes() {
                let x = grid.node_coords(i);
                total += g(t, &x[..dim]).abs() * grid.dual_volume(i) * grid.dt();
            }
        }
    }
    for a in measure.atoms() {
        for i in 0..grid.n_nodes() {
            let x = grid.node_coords(i);
            total += (a.rho)(&x[..dim]).abs() * grid.dual_volume(i);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine() -> SpaceFn {
        Arc::new(|x: &[f64]| (PI * x[0]).sin())
    }

    fn grid1(spec: &ProblemSpec, nx: usize, nt: usize) -> Grid {
        Grid::uniform(&spec.domain, nx, nt).unwrap()
    }

    #[test]
    fn identity_is_elliptic_with_zero_margin() {
        let spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        let report = validate(&spec, &grid1(&spec, 8, 4)).unwrap();
        let e = report.get("ellipticity").unwrap();
        assert!(e.passed);
        assert_eq!(e.worst_violation, 0.0);
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn cubic_absorption_is_monotone() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.driver = Driver::new(Arc::new(|_, _, y| -y * y * y), 0.0);
        let report = validate(&spec, &grid1(&spec, 8, 4)).unwrap();
        assert!(report.get("monotonicity").unwrap().passed);
    }

    #[test]
    fn increasing_driver_with_kappa_zero_fails_softly() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.driver = Driver::new(Arc::new(|_, _, y| y), 0.0);
        let report = validate(&spec, &grid1(&spec, 8, 4)).unwrap();
        assert!(!report.get("monotonicity").unwrap().passed);
        spec.driver = Driver::linear(1.0);
        let report = validate(&spec, &grid1(&spec, 8, 4)).unwrap();
        assert!(report.get("monotonicity").unwrap().passed);
    }

    #[test]
    fn crossed_barriers_are_a_hard_violation() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.barriers = BarrierPair::both(Arc::new(|_, _| 1.0), Arc::new(|_, _| 0.0));
        let g = grid1(&spec, 8, 4);
        match validate(&spec, &g) {
            Err(ProblemError::HardViolation(r)) => {
                let c = r.get("barrier_order").unwrap();
                assert!(!c.passed);
                assert_eq!(c.worst_violation, 1.0);
            }
            other => panic!("expected hard violation, got {other:?}"),
        }
    }

    #[test]
    fn non_elliptic_coefficient_is_rejected() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.coeffs = CoefficientField::constant(Tensor::scalar(3.0), 2.0).unwrap();
        assert!(matches!(validate(&spec, &grid1(&spec, 8, 4)), Err(ProblemError::HardViolation(_))));
    }

    #[test]
    fn validate_is_pure() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.driver = Driver::new(Arc::new(|_, _, y| -y.powi(3) + 0.1 * y), 0.1);
        let g = grid1(&spec, 8, 4);
        assert_eq!(validate(&spec, &g).unwrap(), validate(&spec, &g).unwrap());
    }

    #[test]
    fn tv_of_simple_measures() {
        let d = SpaceTimeDomain::unit_interval(1.0);
        let g = Grid::uniform(&d, 31, 16).unwrap();
        assert_eq!(tv_norm(&MeasureData::zero(), &g), 0.0);
        let unit = MeasureData::new(Some(Arc::new(|_, _| 1.0)), vec![]).unwrap();
        assert!((tv_norm(&unit, &g) - 1.0).abs() < 1e-12);
        let atom = MeasureData::new(None, vec![Atom { t: 0.5, rho: Arc::new(|_| 2.0) }]).unwrap();
        assert!((tv_norm(&atom, &g) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tv_converges_under_refinement() {
        let d = SpaceTimeDomain::unit_interval(1.0);
        let m = MeasureData::new(Some(Arc::new(|t, x: &[f64]| (1.0 + t) * (PI * x[0]).sin().powi(2) - 0.2)), vec![])
            .unwrap();
        let tvs: Vec<f64> = [7, 15, 31, 63]
            .iter()
            .map(|&n| tv_norm(&m, &Grid::uniform(&d, n, n + 1).unwrap()))
            .collect();
        let diffs: Vec<f64> = tvs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn atoms_must_be_distinct_and_inside_horizon() {
        let rho: SpaceFn = Arc::new(|_| 1.0);
        let dup = MeasureData::new(None, vec![Atom { t: 0.5, rho: rho.clone() }, Atom { t: 0.5, rho: rho.clone() }]);
        assert!(dup.is_err());
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine());
        spec.measure = MeasureData::new(None, vec![Atom { t: 0.0, rho }]).unwrap();
        assert!(spec.check_structure().is_err());
    }

    #[test]
    fn tensor_sqrt_squares_back() {
        let a = Tensor([[2.0, 0.5], [0.5, 1.0]]);
        let s = a.sqrt(2);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| s.0[i][k] * s.0[k][j]).sum();
                assert!((v - a.0[i][j]).abs() < 1e-14);
            }
        }
        let ev = a.eigenvalues(2);
        assert!((ev[0] + ev[1] - 3.0).abs() < 1e-14 && (ev[0] * ev[1] - 1.75).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn tv_is_absolutely_homogeneous(c in -50.0f64..50.0) {
            let d = SpaceTimeDomain::unit_interval(1.0);
            let g = Grid::uniform(&d, 9, 5).unwrap();
            let m = MeasureData::new(
                Some(Arc::new(|t, x: &[f64]| (3.0 * x[0] - 1.0) * (1.0 + t))),
                vec![Atom { t: 0.3, rho: Arc::new(|x: &[f64]| x[0] - 0.5) }],
            ).unwrap();
            let lhs = tv_norm(&m.scaled(c), &g);
            let rhs = c.abs() * tv_norm(&m, &g);
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + rhs));
        }
    }
}
