//! Backward implicit time stepping for the unconstrained problem, its
//! penalized obstacle approximations and (shared with [`crate::vi`]) the
//! exact complementarity scheme.
//!
//! Slice `k` holds the left limit `u(t_k-)`: the implicit step on
//! `[t_k, t_{k+1}]` is solved first, then any atom snapped to `t_k` is
//! added. Slice `nt` is `phi` plus the atoms at `T`.

use crate::diagnostics::{minimality_residual, rate_fit, ConvergenceReport, ConvergenceRow, Direction};
use crate::grid::{Grid, GridFunction};
use crate::measure::{project_interior, project_measure, DiscreteMeasure, MeasureError, SampleMode};
use crate::operator::{OperatorError, OperatorFamily};
use crate::problem::{ProblemError, ProblemSpec};
use crate::slice::{NewtonOptions, PgsOptions, SliceSystem};
use rayon::prelude::*;
use serde::Serialize;

/// Above this, `n * violation` is treated as overflow.
pub const PENALTY_OVERFLOW_GUARD: f64 = 1e150;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("grid does not match the problem domain")]
    GridMismatch,
    #[error("time step {dt} too large for kappa {kappa}: need dt*kappa <= 0.5")]
    TimeStepTooLarge { dt: f64, kappa: f64 },
    #[error("Newton diverged on slice {slice} at node {node}: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { slice: usize, node: usize, residual: f64, iterations: usize },
    #[error("penalty overflow on slice {slice} at node {node}: {value:e}")]
    PenaltyOverflow { slice: usize, node: usize, value: f64 },
    #[error("penalization needs at least one barrier")]
    NoBarrier,
    #[error("penalty parameters must be positive and strictly increasing")]
    BadPenaltyList,
    #[error("projected iteration stalled on slice {slice}: merit {merit:e} after {sweeps} sweeps")]
    StalledIteration { slice: usize, merit: f64, sweeps: usize },
}

/// Discrete `nu = nu_plus - nu_minus`: interior densities for each implicit
/// step `k = 0..nt` plus atoms on slices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionMeasure {
    grid: Grid,
    pos: Vec<Vec<f64>>,
    neg: Vec<Vec<f64>>,
    atoms: Vec<ReactionAtom>,
    tv_pos: f64,
    tv_neg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionAtom {
    pub index: usize,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl ReactionMeasure {
    pub fn zero(grid: &Grid) -> Self {
        let z = vec![vec![0.0; grid.n_interior()]; grid.nt()];
        Self::new(grid, z.clone(), z, Vec::new())
    }

    pub fn new(grid: &Grid, pos: Vec<Vec<f64>>, neg: Vec<Vec<f64>>, mut atoms: Vec<ReactionAtom>) -> Self {
        atoms.sort_by_key(|a| a.index);
        let vol = grid.cell_volume();
        let dens = |v: &[Vec<f64>]| v.iter().flatten().sum::<f64>() * vol * grid.dt();
        let tv_pos = dens(&pos) + atoms.iter().flat_map(|a| &a.pos).sum::<f64>() * vol;
        let tv_neg = dens(&neg) + atoms.iter().flat_map(|a| &a.neg).sum::<f64>() * vol;
        ReactionMeasure { grid: grid.clone(), pos, neg, atoms, tv_pos, tv_neg }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn pos(&self, k: usize) -> &[f64] {
        &self.pos[k]
    }
    pub fn neg(&self, k: usize) -> &[f64] {
        &self.neg[k]
    }
    pub fn atoms(&self) -> &[ReactionAtom] {
        &self.atoms
    }
    pub fn atom_at(&self, index: usize) -> Option<&ReactionAtom> {
        self.atoms.iter().find(|a| a.index == index)
    }
    pub fn tv_pos(&self) -> f64 {
        self.tv_pos
    }
    pub fn tv_neg(&self) -> f64 {
        self.tv_neg
    }
    pub fn tv(&self) -> f64 {
        self.tv_pos + self.tv_neg
    }
    pub fn is_zero(&self) -> bool {
        self.tv_pos == 0.0 && self.tv_neg == 0.0
    }

    /// Signed density `nu_plus - nu_minus` of step `k`.
    pub fn net(&self, k: usize) -> Vec<f64> {
        self.pos[k].iter().zip(&self.neg[k]).map(|(p, n)| p - n).collect()
    }

    /// `nu_minus` as a data measure (density and atoms), e.g. to form
    /// `mu - nu_minus`.
    pub fn negative_part(&self) -> DiscreteMeasure {
        DiscreteMeasure {
            density: self.neg.clone(),
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.neg.iter().any(|&v| v != 0.0))
                .map(|a| crate::measure::DiscreteAtom { index: a.index, t: self.grid.time(a.index), rho: a.neg.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceStats {
    pub iterations: usize,
    pub residual: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStats {
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub total_sweeps: usize,
    pub fallbacks: usize,
}

impl NewtonStats {
    fn from_slices(s: &[SliceStats], fallbacks: usize) -> Self {
        NewtonStats {
            total_iterations: s.iter().map(|x| x.iterations).sum(),
            max_iterations: s.iter().map(|x| x.iterations).max().unwrap_or(0),
            max_residual: s.iter().map(|x| x.residual).fold(0.0, f64::max),
            total_sweeps: s.iter().map(|x| x.sweeps).sum(),
            fallbacks,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution {
    pub u: GridFunction,
    pub nu: ReactionMeasure,
    pub n: f64,
    pub newton_stats: NewtonStats,
}

/// Treatment of one side of the constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Side {
    Off,
    Exact,
    Penalty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Method {
    Newton,
    PgsThenNewton,
}

pub(crate) struct MarchOutput {
    pub u: GridFunction,
    pub nu: ReactionMeasure,
    pub stats: NewtonStats,
    /// Lower/upper contact masks for slices `0..=nt`.
    pub active: (Vec<Vec<bool>>, Vec<Vec<bool>>),
}

/// Everything sampled once per (spec, grid).
pub(crate) struct Discretized<'a> {
    pub spec: &'a ProblemSpec,
    pub grid: Grid,
    pub ops: OperatorFamily,
    pub mu: DiscreteMeasure,
    pub coords: Vec<[f64; 2]>,
    pub lower: Option<Vec<Vec<f64>>>,
    pub upper: Option<Vec<Vec<f64>>>,
    pub terminal: Vec<f64>,
}

pub(crate) fn check_grid(spec: &ProblemSpec, grid: &Grid) -> Result<(), SolveError> {
    let d = &spec.domain;
    let same = grid.dim() == d.dim()
        && grid.lengths()[..d.dim()].iter().zip(d.lengths()).all(|(a, b)| (a - b).abs() <= 1e-12 * b)
        && (grid.horizon() - d.horizon()).abs() <= 1e-12 * d.horizon();
    if same {
        Ok(())
    } else {
        Err(SolveError::GridMismatch)
    }
}

impl<'a> Discretized<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: &Grid, extra: Option<&DiscreteMeasure>) -> Result<Self, SolveError> {
        check_grid(spec, grid)?;
        spec.check_structure()?;
        let kappa = spec.driver.kappa();
        if kappa > 0.0 && grid.dt() * kappa > 0.5 {
            return Err(SolveError::TimeStepTooLarge { dt: grid.dt(), kappa });
        }
        let ops = OperatorFamily::build(&spec.coeffs, grid)?;
        let mut mu = project_measure(&spec.measure, grid)?;
        if let Some(e) = extra {
            for (d, x) in mu.density.iter_mut().zip(&e.density) {
                d.iter_mut().zip(x).for_each(|(a, b)| *a += b);
            }
            for a in &e.atoms {
                match mu.atoms.iter_mut().find(|m| m.index == a.index) {
                    Some(m) => m.rho.iter_mut().zip(&a.rho).for_each(|(x, y)| *x += y),
                    None => mu.atoms.push(a.clone()),
                }
            }
            mu.atoms.sort_by_key(|a| a.index);
        }
        let coords = (0..grid.n_interior()).map(|p| grid.interior_coords(p)).collect();
        let sample = |h: &crate::problem::SpaceTimeFn, mode| -> Result<Vec<Vec<f64>>, SolveError> {
            (0..=grid.nt())
                .map(|k| project_interior(|t, x| h(t, x), grid, grid.time(k), mode).map_err(SolveError::from))
                .collect()
        };
        let lower = spec.barriers.lower.as_ref().map(|h| sample(h, SampleMode::LowerBarrier)).transpose()?;
        let upper = spec.barriers.upper.as_ref().map(|h| sample(h, SampleMode::UpperBarrier)).transpose()?;
        let terminal = project_interior(|_, x| spec.terminal_at(x), grid, grid.horizon(), SampleMode::Data)?;
        Ok(Discretized { spec, grid: grid.clone(), ops, mu, coords, lower, upper, terminal })
    }

    pub fn march(&self, lower: Side, upper: Side, method: Method) -> Result<MarchOutput, SolveError> {
        let grid = &self.grid;
        let (nt, n, dim) = (grid.nt(), grid.n_interior(), grid.dim());
        let dt = grid.dt();
        let inv_dt = 1.0 / dt;
        let lower = if self.lower.is_some() { lower } else { Side::Off };
        let upper = if self.upper.is_some() { upper } else { Side::Off };
        let driver = &self.spec.driver;

        let mut slices = vec![Vec::new(); nt + 1];
        let mut pos = vec![vec![0.0; n]; nt];
        let mut neg = vec![vec![0.0; n]; nt];
        let mut atoms: Vec<ReactionAtom> = Vec::new();
        let mut stats = vec![SliceStats { iterations: 0, residual: 0.0, sweeps: 0 }; nt];
        let mut fallbacks = 0;

        // terminal slice
        let mut u = self.terminal.clone();
        if let Some(a) = self.mu.atom_at(nt) {
            u.iter_mut().zip(&a.rho).for_each(|(v, r)| *v += r);
        }
        let mut terminal_violation = (false, false);
        for i in 0..n {
            let h1 = self.lower_at(nt, i);
            let h2 = self.upper_at(nt, i);
            terminal_violation.0 |= u[i] < h1;
            terminal_violation.1 |= u[i] > h2;
        }
        self.clamp_into_atom(nt, &mut u, lower, upper, &mut atoms);
        slices[nt] = u.clone();

        let newton = NewtonOptions::default();
        let pgs = PgsOptions::default();
        let mut rhs = vec![0.0; n];
        for k in (0..nt).rev() {
            let t = grid.time(k);
            let op = self.ops.at(k);
            for i in 0..n {
                rhs[i] = u[i] * inv_dt + self.mu.density[k][i];
            }
            let h1 = self.lower.as_ref().map(|l| l[k].as_slice());
            let h2 = self.upper.as_ref().map(|h| h[k].as_slice());
            let pen_lo = if let Side::Penalty(p) = lower { p } else { 0.0 };
            let pen_hi = if let Side::Penalty(p) = upper { p } else { 0.0 };
            let coords = &self.coords;
            let reaction = move |i: usize, y: f64| -> (f64, f64) {
                let x = &coords[i][..dim];
                let mut v = -driver.eval(t, x, y);
                let mut dv = -driver.dy(t, x, y);
                if pen_lo > 0.0 {
                    let l = h1.unwrap()[i];
                    if l.is_finite() && y - l <= 0.0 {
                        v += pen_lo * (y - l);
                        dv += pen_lo;
                    }
                }
                if pen_hi > 0.0 {
                    let h = h2.unwrap()[i];
                    if h.is_finite() && y - h >= 0.0 {
                        v += pen_hi * (y - h);
                        dv += pen_hi;
                    }
                }
                (v, dv)
            };
            let needs_reaction = !driver.is_zero() || pen_lo > 0.0 || pen_hi > 0.0;
            let sys = SliceSystem {
                op,
                inv_dt,
                rhs: &rhs,
                reaction: if needs_reaction { Some(&reaction) } else { None },
                lower: if lower == Side::Exact { h1 } else { None },
                upper: if upper == Side::Exact { h2 } else { None },
            };
            let mut next = u.clone();
            let mut sweeps = 0;
            if method == Method::PgsThenNewton {
                let out = sys.projected_gauss_seidel(&mut next, &pgs);
                sweeps = out.sweeps;
                if !out.converged {
                    fallbacks += 1;
                    next.copy_from_slice(&u);
                }
            }
            let res = sys.newton(&mut next, &newton);
            let outcome = match res {
                Ok(o) => o,
                Err(f) if method == Method::PgsThenNewton => {
                    return Err(SolveError::StalledIteration { slice: k, merit: f.residual, sweeps })
                }
                Err(f) => {
                    return Err(SolveError::NewtonDivergence {
                        slice: k,
                        node: f.node,
                        residual: f.residual,
                        iterations: f.iterations,
                    })
                }
            };
            stats[k] = SliceStats { iterations: outcome.iterations, residual: outcome.residual, sweeps };

            // reaction densities
            for i in 0..n {
                let y = next[i];
                if !y.is_finite() {
                    return Err(SolveError::NewtonDivergence { slice: k, node: i, residual: f64::INFINITY, iterations: outcome.iterations });
                }
                match lower {
                    Side::Penalty(p) => {
                        let l = h1.unwrap()[i];
                        if l.is_finite() && y < l {
                            pos[k][i] = p * (l - y);
                        }
                    }
                    Side::Exact => {
                        let l = h1.unwrap()[i];
                        let r = sys.residual_at(i, &next);
                        let c = inv_dt - op.diag()[i];
                        if l.is_finite() && r > 0.0 && c * (y - l) <= r {
                            pos[k][i] = r;
                        }
                    }
                    Side::Off => {}
                }
                match upper {
                    Side::Penalty(p) => {
                        let h = h2.unwrap()[i];
                        if h.is_finite() && y > h {
                            neg[k][i] = p * (y - h);
                        }
                    }
                    Side::Exact => {
                        let h = h2.unwrap()[i];
                        let r = sys.residual_at(i, &next);
                        let c = inv_dt - op.diag()[i];
                        if h.is_finite() && r < 0.0 && c * (h - y) <= -r {
                            neg[k][i] = -r;
                        }
                    }
                    Side::Off => {}
                }
                for v in [pos[k][i], neg[k][i]] {
                    if v > PENALTY_OVERFLOW_GUARD || v.is_infinite() {
                        return Err(SolveError::PenaltyOverflow { slice: k, node: i, value: v });
                    }
                }
            }
            if let Some(a) = self.mu.atom_at(k) {
                next.iter_mut().zip(&a.rho).for_each(|(v, r)| *v += r);
                self.clamp_into_atom(k, &mut next, lower, upper, &mut atoms);
            }
            slices[k] = next.clone();
            u = next;
        }

        // terminal incompatibility under penalization: the first step's
        // reaction is the discrete trace of an atom at T
        if nt > 0 {
            let mut moved = ReactionAtom { index: nt, pos: vec![0.0; n], neg: vec![0.0; n] };
            let mut any = false;
            if terminal_violation.0 && matches!(lower, Side::Penalty(_)) {
                moved.pos = std::mem::replace(&mut pos[nt - 1], vec![0.0; n]).iter().map(|v| v * dt).collect();
                any = true;
            }
            if terminal_violation.1 && matches!(upper, Side::Penalty(_)) {
                moved.neg = std::mem::replace(&mut neg[nt - 1], vec![0.0; n]).iter().map(|v| v * dt).collect();
                any = true;
            }
            if any {
                merge_atom(&mut atoms, moved);
            }
        }

        let active = self.contact_masks(&slices);
        let u = GridFunction::from_interior(grid, &slices);
        Ok(MarchOutput {
            u,
            nu: ReactionMeasure::new(grid, pos, neg, atoms),
            stats: NewtonStats::from_slices(&stats, fallbacks),
            active,
        })
    }

    pub fn lower_at(&self, k: usize, i: usize) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, |l| l[k][i])
    }

    pub fn upper_at(&self, k: usize, i: usize) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |h| h[k][i])
    }

    /// Projects `u` onto the exactly enforced barriers on slice `k`; the
    /// projection becomes an atom of `nu`.
    fn clamp_into_atom(&self, k: usize, u: &mut [f64], lower: Side, upper: Side, atoms: &mut Vec<ReactionAtom>) {
        let n = u.len();
        let mut atom = ReactionAtom { index: k, pos: vec![0.0; n], neg: vec![0.0; n] };
        let mut any = false;
        for i in 0..n {
            if lower == Side::Exact && u[i] < self.lower_at(k, i) {
                atom.pos[i] = self.lower_at(k, i) - u[i];
                u[i] = self.lower_at(k, i);
                any = true;
            }
            if upper == Side::Exact && u[i] > self.upper_at(k, i) {
                atom.neg[i] = u[i] - self.upper_at(k, i);
                u[i] = self.upper_at(k, i);
                any = true;
            }
        }
        if any {
            merge_atom(atoms, atom);
        }
    }

    fn contact_masks(&self, slices: &[Vec<f64>]) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
        let lo = slices
            .iter()
            .enumerate()
            .map(|(k, s)| s.iter().enumerate().map(|(i, &v)| v <= self.lower_at(k, i)).collect())
            .collect();
        let hi = slices
            .iter()
            .enumerate()
            .map(|(k, s)| s.iter().enumerate().map(|(i, &v)| v >= self.upper_at(k, i)).collect())
            .collect();
        (lo, hi)
    }
}

fn merge_atom(atoms: &mut Vec<ReactionAtom>, atom: ReactionAtom) {
    match atoms.iter_mut().find(|a| a.index == atom.index) {
        Some(a) => {
            a.pos.iter_mut().zip(&atom.pos).for_each(|(x, y)| *x += y);
            a.neg.iter_mut().zip(&atom.neg).for_each(|(x, y)| *x += y);
        }
        None => atoms.push(atom),
    }
}

/// Unconstrained problem: barriers are ignored.
pub fn solve_cauchy_dirichlet(spec: &ProblemSpec, grid: &Grid) -> Result<GridFunction, SolveError> {
    let d = Discretized::new(spec, grid, None)?;
    Ok(d.march(Side::Off, Side::Off, Method::Newton)?.u)
}

/// Unconstrained problem with the additional discrete data `extra`
/// (densities per step and slice atoms) added to the measure.
pub fn solve_cauchy_dirichlet_with(spec: &ProblemSpec, grid: &Grid, extra: &DiscreteMeasure) -> Result<GridFunction, SolveError> {
    let d = Discretized::new(spec, grid, Some(extra))?;
    Ok(d.march(Side::Off, Side::Off, Method::Newton)?.u)
}

/// Penalized problem with `+ n(u - h1)^-` and `- n(u - h2)^+` added to the
/// source (the second acts where the upper barrier is violated).
pub fn solve_penalized(spec: &ProblemSpec, grid: &Grid, n: f64) -> Result<PenalizedSolution, SolveError> {
    if spec.barriers.is_empty() {
        return Err(SolveError::NoBarrier);
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(SolveError::BadPenaltyList);
    }
    let d = Discretized::new(spec, grid, None)?;
    let out = d.march(Side::Penalty(n), Side::Penalty(n), Method::Newton)?;
    Ok(PenalizedSolution { u: out.u, nu: out.nu, n, newton_stats: out.stats })
}

/// Outer scheme for two barriers: the lower constraint is enforced exactly
/// and only the upper one is penalized, so `u_n` decreases in `n`.
pub fn solve_outer(spec: &ProblemSpec, grid: &Grid, n: f64) -> Result<PenalizedSolution, SolveError> {
    if spec.barriers.upper.is_none() {
        return Err(SolveError::NoBarrier);
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(SolveError::BadPenaltyList);
    }
    let d = Discretized::new(spec, grid, None)?;
    let out = d.march(Side::Exact, Side::Penalty(n), Method::Newton)?;
    Ok(PenalizedSolution { u: out.u, nu: out.nu, n, newton_stats: out.stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PenaltyScheme {
    /// Both present barriers penalized.
    Symmetric,
    /// Lower barrier exact, upper barrier penalized.
    OuterUpper,
}

/// Solves for every `n` (concurrently) and compares with the complementarity
/// oracle on the same grid.
pub fn penalization_sweep(
    spec: &ProblemSpec,
    grid: &Grid,
    n_list: &[f64],
    scheme: PenaltyScheme,
) -> Result<ConvergenceReport, SolveError> {
    if n_list.is_empty() || n_list.iter().any(|&n| !(n > 0.0 && n.is_finite())) || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::BadPenaltyList);
    }
    let oracle = crate::vi::solve_vi(spec, grid)?;
    let solutions: Vec<PenalizedSolution> = n_list
        .par_iter()
        .map(|&n| match scheme {
            PenaltyScheme::Symmetric => solve_penalized(spec, grid, n),
            PenaltyScheme::OuterUpper => solve_outer(spec, grid, n),
        })
        .collect::<Result<_, _>>()?;
    let direction = match scheme {
        PenaltyScheme::OuterUpper => Some(Direction::Nonincreasing),
        PenaltyScheme::Symmetric => match (spec.barriers.lower.is_some(), spec.barriers.upper.is_some()) {
            (true, false) => Some(Direction::Nondecreasing),
            (false, true) => Some(Direction::Nonincreasing),
            _ => None,
        },
    };
    let mut rows = Vec::with_capacity(solutions.len());
    for (idx, sol) in solutions.iter().enumerate() {
        let gap = sol.u.max_abs_diff(&oracle.u).map_err(|_| SolveError::GridMismatch)?;
        let (r_pos, r_neg) = minimality_residual(&sol.u, &sol.nu, &spec.barriers, grid)
            .unwrap_or((f64::NAN, f64::NAN));
        let (count, worst) = match (idx, direction) {
            (0, _) | (_, None) => (0, 0.0),
            (_, Some(dir)) => monotonicity_violations(&solutions[idx - 1].u, &sol.u, dir, 1e-10),
        };
        rows.push(ConvergenceRow {
            n: sol.n,
            sup_gap_to_oracle: gap,
            tv_pos: sol.nu.tv_pos(),
            tv_neg: sol.nu.tv_neg(),
            minimality_pos: r_pos,
            minimality_neg: r_neg,
            monotonicity_violations: count,
            worst_monotonicity_violation: worst,
            newton_iterations: sol.newton_stats.total_iterations,
        });
    }
    let mut report = ConvergenceReport {
        problem: spec.name.clone(),
        scheme,
        direction,
        rows,
        oracle_tv_pos: oracle.nu.tv_pos(),
        oracle_tv_neg: oracle.nu.tv_neg(),
        rate: None,
    };
    report.rate = rate_fit(&report).ok();
    Ok(report)
}

/// Number of nodes where `next` moved against `dir` by more than `tol`, and
/// the largest such move.
pub fn monotonicity_violations(prev: &GridFunction, next: &GridFunction, dir: Direction, tol: f64) -> (usize, f64) {
    let mut count = 0;
    let mut worst = 0.0f64;
    for (a, b) in prev.slices().iter().zip(next.slices()) {
        for (x, y) in a.iter().zip(b) {
            let v = match dir {
                Direction::Nondecreasing => x - y,
                Direction::Nonincreasing => y - x,
            };
            if v > tol {
                count += 1;
            }
            worst = worst.max(v);
        }
    }
    (count, worst)
}
