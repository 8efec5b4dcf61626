//! Exact discrete double-obstacle problem: on each implicit slice, a
//! complementarity problem solved by projected Gauss-Seidel with a
//! semismooth Newton fallback and polish. The reaction measure is the
//! equation residual on the contact sets.

use crate::grid::{Grid, GridFunction};
use crate::measure::{DiscreteMeasure, MeasureError, SampleMode};
use crate::penalized::{solve_cauchy_dirichlet_with, Discretized, Method, NewtonStats, ReactionMeasure, Side, SolveError};
use crate::problem::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution {
    pub u: GridFunction,
    pub nu: ReactionMeasure,
    /// Interior contact masks with the lower barrier, slices `0..=nt`.
    pub active_lower: Vec<Vec<bool>>,
    pub active_upper: Vec<Vec<bool>>,
    pub stats: NewtonStats,
}

pub fn solve_vi(spec: &ProblemSpec, grid: &Grid) -> Result<LcpSolution, SolveError> {
    let d = Discretized::new(spec, grid, None)?;
    let out = d.march(Side::Exact, Side::Exact, Method::PgsThenNewton)?;
    Ok(LcpSolution { u: out.u, nu: out.nu, active_lower: out.active.0, active_upper: out.active.1, stats: out.stats })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvelopeError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("envelope check needs a lower barrier")]
    NoLowerBarrier,
    #[error("envelope violated in trial {trial} on slice {slice} at node {node}: u_vi - w = {gap:e} ({violations} violating trials)")]
    EnvelopeViolation { trial: usize, slice: usize, node: usize, gap: f64, violations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    /// `w >= h1` held at every node, so the envelope inequality applies.
    pub admissible: bool,
    /// `max(u_vi - w)` over all nodes.
    pub worst_gap: f64,
    pub witness: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub trials: usize,
    pub admissible: usize,
    pub violations: usize,
    pub worst_gap: f64,
    pub outcomes: Vec<TrialOutcome>,
}

/// Tolerance of the supersolution inequality `w >= u_vi`.
pub const ENVELOPE_TOL: f64 = 1e-8;

/// Solves the unconstrained problem with data `mu + lambda` (or
/// `mu - nu_minus + lambda` when an upper barrier is present) and compares
/// it with the oracle.
pub fn envelope_trial(
    spec: &ProblemSpec,
    grid: &Grid,
    oracle: &LcpSolution,
    lambda: &DiscreteMeasure,
) -> Result<TrialOutcome, EnvelopeError> {
    let h1 = spec.barriers.lower.as_ref().ok_or(EnvelopeError::NoLowerBarrier)?;
    let mut extra = lambda.clone();
    if spec.barriers.upper.is_some() {
        let neg = oracle.nu.negative_part();
        for (d, m) in extra.density.iter_mut().zip(&neg.density) {
            d.iter_mut().zip(m).for_each(|(a, b)| *a -= b);
        }
        for a in neg.atoms {
            match extra.atoms.iter_mut().find(|e| e.index == a.index) {
                Some(e) => e.rho.iter_mut().zip(&a.rho).for_each(|(x, y)| *x -= y),
                None => extra.atoms.push(crate::measure::DiscreteAtom { rho: a.rho.iter().map(|v| -v).collect(), ..a }),
            }
        }
    }
    let w = solve_cauchy_dirichlet_with(spec, grid, &extra)?;
    let mut admissible = true;
    let mut worst = (f64::NEG_INFINITY, (0, 0));
    for k in 0..=grid.nt() {
        let barrier = crate::measure::project_function(|t, x| h1(t, x), grid, grid.time(k), SampleMode::LowerBarrier)?;
        for idx in 0..grid.n_nodes() {
            if grid.is_boundary(idx) {
                continue;
            }
            let wv = w.slice(k)[idx];
            if wv < barrier[idx] {
                admissible = false;
            }
            let gap = oracle.u.slice(k)[idx] - wv;
            if gap > worst.0 {
                worst = (gap, (k, idx));
            }
        }
    }
    Ok(TrialOutcome { admissible, worst_gap: worst.0, witness: worst.1 })
}

/// Random nonnegative `lambda`: per-node densities `c * U(0.5, 1.5)` with a
/// per-trial level `c` log-uniform in `[0.5, 50]`.
pub fn random_lambda(grid: &Grid, rng: &mut impl Rng) -> DiscreteMeasure {
    let c = (rng.random_range(0.5f64.ln()..50f64.ln())).exp();
    let density =
        (0..grid.nt()).map(|_| (0..grid.n_interior()).map(|_| c * rng.random_range(0.5..1.5)).collect()).collect();
    DiscreteMeasure { density, atoms: Vec::new() }
}

/// Runs `trials` random envelope trials. A violation (an admissible `w`
/// falling below `u_vi - 1e-8`) is reported as an error with its witness.
pub fn envelope_check(spec: &ProblemSpec, grid: &Grid, trials: usize, seed: u64) -> Result<EnvelopeReport, EnvelopeError> {
    if spec.barriers.lower.is_none() {
        return Err(EnvelopeError::NoLowerBarrier);
    }
    let oracle = solve_vi(spec, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas: Vec<DiscreteMeasure> = (0..trials).map(|_| random_lambda(grid, &mut rng)).collect();
    let outcomes = lambdas.iter().map(|l| envelope_trial(spec, grid, &oracle, l)).collect::<Result<Vec<_>, _>>()?;
    let bad: Vec<usize> =
        (0..trials).filter(|&i| outcomes[i].admissible && outcomes[i].worst_gap > ENVELOPE_TOL).collect();
    let worst_gap = outcomes.iter().filter(|o| o.admissible).map(|o| o.worst_gap).fold(f64::NEG_INFINITY, f64::max);
    if let Some(&first) = bad.iter().max_by(|&&a, &&b| outcomes[a].worst_gap.total_cmp(&outcomes[b].worst_gap)) {
        let o = &outcomes[first];
        return Err(EnvelopeError::EnvelopeViolation {
            trial: first,
            slice: o.witness.0,
            node: o.witness.1,
            gap: o.worst_gap,
            violations: bad.len(),
        });
    }
    Ok(EnvelopeReport {
        trials,
        admissible: outcomes.iter().filter(|o| o.admissible).count(),
        violations: 0,
        worst_gap,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalized::solve_cauchy_dirichlet;
    use crate::problem::{BarrierPair, SpaceTimeDomain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sine_heat() -> ProblemSpec {
        ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()))
    }

    #[test]
    fn inactive_barriers_match_unconstrained() {
        let mut spec = sine_heat();
        spec.barriers = BarrierPair::both(Arc::new(|_, _| -5.0), Arc::new(|_, _| 5.0));
        let g = Grid::uniform(&spec.domain, 31, 64).unwrap();
        let vi = solve_vi(&spec, &g).unwrap();
        let free = solve_cauchy_dirichlet(&spec, &g).unwrap();
        assert!(vi.u.max_abs_diff(&free).unwrap() <= 1e-9);
        assert!(vi.nu.is_zero());
    }

    #[test]
    fn equality_obstacle_pins_solution() {
        let mut spec = sine_heat();
        let w = |t: f64, x: f64| (1.0 + t) * (PI * x).sin() * x;
        spec.terminal = Arc::new(move |x: &[f64]| w(1.0, x[0]));
        spec.barriers = BarrierPair::both(Arc::new(move |t, x| w(t, x[0])), Arc::new(move |t, x| w(t, x[0])));
        let g = Grid::uniform(&spec.domain, 15, 16).unwrap();
        let vi = solve_vi(&spec, &g).unwrap();
        for k in 0..=g.nt() {
            for (idx, &v) in vi.u.slice(k).iter().enumerate() {
                assert_eq!(v, w(g.time(k), g.node_coords(idx)[0]) * if g.is_boundary(idx) { 0.0 } else { 1.0 });
            }
        }
        assert!(vi.nu.tv() > 0.0);
        // nu equals the residual of w: u/dt - A u - rhs
        let op = crate::operator::build_operator(&spec.coeffs, &g, 0.0).unwrap();
        let k = 3;
        let uk = vi.u.interior(k);
        let un = vi.u.interior(k + 1);
        let mut au = vec![0.0; uk.len()];
        op.apply(&uk, &mut au);
        for i in 0..uk.len() {
            let r = uk[i] / g.dt() - au[i] - un[i] / g.dt();
            let net = vi.nu.pos(k)[i] - vi.nu.neg(k)[i];
            assert!((r - net).abs() < 1e-8 * (1.0 + r.abs()), "{r} vs {net}");
        }
    }

    #[test]
    fn contact_and_complementarity() {
        let mut spec = sine_heat();
        spec.barriers = BarrierPair::lower(Arc::new(|_, x| 0.3 * (PI * x[0]).sin()));
        let g = Grid::uniform(&spec.domain, 31, 64).unwrap();
        let vi = solve_vi(&spec, &g).unwrap();
        assert!(vi.active_lower[0].iter().any(|&a| a));
        for k in 0..g.nt() {
            let u = vi.u.interior(k);
            for (i, &p) in vi.nu.pos(k).iter().enumerate() {
                let x = g.interior_coords(i)[0];
                let h1 = 0.3 * (PI * x).sin();
                assert!(u[i] >= h1 - 1e-12);
                assert!((u[i] - h1) * p <= 1e-10);
            }
        }
    }

    #[test]
    fn envelope_trials_hold() {
        let mut spec = sine_heat();
        spec.barriers = BarrierPair::lower(Arc::new(|_, x| 0.3 * (PI * x[0]).sin()));
        let g = Grid::uniform(&spec.domain, 15, 32).unwrap();
        let r = envelope_check(&spec, &g, 5, 7).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.admissible > 0);
        // huge constant lambda dominates
        let oracle = solve_vi(&spec, &g).unwrap();
        let big = DiscreteMeasure { density: vec![vec![1e3; 15]; 32], atoms: vec![] };
        let o = envelope_trial(&spec, &g, &oracle, &big).unwrap();
        assert!(o.admissible && o.worst_gap <= 0.0);
    }
}
