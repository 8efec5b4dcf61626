//! Explicit backward dynamic program for the two-barrier game value:
//! `V <- clamp(V + tau (A V + f(t, x, V) + g), h1, h2)` over sub-steps `tau`
//! small enough for stability, with atoms added at their slices.

use crate::grid::{Grid, GridFunction};
use crate::measure::{project_interior, project_measure, SampleMode};
use crate::operator::OperatorFamily;
use crate::penalized::{check_grid, SolveError};
use crate::problem::ProblemSpec;

/// Largest number of sub-steps allowed per time step.
pub const MAX_SUBSTEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynkinError {
    #[error("explicit scheme needs {needed} sub-steps per step (limit {MAX_SUBSTEPS})")]
    StabilityViolation { needed: usize },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Sub-steps per time step so that `tau <= h^2 / (2 Lambda dim)`.
pub fn substeps(spec: &ProblemSpec, grid: &Grid) -> usize {
    let hmin = grid.h().iter().cloned().fold(f64::INFINITY, f64::min);
    let tau_max = hmin * hmin / (2.0 * spec.coeffs.lambda() * grid.dim() as f64);
    (grid.dt() / tau_max).ceil().max(1.0) as usize
}

pub fn dynkin_value(spec: &ProblemSpec, grid: &Grid) -> Result<GridFunction, DynkinError> {
    check_grid(spec, grid)?;
    let m = substeps(spec, grid);
    if m > MAX_SUBSTEPS {
        return Err(DynkinError::StabilityViolation { needed: m });
    }
    let ops = OperatorFamily::build(&spec.coeffs, grid).map_err(SolveError::from)?;
    let mu = project_measure(&spec.measure, grid).map_err(SolveError::from)?;
    let n = grid.n_interior();
    let dim = grid.dim();
    let nt = grid.nt();
    let coords: Vec<[f64; 2]> = (0..n).map(|p| grid.interior_coords(p)).collect();
    let barrier = |k: usize| -> Result<(Vec<f64>, Vec<f64>), SolveError> {
        let t = grid.time(k);
        let lo = match &spec.barriers.lower {
            Some(h) => project_interior(|t, x| h(t, x), grid, t, SampleMode::LowerBarrier)?,
            None => vec![f64::NEG_INFINITY; n],
        };
        let hi = match &spec.barriers.upper {
            Some(h) => project_interior(|t, x| h(t, x), grid, t, SampleMode::UpperBarrier)?,
            None => vec![f64::INFINITY; n],
        };
        Ok((lo, hi))
    };

    let mut slices = vec![Vec::new(); nt + 1];
    let mut v = project_interior(|_, x| spec.terminal_at(x), grid, grid.horizon(), SampleMode::Data).map_err(SolveError::from)?;
    let add_atom = |k: usize, v: &mut [f64]| {
        if let Some(a) = mu.atom_at(k) {
            v.iter_mut().zip(&a.rho).for_each(|(x, r)| *x += r);
        }
    };
    add_atom(nt, &mut v);
    let (lo, hi) = barrier(nt)?;
    for i in 0..n {
        v[i] = clamp(v[i], lo[i], hi[i]);
    }
    slices[nt] = v.clone();

    let tau = grid.dt() / m as f64;
    let mut av = vec![0.0; n];
    for k in (0..nt).rev() {
        let t = grid.time(k);
        let op = ops.at(k);
        let (lo, hi) = barrier(k)?;
        let g = &mu.density[k];
        for _ in 0..m {
            op.apply(&v, &mut av);
            for i in 0..n {
                let f = spec.driver.eval(t, &coords[i][..dim], v[i]);
                v[i] = clamp(v[i] + tau * (av[i] + f + g[i]), lo[i], hi[i]);
            }
        }
        if mu.atom_at(k).is_some() {
            add_atom(k, &mut v);
            for i in 0..n {
                v[i] = clamp(v[i], lo[i], hi[i]);
            }
        }
        slices[k] = v.clone();
    }
    Ok(GridFunction::from_interior(grid, &slices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalized::solve_cauchy_dirichlet;
    use crate::problem::{BarrierPair, SpaceTimeDomain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn unconstrained_matches_implicit() {
        let spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()));
        // both schemes are first order in time with opposite error signs
        let g = Grid::uniform(&spec.domain, 31, 512).unwrap();
        let v = dynkin_value(&spec, &g).unwrap();
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        assert!(v.max_abs_diff(&u).unwrap() < 5e-3);
    }

    #[test]
    fn pinned_value_and_barriers_respected() {
        let mut spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|x: &[f64]| (PI * x[0]).sin()));
        let w = |x: f64| 0.3 * (PI * x).sin();
        spec.terminal = Arc::new(move |x: &[f64]| w(x[0]));
        spec.barriers = BarrierPair::both(Arc::new(move |_, x| w(x[0])), Arc::new(move |_, x| w(x[0])));
        let g = Grid::uniform(&spec.domain, 15, 16).unwrap();
        let v = dynkin_value(&spec, &g).unwrap();
        for k in 0..=g.nt() {
            for p in 0..g.n_interior() {
                assert_eq!(v.interior(k)[p], w(g.interior_coords(p)[0]));
            }
        }
    }

    #[test]
    fn substep_budget() {
        let spec = ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), Arc::new(|_: &[f64]| 0.0));
        let g = Grid::uniform(&spec.domain, 4000, 1).unwrap();
        assert!(matches!(dynkin_value(&spec, &g), Err(DynkinError::StabilityViolation { .. })));
    }
}
