//! Cross-module invariants checked with proptest.

use proptest::prelude::*;
use crate::diagnostics::{comparison_trial, entropy_residual, minimality_residual, EntropyTest};
use crate::dynkin::dynkin_value;
use crate::grid::Grid;
use crate::operator::build_operator;
use crate::output::num;
use crate::penalized::{solve_cauchy_dirichlet, solve_penalized};
use crate::problem::{validate, Atom, BarrierPair, CoefficientField, MeasureData, ProblemSpec, Smoothness, SpaceTimeDomain, Tensor};
use crate::stochastic::simulate_paths;
use crate::vi::solve_vi;
use std::f64::consts::PI;
use std::sync::Arc;

fn sine(amp: f64, m: f64) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
    Arc::new(move |x: &[f64]| amp * (m * PI * x[0]).sin())
}

fn base(amp: f64) -> ProblemSpec {
    ProblemSpec::heat(SpaceTimeDomain::unit_interval(1.0), sine(amp, 1.0))
}

fn small_grid(spec: &ProblemSpec) -> Grid {
    Grid::uniform(&spec.domain, 15, 16).unwrap()
}

fn two_barrier(amp: f64, lo: f64, hi: f64) -> ProblemSpec {
    let mut spec = base(amp);
    spec.measure = MeasureData::new(Some(Arc::new(|_, x: &[f64]| 3.0 * (2.0 * PI * x[0]).sin())), vec![]).unwrap();
    spec.barriers = BarrierPair::both(
        Arc::new(move |_, x: &[f64]| -lo * (PI * x[0]).sin()),
        Arc::new(move |_, x: &[f64]| hi * (PI * x[0]).sin()),
    );
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn csv_numbers_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn validate_is_pure(amp in -2.0f64..2.0, level in -1.0f64..0.5) {
        let mut spec = base(amp);
        spec.barriers = BarrierPair::lower(Arc::new(move |_, _| level));
        let g = small_grid(&spec);
        prop_assert_eq!(validate(&spec, &g), validate(&spec, &g));
    }

    #[test]
    fn operator_eigenvectors(c in 0.1f64..5.0, mode in 1usize..8, n in 8usize..40) {
        let spec = base(1.0);
        let coeffs = CoefficientField::constant(Tensor::scalar(c), c.max(1.0 / c)).unwrap();
        let g = Grid::uniform(&spec.domain, n, 1).unwrap();
        let op = build_operator(&coeffs, &g, 0.0).unwrap();
        let h = g.h()[0];
        let v: Vec<f64> = (0..n).map(|p| (mode as f64 * PI * g.interior_coords(p)[0]).sin()).collect();
        let mut av = vec![0.0; n];
        op.apply(&v, &mut av);
        let lambda = -(c / 2.0) * (4.0 / (h * h)) * (mode as f64 * PI * h / 2.0).sin().powi(2);
        for i in 0..n {
            prop_assert!((av[i] - lambda * v[i]).abs() <= 1e-12 * lambda.abs().max(1.0) * 10.0);
        }
    }

    #[test]
    fn operator_symmetric_for_rough_coefficients(jump in 0.2f64..5.0, at in 0.1f64..0.9) {
        let spec = base(1.0);
        let lambda = jump.max(1.0 / jump).max(1.0);
        let a = Arc::new(move |_: f64, x: &[f64]| Tensor::scalar(if x[0] < at { 1.0 } else { jump }));
        let coeffs = CoefficientField::new(a, lambda, Smoothness::Measurable, false).unwrap();
        let g = Grid::uniform(&spec.domain, 20, 1).unwrap();
        prop_assert!(build_operator(&coeffs, &g, 0.0).unwrap().is_symmetric());
    }

    #[test]
    fn comparison_for_dominated_data(amp in -1.0f64..1.0, d_phi in 0.0f64..0.5, d_g in 0.0f64..3.0, d_h in 0.0f64..0.05) {
        let lo = two_barrier(amp * 0.05, 0.06, 0.06);
        let mut hi = lo.clone();
        let phi = lo.terminal.clone();
        hi.terminal = Arc::new(move |x| phi(x) + d_phi * (PI * x[0]).sin());
        hi.measure = MeasureData::new(Some(Arc::new(move |_, x: &[f64]| 3.0 * (2.0 * PI * x[0]).sin() + d_g)), vec![]).unwrap();
        hi.barriers = BarrierPair::both(
            Arc::new(move |_, x: &[f64]| -0.06 * (PI * x[0]).sin() + d_h),
            Arc::new(move |_, x: &[f64]| 0.06 * (PI * x[0]).sin() + 2.0 * d_h),
        );
        let r = comparison_trial(&lo, &hi, &small_grid(&lo)).unwrap();
        prop_assert_eq!(r.violations, 0);
    }

    #[test]
    fn reaction_parts_are_mutually_singular(amp in -1.0f64..1.0, lo in 0.01f64..0.2, hi in 0.01f64..0.2, n in 1.0f64..1e4) {
        let spec = two_barrier(amp, lo, hi);
        let g = small_grid(&spec);
        let vi = solve_vi(&spec, &g).unwrap();
        let pen = solve_penalized(&spec, &g, n).unwrap();
        for nu in [&vi.nu, &pen.nu] {
            for k in 0..g.nt() {
                for (p, q) in nu.pos(k).iter().zip(nu.neg(k)) {
                    prop_assert_eq!(p * q, 0.0);
                }
            }
        }
    }

    #[test]
    fn complementarity_is_exact(amp in 0.0f64..2.0, level in 0.0f64..0.8) {
        let mut spec = base(amp);
        spec.barriers = BarrierPair::lower(Arc::new(move |_, x: &[f64]| level * (PI * x[0]).sin()));
        let g = small_grid(&spec);
        let vi = solve_vi(&spec, &g).unwrap();
        for k in 0..g.nt() {
            let u = vi.u.interior(k);
            for (i, &p) in vi.nu.pos(k).iter().enumerate() {
                let h1 = level * (PI * g.interior_coords(i)[0]).sin();
                prop_assert!(p >= 0.0 && u[i] >= h1 - 1e-12);
                prop_assert!((u[i] - h1) * p <= 1e-9 * (1.0 + p));
            }
        }
        let (rp, rn) = minimality_residual(&vi.u, &vi.nu, &spec.barriers, &g).unwrap();
        prop_assert!(rp >= -1e-12 && rn == 0.0);
    }

    #[test]
    fn atom_jump_is_exact(amp in -3.0f64..3.0, t in 0.05f64..0.95, m in 1.0f64..4.0) {
        let mut with = base(1.0);
        with.measure = MeasureData::new(None, vec![Atom { t, rho: sine(amp, m) }]).unwrap();
        let without = base(1.0);
        let g = small_grid(&with);
        let a = solve_cauchy_dirichlet(&with, &g).unwrap();
        let b = solve_cauchy_dirichlet(&without, &g).unwrap();
        let k = g.nearest_slice(t);
        for p in 0..g.n_interior() {
            let x = g.interior_coords(p);
            let jump = a.interior(k)[p] - b.interior(k)[p];
            prop_assert!((jump - amp * (m * PI * x[0]).sin()).abs() <= 1e-8);
        }
    }

    #[test]
    fn penalized_increases_with_n(level in 0.0f64..0.6, n in 1.0f64..1e3) {
        let mut spec = base(1.0);
        spec.barriers = BarrierPair::lower(Arc::new(move |_, x: &[f64]| if (0.3..0.7).contains(&x[0]) { level } else { f64::NEG_INFINITY }));
        let g = small_grid(&spec);
        let a = solve_penalized(&spec, &g, n).unwrap();
        let b = solve_penalized(&spec, &g, 4.0 * n).unwrap();
        for (x, y) in a.u.slices().iter().flatten().zip(b.u.slices().iter().flatten()) {
            prop_assert!(y >= &(x - 1e-10));
        }
    }

    #[test]
    fn dynkin_respects_barriers(amp in -1.0f64..1.0, lo in 0.01f64..0.2, hi in 0.01f64..0.2) {
        let spec = two_barrier(amp, lo, hi);
        let g = small_grid(&spec);
        let v = dynkin_value(&spec, &g).unwrap();
        for k in 0..=g.nt() {
            for (p, &val) in v.interior(k).iter().enumerate() {
                let s = (PI * g.interior_coords(p)[0]).sin();
                prop_assert!(val >= -lo * s && val <= hi * s);
            }
        }
    }

    #[test]
    fn path_bundles_depend_only_on_seed(seed in any::<u64>(), s in 0.0f64..0.9) {
        let spec = base(1.0);
        let a = simulate_paths(&spec, s, &[0.4], 20, 1e-2, seed).unwrap();
        let b = simulate_paths(&spec, s, &[0.4], 20, 1e-2, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn entropy_margin_saturates_for_shifted_eta(shift in 10.0f64..100.0, k in 0.1f64..1.0) {
        let spec = base(1.0);
        let g = small_grid(&spec);
        let u = solve_cauchy_dirichlet(&spec, &g).unwrap();
        let test = |c: f64| EntropyTest { label: format!("{c}"), eta: Arc::new(move |_, x: &[f64]| c * (PI * x[0]).sin().powi(2) + c), k };
        let r = entropy_residual(&u, None, &spec, &g, &[test(shift), test(2.0 * shift)]).unwrap();
        prop_assert!((r.margins[0].2 - r.margins[1].2).abs() <= 1e-9 * (1.0 + r.margins[0].2.abs()));
    }
}
