//! Sampling functions and measures onto a grid.

use crate::grid::{Grid, GridFunction};
use crate::problem::MeasureData;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("invalid sample {value} at t={t}, x={x:?}")]
    InvalidSample { t: f64, x: Vec<f64>, value: f64 },
}

/// How nodal samples are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Solution-space function: boundary nodes are set to 0.
    Solution,
    /// Data sampled verbatim everywhere; must be finite.
    Data,
    /// May take `-inf`.
    LowerBarrier,
    /// May take `+inf`.
    UpperBarrier,
}

fn admissible(v: f64, mode: SampleMode) -> bool {
    match mode {
        SampleMode::Solution | SampleMode::Data => v.is_finite(),
        SampleMode::LowerBarrier => !v.is_nan() && v != f64::INFINITY,
        SampleMode::UpperBarrier => !v.is_nan() && v != f64::NEG_INFINITY,
    }
}

/// Nodal samples of `f(t, .)` on every node of `grid`.
pub fn project_function(
    f: impl Fn(f64, &[f64]) -> f64,
    grid: &Grid,
    t: f64,
    mode: SampleMode,
) -> Result<Vec<f64>, MeasureError> {
    let dim = grid.dim();
    (0..grid.n_nodes())
        .map(|i| {
            if mode == SampleMode::Solution && grid.is_boundary(i) {
                return Ok(0.0);
            }
            let x = grid.node_coords(i);
            let v = f(t, &x[..dim]);
            if admissible(v, mode) {
                Ok(v)
            } else {
                Err(MeasureError::InvalidSample { t, x: x[..dim].to_vec(), value: v })
            }
        })
        .collect()
}

/// [`project_function`] at every time slice.
pub fn project_space_time(
    f: impl Fn(f64, &[f64]) -> f64,
    grid: &Grid,
    mode: SampleMode,
) -> Result<GridFunction, MeasureError> {
    let slices = (0..=grid.nt())
        .map(|k| project_function(&f, grid, grid.time(k), mode))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridFunction::from_slices(grid, slices).expect("slice count matches grid"))
}

/// Interior samples of `f(t, .)`.
pub fn project_interior(
    f: impl Fn(f64, &[f64]) -> f64,
    grid: &Grid,
    t: f64,
    mode: SampleMode,
) -> Result<Vec<f64>, MeasureError> {
    let dim = grid.dim();
    (0..grid.n_interior())
        .map(|p| {
            let x = grid.interior_coords(p);
            let v = f(t, &x[..dim]);
            if admissible(v, mode) {
                Ok(v)
            } else {
                Err(MeasureError::InvalidSample { t, x: x[..dim].to_vec(), value: v })
            }
        })
        .collect()
}

/// A time atom moved onto slice `index`, with interior nodal density.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtom {
    pub index: usize,
    pub t: f64,
    pub rho: Vec<f64>,
}

/// Grid form of [`MeasureData`]: `density[k]` is the interior density used
/// by the implicit step on `[t_k, t_{k+1}]`, `k = 0..nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub density: Vec<Vec<f64>>,
    pub atoms: Vec<DiscreteAtom>,
}

impl DiscreteMeasure {
    pub fn zero(grid: &Grid) -> Self {
        DiscreteMeasure { density: vec![vec![0.0; grid.n_interior()]; grid.nt()], atoms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.rho.iter().all(|&v| v == 0.0))
            && self.density.iter().all(|s| s.iter().all(|&v| v == 0.0))
    }

    pub fn atom_at(&self, index: usize) -> Option<&DiscreteAtom> {
        self.atoms.iter().find(|a| a.index == index)
    }

    /// Total mass (signed) with interior cell volumes.
    pub fn mass(&self, grid: &Grid) -> f64 {
        let vol = grid.cell_volume();
        let d: f64 = self.density.iter().flatten().sum::<f64>() * vol * grid.dt();
        let a: f64 = self.atoms.iter().flat_map(|a| a.rho.iter()).sum::<f64>() * vol;
        d + a
    }
}

/// Cell averages of the density (2-point Gauss per axis and in time) and
/// nodal samples of each atom, snapped to the nearest slice with ties going
/// to the earlier one. Atoms landing on the same slice are summed.
pub fn project_measure(measure: &MeasureData, grid: &Grid) -> Result<DiscreteMeasure, MeasureError> {
    let mut out = DiscreteMeasure::zero(grid);
    let dim = grid.dim();
    if let Some(g) = measure.density() {
        let q = 0.5 / 3f64.sqrt();
        let offsets = [-q, q];
        let h = grid.h();
        for k in 0..grid.nt() {
            let t0 = grid.time(k);
            let tk = grid.time(k + 1) - t0;
            for p in 0..grid.n_interior() {
                let c = grid.interior_coords(p);
                let mut sum = 0.0;
                let mut count = 0.0;
                for &ot in &offsets {
                    let t = t0 + (0.5 + ot) * tk;
                    for &o0 in &offsets {
                        let ys: &[f64] = if dim == 2 { &offsets } else { &[0.0] };
                        for &o1 in ys {
                            let x = [c[0] + o0 * h[0], if dim == 2 { c[1] + o1 * h[1] } else { 0.0 }];
                            let v = g(t, &x[..dim]);
                            if !v.is_finite() {
                                return Err(MeasureError::InvalidSample { t, x: x[..dim].to_vec(), value: v });
                            }
                            sum += v;
                            count += 1.0;
                        }
                    }
                }
                out.density[k][p] = sum / count;
            }
        }
    }
    for a in measure.atoms() {
        let index = grid.nearest_slice(a.t);
        let rho = project_interior(|_, x| (a.rho)(x), grid, a.t, SampleMode::Data)?;
        if let Some(existing) = out.atoms.iter_mut().find(|e| e.index == index) {
            existing.rho.iter_mut().zip(&rho).for_each(|(e, r)| *e += r);
        } else {
            out.atoms.push(DiscreteAtom { index, t: a.t, rho });
        }
    }
    out.atoms.sort_by_key(|a| a.index);
    Ok(out)
}
