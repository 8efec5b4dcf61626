//! Uniform space-time tensor grids and nodal fields on them.
//!
//! A grid with `nx` interior nodes along an axis of length `L` has spacing
//! `h = L / (nx + 1)` and `nx + 2` nodes including the two boundary nodes.
//! Time slices are `t_k = k * dt`, `k = 0..=nt`, with `dt = T / nt`.
//!
//! Solvers work on *interior* vectors (unknowns only); [`GridFunction`]
//! stores every node so that outputs carry the boundary explicitly.

use crate::problem::SpaceTimeDomain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("need at least 3 interior nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("need at least one time step")]
    NoTimeSteps,
    #[error("grid has {grid} axes but the domain has {domain}")]
    DimensionMismatch { grid: usize, domain: usize },
    #[error("grid functions live on different grids")]
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    nx: [usize; 2],
    lengths: [f64; 2],
    h: [f64; 2],
    nt: usize,
    dt: f64,
    horizon: f64,
}

impl Grid {
    /// Same interior count on every axis.
    pub fn uniform(domain: &SpaceTimeDomain, nx: usize, nt: usize) -> Result<Self, GridError> {
        let counts = vec![nx; domain.dim()];
        Self::new(domain, &counts, nt)
    }

    pub fn new(domain: &SpaceTimeDomain, nx: &[usize], nt: usize) -> Result<Self, GridError> {
        if nx.len() != domain.dim() {
            return Err(GridError::DimensionMismatch { grid: nx.len(), domain: domain.dim() });
        }
        if let Some(&bad) = nx.iter().find(|&&n| n < 3) {
            return Err(GridError::TooFewNodes(bad));
        }
        if nt == 0 {
            return Err(GridError::NoTimeSteps);
        }
        let mut counts = [1usize; 2];
        let mut lengths = [1.0; 2];
        let mut h = [1.0; 2];
        for a in 0..domain.dim() {
            counts[a] = nx[a];
            lengths[a] = domain.lengths()[a];
            h[a] = lengths[a] / (nx[a] + 1) as f64;
        }
        Ok(Grid {
            dim: domain.dim(),
            nx: counts,
            lengths,
            h,
            nt,
            dt: domain.horizon() / nt as f64,
            horizon: domain.horizon(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> &[usize] {
        &self.nx[..self.dim]
    }
    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }
    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn time(&self, k: usize) -> f64 {
        if k == self.nt {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Volume of one interior dual cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// Nodes per axis including boundary nodes.
    pub fn axis_nodes(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.nx[axis] + 2
        } else {
            1
        }
    }

    pub fn n_nodes(&self) -> usize {
        (0..self.dim).map(|a| self.axis_nodes(a)).product()
    }

    pub fn n_interior(&self) -> usize {
        self.nx().iter().product()
    }

    /// Axis indices `(i, j)` of a full node index.
    pub fn node_ij(&self, idx: usize) -> [usize; 2] {
        let n0 = self.axis_nodes(0);
        [idx % n0, idx / n0]
    }

    pub fn node_index(&self, ij: [usize; 2]) -> usize {
        ij[0] + ij[1] * self.axis_nodes(0)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let ij = self.node_ij(idx);
        (0..self.dim).any(|a| ij[a] == 0 || ij[a] == self.nx[a] + 1)
    }

    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        let ij = self.node_ij(idx);
        let mut c = [0.0; 2];
        for a in 0..self.dim {
            c[a] = if ij[a] == self.nx[a] + 1 { self.lengths[a] } else { ij[a] as f64 * self.h[a] };
        }
        c
    }

    /// Full node index of interior unknown `p`.
    pub fn interior_to_node(&self, p: usize) -> usize {
        if self.dim == 1 {
            p + 1
        } else {
            let i = p % self.nx[0];
            let j = p / self.nx[0];
            self.node_index([i + 1, j + 1])
        }
    }

    /// Interior unknown index of a full node index, if interior.
    pub fn node_to_interior(&self, idx: usize) -> Option<usize> {
        if self.is_boundary(idx) {
            return None;
        }
        let ij = self.node_ij(idx);
        Some(if self.dim == 1 { ij[0] - 1 } else { (ij[0] - 1) + (ij[1] - 1) * self.nx[0] })
    }

    pub fn interior_coords(&self, p: usize) -> [f64; 2] {
        self.node_coords(self.interior_to_node(p))
    }

    /// Dual-cell volume of a full node, clipped to the domain (boundary
    /// nodes get half cells per axis).
    pub fn dual_volume(&self, idx: usize) -> f64 {
        let ij = self.node_ij(idx);
        (0..self.dim)
            .map(|a| if ij[a] == 0 || ij[a] == self.nx[a] + 1 { 0.5 * self.h[a] } else { self.h[a] })
            .product()
    }

    /// Index of the time slice nearest to `t`; exact halfway ties go to the
    /// earlier slice.
    pub fn nearest_slice(&self, t: f64) -> usize {
        let r = t / self.dt;
        let lo = r.floor();
        let frac = r - lo;
        // relative slack absorbs representation error of t and dt
        let k = if frac > 0.5 + 1e-9 { lo + 1.0 } else { lo };
        (k.max(0.0) as usize).min(self.nt)
    }

    /// Slice whose step `[t_k, t_{k+1})` contains `t`.
    pub fn step_containing(&self, t: f64) -> usize {
        let k = (t / self.dt + 1e-9).floor();
        (k.max(0.0) as usize).min(self.nt.saturating_sub(1))
    }

    pub fn is_inside(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| x[a] > 0.0 && x[a] < self.lengths[a])
    }

    /// Multilinear interpolation of an interior vector (zero boundary) at `x`.
    pub fn interpolate(&self, interior: &[f64], x: &[f64]) -> f64 {
        let mut base = [0usize; 2];
        let mut w = [0.0f64; 2];
        for a in 0..self.dim {
            let s = (x[a] / self.h[a]).clamp(0.0, (self.nx[a] + 1) as f64);
            let i = (s.floor() as usize).min(self.nx[a]);
            base[a] = i;
            w[a] = s - i as f64;
        }
        let value = |i: usize, j: usize| -> f64 {
            if i == 0 || i > self.nx[0] {
                return 0.0;
            }
            if self.dim == 1 {
                return interior[i - 1];
            }
            if j == 0 || j > self.nx[1] {
                return 0.0;
            }
            interior[(i - 1) + (j - 1) * self.nx[0]]
        };
        if self.dim == 1 {
            let i = base[0];
            (1.0 - w[0]) * value(i, 0) + w[0] * value(i + 1, 0)
        } else {
            let (i, j) = (base[0], base[1]);
            (1.0 - w[0]) * (1.0 - w[1]) * value(i, j)
                + w[0] * (1.0 - w[1]) * value(i + 1, j)
                + (1.0 - w[0]) * w[1] * value(i, j + 1)
                + w[0] * w[1] * value(i + 1, j + 1)
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.nx == other.nx && self.nt == other.nt && self.lengths == other.lengths
    }
}

/// Values on every node of every time slice (`nt + 1` slices).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    slices: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        GridFunction { grid: grid.clone(), slices: vec![vec![0.0; grid.n_nodes()]; grid.nt() + 1] }
    }

    /// Builds from interior vectors, one per slice; boundary nodes are 0.
    pub fn from_interior(grid: &Grid, interior: &[Vec<f64>]) -> Self {
        let mut g = Self::zeros(grid);
        for (k, v) in interior.iter().enumerate() {
            g.set_interior(k, v);
        }
        g
    }

    pub fn from_slices(grid: &Grid, slices: Vec<Vec<f64>>) -> Result<Self, GridError> {
        if slices.len() != grid.nt() + 1 || slices.iter().any(|s| s.len() != grid.n_nodes()) {
            return Err(GridError::Mismatch);
        }
        Ok(GridFunction { grid: grid.clone(), slices })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }
    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.slices[k]
    }
    pub fn slices(&self) -> &[Vec<f64>] {
        &self.slices
    }

    pub fn interior(&self, k: usize) -> Vec<f64> {
        (0..self.grid.n_interior()).map(|p| self.slices[k][self.grid.interior_to_node(p)]).collect()
    }

    pub fn set_interior(&mut self, k: usize, values: &[f64]) {
        for (p, v) in values.iter().enumerate() {
            let idx = self.grid.interior_to_node(p);
            self.slices[k][idx] = *v;
        }
    }

    /// Value at `x` on slice `k` by multilinear interpolation of interior values.
    pub fn interpolate(&self, k: usize, x: &[f64]) -> f64 {
        let mut base = [0usize; 2];
        let mut w = [0.0f64; 2];
        let g = &self.grid;
        for a in 0..g.dim() {
            let s = (x[a] / g.h()[a]).clamp(0.0, (g.nx()[a] + 1) as f64);
            let i = (s.floor() as usize).min(g.nx()[a]);
            base[a] = i;
            w[a] = s - i as f64;
        }
        let s = &self.slices[k];
        if g.dim() == 1 {
            (1.0 - w[0]) * s[base[0]] + w[0] * s[base[0] + 1]
        } else {
            let at = |i: usize, j: usize| s[g.node_index([i, j])];
            let (i, j) = (base[0], base[1]);
            (1.0 - w[0]) * (1.0 - w[1]) * at(i, j)
                + w[0] * (1.0 - w[1]) * at(i + 1, j)
                + (1.0 - w[0]) * w[1] * at(i, j + 1)
                + w[0] * w[1] * at(i + 1, j + 1)
        }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64, GridError> {
        if !self.grid.same_shape(&other.grid) {
            return Err(GridError::Mismatch);
        }
        Ok(self
            .slices
            .iter()
            .zip(&other.slices)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            slices: self.slices.iter().map(|s| s.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().flatten().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit1(nx: usize, nt: usize) -> Grid {
        let d = SpaceTimeDomain::new(1, &[1.0], 1.0).unwrap();
        Grid::uniform(&d, nx, nt).unwrap()
    }

    #[test]
    fn spacing_and_coordinates() {
        let g = unit1(3, 4);
        assert_eq!(g.h(), &[0.25]);
        assert_eq!(g.n_nodes(), 5);
        assert_eq!(g.interior_coords(0)[0], 0.25);
        assert_eq!(g.interior_coords(2)[0], 0.75);
        assert!(g.is_boundary(0) && g.is_boundary(4) && !g.is_boundary(2));
        assert_eq!(g.node_coords(4)[0], 1.0);
        assert_eq!(g.time(4), 1.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        let d = SpaceTimeDomain::new(1, &[1.0], 1.0).unwrap();
        assert_eq!(Grid::uniform(&d, 2, 4), Err(GridError::TooFewNodes(2)));
        assert_eq!(Grid::uniform(&d, 4, 0), Err(GridError::NoTimeSteps));
    }

    #[test]
    fn nearest_slice_ties_go_earlier() {
        let g = unit1(3, 10);
        assert_eq!(g.nearest_slice(0.5), 5);
        assert_eq!(g.nearest_slice(0.55), 5);
        assert_eq!(g.nearest_slice(0.56), 6);
        assert_eq!(g.nearest_slice(1.0), 10);
    }

    #[test]
    fn index_maps_2d() {
        let d = SpaceTimeDomain::new(2, &[1.0, 2.0], 1.0).unwrap();
        let g = Grid::new(&d, &[3, 4], 2).unwrap();
        assert_eq!(g.n_nodes(), 5 * 6);
        assert_eq!(g.n_interior(), 12);
        for p in 0..g.n_interior() {
            let idx = g.interior_to_node(p);
            assert_eq!(g.node_to_interior(idx), Some(p));
        }
        assert_eq!(g.h(), &[0.25, 0.4]);
        let c = g.interior_coords(4);
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let g = unit1(3, 1);
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(g.interpolate(&v, &[0.5]), 2.0);
        assert_eq!(g.interpolate(&v, &[0.625]), 2.5);
        assert_eq!(g.interpolate(&v, &[0.125]), 0.5);
        let f = GridFunction::from_interior(&g, &[v.clone(), v]);
        assert_eq!(f.interpolate(1, &[0.875]), 1.5);
    }
}
