//! CSV tables and JSON summaries. Numbers in CSV are written with 17
//! significant digits so that they round-trip.

use crate::grid::{Grid, GridFunction};
use crate::penalized::ReactionMeasure;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("writing {path}: {msg}")]
    Write { path: String, msg: String },
}

fn werr(path: &Path, e: impl std::fmt::Display) -> OutputError {
    OutputError::Write { path: path.display().to_string(), msg: e.to_string() }
}

/// `{:.16e}`: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A CSV table with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| werr(path, e))?;
        w.write_record(&self.header).map_err(|e| werr(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| werr(path, e))?;
        }
        w.flush().map_err(|e| werr(path, e))
    }
}

fn coord_header(grid: &Grid) -> Vec<&'static str> {
    if grid.dim() == 1 {
        vec!["t", "x"]
    } else {
        vec!["t", "x1", "x2"]
    }
}

fn coords(grid: &Grid, k: usize, idx: usize) -> Vec<String> {
    let x = grid.node_coords(idx);
    let mut row = vec![num(grid.time(k))];
    row.extend(x[..grid.dim()].iter().map(|&v| num(v)));
    row
}

/// One row per node and slice: `t, x.., u` and, with a reaction measure,
/// its density parts on the step starting at `t` and its atoms on the slice.
pub fn solution_table(u: &GridFunction, nu: Option<&ReactionMeasure>) -> Table {
    let grid = u.grid();
    let mut header = coord_header(grid);
    header.push("u");
    if nu.is_some() {
        header.extend(["nu_pos", "nu_neg", "nu_atom_pos", "nu_atom_neg"]);
    }
    let mut table = Table::new(&header);
    for k in 0..=grid.nt() {
        for idx in 0..grid.n_nodes() {
            let mut row = coords(grid, k, idx);
            row.push(num(u.slice(k)[idx]));
            if let Some(nu) = nu {
                let p = grid.node_to_interior(idx);
                let dens = |v: &[f64]| p.filter(|_| k < grid.nt()).map_or(0.0, |p| v[p]);
                let (dp, dn) = if k < grid.nt() { (dens(nu.pos(k)), dens(nu.neg(k))) } else { (0.0, 0.0) };
                let (ap, an) = match (nu.atom_at(k), p) {
                    (Some(a), Some(p)) => (a.pos[p], a.neg[p]),
                    _ => (0.0, 0.0),
                };
                row.extend([num(dp), num(dn), num(ap), num(an)]);
            }
            table.push(row);
        }
    }
    table
}

/// Contact masks as 0/1 columns.
pub fn active_set_table(grid: &Grid, lower: &[Vec<bool>], upper: &[Vec<bool>]) -> Table {
    let mut header = coord_header(grid);
    header.extend(["lower_active", "upper_active"]);
    let mut table = Table::new(&header);
    for k in 0..=grid.nt() {
        for p in 0..grid.n_interior() {
            let mut row = coords(grid, k, grid.interior_to_node(p));
            let flag = |m: &[Vec<bool>]| if m.get(k).is_some_and(|s| s[p]) { "1" } else { "0" }.to_string();
            row.push(flag(lower));
            row.push(flag(upper));
            table.push(row);
        }
    }
    table
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| werr(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| werr(path, e))
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub problem: String,
    pub config_sha256: String,
    pub threads: usize,
    pub outputs: Vec<String>,
}

/// Run directory that records every file written to it.
pub struct RunDir {
    root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, OutputError> {
        std::fs::create_dir_all(root).map_err(|e| werr(root, e))?;
        Ok(RunDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), OutputError> {
        table.write(&self.root.join(name))?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), OutputError> {
        write_json(&self.root.join(name), value)?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
