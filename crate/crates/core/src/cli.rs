//! Command-line front end. Every command writes its artifacts plus a
//! `summary.json` and a `manifest.json` into the run directory given by
//! `--out`. Exit status: 0 when all hard assertions pass, 1 when one fails
//! or a solver errors, 2 on configuration errors. Errors are printed to
//! stdout as `{"error": kind, "detail": message}`.

use crate::config::{load_problem, parse_problem, ConfigError};
use crate::diagnostics::{
    comparison_trial, entropy_library, entropy_residual, l1_estimate_check, minimality_residual,
    truncation_energy_check, ComparisonResult, DiagnosticsError, ENTROPY_TOL,
};
use crate::dynkin::dynkin_value;
use crate::grid::{Grid, GridFunction};
use crate::output::{active_set_table, num, sha256_hex, solution_table, Manifest, RunDir, Table};
use crate::penalized::{penalization_sweep, solve_cauchy_dirichlet, PenaltyScheme, ReactionMeasure};
use crate::problem::{validate, Atom, BarrierContinuity, MeasureData, ProblemError, ProblemSpec, SpaceTimeFn};
use crate::stochastic::{feynman_kac_with, path_totals, DEFAULT_DELTA};
use crate::vi::{envelope_check, solve_vi, EnvelopeError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "reflecta", version, about = "Obstacle problems with measure data: solvers and cross-checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the structural hypotheses of a problem.
    Validate(Common),
    /// Solve the unconstrained problem (barriers ignored).
    Solve(Common),
    /// Solve the double-obstacle problem exactly on the grid.
    SolveVi(Common),
    /// Penalized solves over a list of penalty parameters.
    PenalizeSweep(SweepArgs),
    /// Monte Carlo check of the probabilistic representation.
    VerifyMc(McArgs),
    /// Explicit backward program for the game value.
    Dynkin(DynkinArgs),
    /// Minimality, estimate, entropy and comparison batteries.
    Diagnose(DiagnoseArgs),
    /// Aggregate the summaries found under a directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem file, or `bundled:<name>` for a built-in problem.
    #[arg(long)]
    pub problem: String,
    /// Cells per space axis.
    #[arg(long, default_value_t = 128)]
    pub nx: usize,
    /// Time steps.
    #[arg(long, default_value_t = 512)]
    pub nt: usize,
    /// Run directory.
    #[arg(long, default_value = "reflecta-run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Symmetric,
    Outer,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated increasing penalty parameters.
    #[arg(long, default_value = "1,4,16,64,256,1024,4096")]
    pub n_list: String,
    #[arg(long, value_enum, default_value_t = SchemeArg::Symmetric)]
    pub scheme: SchemeArg,
    /// Nodewise monotonicity tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol_monotone: f64,
    /// Relative slack on the uniform reaction bound.
    #[arg(long, default_value_t = 0.05)]
    pub tol_tv: f64,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub dt_mc: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Points `s:x` or `s:x1,x2`, separated by `;`.
    #[arg(long)]
    pub points: Option<String>,
    /// Discretization allowance added to the standard error.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub tol_delta: f64,
    /// Largest accepted z-score.
    #[arg(long, default_value_t = 3.0)]
    pub tol_z: f64,
    /// Also write the per-path totals of every point.
    #[arg(long)]
    pub dump_paths: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DynkinArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest accepted sup-distance to the exact discrete solution.
    #[arg(long, default_value_t = 5e-3)]
    pub tol_dynkin: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Randomized comparison and envelope trials.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_minimality: f64,
    #[arg(long, default_value_t = ENTROPY_TOL)]
    pub tol_entropy: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for `summary.json` files.
    #[arg(long, default_value = "reflecta-run")]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solve(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solve(_) => "solve",
            CliError::Output(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "detail": self.to_string() })
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::output::OutputError> for CliError {
    fn from(e: crate::output::OutputError) -> Self {
        CliError::Output(e.to_string())
    }
}

fn solve_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solve(e.to_string())
}

/// Loaded problem with the text it came from.
pub struct Loaded {
    pub spec: ProblemSpec,
    pub source: String,
    pub text: String,
}

pub fn load(problem: &str) -> Result<Loaded, CliError> {
    if let Some(name) = problem.strip_prefix("bundled:") {
        let text = crate::reference::source(name)
            .ok_or_else(|| CliError::Config(format!("no bundled problem named `{name}`")))?;
        return Ok(Loaded { spec: parse_problem(text)?, source: problem.into(), text: text.into() });
    }
    let (spec, text) = load_problem(Path::new(problem))?;
    Ok(Loaded { spec, source: problem.into(), text })
}

/// Grid with `cells` intervals per axis.
pub fn grid_for(spec: &ProblemSpec, cells: usize, nt: usize) -> Result<Grid, CliError> {
    if cells < 4 {
        return Err(CliError::Config(format!("--nx must be at least 4, got {cells}")));
    }
    Grid::uniform(&spec.domain, cells - 1, nt).map_err(|e| CliError::Config(e.to_string()))
}

/// Parses `s:x;s:x1,x2`.
pub fn parse_points(text: &str, dim: usize) -> Result<Vec<(f64, Vec<f64>)>, CliError> {
    let bad = |p: &str| CliError::Config(format!("bad point `{p}`: expected s:x or s:x1,x2"));
    text.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (s, x) = p.split_once(':').ok_or_else(|| bad(p))?;
            let s: f64 = s.trim().parse().map_err(|_| bad(p))?;
            let x: Vec<f64> = x.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(p))?;
            if x.len() != dim {
                return Err(CliError::Config(format!("point `{p}` has {} coordinates, problem has {dim}", x.len())));
            }
            Ok((s, x))
        })
        .collect()
}

/// Three interior points late enough in time to keep paths short.
pub fn default_points(spec: &ProblemSpec) -> Vec<(f64, Vec<f64>)> {
    let l = spec.domain.lengths();
    let horizon = spec.domain.horizon();
    [(0.5, 0.5, 0.5), (0.6, 0.3, 0.6), (0.7, 0.7, 0.4)]
        .iter()
        .map(|&(s, a, b)| {
            let x = if spec.dim() == 1 { vec![a * l[0]] } else { vec![a * l[0], b * l[1]] };
            (s * horizon, x)
        })
        .collect()
}

pub fn parse_n_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad --n-list entry `{v}`"))))
        .collect()
}

/// Exact discrete solution: the complementarity oracle when barriers are
/// present, the unconstrained solve otherwise.
pub fn true_solution(spec: &ProblemSpec, grid: &Grid) -> Result<(GridFunction, ReactionMeasure), CliError> {
    if spec.barriers.is_empty() {
        Ok((solve_cauchy_dirichlet(spec, grid).map_err(solve_err)?, ReactionMeasure::zero(grid)))
    } else {
        let s = solve_vi(spec, grid).map_err(solve_err)?;
        Ok((s.u, s.nu))
    }
}

fn add(f: Option<SpaceTimeFn>, shift: SpaceTimeFn) -> Option<SpaceTimeFn> {
    f.map(|f| -> SpaceTimeFn { Arc::new(move |t, x| f(t, x) + shift(t, x)) })
}

/// Copy of `spec` with nonnegative shifts added to the terminal value, the
/// measure density and both barriers (the upper one at least as much as the
/// lower one, so the barriers stay ordered).
pub fn dominating_spec(spec: &ProblemSpec, rng: &mut impl Rng) -> Result<ProblemSpec, ProblemError> {
    let l = spec.domain.lengths()[0];
    let shape = |c: f64, m: f64| -> SpaceTimeFn {
        Arc::new(move |_, x: &[f64]| c * (1.0 + 0.5 * (m * std::f64::consts::PI * x[0] / l).sin()))
    };
    let mut hi = spec.clone();
    let m = rng.random_range(1..4) as f64;
    let c_phi: f64 = rng.random_range(0.0..0.5);
    let phi_shift = shape(c_phi, m);
    let phi = spec.terminal.clone();
    hi.terminal = Arc::new(move |x| phi(x) + phi_shift(0.0, x));
    let g_shift = shape(rng.random_range(0.0..2.0), m);
    let density: SpaceTimeFn = match spec.measure.density() {
        Some(g) => {
            let g = g.clone();
            Arc::new(move |t, x| g(t, x) + g_shift(t, x))
        }
        None => g_shift,
    };
    let atoms: Vec<Atom> = spec.measure.atoms().to_vec();
    hi.measure = MeasureData::new(Some(density), atoms)?;
    let c1: f64 = rng.random_range(0.0..0.1);
    let c2 = c1 + rng.random_range(0.0..0.1);
    hi.barriers.lower = add(spec.barriers.lower.clone(), Arc::new(move |_, _| c1));
    hi.barriers.upper = add(spec.barriers.upper.clone(), Arc::new(move |_, _| c2));
    Ok(hi)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CampaignResult {
    pub trials: Vec<ComparisonResult>,
    pub violations: usize,
    pub worst_gap: f64,
}

/// Randomized comparison campaign: `trials` dominated pairs built from `spec`.
pub fn comparison_campaign(spec: &ProblemSpec, grid: &Grid, trials: usize, seed: u64) -> Result<CampaignResult, DiagnosticsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let hi = dominating_spec(spec, &mut rng).map_err(|e| DiagnosticsError::DominanceNotSatisfied(e.to_string()))?;
        out.push(comparison_trial(spec, &hi, grid)?);
    }
    let violations = out.iter().map(|r| r.violations).sum();
    let worst_gap = out.iter().map(|r| r.worst_gap).fold(f64::NEG_INFINITY, f64::max);
    Ok(CampaignResult { trials: out, violations, worst_gap })
}

struct Run {
    dir: RunDir,
    command: &'static str,
    loaded: Option<Loaded>,
    started: Instant,
}

impl Run {
    fn new(command: &'static str, out: &Path, loaded: Option<Loaded>) -> Result<Self, CliError> {
        Ok(Run { dir: RunDir::create(out)?, command, loaded, started: Instant::now() })
    }

    fn finish(mut self, pass: bool, mut summary: Value) -> Result<bool, CliError> {
        let obj = summary.as_object_mut().expect("summary is an object");
        obj.insert("command".into(), json!(self.command));
        obj.insert("pass".into(), json!(pass));
        obj.insert("elapsed_seconds".into(), json!(self.started.elapsed().as_secs_f64()));
        if let Some(l) = &self.loaded {
            obj.insert("problem".into(), json!(l.spec.name));
        }
        self.dir.json("summary.json", &summary)?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.into(),
            args: std::env::args().collect(),
            problem: self.loaded.as_ref().map_or_else(String::new, |l| l.source.clone()),
            config_sha256: self.loaded.as_ref().map_or_else(String::new, |l| sha256_hex(l.text.as_bytes())),
            threads: rayon::current_num_threads(),
            outputs: self.dir.written().to_vec(),
        };
        crate::output::write_json(&self.dir.root().join("manifest.json"), &manifest)?;
        Ok(pass)
    }
}

fn cmd_validate(a: &Common) -> Result<bool, CliError> {
    let loaded = load(&a.problem)?;
    let grid = grid_for(&loaded.spec, a.nx, a.nt)?;
    let report = match validate(&loaded.spec, &grid) {
        Ok(r) => r,
        Err(ProblemError::HardViolation(r)) => *r,
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    let mut run = Run::new("validate", &a.out, Some(loaded))?;
    run.dir.json("validation.json", &report)?;
    let pass = report.hard_passed();
    println!("validate: {}", report.summary());
    run.finish(pass, json!({ "all_passed": report.all_passed(), "hard_passed": pass }))
}

fn cmd_solve(a: &Common) -> Result<bool, CliError> {
    let loaded = load(&a.problem)?;
    let grid = grid_for(&loaded.spec, a.nx, a.nt)?;
    let mut run = Run::new("solve", &a.out, None)?;
    let u = solve_cauchy_dirichlet(&loaded.spec, &grid).map_err(solve_err)?;
    run.dir.table("solution.csv", &solution_table(&u, None))?;
    let sup = u.slices().iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("solve: sup|u| = {}", num(sup));
    let ignored = !loaded.spec.barriers.is_empty();
    run.loaded = Some(loaded);
    run.finish(true, json!({ "grid": grid, "sup_norm": sup, "barriers_ignored": ignored }))
}

fn cmd_solve_vi(a: &Common) -> Result<bool, CliError> {
    let loaded = load(&a.problem)?;
    let grid = grid_for(&loaded.spec, a.nx, a.nt)?;
    let mut run = Run::new("solve-vi", &a.out, None)?;
    let sol = solve_vi(&loaded.spec, &grid).map_err(solve_err)?;
    run.dir.table("solution.csv", &solution_table(&sol.u, Some(&sol.nu)))?;
    run.dir.table("active_sets.csv", &active_set_table(&grid, &sol.active_lower, &sol.active_upper))?;
    let (r_pos, r_neg) = minimality_residual(&sol.u, &sol.nu, &loaded.spec.barriers, &grid).map_err(solve_err)?;
    println!("solve-vi: |nu+| = {}, |nu-| = {}", num(sol.nu.tv_pos()), num(sol.nu.tv_neg()));
    run.loaded = Some(loaded);
    run.finish(
        true,
        json!({
            "grid": grid,
            "tv_pos": sol.nu.tv_pos(),
            "tv_neg": sol.nu.tv_neg(),
            "minimality_pos": r_pos,
            "minimality_neg": r_neg,
            "newton": sol.stats,
        }),
    )
}

fn cmd_sweep(a: &SweepArgs) -> Result<bool, CliError> {
    let loaded = load(&a.common.problem)?;
    let grid = grid_for(&loaded.spec, a.common.nx, a.common.nt)?;
    let n_list = parse_n_list(&a.n_list)?;
    let scheme = match a.scheme {
        SchemeArg::Symmetric => PenaltyScheme::Symmetric,
        SchemeArg::Outer => PenaltyScheme::OuterUpper,
    };
    let mut run = Run::new("penalize-sweep", &a.common.out, None)?;
    let report = match penalization_sweep(&loaded.spec, &grid, &n_list, scheme) {
        Ok(r) => r,
        Err(crate::penalized::SolveError::BadPenaltyList) => {
            return Err(CliError::Config("--n-list must be positive, finite and increasing".into()))
        }
        Err(e) => return Err(solve_err(e)),
    };
    let mut table = Table::new(&[
        "n",
        "sup_gap_to_oracle",
        "tv_pos",
        "tv_neg",
        "minimality_pos",
        "minimality_neg",
        "monotonicity_violations",
        "worst_monotonicity_violation",
        "newton_iterations",
    ]);
    let mut violations = 0;
    for r in &report.rows {
        if r.worst_monotonicity_violation > a.tol_monotone {
            violations += r.monotonicity_violations;
        }
        table.push(vec![
            num(r.n),
            num(r.sup_gap_to_oracle),
            num(r.tv_pos),
            num(r.tv_neg),
            num(r.minimality_pos),
            num(r.minimality_neg),
            r.monotonicity_violations.to_string(),
            num(r.worst_monotonicity_violation),
            r.newton_iterations.to_string(),
        ]);
    }
    run.dir.table("sweep.csv", &table)?;
    run.dir.json("sweep.json", &report)?;
    let oracle_tv = report.oracle_tv_pos + report.oracle_tv_neg;
    let tv_ok = report.max_tv() <= (1.0 + a.tol_tv) * oracle_tv + 1e-8;
    let pass = violations == 0 && tv_ok;
    println!(
        "penalize-sweep: {} rows, monotonicity violations {violations}, max |nu_n| {} vs oracle {}",
        table.len(),
        num(report.max_tv()),
        num(oracle_tv)
    );
    run.loaded = Some(loaded);
    run.finish(
        pass,
        json!({
            "grid": grid,
            "rows": report.rows.len(),
            "monotonicity_violations": violations,
            "gaps_nonincreasing": report.gaps_nonincreasing(),
            "final_gap": report.rows.last().map(|r| r.sup_gap_to_oracle),
            "max_tv": report.max_tv(),
            "oracle_tv": oracle_tv,
            "tv_bound_holds": tv_ok,
            "rate": report.rate,
        }),
    )
}

fn cmd_mc(a: &McArgs) -> Result<bool, CliError> {
    let loaded = load(&a.common.problem)?;
    let spec = &loaded.spec;
    let grid = grid_for(spec, a.common.nx, a.common.nt)?;
    if a.paths < 2 || !(a.dt_mc > 0.0) {
        return Err(CliError::Config("--paths must be at least 2 and --dt-mc positive".into()));
    }
    let points = match &a.points {
        Some(p) => parse_points(p, spec.dim())?,
        None => default_points(spec),
    };
    let mut run = Run::new("verify-mc", &a.common.out, None)?;
    let (u, nu) = true_solution(spec, &grid)?;
    let results = feynman_kac_with(spec, &u, &nu, &points, a.paths, a.dt_mc, a.seed, a.tol_delta).map_err(solve_err)?;
    let mut header = vec!["s"];
    header.extend(if spec.dim() == 1 { vec!["x"] } else { vec!["x1", "x2"] });
    header.extend(["u", "mean", "std_error", "paths", "dt_mc", "z", "pass"]);
    let mut table = Table::new(&header);
    let mut pass = true;
    for r in &results {
        let ok = r.z <= a.tol_z;
        pass &= ok;
        let mut row = vec![num(r.s)];
        row.extend(r.x.iter().map(|&v| num(v)));
        row.extend([
            num(r.u),
            num(r.estimate.mean),
            num(r.estimate.std_error),
            r.estimate.n.to_string(),
            num(r.estimate.dt_mc),
            num(r.z),
            ok.to_string(),
        ]);
        table.push(row);
        println!("verify-mc: s={} x={:?} u={:.6} mc={:.6} z={:.3}", r.s, r.x, r.u, r.estimate.mean, r.z);
    }
    run.dir.table("mc.csv", &table)?;
    if a.dump_paths {
        for (i, (s, x)) in points.iter().enumerate() {
            let (totals, _) = path_totals(spec, &u, &nu, *s, x, a.paths, a.dt_mc, a.seed).map_err(solve_err)?;
            let mut t = Table::new(&["path", "total"]);
            for (p, v) in totals.iter().enumerate() {
                t.push(vec![p.to_string(), num(*v)]);
            }
            run.dir.table(&format!("paths_{i}.csv"), &t)?;
        }
    }
    let max_z = results.iter().map(|r| r.z).fold(0.0, f64::max);
    run.loaded = Some(loaded);
    run.finish(pass, json!({ "grid": grid, "seed": a.seed, "paths": a.paths, "dt_mc": a.dt_mc, "max_z": max_z, "points": results }))
}

fn cmd_dynkin(a: &DynkinArgs) -> Result<bool, CliError> {
    let loaded = load(&a.common.problem)?;
    let grid = grid_for(&loaded.spec, a.common.nx, a.common.nt)?;
    let mut run = Run::new("dynkin", &a.common.out, None)?;
    let v = dynkin_value(&loaded.spec, &grid).map_err(solve_err)?;
    let (u, _) = true_solution(&loaded.spec, &grid)?;
    let gap = v.max_abs_diff(&u).map_err(solve_err)?;
    run.dir.table("dynkin.csv", &solution_table(&v, None))?;
    let pass = gap <= a.tol_dynkin;
    println!("dynkin: sup|V - u| = {}", num(gap));
    run.loaded = Some(loaded);
    run.finish(pass, json!({ "grid": grid, "sup_gap": gap, "tolerance": a.tol_dynkin }))
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<bool, CliError> {
    let loaded = load(&a.common.problem)?;
    let spec = &loaded.spec;
    let grid = grid_for(spec, a.common.nx, a.common.nt)?;
    let mut run = Run::new("diagnose", &a.common.out, None)?;
    let (u, nu) = true_solution(spec, &grid)?;
    let mut pass = true;
    let mut summary = json!({ "grid": grid });

    let (r_pos, r_neg) = minimality_residual(&u, &nu, &spec.barriers, &grid).map_err(solve_err)?;
    let bound = a.tol_minimality * (nu.tv_pos() + nu.tv_neg() + 1e-30);
    let asserted = !spec.barriers.is_empty() && spec.barriers.continuity == BarrierContinuity::QuasiContinuousProxy;
    let min_ok = !asserted || (r_pos <= bound && r_neg <= bound);
    pass &= min_ok;
    summary["minimality"] = json!({ "r_pos": r_pos, "r_neg": r_neg, "bound": bound, "asserted": asserted, "pass": min_ok });

    let l1 = l1_estimate_check(spec, &grid, &u, Some(&nu)).map_err(solve_err)?;
    pass &= !l1.asserted || l1.pass;
    summary["l1_estimate"] = json!(l1);

    let entropy = entropy_residual(&u, Some(&nu), spec, &grid, &entropy_library(spec)).map_err(solve_err)?;
    let ent_ok = entropy.worst_margin >= -a.tol_entropy;
    pass &= ent_ok;
    summary["entropy"] = json!({ "worst_margin": entropy.worst_margin, "worst_test": entropy.worst_test, "pass": ent_ok });

    let energy = truncation_energy_check(spec, &grid, &u, 1.0).map_err(solve_err)?;
    if energy.applicable && !energy.pass {
        println!("diagnose: warning: truncation energy {} above bound {}", num(energy.energy), num(energy.bound));
    }
    summary["truncation_energy"] = json!(energy);

    let campaign = comparison_campaign(spec, &grid, a.trials, a.seed).map_err(solve_err)?;
    let mut table = Table::new(&["trial", "violations", "worst_gap"]);
    for (i, r) in campaign.trials.iter().enumerate() {
        table.push(vec![i.to_string(), r.violations.to_string(), num(r.worst_gap)]);
    }
    run.dir.table("comparison.csv", &table)?;
    pass &= campaign.violations == 0;
    summary["comparison"] = json!({ "trials": a.trials, "violations": campaign.violations, "worst_gap": campaign.worst_gap });

    if spec.barriers.lower.is_some() {
        let env = match envelope_check(spec, &grid, a.trials, a.seed) {
            Ok(r) => json!({ "trials": r.trials, "admissible": r.admissible, "violations": 0, "worst_gap": r.worst_gap }),
            Err(EnvelopeError::EnvelopeViolation { trial, slice, node, gap, violations }) => {
                pass = false;
                json!({ "violations": violations, "witness": { "trial": trial, "slice": slice, "node": node, "gap": gap } })
            }
            Err(e) => return Err(solve_err(e)),
        };
        summary["envelope"] = env;
    }
    println!("diagnose: {}", if pass { "all hard checks passed" } else { "hard check failed" });
    run.loaded = Some(loaded);
    run.finish(pass, summary)
}

fn find_summaries(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    let mut entries: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_summaries(&p, out);
        } else if p.file_name().is_some_and(|n| n == "summary.json") {
            out.push(p);
        }
    }
}

fn cmd_report(a: &ReportArgs) -> Result<bool, CliError> {
    if !a.out.is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", a.out.display())));
    }
    let mut files = Vec::new();
    find_summaries(&a.out, &mut files);
    let mut runs = Vec::new();
    let mut table = Table::new(&["run", "command", "problem", "pass"]);
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| CliError::Output(e.to_string()))?;
        let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", f.display())))?;
        let rel = f.parent().and_then(|p| p.strip_prefix(&a.out).ok()).map_or(String::new(), |p| p.display().to_string());
        if rel.is_empty() || rel == "." {
            continue;
        }
        let field = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").to_string();
        let pass = v.get("pass").and_then(Value::as_bool).unwrap_or(false);
        table.push(vec![rel.clone(), field("command"), field("problem"), pass.to_string()]);
        runs.push(json!({ "run": rel, "summary": v }));
    }
    let all_pass = runs.iter().all(|r| r["summary"]["pass"].as_bool().unwrap_or(false));
    let mut run = Run::new("report", &a.out, None)?;
    run.dir.table("report.csv", &table)?;
    run.dir.json("report.json", &json!({ "runs": runs, "all_pass": all_pass }))?;
    println!("report: {} runs, {}", runs.len(), if all_pass { "all passed" } else { "some failed" });
    run.finish(all_pass, json!({ "runs": runs.len() }))
}

pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::SolveVi(a) => cmd_solve_vi(a),
        Command::PenalizeSweep(a) => cmd_sweep(a),
        Command::VerifyMc(a) => cmd_mc(a),
        Command::Dynkin(a) => cmd_dynkin(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("REFLECTA_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Config(format!("REFLECTA_THREADS must be a positive integer, got `{v}`"))
        })?;
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match init_threads().and_then(|_| execute(&cli)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            println!("{}", e.to_json());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        let p = parse_points("0.5:0.5; 0.6:0.3", 1).unwrap();
        assert_eq!(p, vec![(0.5, vec![0.5]), (0.6, vec![0.3])]);
        assert_eq!(parse_points("0.1:0.2,0.3", 2).unwrap()[0].1, vec![0.2, 0.3]);
        assert!(matches!(parse_points("0.1:0.2,0.3", 1), Err(CliError::Config(_))));
        assert!(matches!(parse_points("0.1", 1), Err(CliError::Config(_))));
        assert_eq!(parse_n_list("1, 4,16").unwrap(), vec![1.0, 4.0, 16.0]);
    }

    #[test]
    fn missing_file_is_config_error() {
        let e = load("/definitely/not/here.json").err().unwrap();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(e.to_json()["error"], "config");
        assert!(load("bundled:heat").is_ok());
    }

    #[test]
    fn dominating_spec_dominates() {
        let spec = crate::reference::load("two_barrier").unwrap();
        let grid = Grid::uniform(&spec.domain, 15, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hi = dominating_spec(&spec, &mut rng).unwrap();
        let r = comparison_trial(&spec, &hi, &grid).unwrap();
        assert_eq!(r.violations, 0);
    }
}

#[cfg(test)]
mod end_to_end {
    use super::*;

    fn reflecta(args: &[&str]) -> i32 {
        run(std::iter::once("reflecta").chain(args.iter().copied()))
    }

    fn json(path: &Path) -> Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn validate_heat_passes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("v");
        let o = reflecta(&["validate", "--problem", "bundled:heat", "--out", out.to_str().unwrap()]);
        assert_eq!(o, 0);
        let report = json(&out.join("validation.json"));
        assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
        let manifest = json(&out.join("manifest.json"));
        assert_eq!(manifest["command"], "validate");
        assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn sweep_writes_one_row_per_n() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s");
        let o = reflecta(&["penalize-sweep", "--problem", "bundled:lower_barrier", "--nx", "32", "--nt", "64", "--out", out.to_str().unwrap()]);
        assert_eq!(o, 0);
        let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 7);
        assert!(csv.starts_with("n,sup_gap_to_oracle,"));
    }

    #[test]
    fn missing_problem_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let o = reflecta(&["solve", "--problem", "/no/such/problem.json", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o, 2);
        let err = load("/no/such/problem.json").err().unwrap().to_json();
        assert_eq!(err["error"], "config");
        assert!(err["detail"].as_str().unwrap().contains("/no/such/problem.json"));
    }

    #[test]
    fn malformed_problem_and_bad_flags_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, r#"{"domain": {"dim": 1, "lengths": [1], "horizon": 1}, "coefficients": "identity", "terminal": "sin("}"#).unwrap();
        let o = reflecta(&["solve", "--problem", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o, 2);
        let o = reflecta(&["penalize-sweep", "--problem", "bundled:heat", "--n-list", "4,1", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o, 2);
        let o = reflecta(&["solve", "--problem", "bundled:heat", "--nx", "2", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o, 2);
    }

    #[test]
    fn problem_file_round_trip_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.json");
        std::fs::write(&p, crate::reference::source("two_barrier").unwrap()).unwrap();
        let root = dir.path().join("runs");
        let sub = |name: &str| root.join(name).to_str().unwrap().to_string();
        let common = ["--problem", p.to_str().unwrap(), "--nx", "32", "--nt", "64"];
        for (cmd, name) in [("solve-vi", "vi"), ("dynkin", "dyn"), ("diagnose", "diag")] {
            let mut args = vec![cmd];
            args.extend(common);
            let o = sub(name);
            args.extend(["--out", &o]);
            let res = reflecta(&args);
            assert_eq!(res, 0, "{cmd}");
        }
        let solution = std::fs::read_to_string(root.join("vi/solution.csv")).unwrap();
        assert!(solution.starts_with("t,x,u,nu_pos,nu_neg,nu_atom_pos,nu_atom_neg\n"));
        assert_eq!(solution.lines().count(), 1 + 65 * 33);
        let o = reflecta(&["report", "--out", root.to_str().unwrap()]);
        assert_eq!(o, 0);
        let report = json(&root.join("report.json"));
        assert_eq!(report["runs"].as_array().unwrap().len(), 3);
        assert_eq!(report["all_pass"], true);
    }
}
