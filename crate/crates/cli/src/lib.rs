//! Command-line front end for `fraxolve`.
//!
//! Exit status: 0 on success, 1 for rejected configuration or arguments,
//! 2 when a solver fails (or, for `check`, when a check fails).

pub mod config;
pub mod expr;
pub mod manifest;

use clap::{Parser, Subcommand, ValueEnum};
use config::{parse_config, ConfigError, ExprSrc, FBlock, RunConfig, SolutionOutput};
use fraxolve::error_harness::{
    rows_to_csv, table1_preset, table2_lower_desk, table2_preset, table_run, Scale, TableSpec,
};
use fraxolve::pde_solver::{solve_pde, SolverConfig};
use fraxolve::scalar_solver::solve_scalar;
use fraxolve::special_functions::{mittag_leffler_with, MlParams};
use fraxolve::stability_lab::{comparison_trials, envelope_refinement, envelope_ratio};
use fraxolve::temporal_mesh::{check_step_restriction, FracParams, TemporalMesh};
use manifest::{config_hash, Manifest};
use serde_json::json;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

mod check;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<fraxolve::Error> for Failure {
    fn from(e: fraxolve::Error) -> Self {
        if e.is_solver_failure() || matches!(e, fraxolve::Error::NonNesting(_)) {
            Failure::Solver(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Solver(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "fraxolve", version, about = "L1 time stepping for time-fractional semilinear problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem without spatial derivatives.
    Scalar(ScalarArgs),
    /// Solve a parabolic problem from a JSON configuration.
    Pde(PdeArgs),
    /// Envelope ratios of the discrete resolvent under refinement.
    Stability(StabilityArgs),
    /// Reproduce the convergence tables of the Allen-Cahn experiment.
    Table(TableArgs),
    /// Evaluate the Mittag-Leffler function.
    Ml(MlArgs),
    /// Run the quick invariant suite.
    Check,
}

#[derive(Debug, clap::Args)]
pub struct ScalarArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<i64>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// allen_cahn, fisher, linear or zero.
    #[arg(long)]
    pub f: Option<String>,
    /// Coefficient of the linear reaction.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct PdeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long = "M")]
    pub m: Option<i64>,
    #[arg(long = "N")]
    pub n: Option<i64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct StabilityArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Coarsest number of steps.
    #[arg(long = "M", default_value_t = 64)]
    pub m: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 2)]
    pub doublings: usize,
    /// Random monotone pairs for the comparison check on the coarsest mesh.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Allow r > (2 - alpha)/alpha for gamma > alpha - 1.
    #[arg(long)]
    pub override_gate: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Table1,
    Table2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Debug, clap::Args)]
pub struct TableArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: ScaleArg,
    /// Override the per-table run-time budget in seconds.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct MlArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub s: f64,
    #[arg(long, default_value_t = 7)]
    pub digits: usize,
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Err(f) = init_threads() {
        eprintln!("error: {}", f.message());
        return f.code();
    }
    let mut stdout = String::new();
    let result = run(&cli.command, &mut stdout);
    print!("{stdout}");
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

/// Caps the worker pool at `FRAXOLVE_THREADS` when set.
fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("FRAXOLVE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Failure::Config(format!("FRAXOLVE_THREADS must be a positive integer, got '{v}'")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs one command, appending its standard output to `out`. Returns the
/// exit status for successful runs.
pub fn run(cmd: &Command, out: &mut String) -> Result<i32, Failure> {
    match cmd {
        Command::Scalar(a) => cmd_scalar(a, out),
        Command::Pde(a) => cmd_pde(a, out),
        Command::Stability(a) => cmd_stability(a, out),
        Command::Table(a) => cmd_table(a, out),
        Command::Ml(a) => cmd_ml(a, out),
        Command::Check => Ok(check::run_checks(out)),
    }
}

fn read_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn cmd_scalar(a: &ScalarArgs, out: &mut String) -> Result<i32, Failure> {
    let mut cfg = match &a.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = a.alpha {
        cfg.problem_mut().alpha = Some(v);
    }
    if a.f.is_some() || a.c.is_some() {
        let prev = cfg.problem_mut().f.take();
        let kind = a
            .f
            .clone()
            .or_else(|| prev.as_ref().map(|f| f.kind.clone()))
            .unwrap_or_default();
        let c = a.c.or_else(|| prev.as_ref().and_then(|f| f.c));
        let alpha = prev.as_ref().and_then(|f| f.alpha).filter(|_| kind == "allen_cahn");
        cfg.problem_mut().f = Some(FBlock { kind, alpha, c });
    }
    if let Some(v) = a.u0 {
        cfg.problem_mut().u0 = Some(ExprSrc::Num(v));
    }
    if let Some(v) = a.m {
        cfg.mesh_mut().m = Some(v);
    }
    if let Some(v) = a.t {
        cfg.mesh_mut().t = Some(v);
    }
    if let Some(v) = a.r {
        cfg.mesh_mut().r = Some(v);
    }
    cfg.check_blocks()?;
    let plan = cfg.scalar_plan()?;
    let start = Instant::now();
    let traj = solve_scalar(&plan.f, plan.u0, &plan.mesh, plan.alpha, &plan.solver)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut csv = String::from("m,t,U\n");
    for (m, (t, u)) in traj.mesh.nodes().iter().zip(&traj.values).enumerate() {
        let _ = writeln!(csv, "{m},{t:.16e},{u:.16e}");
    }
    let hash = config_hash(&cfg);
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    match out_dir(&a.out, &cfg) {
        None => out.push_str(&csv),
        Some(dir) => {
            let mut man = Manifest::new("scalar", &cfg, &hash);
            man.timing("solve", elapsed);
            man.restriction = Some(serde_json::to_value(traj.restriction).unwrap());
            man.range_ok = traj.range_ok;
            man.warnings = traj.warnings.clone();
            man.add_artifact(&dir, "scalar.csv", csv.as_bytes())
                .map_err(|e| io_failure(&dir, e))?;
            man.write(&dir).map_err(|e| io_failure(&dir, e))?;
            let _ = writeln!(
                out,
                "U(T) = {:.10e}; range {}; wrote {}",
                traj.values.last().unwrap(),
                describe_range(traj.range_ok),
                dir.display()
            );
        }
    }
    Ok(0)
}

fn describe_range(r: Option<bool>) -> &'static str {
    match r {
        Some(true) => "preserved",
        Some(false) => "VIOLATED",
        None => "not applicable",
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
}

fn cmd_pde(a: &PdeArgs, out: &mut String) -> Result<i32, Failure> {
    let mut cfg = read_config(&a.config)?;
    if let Some(v) = a.m {
        cfg.mesh_mut().m = Some(v);
    }
    if let Some(v) = a.t {
        cfg.mesh_mut().t = Some(v);
    }
    if let Some(v) = a.r {
        cfg.mesh_mut().r = Some(v);
    }
    if let Some(v) = a.n {
        cfg.grid_mut().n = Some(v);
    }
    cfg.check_blocks()?;
    let plan = cfg.pde_plan()?;
    let hash = config_hash(&cfg);
    let start = Instant::now();
    let hist = solve_pde(&plan.problem, &plan.mesh, &plan.grid, &plan.solver)?;
    let elapsed = start.elapsed().as_secs_f64();
    for w in &hist.warnings {
        eprintln!("warning: {w}");
    }
    let final_max = hist.final_field().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let newton: usize = hist.diagnostics.iter().map(|d| d.newton_iters).sum();
    let summary = format!(
        "levels {}, nodes {}, newton iterations {}, max|U(T)| = {:.10e}; range {}",
        hist.mesh.num_steps(),
        hist.grid.num_nodes(),
        newton,
        final_max,
        describe_range(hist.range_ok)
    );
    match out_dir(&a.out, &cfg) {
        None => {
            let _ = writeln!(out, "{summary}");
        }
        Some(dir) => {
            let mut man = Manifest::new("pde", &cfg, &hash);
            man.timing("solve", elapsed);
            man.restriction = Some(serde_json::to_value(hist.restriction).unwrap());
            man.max_principle = Some(serde_json::to_value(hist.max_principle).unwrap());
            man.range_ok = hist.range_ok;
            man.warnings = hist.warnings.clone();
            let levels: Vec<usize> = match plan.output.solution {
                SolutionOutput::All => (0..hist.fields.len()).collect(),
                SolutionOutput::Final => vec![0, hist.fields.len() - 1],
                SolutionOutput::None => Vec::new(),
            };
            if !levels.is_empty() {
                let mut csv = String::from("m,t,node,x,y,U\n");
                let nodes = hist.mesh.nodes();
                for &m in &levels {
                    for (k, u) in hist.fields[m].iter().enumerate() {
                        let [x, y] = hist.grid.coord(k);
                        let _ = writeln!(csv, "{m},{:.16e},{k},{x:.16e},{y:.16e},{u:.16e}", nodes[m]);
                    }
                }
                man.add_artifact(&dir, "solution.csv", csv.as_bytes())
                    .map_err(|e| io_failure(&dir, e))?;
            }
            let mut diag = String::from("m,newton_iters,linear_iters,residual,picard\n");
            for (m, d) in hist.diagnostics.iter().enumerate().skip(1) {
                let _ = writeln!(
                    diag,
                    "{m},{},{},{:.5e},{}",
                    d.newton_iters, d.linear_iters, d.residual, d.picard
                );
            }
            man.add_artifact(&dir, "diagnostics.csv", diag.as_bytes())
                .map_err(|e| io_failure(&dir, e))?;
            man.write(&dir).map_err(|e| io_failure(&dir, e))?;
            let _ = writeln!(out, "{summary}; wrote {}", dir.display());
        }
    }
    Ok(0)
}

fn cmd_stability(a: &StabilityArgs, out: &mut String) -> Result<i32, Failure> {
    let settings = json!({
        "alpha": a.alpha, "lambda": a.lambda, "gamma": a.gamma, "r": a.r, "M": a.m,
        "T": a.t, "doublings": a.doublings, "trials": a.trials, "override_gate": a.override_gate,
    });
    let hash = config_hash(&settings);
    let start = Instant::now();
    let rep = envelope_refinement(a.m, a.t, a.r, a.alpha, a.lambda, a.gamma, a.doublings, a.override_gate)?;
    let mut csv = String::from("M,max_ratio,growth\n");
    for (k, (m, ratio)) in rep.m_values.iter().zip(&rep.max_ratios).enumerate() {
        let growth = if k == 0 { String::new() } else { format!("{:.5e}", rep.growth[k - 1]) };
        let _ = writeln!(csv, "{m},{ratio:.5e},{growth}");
    }
    let finest = TemporalMesh::graded(*rep.m_values.last().unwrap(), a.t, a.r)?;
    let profile = envelope_ratio(&finest, a.alpha, a.lambda, a.gamma)?;
    let mut prof_csv = String::from("j,t,ratio\n");
    for (j, p) in profile.profile.iter().enumerate() {
        let _ = writeln!(prof_csv, "{},{:.16e},{p:.16e}", j + 1, finest.nodes()[j + 1]);
    }
    let coarse = TemporalMesh::graded(a.m, a.t, a.r)?;
    let comparison = if a.trials > 0 {
        Some(comparison_trials(&coarse, a.alpha, a.lambda, a.trials, 0x5eed)?)
    } else {
        None
    };
    let elapsed = start.elapsed().as_secs_f64();
    let verdict = if rep.report_only {
        "report only"
    } else if rep.pass {
        "bounded"
    } else {
        "GROWING"
    };
    let _ = writeln!(
        out,
        "envelope ratio {verdict}: max ratios {:?}, growth {:?}",
        rep.max_ratios, rep.growth
    );
    if let Some(c) = &comparison {
        let _ = writeln!(out, "comparison: {} violations in {} pairs", c.violations, c.trials);
    }
    if let Some(dir) = &a.out {
        let mut man = Manifest::new("stability", &settings, &hash);
        man.timing("total", elapsed);
        let params = FracParams::new(a.alpha, a.lambda)?;
        man.restriction = Some(serde_json::to_value(check_step_restriction(&finest, params, true)).unwrap());
        man.results = json!({ "refinement": rep, "comparison": comparison });
        man.add_artifact(dir, "stability.csv", csv.as_bytes())
            .map_err(|e| io_failure(dir, e))?;
        man.add_artifact(dir, "profile.csv", prof_csv.as_bytes())
            .map_err(|e| io_failure(dir, e))?;
        man.write(dir).map_err(|e| io_failure(dir, e))?;
    } else {
        out.push_str(&csv);
    }
    Ok(0)
}

fn cmd_table(a: &TableArgs, out: &mut String) -> Result<i32, Failure> {
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let mut specs: Vec<TableSpec> = match a.preset {
        Preset::Table1 => table1_preset(scale),
        Preset::Table2 => table2_preset(scale),
    };
    if let Some(b) = a.budget {
        for s in &mut specs {
            s.budget_seconds = b;
        }
    }
    // refuse before anything runs
    for s in &specs {
        s.validate()?;
        let est = s.estimated_seconds()?;
        if est > s.budget_seconds {
            return Err(fraxolve::Error::Budget(format!(
                "{} study needs about {est:.0} s, budget is {:.0} s",
                s.study.name(),
                s.budget_seconds
            ))
            .into());
        }
    }
    let cfg = SolverConfig::default();
    let lower_1d = a.preset == Preset::Table2 && scale == Scale::Desk;
    let settings = json!({
        "preset": format!("{:?}", a.preset).to_lowercase(),
        "scale": scale,
        "specs": specs,
        "solver": cfg,
        "lower_block_1d": lower_1d,
    });
    let hash = config_hash(&settings);
    let start = Instant::now();
    let mut rows = Vec::new();
    for s in &specs {
        rows.extend(table_run(s, &cfg)?);
    }
    if lower_1d {
        rows.extend(table2_lower_desk(&cfg)?);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let csv = rows_to_csv(&rows);
    out.push_str(&csv);
    let range_ok = rows.iter().all(|r| r.range_ok);
    if let Some(dir) = &a.out {
        let mut man = Manifest::new("table", &settings, &hash);
        man.timing("total", elapsed);
        man.range_ok = Some(range_ok);
        man.warnings = rows.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
        man.warnings.dedup();
        man.add_artifact(dir, "table.csv", csv.as_bytes())
            .map_err(|e| io_failure(dir, e))?;
        man.write(dir).map_err(|e| io_failure(dir, e))?;
    }
    Ok(0)
}

fn cmd_ml(a: &MlArgs, out: &mut String) -> Result<i32, Failure> {
    let v = mittag_leffler_with(&MlParams::new(a.alpha), a.s)?;
    let _ = writeln!(out, "{:.*}", a.digits, v.value);
    Ok(0)
}
