//! Error measurement and convergence studies: two-mesh and exact errors,
//! observed rates, and the Allen-Cahn table runs.
//!
//! Two-mesh convention: the fine run doubles the table size and keeps the
//! table's rule between `M` and `N`. With `N = 2M` a temporal study compares
//! `(M, 2M)` with `(2M, 4M)`; with `M = N^2` a spatial study compares
//! `(N^2, N)` with `(4N^2, 2N)`. `NRule::Fixed` keeps `N` on both runs.
//! Values are compared at coincident nodes only.

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::pde_solver::{solve_pde, Problem, SolutionHistory, SolverConfig};
use crate::scalar_solver::{error_envelope, solve_scalar, ScalarTrajectory};
use crate::spatial_fd::{BoundarySpec, CoefficientField, Grid};
use crate::special_functions::mittag_leffler;
use crate::temporal_mesh::TemporalMesh;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

const MODULE: &str = "error_harness";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    TwoMesh,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub alpha: f64,
    pub r: Option<f64>,
    pub m: usize,
    /// Spatial intervals per direction; 0 for scalar runs.
    pub n: usize,
    /// Largest nodal error at `t = T`.
    pub err_final: f64,
    /// Largest nodal error over all levels.
    pub err_global: f64,
    pub rate_final: Option<f64>,
    pub rate_global: Option<f64>,
    pub mode: ErrorMode,
}

/// `log2(err_coarse / err_fine)`.
pub fn rate(err_coarse: f64, err_fine: f64) -> Result<f64> {
    if !(err_coarse > 0.0 && err_fine > 0.0) || !err_coarse.is_finite() || !err_fine.is_finite() {
        return Err(Error::invalid(
            MODULE,
            format!("rates need positive finite errors, got {err_coarse} and {err_fine}"),
        ));
    }
    Ok((err_coarse / err_fine).log2())
}

/// Least-squares slope `q` of `err ~ C size^-q`.
pub fn ls_slope(sizes: &[f64], errs: &[f64]) -> Result<f64> {
    if sizes.len() != errs.len() || sizes.len() < 2 {
        return Err(Error::invalid(MODULE, "slope fit needs at least two matching points"));
    }
    if sizes.iter().chain(errs).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid(MODULE, "slope fit needs positive data"));
    }
    let xs: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

/// Fills `rate_final` and `rate_global` of each report from its predecessor.
pub fn attach_rates(reports: &mut [ErrorReport]) {
    for k in 1..reports.len() {
        let (a, b) = (&reports[k - 1], &reports[k]);
        let rf = rate(a.err_final, b.err_final).ok();
        let rg = rate(a.err_global, b.err_global).ok();
        reports[k].rate_final = rf;
        reports[k].rate_global = rg;
    }
}

fn time_stride(coarse: &TemporalMesh, fine: &TemporalMesh) -> Result<usize> {
    let (mc, mf) = (coarse.num_steps(), fine.num_steps());
    if mf % mc != 0 {
        return Err(Error::NonNesting(format!("{mf} steps do not refine {mc} steps")));
    }
    let k = mf / mc;
    let (tc, tf) = (coarse.nodes(), fine.nodes());
    for (j, t) in tc.iter().enumerate() {
        let s = tf[k * j];
        if (s - t).abs() > 1e-14 * t.abs().max(1e-300) && s != *t {
            return Err(Error::NonNesting(format!("coarse node {j} at {t} is not a fine node (found {s})")));
        }
    }
    Ok(k)
}

fn space_stride(coarse: &Grid, fine: &Grid) -> Result<usize> {
    if coarse.dim() != fine.dim() || coarse.length() != fine.length() || fine.n() % coarse.n() != 0 {
        return Err(Error::NonNesting(format!(
            "grid with {} intervals does not refine one with {}",
            fine.n(),
            coarse.n()
        )));
    }
    Ok(fine.n() / coarse.n())
}

/// Compares two runs at coincident nodes.
pub fn two_mesh_error(coarse: &SolutionHistory, fine: &SolutionHistory) -> Result<ErrorReport> {
    let kt = time_stride(&coarse.mesh, &fine.mesh)?;
    let ks = space_stride(&coarse.grid, &fine.grid)?;
    let (gc, gf) = (&coarse.grid, &fine.grid);
    let map: Vec<usize> = (0..gc.num_nodes())
        .map(|node| {
            let (i, j) = gc.ij(node);
            gf.index(ks * i, ks * j)
        })
        .collect();
    let level_err = |m: usize| -> f64 {
        let (uc, uf) = (&coarse.fields[m], &fine.fields[kt * m]);
        map.iter().enumerate().map(|(k, &f)| (uc[k] - uf[f]).abs()).fold(0.0, f64::max)
    };
    let m = coarse.mesh.num_steps();
    let err_final = level_err(m);
    let err_global = (0..=m).map(level_err).fold(0.0, f64::max);
    Ok(ErrorReport {
        alpha: coarse.alpha,
        r: coarse.mesh.grading(),
        m,
        n: gc.n(),
        err_final,
        err_global,
        rate_final: None,
        rate_global: None,
        mode: ErrorMode::TwoMesh,
    })
}

/// Errors of a PDE run against `exact(x, t)`.
pub fn exact_error(run: &SolutionHistory, exact: &(dyn Fn(&[f64], f64) -> f64 + Sync)) -> ErrorReport {
    let t = run.mesh.nodes();
    let d = run.grid.dim();
    let per_level: Vec<f64> = run
        .fields
        .iter()
        .enumerate()
        .map(|(m, u)| {
            u.iter()
                .enumerate()
                .map(|(k, v)| {
                    let x = run.grid.coord(k);
                    (v - exact(&x[..d], t[m])).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    ErrorReport {
        alpha: run.alpha,
        r: run.mesh.grading(),
        m: run.mesh.num_steps(),
        n: run.grid.n(),
        err_final: *per_level.last().unwrap(),
        err_global: per_level.iter().cloned().fold(0.0, f64::max),
        rate_final: None,
        rate_global: None,
        mode: ErrorMode::Exact,
    }
}

/// Per-level errors `|U^m - u(t_m)|` of a scalar run, `m = 0..=M`.
pub fn scalar_errors(run: &ScalarTrajectory, exact: &dyn Fn(f64) -> f64) -> Vec<f64> {
    run.values
        .iter()
        .zip(run.mesh.nodes())
        .map(|(u, t)| (u - exact(*t)).abs())
        .collect()
}

pub fn exact_error_scalar(run: &ScalarTrajectory, exact: &dyn Fn(f64) -> f64) -> ErrorReport {
    let errs = scalar_errors(run, exact);
    ErrorReport {
        alpha: run.alpha,
        r: run.mesh.grading(),
        m: run.mesh.num_steps(),
        n: 0,
        err_final: *errs.last().unwrap(),
        err_global: errs.iter().cloned().fold(0.0, f64::max),
        rate_final: None,
        rate_global: None,
        mode: ErrorMode::Exact,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Time,
    Space,
    Global,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Time => "time",
            Study::Space => "space",
            Study::Global => "global",
        }
    }
}

/// How the second discretization parameter follows the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRule {
    /// `N = 2M`
    TwoM,
    /// `M = N^2`
    MSquared,
    /// `N = M/2`
    HalfM,
    /// `N = M/4`
    QuarterM,
    /// `N = M/128`
    M128,
    Fixed(usize),
}

impl NRule {
    /// `(M, N)` for a table size: `M` for time and global studies, `N` for
    /// spatial studies.
    pub fn resolve(self, size: usize, study: Study) -> Result<(usize, usize)> {
        let pair = match (self, study) {
            (NRule::MSquared, _) => (size * size, size),
            (_, Study::Space) => {
                return Err(Error::invalid(MODULE, "spatial studies need the rule M = N^2"))
            }
            (NRule::TwoM, _) => (size, 2 * size),
            (NRule::HalfM, _) => (size, size / 2),
            (NRule::QuarterM, _) => (size, size / 4),
            (NRule::M128, _) => (size, size / 128),
            (NRule::Fixed(n), _) => (size, n),
        };
        if pair.0 == 0 || pair.1 < 2 {
            return Err(Error::invalid(MODULE, format!("size {size} gives M = {}, N = {}", pair.0, pair.1)));
        }
        Ok(pair)
    }
}

/// Grading exponent as a function of `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradingRule {
    Uniform,
    /// `(2 - alpha) / 0.9`
    TwoMinusAlphaOver09,
    /// `(2 - alpha) / alpha`
    TwoMinusAlphaOverAlpha,
    /// `2 - alpha`
    TwoMinusAlpha,
    Fixed(f64),
}

impl GradingRule {
    pub fn value(self, alpha: f64) -> f64 {
        match self {
            GradingRule::Uniform => 1.0,
            GradingRule::TwoMinusAlphaOver09 => (2.0 - alpha) / 0.9,
            GradingRule::TwoMinusAlphaOverAlpha => (2.0 - alpha) / alpha,
            GradingRule::TwoMinusAlpha => 2.0 - alpha,
            GradingRule::Fixed(r) => r,
        }
    }
}

/// The test problem: `L = -Laplacian` on `(0, pi)^2` with zero Dirichlet
/// data, `f = (u^3 - u) / alpha`, `u0 = (2/5)(2y - x^2) sin x sin y`, `T = 1`.
pub fn allen_cahn_experiment(alpha: f64) -> Result<Problem> {
    Ok(Problem::new(
        alpha,
        CoefficientField::laplacian(2),
        BoundarySpec::dirichlet_zero(),
        Nonlinearity::allen_cahn(alpha)?,
        Arc::new(|x, _| 0.4 * (2.0 * x[1] - x[0] * x[0]) * x[0].sin() * x[1].sin()),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub alphas: Vec<f64>,
    pub rs: Vec<GradingRule>,
    /// `M` values for time and global studies, `N` values for spatial ones.
    pub sizes: Vec<usize>,
    pub n_rule: NRule,
    pub study: Study,
    /// Refuse to start when the estimated run time exceeds this.
    #[serde(default = "default_budget")]
    pub budget_seconds: f64,
}

fn default_budget() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub alpha: f64,
    pub r: f64,
    pub m: usize,
    pub n: usize,
    pub study: String,
    pub err: f64,
    pub rate: Option<f64>,
    /// Range check of both runs against `[-1, 1]`.
    pub range_ok: bool,
    pub warnings: Vec<String>,
}

/// Calibrated throughput of one solver level, in node-steps per second.
const NODE_STEPS_PER_SECOND: f64 = 3.0e8;

/// Rough cost of one run: history accumulation plus a fixed per-level
/// amount for the nonlinear solve.
pub fn estimate_seconds(m: usize, n: usize, dim: usize) -> f64 {
    let nodes = ((n + 1) as f64).powi(dim as i32);
    nodes * m as f64 * (0.5 * m as f64 + 400.0) / NODE_STEPS_PER_SECOND
}

/// Coarse and fine `(M, N)` of one table cell.
pub fn run_pair(rule: NRule, study: Study, size: usize) -> Result<((usize, usize), (usize, usize))> {
    Ok((rule.resolve(size, study)?, rule.resolve(2 * size, study)?))
}

impl TableSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.rs.is_empty() || self.sizes.is_empty() {
            return Err(Error::invalid(MODULE, "table spec needs alphas, rs and sizes"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::invalid(MODULE, format!("alpha must lie in (0, 1), got {a}")));
        }
        for &s in &self.sizes {
            self.n_rule.resolve(s, self.study)?;
        }
        Ok(())
    }

    pub fn estimated_seconds(&self) -> Result<f64> {
        let mut total = 0.0;
        for &s in &self.sizes {
            let (a, b) = run_pair(self.n_rule, self.study, s)?;
            total += estimate_seconds(a.0, a.1, 2) + estimate_seconds(b.0, b.1, 2);
        }
        Ok(total * (self.alphas.len() * self.rs.len()) as f64)
    }
}

/// Runs every `(alpha, r, size)` cell of the spec. Cells run in parallel;
/// rows come back in spec order.
pub fn table_run(spec: &TableSpec, cfg: &SolverConfig) -> Result<Vec<TableRow>> {
    spec.validate()?;
    let est = spec.estimated_seconds()?;
    if est > spec.budget_seconds {
        return Err(Error::Budget(format!(
            "estimated {est:.0} s exceeds the budget of {:.0} s",
            spec.budget_seconds
        )));
    }
    let mut cells = Vec::new();
    for &alpha in &spec.alphas {
        for &rule in &spec.rs {
            for &size in &spec.sizes {
                cells.push((alpha, rule.value(alpha), size));
            }
        }
    }
    let results: Vec<Result<(ErrorReport, bool, Vec<String>)>> = cells
        .par_iter()
        .map(|&(alpha, r, size)| {
            let ((mc, nc), (mf, nf)) = run_pair(spec.n_rule, spec.study, size)?;
            let problem = allen_cahn_experiment(alpha)?;
            let solve = |m: usize, n: usize| -> Result<SolutionHistory> {
                let mesh = TemporalMesh::graded(m, 1.0, r)?;
                let grid = Grid::new(2, n, PI)?;
                solve_pde(&problem, &mesh, &grid, cfg)
            };
            let coarse = solve(mc, nc)?;
            let fine = solve(mf, nf)?;
            let rep = two_mesh_error(&coarse, &fine)?;
            let range_ok = coarse.range_ok != Some(false) && fine.range_ok != Some(false);
            let mut warnings = coarse.warnings.clone();
            warnings.extend(fine.warnings.iter().cloned());
            warnings.dedup();
            Ok((rep, range_ok, warnings))
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut chunk: Vec<ErrorReport> = Vec::new();
    for (k, res) in results.into_iter().enumerate() {
        let (rep, range_ok, warnings) = res?;
        let (alpha, r, _) = cells[k];
        if k % spec.sizes.len() == 0 {
            chunk.clear();
        }
        chunk.push(rep.clone());
        attach_rates(&mut chunk);
        let last = chunk.last().unwrap();
        let (err, rate) = match spec.study {
            Study::Global => (last.err_global, last.rate_global),
            _ => (last.err_final, last.rate_final),
        };
        rows.push(TableRow {
            alpha,
            r,
            m: rep.m,
            n: rep.n,
            study: spec.study.name().to_string(),
            err,
            rate,
            range_ok,
            warnings,
        });
    }
    Ok(rows)
}

/// Global errors of `D^alpha u - u_xx = 0` on `(0, pi)` with `u0 = sin x`
/// against the exact solution of the spatially discrete problem,
/// `E_alpha(-lambda_h t^alpha) sin x`, so that only the temporal error
/// remains.
pub fn global_rate_1d_linear(alpha: f64, r: f64, ms: &[usize], n: usize, cfg: &SolverConfig) -> Result<Vec<TableRow>> {
    let grid = Grid::new(1, n, PI)?;
    let h = grid.h();
    let lam = (2.0 - 2.0 * h.cos()) / (h * h);
    let problem = Problem::new(
        alpha,
        CoefficientField::laplacian(1),
        BoundarySpec::dirichlet_zero(),
        Nonlinearity::zero(),
        Arc::new(|x, _| x[0].sin()),
    );
    let reports: Vec<Result<ErrorReport>> = ms
        .par_iter()
        .map(|&m| {
            let mesh = TemporalMesh::graded(m, 1.0, r)?;
            let run = solve_pde(&problem, &mesh, &grid, cfg)?;
            let amp: Vec<f64> = mesh.nodes().iter().map(|t| mittag_leffler(alpha, -lam * t.powf(alpha))).collect();
            let t = mesh.nodes();
            Ok(exact_error(&run, &|x, tm| {
                let j = t.partition_point(|s| *s < tm);
                amp[j] * x[0].sin()
            }))
        })
        .collect();
    let mut reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    attach_rates(&mut reports);
    Ok(reports
        .into_iter()
        .map(|rep| TableRow {
            alpha,
            r,
            m: rep.m,
            n,
            study: "global1d".to_string(),
            err: rep.err_global,
            rate: rep.rate_global,
            range_ok: true,
            warnings: Vec::new(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

/// Table 1: temporal study with `N = 2M`, spatial study with `M = N^2`.
pub fn table1_preset(scale: Scale) -> Vec<TableSpec> {
    let alphas = vec![0.3, 0.5, 0.7];
    let rs = vec![
        GradingRule::Uniform,
        GradingRule::TwoMinusAlphaOver09,
        GradingRule::TwoMinusAlphaOverAlpha,
    ];
    let (times, spaces) = match scale {
        Scale::Desk => (vec![32, 64, 128], vec![8, 16, 32]),
        Scale::Paper => (vec![32, 64, 128, 256], vec![8, 16, 32, 64]),
    };
    vec![
        TableSpec {
            alphas: alphas.clone(),
            rs: rs.clone(),
            sizes: times,
            n_rule: NRule::TwoM,
            study: Study::Time,
            budget_seconds: default_budget(),
        },
        TableSpec {
            alphas,
            rs,
            sizes: spaces,
            n_rule: NRule::MSquared,
            study: Study::Space,
            budget_seconds: default_budget(),
        },
    ]
}

/// Table 2: global errors for `r = (2 - alpha)/alpha` with `N = M/2`, plus
/// the spatial block. With `Scale::Paper` also the suboptimal gradings.
pub fn table2_preset(scale: Scale) -> Vec<TableSpec> {
    let alphas = vec![0.3, 0.5, 0.7];
    let opt = vec![GradingRule::TwoMinusAlphaOverAlpha];
    let mut specs = match scale {
        Scale::Desk => vec![TableSpec {
            alphas: alphas.clone(),
            rs: opt.clone(),
            sizes: vec![64, 128, 256],
            n_rule: NRule::HalfM,
            study: Study::Global,
            budget_seconds: default_budget(),
        }],
        Scale::Paper => vec![
            TableSpec {
                alphas: alphas.clone(),
                rs: opt.clone(),
                sizes: vec![256, 512, 1024, 2048],
                n_rule: NRule::HalfM,
                study: Study::Global,
                budget_seconds: default_budget(),
            },
            TableSpec {
                alphas: alphas.clone(),
                rs: vec![GradingRule::Uniform],
                sizes: vec![1 << 15, 1 << 16, 1 << 17, 1 << 18],
                n_rule: NRule::M128,
                study: Study::Global,
                budget_seconds: default_budget(),
            },
            TableSpec {
                alphas: alphas.clone(),
                rs: vec![GradingRule::TwoMinusAlpha],
                sizes: vec![1 << 12, 1 << 13, 1 << 14, 1 << 15],
                n_rule: NRule::QuarterM,
                study: Study::Global,
                budget_seconds: default_budget(),
            },
        ],
    };
    let spaces = match scale {
        Scale::Desk => vec![8, 16, 32],
        Scale::Paper => vec![8, 16, 32, 64],
    };
    specs.push(TableSpec {
        alphas,
        rs: opt,
        sizes: spaces,
        n_rule: NRule::MSquared,
        study: Study::Global,
        budget_seconds: default_budget(),
    });
    specs
}

/// The 1D substitute for the suboptimal-grading block at desk scale.
pub fn table2_lower_desk(cfg: &SolverConfig) -> Result<Vec<TableRow>> {
    let ms: Vec<usize> = vec![1 << 10, 1 << 11, 1 << 12, 1 << 13];
    let mut rows = Vec::new();
    for (alpha, r) in [(0.3, 1.0), (0.5, 1.0), (0.7, 1.0), (0.5, 1.5)] {
        rows.extend(global_rate_1d_linear(alpha, r, &ms, 8, cfg)?);
    }
    Ok(rows)
}

/// Header `alpha,r,M,N,study,err,rate`; six significant digits.
pub fn rows_to_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("alpha,r,M,N,study,err,rate\n");
    for row in rows {
        let rate = row.rate.map(|v| format!("{v:.5e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{:.5e},{:.5e},{},{},{},{:.5e},{}",
            row.alpha, row.r, row.m, row.n, row.study, row.err, rate
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformityReport {
    pub alpha: f64,
    pub r: f64,
    pub m_values: Vec<usize>,
    /// `max_m err(t_m) / E^m` per mesh.
    pub max_ratios: Vec<f64>,
    pub growth: Vec<f64>,
    pub pass: bool,
}

/// Largest growth of the conformity ratio per doubling of `M`.
pub const CONFORMITY_GROWTH: f64 = 0.1;

/// Pointwise errors of `D^alpha u + u = 0`, `u(0) = 1`, exact solution
/// `E_alpha(-t^alpha)`, measured against the error envelope on graded
/// meshes.
pub fn envelope_conformity(alpha: f64, r: f64, ms: &[usize], eps: f64) -> Result<ConformityReport> {
    let f = Nonlinearity::linear(1.0);
    let cfg = SolverConfig::scalar();
    let max_ratios = ms
        .iter()
        .map(|&m| {
            let mesh = TemporalMesh::graded(m, 1.0, r)?;
            let run = solve_scalar(&f, 1.0, &mesh, alpha, &cfg)?;
            let errs = scalar_errors(&run, &|t| mittag_leffler(alpha, -t.powf(alpha)));
            let env = error_envelope(&mesh, alpha, r, eps)?;
            Ok(errs[1..].iter().zip(&env).map(|(e, v)| e / v).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let growth: Vec<f64> = max_ratios.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let pass = max_ratios.iter().all(|v| v.is_finite()) && growth.iter().all(|g| *g < CONFORMITY_GROWTH);
    Ok(ConformityReport {
        alpha,
        r,
        m_values: ms.to_vec(),
        max_ratios,
        growth,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rate_examples() {
        assert!((rate(1.88e-3, 8.98e-4).unwrap() - 1.07).abs() < 0.005);
        assert_eq!(rate(4e-2, 1e-2).unwrap(), 2.0);
        assert!((rate(3.91e-4, 1.43e-4).unwrap() - 1.45).abs() < 0.005);
        assert!(rate(0.0, 1.0).is_err());
        assert!(rate(1.0, -1.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let ms = [64.0, 128.0, 256.0, 512.0];
        let errs: Vec<f64> = ms.iter().map(|m: &f64| 3.0 * m.powf(-1.5)).collect();
        assert!((ls_slope(&ms, &errs).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn n_rules() {
        assert_eq!(NRule::TwoM.resolve(32, Study::Time).unwrap(), (32, 64));
        assert_eq!(NRule::MSquared.resolve(8, Study::Space).unwrap(), (64, 8));
        assert_eq!(NRule::HalfM.resolve(256, Study::Global).unwrap(), (256, 128));
        assert!(NRule::M128.resolve(128, Study::Global).is_err());
        assert!(NRule::TwoM.resolve(8, Study::Space).is_err());
        assert_eq!(run_pair(NRule::TwoM, Study::Time, 32).unwrap(), ((32, 64), (64, 128)));
        assert_eq!(run_pair(NRule::MSquared, Study::Space, 8).unwrap(), ((64, 8), (256, 16)));
        assert_eq!(run_pair(NRule::Fixed(8), Study::Global, 64).unwrap(), ((64, 8), (128, 8)));
    }

    fn heat(alpha: f64, amp: f64) -> Problem {
        Problem::new(
            alpha,
            CoefficientField::laplacian(1),
            BoundarySpec::dirichlet_zero(),
            Nonlinearity::zero(),
            Arc::new(move |x, _| amp * x[0].sin()),
        )
    }

    fn heat_run(alpha: f64, amp: f64, m: usize, r: f64, n: usize) -> SolutionHistory {
        let mesh = TemporalMesh::graded(m, 1.0, r).unwrap();
        let grid = Grid::new(1, n, PI).unwrap();
        solve_pde(&heat(alpha, amp), &mesh, &grid, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn identical_runs_have_zero_error() {
        let a = heat_run(0.5, 1.0, 16, 2.0, 8);
        let rep = two_mesh_error(&a, &a).unwrap();
        assert_eq!(rep.err_final, 0.0);
        assert_eq!(rep.err_global, 0.0);
    }

    #[test]
    fn non_nesting_is_rejected() {
        let a = heat_run(0.5, 1.0, 16, 2.0, 8);
        let b = heat_run(0.5, 1.0, 32, 1.5, 8);
        assert!(matches!(two_mesh_error(&a, &b), Err(Error::NonNesting(_))));
        let c = heat_run(0.5, 1.0, 16, 2.0, 12);
        assert!(matches!(two_mesh_error(&a, &c), Err(Error::NonNesting(_))));
    }

    #[test]
    fn zero_solution_has_zero_exact_error() {
        let a = heat_run(0.5, 0.0, 8, 1.0, 8);
        let rep = exact_error(&a, &|_, _| 0.0);
        assert_eq!(rep.err_global, 0.0);
    }

    #[test]
    fn two_mesh_and_exact_rates_agree() {
        let (alpha, r, n) = (0.5, 3.0, 8);
        let grid = Grid::new(1, n, PI).unwrap();
        let h = grid.h();
        let lam = (2.0 - 2.0 * h.cos()) / (h * h);
        let mut two = Vec::new();
        let mut ex = Vec::new();
        for m in [64, 128, 256] {
            let c = heat_run(alpha, 1.0, m, r, n);
            let f = heat_run(alpha, 1.0, 2 * m, r, n);
            two.push(two_mesh_error(&c, &f).unwrap());
            let amp = mittag_leffler(alpha, -lam);
            let e = exact_error(&c, &|x, t| if t == 1.0 { amp * x[0].sin() } else { f64::NAN });
            ex.push(e);
        }
        attach_rates(&mut two);
        attach_rates(&mut ex);
        for k in 1..3 {
            let (a, b) = (two[k].rate_final.unwrap(), ex[k].rate_final.unwrap());
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn scalar_rate_in_positive_time() {
        let alpha = 0.5;
        let f = Nonlinearity::linear(1.0);
        let exact = mittag_leffler(alpha, -1.0);
        let ms = [64usize, 128, 256, 512, 1024];
        let errs: Vec<f64> = ms
            .iter()
            .map(|&m| {
                let mesh = TemporalMesh::graded(m, 1.0, 3.0).unwrap();
                let run = solve_scalar(&f, 1.0, &mesh, alpha, &SolverConfig::scalar()).unwrap();
                exact_error_scalar(&run, &|t| if t == 1.0 { exact } else { 0.0 }).err_final
            })
            .collect();
        let sizes: Vec<f64> = ms.iter().map(|m| *m as f64).collect();
        let q = ls_slope(&sizes, &errs).unwrap();
        assert!((q - 1.5).abs() < 0.1, "{q}");
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            TableRow {
                alpha: 0.3,
                r: 1.0,
                m: 32,
                n: 64,
                study: "time".into(),
                err: 1.88e-3,
                rate: None,
                range_ok: true,
                warnings: vec![],
            },
            TableRow {
                alpha: 0.3,
                r: 1.0,
                m: 64,
                n: 64,
                study: "time".into(),
                err: 8.98e-4,
                rate: Some(1.0659),
                range_ok: true,
                warnings: vec![],
            },
        ];
        let csv = rows_to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "alpha,r,M,N,study,err,rate");
        assert_eq!(lines[1], "3.00000e-1,1.00000e0,32,64,time,1.88000e-3,");
        assert_eq!(lines[2], "3.00000e-1,1.00000e0,64,64,time,8.98000e-4,1.06590e0");
    }

    #[test]
    fn budget_guard() {
        let mut spec = table1_preset(Scale::Paper).remove(0);
        spec.budget_seconds = 1.0;
        assert!(matches!(table_run(&spec, &SolverConfig::default()), Err(Error::Budget(_))));
    }

    #[test]
    fn single_size_gives_no_rate() {
        let spec = TableSpec {
            alphas: vec![0.5],
            rs: vec![GradingRule::Uniform],
            sizes: vec![8],
            n_rule: NRule::TwoM,
            study: Study::Time,
            budget_seconds: 60.0,
        };
        let rows = table_run(&spec, &SolverConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rate.is_none() && rows[0].err > 0.0 && rows[0].range_ok);
    }

    #[test]
    fn conformity_on_graded_meshes() {
        for r in [1.0, 1.3, 1.7, 3.0] {
            let rep = envelope_conformity(0.5, r, &[256, 512, 1024], 0.01).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn rates_ignore_solution_scale(scale in 0.01f64..100.0) {
            let mut base = Vec::new();
            let mut scaled = Vec::new();
            for m in [16usize, 32, 64] {
                let c = heat_run(0.6, 1.0, m, 2.0, 8);
                let f = heat_run(0.6, 1.0, 2 * m, 2.0, 8);
                base.push(two_mesh_error(&c, &f).unwrap());
                let c = heat_run(0.6, scale, m, 2.0, 8);
                let f = heat_run(0.6, scale, 2 * m, 2.0, 8);
                scaled.push(two_mesh_error(&c, &f).unwrap());
            }
            attach_rates(&mut base);
            attach_rates(&mut scaled);
            for k in 1..3 {
                let (a, b) = (base[k].rate_final.unwrap(), scaled[k].rate_final.unwrap());
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
