//! Full discretization: at every level `m` solve
//! `kappa_{m,m} U^m + L_h U^m + f(., t_m, U^m) = F^m` on the grid unknowns,
//! with `F^m = sum_{j<m} kappa_{m,j} U^j`.

use crate::caputo_l1::WeightCache;
use crate::error::{Error, Result};
use crate::linalg::{bicgstab, norm2, norm_inf, pcg, BandedLu, CsrMatrix, Jacobi, Multigrid, Preconditioner};
use crate::nonlinearity::Nonlinearity;
use crate::spatial_fd::{
    assemble_with_layout, check_max_principle, prolongation_chain, BoundaryCondition, BoundarySpec,
    CoefficientField, DiscreteOperator, DofLayout, Grid, MaxPrincipleReport, ScalarField,
};
use crate::temporal_mesh::{check_step_restriction, FracParams, StepRestrictionReport, TemporalMesh};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const MODULE: &str = "pde_solver";
const LINE_SEARCH_FLOOR: f64 = 1.0 / 1048576.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Multigrid,
    Jacobi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nonlin_tol: f64,
    pub max_newton: usize,
    /// Relative residual for inner Krylov solves.
    pub lin_tol: f64,
    pub lin_max_iters: usize,
    /// Line-search shrink factor.
    pub damping: f64,
    pub strict_restriction: bool,
    pub preconditioner: PreconditionerKind,
    /// Warn when the stored history is expected to exceed this many bytes.
    pub memory_budget: u64,
    /// Keep every weight row once computed.
    pub cache_weights: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nonlin_tol: 1e-10,
            max_newton: 30,
            lin_tol: 1e-12,
            lin_max_iters: 2000,
            damping: 0.5,
            strict_restriction: false,
            preconditioner: PreconditionerKind::Multigrid,
            memory_budget: 4 << 30,
            cache_weights: false,
        }
    }
}

impl SolverConfig {
    /// Tighter defaults for the scalar problem, where solves are cheap.
    pub fn scalar() -> Self {
        SolverConfig {
            nonlin_tol: 1e-12,
            max_newton: 50,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.nonlin_tol) || !pos(self.lin_tol) {
            return Err(Error::invalid(MODULE, "tolerances must be positive"));
        }
        if self.max_newton == 0 || self.lin_max_iters == 0 {
            return Err(Error::invalid(MODULE, "iteration limits must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::invalid(MODULE, format!("damping must lie in (0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct Problem {
    pub alpha: f64,
    pub coeffs: CoefficientField,
    pub bc: BoundarySpec,
    pub f: Nonlinearity,
    /// Initial data; the time argument is ignored.
    pub u0: ScalarField,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("alpha", &self.alpha)
            .field("coeffs", &self.coeffs)
            .field("bc", &self.bc)
            .field("f", &self.f)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(alpha: f64, coeffs: CoefficientField, bc: BoundarySpec, f: Nonlinearity, u0: ScalarField) -> Self {
        Problem {
            alpha,
            coeffs,
            bc,
            f,
            u0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LevelDiagnostics {
    pub newton_iters: usize,
    pub linear_iters: usize,
    /// Final `||N(U^m) - F^m||_inf`.
    pub residual: f64,
    pub picard: bool,
}

#[derive(Debug, Clone)]
pub struct SolutionHistory {
    pub mesh: TemporalMesh,
    pub grid: Grid,
    pub alpha: f64,
    /// Nodal fields `U^0..=U^M` on the full grid.
    pub fields: Vec<Vec<f64>>,
    /// Entry 0 belongs to `U^0` and is empty.
    pub diagnostics: Vec<LevelDiagnostics>,
    /// Range check against the reaction's declared range, when applicable.
    pub range_ok: Option<bool>,
    pub restriction: StepRestrictionReport,
    pub max_principle: MaxPrincipleReport,
    pub nonlin_tol: f64,
    pub warnings: Vec<String>,
}

impl SolutionHistory {
    pub fn final_field(&self) -> &[f64] {
        self.fields.last().expect("history holds U^0")
    }
}

/// Level-by-level solver state.
pub struct PdeStepper {
    problem: Problem,
    mesh: TemporalMesh,
    grid: Grid,
    cfg: SolverConfig,
    layout: Arc<DofLayout>,
    prolongations: Vec<CsrMatrix>,
    fixed_op: Option<DiscreteOperator>,
    coords: Vec<[f64; 2]>,
    cache: WeightCache,
    fields: Vec<Vec<f64>>,
    diagnostics: Vec<LevelDiagnostics>,
    restriction: StepRestrictionReport,
    max_principle: MaxPrincipleReport,
    warnings: Vec<String>,
}

fn sample_times(mesh: &TemporalMesh, time_dependent: bool) -> Vec<f64> {
    let nodes = mesh.nodes();
    if !time_dependent {
        return vec![0.0];
    }
    let m = mesh.num_steps();
    let stride = (m / 16).max(1);
    let mut ts: Vec<f64> = (0..=m).step_by(stride).map(|j| nodes[j]).collect();
    if *ts.last().unwrap() != mesh.final_time() {
        ts.push(mesh.final_time());
    }
    ts
}

impl PdeStepper {
    pub fn new(problem: &Problem, mesh: &TemporalMesh, grid: &Grid, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = problem.clone();
        let d = grid.dim();
        let times = sample_times(mesh, problem.coeffs.time_dependent);
        problem.coeffs.validate(grid, &times)?;
        let max_principle = check_max_principle(grid, &problem.coeffs, &times)?;
        if !max_principle.pass {
            return Err(Error::invalid(
                MODULE,
                format!(
                    "discrete maximum principle fails: h = {} exceeds the admissible {}",
                    max_principle.h, max_principle.required_h
                ),
            ));
        }
        let params = FracParams::new(problem.alpha, problem.f.lambda())?;
        let robin_or_periodic = problem.bc.faces[..2 * d]
            .iter()
            .any(|f| matches!(f, BoundaryCondition::Periodic | BoundaryCondition::Robin(_)));
        let restriction = check_step_restriction(mesh, params, cfg.strict_restriction || robin_or_periodic);
        let mut warnings = Vec::new();
        if !restriction.pass {
            if cfg.strict_restriction {
                restriction.require(MODULE)?;
            }
            warnings.push(restriction.message());
        }
        let bytes = (mesh.num_steps() as u64 + 1) * grid.num_nodes() as u64 * 8;
        if bytes > cfg.memory_budget {
            warnings.push(format!(
                "history needs about {bytes} bytes, above the budget of {} bytes",
                cfg.memory_budget
            ));
        }
        let layout = Arc::new(DofLayout::new(grid, &problem.bc)?);
        let prolongations = if d == 1 && !problem.bc.is_periodic_anywhere(1) {
            Vec::new()
        } else {
            prolongation_chain(&layout, &problem.bc)
        };
        let fixed_op = if problem.coeffs.time_dependent || problem.bc.time_dependent {
            None
        } else {
            Some(assemble_with_layout(layout.clone(), &problem.coeffs, 0.0, &problem.bc)?)
        };
        let coords = layout.unknown_nodes().iter().map(|&n| grid.coord(n)).collect();
        let u0 = &problem.u0;
        let first = grid.sample(&|x, _| u0(x, 0.0), 0.0);
        if first.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(MODULE, "u0 is not finite at every node"));
        }
        Ok(PdeStepper {
            cache: WeightCache::new(mesh, problem.alpha, cfg.cache_weights),
            problem,
            mesh: mesh.clone(),
            grid: *grid,
            cfg: cfg.clone(),
            layout,
            prolongations,
            fixed_op,
            coords,
            fields: vec![first],
            diagnostics: vec![LevelDiagnostics::default()],
            restriction,
            max_principle,
            warnings,
        })
    }

    /// Index of the last computed level.
    pub fn level(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    /// Computes the next level and returns its nodal field.
    pub fn step(&mut self) -> Result<&[f64]> {
        let m = self.level() + 1;
        if m > self.mesh.num_steps() {
            return Err(Error::LevelOutOfRange {
                level: m,
                max: self.mesh.num_steps(),
            });
        }
        let t = self.mesh.nodes()[m];
        let w = self.cache.get(m)?;
        let load_full = w.history_load_fields(&self.fields)?;
        let load = self.layout.restrict(&load_full);
        let owned;
        let op = match &self.fixed_op {
            Some(op) => op,
            None => {
                owned = assemble_with_layout(self.layout.clone(), &self.problem.coeffs, t, &self.problem.bc)?;
                &owned
            }
        };
        let mut prev = self.layout.restrict(&self.fields[m - 1]);
        if m >= 2 {
            // linear extrapolation in t as the initial Newton iterate
            let older = self.layout.restrict(&self.fields[m - 2]);
            let nodes = self.mesh.nodes();
            let w = (nodes[m] - nodes[m - 1]) / (nodes[m - 1] - nodes[m - 2]);
            for (p, o) in prev.iter_mut().zip(&older) {
                *p += w * (*p - o);
            }
        }
        let (u, diag) = self.solve_level(op, w.diagonal(), &load, prev, t, m)?;
        let boundary = self.layout.dirichlet_values(&self.problem.bc, t);
        let field = self.layout.extend(&u, |node| boundary[node]);
        self.fields.push(field);
        self.diagnostics.push(diag);
        Ok(self.fields.last().unwrap())
    }

    fn residual(&self, op: &DiscreteOperator, kappa: f64, load: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        let d = self.grid.dim();
        op.matrix.matvec(u, out);
        let f = &self.problem.f;
        for k in 0..u.len() {
            out[k] += op.dirichlet_data[k] + kappa * u[k] + f.eval(&self.coords[k][..d], t, u[k]) - load[k];
        }
    }

    fn solve_level(
        &self,
        op: &DiscreteOperator,
        kappa: f64,
        load: &[f64],
        mut u: Vec<f64>,
        t: f64,
        m: usize,
    ) -> Result<(Vec<f64>, LevelDiagnostics)> {
        let n = u.len();
        let d = self.grid.dim();
        let f = &self.problem.f;
        let cfg = &self.cfg;
        let load_norm = norm_inf(load);
        let tol = cfg.nonlin_tol * load_norm.max(1.0);
        let a_norm = (0..op.matrix.nrows())
            .map(|i| op.matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut r = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; n];
        self.residual(op, kappa, load, &u, t, &mut r);
        let mut rn = norm_inf(&r);
        let mut diag = LevelDiagnostics::default();
        let floor = |u: &[f64]| 64.0 * f64::EPSILON * ((a_norm + kappa) * norm_inf(u) + load_norm + norm_inf(&op.dirichlet_data));
        let diag_positions = op.matrix.diagonal_positions()?;
        let mut picard = false;
        let mut newton_pc = None;
        for _ in 0..cfg.max_newton {
            if !rn.is_finite() {
                return Err(Error::NonFinite { module: MODULE, level: m });
            }
            if rn <= tol.max(floor(&u)) {
                diag.residual = rn;
                return Ok((u, diag));
            }
            diag.newton_iters += 1;
            let mut jac = op.matrix.clone();
            {
                let vals = jac.values_mut();
                for (k, &p) in diag_positions.iter().enumerate() {
                    vals[p] += kappa + f.deriv(&self.coords[k][..d], t, u[k]);
                }
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            // inexact Newton: the linear residual only has to undercut tol
            let rel = (0.1 * tol / norm2(&r)).min(1e-2).max(cfg.lin_tol);
            let (delta, its) = self.linear_solve(&jac, op.symmetric, &rhs, rel, &mut newton_pc)?;
            diag.linear_iters += its;
            let mut s = 1.0;
            let accepted = loop {
                for k in 0..n {
                    trial[k] = u[k] + s * delta[k];
                }
                self.residual(op, kappa, load, &trial, t, &mut r_trial);
                let tn = norm_inf(&r_trial);
                if tn.is_finite() && (tn <= (1.0 - 1e-4 * s) * rn || tn <= tol) {
                    break Some(tn);
                }
                s *= cfg.damping;
                if s < LINE_SEARCH_FLOOR {
                    break None;
                }
            };
            match accepted {
                Some(tn) => {
                    std::mem::swap(&mut u, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    rn = tn;
                }
                None => {
                    picard = true;
                    break;
                }
            }
        }
        if picard || rn > tol.max(floor(&u)) {
            diag.picard = picard;
            // frozen-reaction iteration with a stabilizing shift
            let lam = f.lambda();
            let mut picard_pc = None;
            for _ in 0..cfg.max_newton {
                if rn <= tol.max(floor(&u)) {
                    break;
                }
                diag.newton_iters += 1;
                let shift = self
                    .coords
                    .iter()
                    .zip(&u)
                    .map(|(x, &v)| f.deriv(&x[..d], t, v))
                    .fold(lam, f64::max)
                    .max(0.0);
                let mut sys = op.matrix.clone();
                {
                    let vals = sys.values_mut();
                    for &p in &diag_positions {
                        vals[p] += kappa + shift;
                    }
                }
                // (A + kappa + s) du = -R(u)
                let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
                let (delta, its) = self.linear_solve(&sys, op.symmetric, &rhs, cfg.lin_tol, &mut picard_pc)?;
                diag.linear_iters += its;
                for k in 0..n {
                    u[k] += delta[k];
                }
                self.residual(op, kappa, load, &u, t, &mut r);
                rn = norm_inf(&r);
                if !rn.is_finite() {
                    return Err(Error::NonFinite { module: MODULE, level: m });
                }
            }
        }
        diag.residual = rn;
        if rn <= tol.max(floor(&u)) {
            Ok((u, diag))
        } else {
            Err(Error::Nonconvergence {
                module: MODULE,
                level: m,
                iterations: diag.newton_iters,
                residual: rn,
            })
        }
    }

    /// Solves `a x = b`. The preconditioner is built on first use and then
    /// reused for later matrices of the same level.
    fn linear_solve(
        &self,
        a: &CsrMatrix,
        symmetric: bool,
        b: &[f64],
        tol: f64,
        slot: &mut Option<Box<dyn Preconditioner>>,
    ) -> Result<(Vec<f64>, usize)> {
        if self.grid.dim() == 1 && !self.problem.bc.is_periodic_anywhere(1) {
            return Ok((BandedLu::factor(a)?.solve(b), 1));
        }
        if slot.is_none() {
            *slot = Some(match self.cfg.preconditioner {
                PreconditionerKind::Multigrid => Box::new(Multigrid::new(a, &self.prolongations)?),
                PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)?),
            });
        }
        let pc = slot.as_ref().unwrap();
        let mut x = vec![0.0; b.len()];
        let iters = self.cfg.lin_max_iters;
        if symmetric {
            match pcg(a, b, &mut x, pc.as_ref(), tol, iters) {
                Ok(st) => return Ok((x, st.iterations)),
                Err(_) => x.fill(0.0),
            }
        }
        let st = bicgstab(a, b, &mut x, pc.as_ref(), tol, iters)?;
        Ok((x, st.iterations))
    }

    pub fn finish(self) -> SolutionHistory {
        let mut hist = SolutionHistory {
            mesh: self.mesh,
            grid: self.grid,
            alpha: self.problem.alpha,
            fields: self.fields,
            diagnostics: self.diagnostics,
            range_ok: None,
            restriction: self.restriction,
            max_principle: self.max_principle,
            nonlin_tol: self.cfg.nonlin_tol,
            warnings: self.warnings,
        };
        if let Some((s1, s2)) = self.problem.f.range() {
            if range_applicable(&self.problem, &hist, s1, s2) {
                hist.range_ok = Some(range_check_pde(&hist, s1, s2));
            }
        }
        hist
    }
}

/// Whether the bound-preservation statement covers this run: no reaction
/// coefficient `c`, initial and Dirichlet data inside `[s1, s2]`.
fn range_applicable(problem: &Problem, hist: &SolutionHistory, s1: f64, s2: f64) -> bool {
    if problem.coeffs.reaction.is_some() {
        return false;
    }
    let inside = |v: &f64| (s1..=s2).contains(v);
    if !hist.fields[0].iter().all(inside) {
        return false;
    }
    let layout = match DofLayout::new(&hist.grid, &problem.bc) {
        Ok(l) => l,
        Err(_) => return false,
    };
    hist.fields.iter().all(|field| {
        field
            .iter()
            .enumerate()
            .filter(|(n, _)| layout.unknown_of(*n).is_none())
            .all(|(_, v)| inside(v))
    })
}

pub fn solve_pde(problem: &Problem, mesh: &TemporalMesh, grid: &Grid, cfg: &SolverConfig) -> Result<SolutionHistory> {
    let mut stepper = PdeStepper::new(problem, mesh, grid, cfg)?;
    for _ in 0..mesh.num_steps() {
        stepper.step()?;
    }
    Ok(stepper.finish())
}

/// All nodal values lie in `[s1 - tol, s2 + tol]` with `tol = nonlin_tol`.
pub fn range_check_pde(hist: &SolutionHistory, s1: f64, s2: f64) -> bool {
    let slack = hist.nonlin_tol;
    hist.fields
        .iter()
        .flatten()
        .all(|&v| v >= s1 - slack && v <= s2 + slack)
}
