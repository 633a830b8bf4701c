//! JSON run configuration: schema, validation and conversion to solver
//! inputs.
//!
//! Every block is optional at the schema level so that validation can report
//! the first offending field by its path (`mesh.M must be ≥ 1`) instead of
//! stopping at a missing sibling block.

use crate::expr::{Expr, Var};
use fraxolve::nonlinearity::Nonlinearity;
use fraxolve::pde_solver::{Problem, SolverConfig};
use fraxolve::spatial_fd::{BoundaryCondition, BoundarySpec, CoefficientField, Grid};
use fraxolve::temporal_mesh::TemporalMesh;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// A number or an expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSrc {
    Num(f64),
    Text(String),
}

impl ExprSrc {
    pub fn parse(&self, path: &str) -> Result<Expr, ConfigError> {
        match self {
            ExprSrc::Num(v) => Ok(Expr::constant(*v)),
            ExprSrc::Text(s) => Expr::parse(s).map_err(|e| ConfigError(format!("{path}: {e}"))),
        }
    }

    /// Parses and rejects any dependence on `x`, `y` or `t`.
    pub fn constant(&self, path: &str) -> Result<f64, ConfigError> {
        let e = self.parse(path)?;
        if e.uses(Var::X) || e.uses(Var::Y) || e.uses(Var::T) {
            return err(format!("{path} must be a constant"));
        }
        Ok(e.eval(0.0, 0.0, 0.0))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcBlock>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<ExprSrc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoeffBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FBlock {
    pub kind: String,
    /// Parameter of `allen_cahn`; defaults to `problem.alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Coefficient of `linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffBlock {
    pub diffusion: Vec<ExprSrc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convection: Option<Vec<ExprSrc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction: Option<ExprSrc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<i64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    /// Side length of the domain `(0, X)^d`; default `pi`.
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<ExprSrc>,
}

/// `"dirichlet0"`, `"neumann"`, `"periodic"`, `{"dirichlet": expr}` or
/// `{"robin": mu}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaceBc {
    Name(String),
    Data(FaceData),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceData {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<ExprSrc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robin: Option<ExprSrc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_lo: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_hi: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_lo: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hi: Option<FaceBc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionOutput {
    /// Every level.
    #[default]
    All,
    /// `U^0` and `U^M`.
    Final,
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Used when `--out` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub solution: SolutionOutput,
}

/// Parses a JSON document. Schema errors carry the field path and the
/// line/column reported by the JSON reader.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." || path.is_empty() {
            ConfigError(format!("config: {}", e.inner()))
        } else {
            ConfigError(format!("config: {path}: {}", e.inner()))
        }
    })?;
    cfg.check_blocks()?;
    Ok(cfg)
}

/// Inputs of the scalar solver.
#[derive(Debug, Clone)]
pub struct ScalarPlan {
    pub alpha: f64,
    pub f: Nonlinearity,
    pub u0: f64,
    pub mesh: TemporalMesh,
    pub solver: SolverConfig,
}

/// Inputs of the PDE solver.
#[derive(Debug, Clone)]
pub struct PdePlan {
    pub problem: Problem,
    pub mesh: TemporalMesh,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub output: OutputBlock,
}

impl RunConfig {
    /// Checks every block that is present, in the order mesh, grid,
    /// problem, bc, solver.
    pub fn check_blocks(&self) -> Result<(), ConfigError> {
        if let Some(m) = &self.mesh {
            build_mesh(m)?;
        }
        if let Some(g) = &self.grid {
            build_grid(g)?;
        }
        if let Some(p) = &self.problem {
            check_problem(p)?;
        }
        if let (Some(bc), Some(g)) = (&self.bc, &self.grid) {
            build_bc(bc, build_grid(g)?.dim())?;
        }
        self.solver
            .validate()
            .map_err(|e| ConfigError(format!("solver: {e}")))?;
        Ok(())
    }

    pub fn problem_mut(&mut self) -> &mut ProblemBlock {
        self.problem.get_or_insert_with(Default::default)
    }

    pub fn mesh_mut(&mut self) -> &mut MeshBlock {
        self.mesh.get_or_insert_with(Default::default)
    }

    pub fn grid_mut(&mut self) -> &mut GridBlock {
        self.grid.get_or_insert_with(Default::default)
    }

    pub fn scalar_plan(&self) -> Result<ScalarPlan, ConfigError> {
        let mesh = build_mesh(self.mesh.as_ref().ok_or(ConfigError("mesh block is required".into()))?)?;
        let p = self.problem.as_ref().ok_or(ConfigError("problem block is required".into()))?;
        let alpha = check_alpha(p)?;
        let f = build_f(p, alpha)?;
        let u0 = p
            .u0
            .as_ref()
            .ok_or(ConfigError("problem.u0 is required".into()))?
            .constant("problem.u0")?;
        if p.coefficients.is_some() {
            return err("problem.coefficients has no meaning for the scalar problem");
        }
        let mut solver = self.solver.clone();
        if solver == SolverConfig::default() {
            solver = SolverConfig::scalar();
        }
        Ok(ScalarPlan {
            alpha,
            f,
            u0,
            mesh,
            solver,
        })
    }

    pub fn pde_plan(&self) -> Result<PdePlan, ConfigError> {
        let mesh = build_mesh(self.mesh.as_ref().ok_or(ConfigError("mesh block is required".into()))?)?;
        let grid = build_grid(self.grid.as_ref().ok_or(ConfigError("grid block is required".into()))?)?;
        let p = self.problem.as_ref().ok_or(ConfigError("problem block is required".into()))?;
        let alpha = check_alpha(p)?;
        let f = build_f(p, alpha)?;
        let d = grid.dim();
        let u0 = p.u0.as_ref().ok_or(ConfigError("problem.u0 is required".into()))?;
        let u0 = spatial_expr(u0, "problem.u0", d)?;
        let coeffs = match &p.coefficients {
            None => CoefficientField::laplacian(d),
            Some(c) => build_coeffs(c, d)?,
        };
        let bc = match &self.bc {
            None => BoundarySpec::dirichlet_zero(),
            Some(b) => build_bc(b, d)?,
        };
        Ok(PdePlan {
            problem: Problem::new(alpha, coeffs, bc, f, u0.to_field()),
            mesh,
            grid,
            solver: self.solver.clone(),
            output: self.output.clone(),
        })
    }
}

fn check_alpha(p: &ProblemBlock) -> Result<f64, ConfigError> {
    let alpha = p.alpha.ok_or(ConfigError("problem.alpha is required".into()))?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return err(format!("problem.alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(alpha)
}

fn check_problem(p: &ProblemBlock) -> Result<(), ConfigError> {
    if p.alpha.is_some() {
        check_alpha(p)?;
    }
    if let Some(u0) = &p.u0 {
        u0.parse("problem.u0")?;
    }
    if let Some(c) = &p.coefficients {
        for (k, a) in c.diffusion.iter().enumerate() {
            a.parse(&format!("problem.coefficients.diffusion[{k}]"))?;
        }
        for (k, b) in c.convection.iter().flatten().enumerate() {
            b.parse(&format!("problem.coefficients.convection[{k}]"))?;
        }
        if let Some(r) = &c.reaction {
            r.parse("problem.coefficients.reaction")?;
        }
    }
    if let (Some(_), Some(alpha)) = (&p.f, p.alpha) {
        build_f(p, alpha)?;
    }
    Ok(())
}

fn build_f(p: &ProblemBlock, alpha: f64) -> Result<Nonlinearity, ConfigError> {
    let fb = p.f.as_ref().ok_or(ConfigError("problem.f is required".into()))?;
    let param = match fb.kind.as_str() {
        "allen_cahn" => Some(fb.alpha.unwrap_or(alpha)),
        "linear" => fb.c,
        _ => None,
    };
    if fb.kind != "allen_cahn" && fb.alpha.is_some() {
        return err(format!("problem.f.alpha does not apply to '{}'", fb.kind));
    }
    if fb.kind != "linear" && fb.c.is_some() {
        return err(format!("problem.f.c does not apply to '{}'", fb.kind));
    }
    Nonlinearity::builtin(&fb.kind, param).map_err(|e| ConfigError(format!("problem.f: {e}")))
}

pub fn build_mesh(m: &MeshBlock) -> Result<TemporalMesh, ConfigError> {
    if let Some(nodes) = &m.nodes {
        if m.m.is_some() || m.t.is_some() || m.r.is_some() {
            return err("mesh.nodes excludes mesh.M, mesh.T and mesh.r");
        }
        return TemporalMesh::from_nodes(nodes.clone()).map_err(|e| ConfigError(format!("mesh.nodes: {e}")));
    }
    let count = m.m.ok_or(ConfigError("mesh.M is required".into()))?;
    if count < 1 {
        return err("mesh.M must be ≥ 1");
    }
    let t = m.t.unwrap_or(1.0);
    if !(t > 0.0 && t.is_finite()) {
        return err("mesh.T must be positive");
    }
    let r = m.r.unwrap_or(1.0);
    if !(r >= 1.0 && r.is_finite()) {
        return err("mesh.r must be ≥ 1");
    }
    TemporalMesh::graded(count as usize, t, r).map_err(|e| ConfigError(format!("mesh: {e}")))
}

pub fn build_grid(g: &GridBlock) -> Result<Grid, ConfigError> {
    let d = g.d.ok_or(ConfigError("grid.d is required".into()))?;
    if d != 1 && d != 2 {
        return err("grid.d must be 1 or 2");
    }
    let n = g.n.ok_or(ConfigError("grid.N is required".into()))?;
    if n < 2 {
        return err("grid.N must be ≥ 2");
    }
    let x = match &g.x {
        None => std::f64::consts::PI,
        Some(src) => src.constant("grid.X")?,
    };
    if !(x > 0.0 && x.is_finite()) {
        return err("grid.X must be positive");
    }
    Grid::new(d as usize, n as usize, x).map_err(|e| ConfigError(format!("grid: {e}")))
}

fn spatial_expr(src: &ExprSrc, path: &str, d: usize) -> Result<Expr, ConfigError> {
    let e = src.parse(path)?;
    if d == 1 && e.uses(Var::Y) {
        return err(format!("{path}: y is not available in 1D"));
    }
    Ok(e)
}

fn build_coeffs(c: &CoeffBlock, d: usize) -> Result<CoefficientField, ConfigError> {
    if c.diffusion.len() != d {
        return err(format!("problem.coefficients.diffusion needs {d} entries"));
    }
    let mut uses_t = false;
    let mut field = |src: &ExprSrc, path: String| -> Result<_, ConfigError> {
        let e = spatial_expr(src, &path, d)?;
        uses_t |= e.uses(Var::T);
        Ok(e.to_field())
    };
    let diffusion = c
        .diffusion
        .iter()
        .enumerate()
        .map(|(k, a)| field(a, format!("problem.coefficients.diffusion[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let convection = match &c.convection {
        None => None,
        Some(b) => {
            if b.len() != d {
                return err(format!("problem.coefficients.convection needs {d} entries"));
            }
            Some(
                b.iter()
                    .enumerate()
                    .map(|(k, v)| field(v, format!("problem.coefficients.convection[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
    };
    let reaction = match &c.reaction {
        None => None,
        Some(r) => Some(field(r, "problem.coefficients.reaction".into())?),
    };
    Ok(CoefficientField {
        diffusion,
        convection,
        reaction,
        time_dependent: uses_t,
    })
}

fn build_face(face: &FaceBc, path: &str, d: usize) -> Result<(BoundaryCondition, bool), ConfigError> {
    match face {
        FaceBc::Name(name) => match name.as_str() {
            "dirichlet0" => Ok((BoundaryCondition::dirichlet_zero(), false)),
            "neumann" => Ok((BoundaryCondition::neumann(), false)),
            "periodic" => Ok((BoundaryCondition::Periodic, false)),
            other => err(format!(
                "{path}: unknown boundary condition '{other}' (expected dirichlet0, neumann or periodic)"
            )),
        },
        FaceBc::Data(FaceData { dirichlet: Some(g), robin: None }) => {
            let e = spatial_expr(g, &format!("{path}.dirichlet"), d)?;
            Ok((BoundaryCondition::Dirichlet(Some(e.to_field())), e.uses(Var::T)))
        }
        FaceBc::Data(FaceData { dirichlet: None, robin: Some(mu) }) => {
            let e = spatial_expr(mu, &format!("{path}.robin"), d)?;
            Ok((BoundaryCondition::Robin(e.to_field()), e.uses(Var::T)))
        }
        FaceBc::Data(_) => err(format!("{path}: give exactly one of dirichlet or robin")),
    }
}

pub fn build_bc(b: &BcBlock, d: usize) -> Result<BoundarySpec, ConfigError> {
    let names = ["x_lo", "x_hi", "y_lo", "y_hi"];
    let given = [&b.x_lo, &b.x_hi, &b.y_lo, &b.y_hi];
    if b.all.is_some() && given.iter().any(|f| f.is_some()) {
        return err("bc.all excludes per-face conditions");
    }
    if d == 1 && (b.y_lo.is_some() || b.y_hi.is_some()) {
        return err("bc.y_lo and bc.y_hi do not exist in 1D");
    }
    let mut faces = Vec::with_capacity(4);
    let mut uses_t = false;
    for (k, face) in given.iter().enumerate() {
        let (src, path) = match (&b.all, face) {
            (Some(all), _) => (Some(all), "bc.all".to_string()),
            (None, Some(f)) => (Some(f), format!("bc.{}", names[k])),
            (None, None) => (None, String::new()),
        };
        match src {
            Some(f) => {
                let (bc, t) = build_face(f, &path, d)?;
                uses_t |= t;
                faces.push(bc);
            }
            None if k < 2 * d => return err(format!("bc.{} is required", names[k])),
            None => faces.push(BoundaryCondition::dirichlet_zero()),
        }
    }
    let faces: [BoundaryCondition; 4] = faces.try_into().expect("four faces");
    let spec = BoundarySpec::new(faces);
    Ok(if uses_t { spec } else { spec.time_independent() })
}
