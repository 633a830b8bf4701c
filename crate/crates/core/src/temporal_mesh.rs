//! Temporal meshes `0 = t_0 < t_1 < ... < t_M = T` and the checks every
//! solver runs against them.

use crate::error::{Error, Result};
use crate::special_functions::gamma;
use serde::Serialize;

const MODULE: &str = "temporal_mesh";

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    nodes: Vec<f64>,
    grading: Option<f64>,
}

impl TemporalMesh {
    /// Graded mesh `t_j = T (j/M)^r`. With `r = 1` the nodes are `T j / M`.
    pub fn graded(m: usize, t_final: f64, r: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid(MODULE, "M must be >= 1"));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::invalid(MODULE, format!("T must be positive, got {t_final}")));
        }
        if !(r >= 1.0) || !r.is_finite() {
            return Err(Error::invalid(MODULE, format!("grading r must be >= 1, got {r}")));
        }
        let mf = m as f64;
        let mut nodes: Vec<f64> = (0..=m)
            .map(|j| {
                if j == 0 {
                    0.0
                } else if r == 1.0 {
                    t_final * j as f64 / mf
                } else {
                    t_final * (r * (j as f64 / mf).ln()).exp()
                }
            })
            .collect();
        nodes[m] = t_final;
        let mesh = TemporalMesh {
            nodes,
            grading: Some(r),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn uniform(m: usize, t_final: f64) -> Result<Self> {
        Self::graded(m, t_final, 1.0)
    }

    /// Arbitrary mesh from explicit nodes; must start at 0 and increase
    /// strictly.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let mesh = TemporalMesh {
            nodes,
            grading: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let n = &self.nodes;
        if n.len() < 2 {
            return Err(Error::invalid(MODULE, "a mesh needs at least two nodes"));
        }
        if n[0] != 0.0 {
            return Err(Error::invalid(MODULE, format!("t_0 must be 0, got {}", n[0])));
        }
        for j in 1..n.len() {
            if !(n[j] > n[j - 1]) || !n[j].is_finite() {
                return Err(Error::invalid(
                    MODULE,
                    format!("nodes must increase strictly (t_{} = {}, t_{} = {})", j - 1, n[j - 1], j, n[j]),
                ));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of steps `M`.
    pub fn num_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.num_steps()]
    }

    /// Grading exponent, when the mesh came from [`TemporalMesh::graded`].
    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    /// First step `tau = t_1`.
    pub fn tau(&self) -> f64 {
        self.nodes[1]
    }

    /// `tau_j = t_j - t_{j-1}` for `1 <= j <= M`.
    pub fn step(&self, j: usize) -> f64 {
        self.nodes[j] - self.nodes[j - 1]
    }

    pub fn max_step(&self) -> f64 {
        (1..=self.num_steps()).map(|j| self.step(j)).fold(0.0, f64::max)
    }

    /// Mesh with `2M` steps. Graded meshes are rebuilt from the formula,
    /// which reproduces the old nodes bit for bit at even indices; explicit
    /// meshes get midpoints inserted.
    pub fn refined(&self) -> Result<Self> {
        match self.grading {
            Some(r) => Self::graded(2 * self.num_steps(), self.final_time(), r),
            None => {
                let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    nodes.push(0.5 * (w[0] + w[1]));
                }
                nodes.push(self.final_time());
                Self::from_nodes(nodes)
            }
        }
    }
}

/// Graded mesh constructor under its conventional name.
pub fn build_graded(m: usize, t_final: f64, r: f64) -> Result<TemporalMesh> {
    TemporalMesh::graded(m, t_final, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FracParams {
    pub alpha: f64,
    pub lambda: f64,
}

impl FracParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(MODULE, format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(MODULE, format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(FracParams { alpha, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiGradedReport {
    pub max_ratio: f64,
    pub worst_j: usize,
    /// The pass threshold `C_qg = r + 1`.
    pub constant: f64,
    pub pass: bool,
}

/// Largest `tau_j / (tau^(1/r) t_j^(1 - 1/r))` over the mesh.
pub fn verify_quasi_graded(mesh: &TemporalMesh, r: f64) -> Result<QuasiGradedReport> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::invalid(MODULE, format!("grading r must be >= 1, got {r}")));
    }
    let tau = mesh.tau();
    let inv = 1.0 / r;
    let mut max_ratio = 0.0;
    let mut worst_j = 1;
    for j in 1..=mesh.num_steps() {
        let ratio = mesh.step(j) / (tau.powf(inv) * mesh.nodes[j].powf(1.0 - inv));
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_j = j;
        }
    }
    let constant = r + 1.0;
    Ok(QuasiGradedReport {
        max_ratio,
        worst_j,
        constant,
        pass: max_ratio <= constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRestrictionReport {
    pub worst_j: usize,
    /// `max_j lambda tau_j^alpha`.
    pub lhs: f64,
    /// `1 / Gamma(2 - alpha)`.
    pub rhs: f64,
    pub strict: bool,
    pub pass: bool,
}

impl StepRestrictionReport {
    /// Turns a failed check into an error tagged with `module`.
    pub fn require(&self, module: &'static str) -> Result<()> {
        if self.pass {
            Ok(())
        } else {
            Err(Error::StepRestriction {
                module,
                j: self.worst_j,
                lhs: self.lhs,
                rhs: self.rhs,
            })
        }
    }

    pub fn message(&self) -> String {
        format!(
            "step restriction fails at j = {}: lambda*tau_j^alpha = {:.6e} {} 1/Gamma(2-alpha) = {:.6e}",
            self.worst_j,
            self.lhs,
            if self.strict { ">=" } else { ">" },
            self.rhs
        )
    }
}

/// Checks `lambda tau_j^alpha <= 1/Gamma(2 - alpha)` for all `j` (with `<`
/// under `strict`). This is what makes `kappa_{m,m} >= lambda`, so that
/// each level's equation is monotone.
pub fn check_step_restriction(
    mesh: &TemporalMesh,
    params: FracParams,
    strict: bool,
) -> StepRestrictionReport {
    let rhs = 1.0 / gamma(2.0 - params.alpha).unwrap_or(f64::NAN);
    let mut lhs = 0.0;
    let mut worst_j = 1;
    if params.lambda > 0.0 {
        for j in 1..=mesh.num_steps() {
            let v = params.lambda * mesh.step(j).powf(params.alpha);
            if v > lhs {
                lhs = v;
                worst_j = j;
            }
        }
    }
    let pass = params.lambda == 0.0 || if strict { lhs < rhs } else { lhs <= rhs };
    StepRestrictionReport {
        worst_j,
        lhs,
        rhs,
        strict,
        pass,
    }
}
