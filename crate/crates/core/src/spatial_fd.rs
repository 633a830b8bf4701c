//! Finite-difference discretization of
//! `L u = -sum_k d_k(a_k d_k u) + sum_k b_k d_k u + c u` on tensor-product
//! grids over `[0, X]^d`, `d = 1, 2`.
//!
//! For an unknown node `z` the operator reads
//!
//! ```text
//! L_h V(z) = sum_k h^-2 { a_k(z + h/2 e_k) [V(z) - V(z + h e_k)]
//!                       + a_k(z - h/2 e_k) [V(z) - V(z - h e_k)] }
//!          + sum_k b_k(z) [V(z + h e_k) - V(z - h e_k)] / (2h) + c(z) V(z).
//! ```
//!
//! Dirichlet nodes are eliminated into a data vector. On a Robin face
//! (`du/dn + mu u = 0`) the node is an unknown and the missing neighbour is
//! replaced by the ghost value `V(z -+ h e_k) - 2 h mu V(z)`. Periodic faces
//! identify the node at `X` with the node at `0`.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::nonlinearity::SpaceTimeFn;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

const MODULE: &str = "spatial_fd";

pub type ScalarField = SpaceTimeFn;

pub fn constant_field(v: f64) -> ScalarField {
    Arc::new(move |_, _| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    /// `n` intervals of width `length / n` in each of `dim` directions.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(MODULE, format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::invalid(MODULE, format!("need at least 2 intervals, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(MODULE, format!("domain length must be positive, got {length}")));
        }
        Ok(Grid {
            dim,
            n,
            length,
            h: length / n as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Intervals per direction.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        (self.n + 1).pow(self.dim as u32)
    }

    /// Node index of grid position `(i, j)`; `j` is ignored in 1D.
    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            i + (self.n + 1) * j
        }
    }

    /// Grid position of a node index.
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx % (self.n + 1), idx / (self.n + 1))
        }
    }

    pub fn coord(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        [self.pos(i), if self.dim == 2 { self.pos(j) } else { 0.0 }]
    }

    /// Coordinate of grid line `i`; exact at both ends.
    fn pos(&self, i: usize) -> f64 {
        if i == self.n {
            self.length
        } else {
            i as f64 * self.h
        }
    }

    /// Samples `field(x, t)` at every node.
    pub fn sample(&self, field: &dyn Fn(&[f64], f64) -> f64, t: f64) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|k| {
                let x = self.coord(k);
                field(&x[..self.dim], t)
            })
            .collect()
    }

    /// Grid with half the intervals, if `n` is even.
    pub fn coarsened(&self) -> Option<Grid> {
        (self.n % 2 == 0 && self.n >= 4).then(|| Grid::new(self.dim, self.n / 2, self.length).unwrap())
    }
}

#[derive(Clone)]
pub struct CoefficientField {
    /// `a_k`, one per direction.
    pub diffusion: Vec<ScalarField>,
    /// `b_k`; `None` means no convection.
    pub convection: Option<Vec<ScalarField>>,
    /// `c`; `None` means no reaction.
    pub reaction: Option<ScalarField>,
    pub time_dependent: bool,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.diffusion.len())
            .field("convection", &self.convection.is_some())
            .field("reaction", &self.reaction.is_some())
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl CoefficientField {
    /// `-Laplacian`: `a_k = 1`, no convection or reaction.
    pub fn laplacian(dim: usize) -> Self {
        CoefficientField {
            diffusion: vec![constant_field(1.0); dim],
            convection: None,
            reaction: None,
            time_dependent: false,
        }
    }

    pub fn constant(a: &[f64], b: Option<&[f64]>, c: Option<f64>) -> Self {
        CoefficientField {
            diffusion: a.iter().map(|&v| constant_field(v)).collect(),
            convection: b.map(|b| b.iter().map(|&v| constant_field(v)).collect()),
            reaction: c.map(constant_field),
            time_dependent: false,
        }
    }

    fn check_dim(&self, grid: &Grid) -> Result<()> {
        let d = grid.dim();
        if self.diffusion.len() != d || self.convection.as_ref().is_some_and(|b| b.len() != d) {
            return Err(Error::invalid(
                MODULE,
                format!("coefficients are not given for {d} direction(s)"),
            ));
        }
        Ok(())
    }

    /// Spot-checks `a_k > 0` and `c >= 0` at the nodes and cell midpoints.
    pub fn validate(&self, grid: &Grid, times: &[f64]) -> Result<()> {
        self.check_dim(grid)?;
        for &t in times {
            for p in sample_points(grid) {
                let x = &p[..grid.dim()];
                for (k, a) in self.diffusion.iter().enumerate() {
                    let v = a(x, t);
                    if !(v > 0.0) {
                        return Err(Error::invalid(
                            MODULE,
                            format!("diffusion a_{} = {v} is not positive at x = {x:?}, t = {t}", k + 1),
                        ));
                    }
                }
                if let Some(c) = &self.reaction {
                    let v = c(x, t);
                    if !(v >= 0.0) {
                        return Err(Error::invalid(
                            MODULE,
                            format!("reaction c = {v} is negative at x = {x:?}, t = {t}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nodes and half-step midpoints of the grid.
fn sample_points(grid: &Grid) -> Vec<[f64; 2]> {
    let m = 2 * grid.n();
    let hh = 0.5 * grid.h();
    let ys = if grid.dim() == 2 { m } else { 0 };
    let mut pts = Vec::with_capacity((m + 1) * (ys + 1));
    for j in 0..=ys {
        for i in 0..=m {
            pts.push([i as f64 * hh, j as f64 * hh]);
        }
    }
    pts
}

#[derive(Clone)]
pub enum BoundaryCondition {
    /// `u = phi(x, t)`; `None` is homogeneous.
    Dirichlet(Option<ScalarField>),
    Periodic,
    /// `du/dn + mu(x, t) u = 0` with `mu >= 0`.
    Robin(ScalarField),
}

impl BoundaryCondition {
    pub fn dirichlet_zero() -> Self {
        BoundaryCondition::Dirichlet(None)
    }

    pub fn neumann() -> Self {
        BoundaryCondition::Robin(constant_field(0.0))
    }

    fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }

    fn is_periodic(&self) -> bool {
        matches!(self, BoundaryCondition::Periodic)
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(None) => write!(f, "Dirichlet(0)"),
            BoundaryCondition::Dirichlet(Some(_)) => write!(f, "Dirichlet(phi)"),
            BoundaryCondition::Periodic => write!(f, "Periodic"),
            BoundaryCondition::Robin(_) => write!(f, "Robin(mu)"),
        }
    }
}

/// Conditions per face, ordered `[x_lo, x_hi, y_lo, y_hi]`. In 1D only the
/// first two are used. Where a Dirichlet face meets another face, the
/// Dirichlet condition wins.
#[derive(Clone, Debug)]
pub struct BoundarySpec {
    pub faces: [BoundaryCondition; 4],
    /// Whether data or Robin coefficients change with time.
    pub time_dependent: bool,
}

impl BoundarySpec {
    pub fn new(faces: [BoundaryCondition; 4]) -> Self {
        let time_dependent = faces.iter().any(|f| {
            matches!(
                f,
                BoundaryCondition::Dirichlet(Some(_)) | BoundaryCondition::Robin(_)
            )
        });
        BoundarySpec {
            faces,
            time_dependent,
        }
    }

    pub fn all(bc: BoundaryCondition) -> Self {
        Self::new([bc.clone(), bc.clone(), bc.clone(), bc])
    }

    pub fn dirichlet_zero() -> Self {
        Self::all(BoundaryCondition::dirichlet_zero())
    }

    pub fn periodic() -> Self {
        Self::all(BoundaryCondition::Periodic)
    }

    /// Declares the data constant in time, so operators are assembled once.
    pub fn time_independent(mut self) -> Self {
        self.time_dependent = false;
        self
    }

    pub fn is_periodic_anywhere(&self, dim: usize) -> bool {
        self.faces[..2 * dim].iter().any(|f| f.is_periodic())
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        for k in 0..grid.dim() {
            let (lo, hi) = (&self.faces[2 * k], &self.faces[2 * k + 1]);
            if lo.is_periodic() != hi.is_periodic() {
                return Err(Error::invalid(
                    MODULE,
                    format!("periodic faces must come in pairs (direction {})", k + 1),
                ));
            }
        }
        Ok(())
    }

    /// Smallest Robin coefficient sampled on the Robin faces; used to check
    /// `mu >= 0`.
    fn check_robin(&self, grid: &Grid, t: f64) -> Result<()> {
        for (face, bc) in self.faces[..2 * grid.dim()].iter().enumerate() {
            if let BoundaryCondition::Robin(mu) = bc {
                for idx in face_nodes(grid, face) {
                    let x = grid.coord(idx);
                    let v = mu(&x[..grid.dim()], t);
                    if !(v >= 0.0) {
                        return Err(Error::invalid(
                            MODULE,
                            format!("Robin coefficient mu = {v} is negative at x = {:?}", &x[..grid.dim()]),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn face_nodes(grid: &Grid, face: usize) -> Vec<usize> {
    let n = grid.n();
    let line = if grid.dim() == 1 { 0..=0 } else { 0..=n };
    let fixed = if face % 2 == 0 { 0 } else { n };
    line.map(|s| if face < 2 { grid.index(fixed, s) } else { grid.index(s, fixed) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Unknown(usize),
    Dirichlet,
    /// Periodic image of the given canonical node.
    Image(usize),
}

/// Assignment of grid nodes to unknowns.
#[derive(Debug, Clone)]
pub struct DofLayout {
    grid: Grid,
    roles: Vec<NodeRole>,
    unknown_nodes: Vec<usize>,
    periodic: [bool; 2],
}

impl DofLayout {
    pub fn new(grid: &Grid, bc: &BoundarySpec) -> Result<Self> {
        bc.validate(grid)?;
        let d = grid.dim();
        let n = grid.n();
        let periodic = [bc.faces[0].is_periodic(), d == 2 && bc.faces[2].is_periodic()];
        let on_face = |i: usize, j: usize, face: usize| -> bool {
            match face {
                0 => i == 0,
                1 => i == n,
                2 => d == 2 && j == 0,
                _ => d == 2 && j == n,
            }
        };
        let mut roles = vec![NodeRole::Dirichlet; grid.num_nodes()];
        let mut unknown_nodes = Vec::new();
        // canonical nodes first, images afterwards
        for idx in 0..grid.num_nodes() {
            let (i, j) = grid.ij(idx);
            let dirichlet = (0..2 * d).any(|f| on_face(i, j, f) && bc.faces[f].is_dirichlet());
            if dirichlet {
                continue;
            }
            let ci = if periodic[0] && i == n { 0 } else { i };
            let cj = if periodic[1] && j == n { 0 } else { j };
            if (ci, cj) != (i, j) {
                continue;
            }
            roles[idx] = NodeRole::Unknown(unknown_nodes.len());
            unknown_nodes.push(idx);
        }
        for idx in 0..grid.num_nodes() {
            let (i, j) = grid.ij(idx);
            let dirichlet = (0..2 * d).any(|f| on_face(i, j, f) && bc.faces[f].is_dirichlet());
            if dirichlet {
                continue;
            }
            let ci = if periodic[0] && i == n { 0 } else { i };
            let cj = if periodic[1] && j == n { 0 } else { j };
            if (ci, cj) != (i, j) {
                roles[idx] = NodeRole::Image(grid.index(ci, cj));
            }
        }
        Ok(DofLayout {
            grid: *grid,
            roles,
            unknown_nodes,
            periodic,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn num_unknowns(&self) -> usize {
        self.unknown_nodes.len()
    }

    /// Grid node of each unknown.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.unknown_nodes
    }

    /// Unknown carrying the value of `node`, if any.
    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        match self.roles[node] {
            NodeRole::Unknown(k) => Some(k),
            NodeRole::Image(c) => match self.roles[c] {
                NodeRole::Unknown(k) => Some(k),
                _ => None,
            },
            NodeRole::Dirichlet => None,
        }
    }

    pub fn restrict(&self, field: &[f64]) -> Vec<f64> {
        self.unknown_nodes.iter().map(|&n| field[n]).collect()
    }

    /// Full nodal field from unknowns; Dirichlet nodes take `boundary`.
    pub fn extend(&self, unknowns: &[f64], boundary: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.roles.len())
            .map(|node| match self.unknown_of(node) {
                Some(k) => unknowns[k],
                None => boundary(node),
            })
            .collect()
    }

    /// Dirichlet values at time `t` (0 for non-Dirichlet nodes).
    pub fn dirichlet_values(&self, bc: &BoundarySpec, t: f64) -> Vec<f64> {
        let g = &self.grid;
        let d = g.dim();
        let n = g.n();
        (0..self.roles.len())
            .map(|node| {
                if self.roles[node] != NodeRole::Dirichlet {
                    return 0.0;
                }
                let (i, j) = g.ij(node);
                let faces = [i == 0, i == n, d == 2 && j == 0, d == 2 && j == n];
                let x = g.coord(node);
                for (f, on) in faces.iter().enumerate().take(2 * d) {
                    if *on {
                        if let BoundaryCondition::Dirichlet(phi) = &bc.faces[f] {
                            return phi.as_ref().map_or(0.0, |p| p(&x[..d], t));
                        }
                    }
                }
                0.0
            })
            .collect()
    }
}

/// The assembled operator at a fixed time: `L_h V = matrix V + data` on the
/// unknowns.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
    /// Contribution of Dirichlet data, one entry per unknown.
    pub dirichlet_data: Vec<f64>,
    pub time: f64,
    pub symmetric: bool,
    pub layout: Arc<DofLayout>,
}

pub fn assemble(grid: &Grid, coeffs: &CoefficientField, t: f64, bc: &BoundarySpec) -> Result<DiscreteOperator> {
    let layout = Arc::new(DofLayout::new(grid, bc)?);
    assemble_with_layout(layout, coeffs, t, bc)
}

pub fn assemble_with_layout(
    layout: Arc<DofLayout>,
    coeffs: &CoefficientField,
    t: f64,
    bc: &BoundarySpec,
) -> Result<DiscreteOperator> {
    let grid = *layout.grid();
    coeffs.check_dim(&grid)?;
    bc.check_robin(&grid, t)?;
    let d = grid.dim();
    let n = grid.n();
    let h = grid.h();
    let h2 = 1.0 / (h * h);
    let boundary = layout.dirichlet_values(bc, t);
    let nu = layout.num_unknowns();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nu);
    let mut data = vec![0.0; nu];
    for (row, &node) in layout.unknown_nodes().iter().enumerate() {
        let (i, j) = grid.ij(node);
        let z = grid.coord(node);
        let x = &z[..d];
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(1 + 2 * d);
        let mut diag = 0.0;
        let add = |nb: usize, coef: f64, entries: &mut Vec<(usize, f64)>, data: &mut f64| match layout.unknown_of(nb) {
            Some(k) => entries.push((k, coef)),
            None => *data += coef * boundary[resolve_image(&layout, nb)],
        };
        for k in 0..d {
            let pos = if k == 0 { i } else { j };
            let mut zp = z;
            zp[k] += 0.5 * h;
            let mut zm = z;
            zm[k] -= 0.5 * h;
            let ap = (coeffs.diffusion[k])(&zp[..d], t);
            let am = (coeffs.diffusion[k])(&zm[..d], t);
            let b = coeffs.convection.as_ref().map_or(0.0, |b| (b[k])(x, t));
            diag += (ap + am) * h2;
            let cp = -ap * h2 + 0.5 * b / h;
            let cm = -am * h2 - 0.5 * b / h;
            let step = |p: usize| if k == 0 { grid.index(p, j) } else { grid.index(i, p) };
            // plus neighbour
            if pos < n {
                add(step(pos + 1), cp, &mut entries, &mut data[row]);
            } else if layout.periodic[k] {
                add(step(1), cp, &mut entries, &mut data[row]);
            } else {
                // Robin ghost on the high face
                let mu = robin_mu(bc, 2 * k + 1, x, t);
                add(step(pos - 1), cp, &mut entries, &mut data[row]);
                diag -= 2.0 * h * mu * cp;
            }
            // minus neighbour
            if pos > 0 {
                add(step(pos - 1), cm, &mut entries, &mut data[row]);
            } else if layout.periodic[k] {
                add(step(n - 1), cm, &mut entries, &mut data[row]);
            } else {
                let mu = robin_mu(bc, 2 * k, x, t);
                add(step(pos + 1), cm, &mut entries, &mut data[row]);
                diag -= 2.0 * h * mu * cm;
            }
        }
        if let Some(c) = &coeffs.reaction {
            diag += c(x, t);
        }
        entries.push((row, diag));
        entries.sort_unstable_by_key(|e| e.0);
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        rows.push(entries);
    }
    let matrix = CsrMatrix::from_rows(nu, rows);
    let symmetric = coeffs.convection.is_none() && matrix.is_symmetric(1e-14);
    Ok(DiscreteOperator {
        matrix,
        dirichlet_data: data,
        time: t,
        symmetric,
        layout,
    })
}

fn resolve_image(layout: &DofLayout, node: usize) -> usize {
    match layout.role(node) {
        NodeRole::Image(c) => c,
        _ => node,
    }
}

fn robin_mu(bc: &BoundarySpec, face: usize, x: &[f64], t: f64) -> f64 {
    match &bc.faces[face] {
        BoundaryCondition::Robin(mu) => mu(x, t),
        // a non-Robin face never reaches the ghost branch
        _ => 0.0,
    }
}

impl DiscreteOperator {
    /// `L_h` applied to a nodal field; zero at Dirichlet nodes, images
    /// repeat their canonical value.
    pub fn apply(&self, field: &[f64]) -> Result<Vec<f64>> {
        let grid = self.layout.grid();
        if field.len() != grid.num_nodes() {
            return Err(Error::LengthMismatch {
                module: MODULE,
                expected: grid.num_nodes(),
                found: field.len(),
            });
        }
        let u = self.layout.restrict(field);
        let out = self.apply_unknowns(&u);
        Ok(self.layout.extend(&out, |_| 0.0))
    }

    /// `matrix u + data` on the unknowns.
    pub fn apply_unknowns(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.mul_vec(u);
        for (o, g) in out.iter_mut().zip(&self.dirichlet_data) {
            *o += g;
        }
        out
    }

    pub fn sign_pattern(&self) -> SignPattern {
        let mut diag_positive = true;
        let mut offdiag_nonpositive = true;
        let mut min_row_sum = f64::INFINITY;
        for i in 0..self.matrix.nrows() {
            let mut sum = 0.0;
            for (j, v) in self.matrix.row(i) {
                sum += v;
                if i == j {
                    diag_positive &= v > 0.0;
                } else {
                    offdiag_nonpositive &= v <= 0.0;
                }
            }
            min_row_sum = min_row_sum.min(sum);
        }
        SignPattern {
            diag_positive,
            offdiag_nonpositive,
            min_row_sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignPattern {
    pub diag_positive: bool,
    pub offdiag_nonpositive: bool,
    pub min_row_sum: f64,
}

impl SignPattern {
    pub fn is_m_matrix_pattern(&self) -> bool {
        self.diag_positive && self.offdiag_nonpositive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub pass: bool,
    /// Largest admissible `h`; infinite without convection.
    pub required_h: f64,
    pub h: f64,
}

/// Checks `1/h >= max_k (1/2) sup|b_k| sup(1/a_k)` at the sampled times,
/// with the suprema taken over nodes and cell midpoints.
pub fn check_max_principle(grid: &Grid, coeffs: &CoefficientField, times: &[f64]) -> Result<MaxPrincipleReport> {
    coeffs.check_dim(grid)?;
    let mut need: f64 = 0.0;
    if let Some(b) = &coeffs.convection {
        let pts = sample_points(grid);
        for &t in times {
            for k in 0..grid.dim() {
                let mut bmax: f64 = 0.0;
                let mut ainv: f64 = 0.0;
                for p in &pts {
                    let x = &p[..grid.dim()];
                    bmax = bmax.max(b[k](x, t).abs());
                    ainv = ainv.max(1.0 / coeffs.diffusion[k](x, t));
                }
                need = need.max(0.5 * bmax * ainv);
            }
        }
    }
    let h = grid.h();
    Ok(MaxPrincipleReport {
        pass: 1.0 / h >= need,
        required_h: if need > 0.0 { 1.0 / need } else { f64::INFINITY },
        h,
    })
}

/// Linear interpolation from the grid with half the intervals, restricted
/// to unknowns on both sides. `None` when the grid cannot be coarsened.
pub fn prolongation(fine: &DofLayout, bc: &BoundarySpec) -> Option<(CsrMatrix, DofLayout)> {
    let fg = fine.grid();
    let cg = fg.coarsened()?;
    let coarse = DofLayout::new(&cg, bc).ok()?;
    if coarse.num_unknowns() == 0 {
        return None;
    }
    let weights_1d = |i: usize| -> Vec<(usize, f64)> {
        if i % 2 == 0 {
            vec![(i / 2, 1.0)]
        } else {
            vec![((i - 1) / 2, 0.5), ((i + 1) / 2, 0.5)]
        }
    };
    let rows = fine.unknown_nodes().iter().map(|&node| {
        let (i, j) = fg.ij(node);
        let wi = weights_1d(i);
        let wj = if fg.dim() == 2 { weights_1d(j) } else { vec![(0, 1.0)] };
        let mut row = Vec::with_capacity(4);
        for &(ci, a) in &wi {
            for &(cj, b) in &wj {
                if let Some(k) = coarse.unknown_of(cg.index(ci, cj)) {
                    row.push((k, a * b));
                }
            }
        }
        row
    });
    let p = CsrMatrix::from_rows(coarse.num_unknowns(), rows.collect::<Vec<_>>());
    Some((p, coarse))
}

/// Prolongations from successively coarser grids down to a few unknowns.
pub fn prolongation_chain(layout: &DofLayout, bc: &BoundarySpec) -> Vec<CsrMatrix> {
    let mut chain = Vec::new();
    let mut current = layout.clone();
    while current.num_unknowns() > 64 {
        match prolongation(&current, bc) {
            Some((p, coarse)) => {
                chain.push(p);
                current = coarse;
            }
            None => break,
        }
    }
    chain
}
