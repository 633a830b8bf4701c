//! The L1 approximation of the Caputo derivative in kappa form:
//!
//! ```text
//! delta^alpha U^m = kappa_{m,m} U^m - sum_{j<m} kappa_{m,j} U^j
//! ```
//!
//! With `a_j = [(t_m - t_{j-1})^(1-alpha) - (t_m - t_j)^(1-alpha)] / (tau_j Gamma(2-alpha))`
//! the weights are `kappa_{m,m} = a_m`, `kappa_{m,0} = a_1` and
//! `kappa_{m,j} = a_{j+1} - a_j` otherwise. All are positive and the
//! off-diagonal ones sum to the diagonal one.

use crate::error::{Error, Result};
use crate::special_functions::gamma;
use crate::temporal_mesh::TemporalMesh;
use rayon::prelude::*;
use std::sync::Arc;

const MODULE: &str = "caputo_l1";

/// Histories longer than this are summed with compensation.
const COMPENSATE_ABOVE: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CaputoWeights {
    level: usize,
    alpha: f64,
    kappa: Vec<f64>,
}

/// `(b + d)^beta - b^beta` without cancellation.
fn power_increment(b: f64, d: f64, beta: f64) -> f64 {
    if b == 0.0 {
        d.powf(beta)
    } else {
        b.powf(beta) * (beta * (d / b).ln_1p()).exp_m1()
    }
}

impl CaputoWeights {
    pub fn new(mesh: &TemporalMesh, alpha: f64, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(MODULE, format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let big_m = mesh.num_steps();
        if m == 0 || m > big_m {
            return Err(Error::LevelOutOfRange { level: m, max: big_m });
        }
        let t = mesh.nodes();
        let beta = 1.0 - alpha;
        let g = gamma(2.0 - alpha)?;
        let tm = t[m];
        // a[j - 1] holds a_j
        let a: Vec<f64> = (1..=m)
            .map(|j| {
                let tau = t[j] - t[j - 1];
                power_increment(tm - t[j], tau, beta) / (tau * g)
            })
            .collect();
        let mut kappa = Vec::with_capacity(m + 1);
        kappa.push(a[0]);
        for j in 1..m {
            kappa.push(a[j] - a[j - 1]);
        }
        kappa.push(a[m - 1]);
        Ok(CaputoWeights {
            level: m,
            alpha,
            kappa,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `kappa_{m,0..=m}`.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// `kappa_{m,m}`.
    pub fn diagonal(&self) -> f64 {
        self.kappa[self.level]
    }

    /// `kappa_{m,0..m}`, the weights of the history.
    pub fn history(&self) -> &[f64] {
        &self.kappa[..self.level]
    }

    /// `F^m = sum_{j<m} kappa_{m,j} U^j` for a scalar history `U^0..U^{m-1}`.
    pub fn history_load(&self, history: &[f64]) -> Result<f64> {
        if history.len() != self.level {
            return Err(Error::LengthMismatch {
                module: MODULE,
                expected: self.level,
                found: history.len(),
            });
        }
        let w = self.history();
        if self.level > COMPENSATE_ABOVE {
            let mut acc = Neumaier::default();
            for (k, u) in w.iter().zip(history) {
                acc.add(k * u);
            }
            Ok(acc.total())
        } else {
            Ok(w.iter().zip(history).map(|(k, u)| k * u).sum())
        }
    }

    /// Node-wise `F^m` for a history of fields, each of the same length.
    pub fn history_load_fields<F: AsRef<[f64]> + Sync>(&self, fields: &[F]) -> Result<Vec<f64>> {
        if fields.len() != self.level {
            return Err(Error::LengthMismatch {
                module: MODULE,
                expected: self.level,
                found: fields.len(),
            });
        }
        let n = fields[0].as_ref().len();
        if let Some(bad) = fields.iter().find(|f| f.as_ref().len() != n) {
            return Err(Error::LengthMismatch {
                module: MODULE,
                expected: n,
                found: bad.as_ref().len(),
            });
        }
        let w = self.history();
        let compensate = self.level > COMPENSATE_ABOVE;
        const CHUNK: usize = 4096;
        let mut out = vec![0.0; n];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let lo = c * CHUNK;
            if compensate {
                let mut comp = vec![0.0; chunk.len()];
                for (k, f) in w.iter().zip(fields) {
                    let f = &f.as_ref()[lo..lo + chunk.len()];
                    for ((s, e), u) in chunk.iter_mut().zip(comp.iter_mut()).zip(f) {
                        let x = k * u;
                        let t = *s + x;
                        *e += if s.abs() >= x.abs() { (*s - t) + x } else { (x - t) + *s };
                        *s = t;
                    }
                }
                for (s, e) in chunk.iter_mut().zip(&comp) {
                    *s += e;
                }
            } else {
                for (k, f) in w.iter().zip(fields) {
                    let f = &f.as_ref()[lo..lo + chunk.len()];
                    for (s, u) in chunk.iter_mut().zip(f) {
                        *s += k * u;
                    }
                }
            }
        });
        Ok(out)
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn l1_weights(mesh: &TemporalMesh, alpha: f64, m: usize) -> Result<CaputoWeights> {
    CaputoWeights::new(mesh, alpha, m)
}

pub fn history_load(weights: &CaputoWeights, history: &[f64]) -> Result<f64> {
    weights.history_load(history)
}

/// `delta^alpha U^m` for `values = U^0..=U^m`.
pub fn apply_delta(mesh: &TemporalMesh, alpha: f64, values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid(MODULE, "apply_delta needs at least two values"));
    }
    let m = values.len() - 1;
    let w = CaputoWeights::new(mesh, alpha, m)?;
    Ok(w.diagonal() * values[m] - w.history_load(&values[..m])?)
}

/// Weight rows for every level, computed on first use when enabled. Costs
/// `O(M^2)` memory, so it is meant for scalar runs only.
pub struct WeightCache {
    mesh: TemporalMesh,
    alpha: f64,
    rows: Option<Vec<Option<Arc<CaputoWeights>>>>,
}

impl WeightCache {
    pub fn new(mesh: &TemporalMesh, alpha: f64, enabled: bool) -> Self {
        WeightCache {
            mesh: mesh.clone(),
            alpha,
            rows: enabled.then(|| vec![None; mesh.num_steps() + 1]),
        }
    }

    pub fn get(&mut self, m: usize) -> Result<Arc<CaputoWeights>> {
        match &mut self.rows {
            None => Ok(Arc::new(CaputoWeights::new(&self.mesh, self.alpha, m)?)),
            Some(rows) => {
                if let Some(Some(w)) = rows.get(m) {
                    return Ok(w.clone());
                }
                let w = Arc::new(CaputoWeights::new(&self.mesh, self.alpha, m)?);
                rows[m] = Some(w.clone());
                Ok(w)
            }
        }
    }
}
