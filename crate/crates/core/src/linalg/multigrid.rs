//! Geometric multigrid V-cycle with Galerkin coarse operators.
//!
//! The grid hierarchy is supplied as a chain of prolongation matrices; the
//! coarse operators are formed as `P^T A P`. With a forward Gauss-Seidel
//! pre-smoother and a backward post-smoother the cycle is a symmetric
//! preconditioner whenever `A` is symmetric, so it can drive CG as well as
//! BiCGSTAB.

use super::{CsrMatrix, DenseLu, Preconditioner};
use crate::error::{Error, Result};

const MAX_DIRECT: usize = 1500;
const COARSE_SWEEPS: usize = 30;

struct Level {
    a: CsrMatrix,
    diag: Vec<f64>,
    /// Prolongation from the next coarser level onto this one.
    p: Option<CsrMatrix>,
    r: Option<CsrMatrix>,
}

enum CoarseSolver {
    Direct(DenseLu),
    Smoothing,
}

pub struct Multigrid {
    levels: Vec<Level>,
    coarse: CoarseSolver,
}

impl Multigrid {
    /// `prolongations[l]` maps level `l + 1` (coarser) onto level `l`, with
    /// level 0 the matrix `a` itself.
    pub fn new(a: &CsrMatrix, prolongations: &[CsrMatrix]) -> Result<Self> {
        let mut levels = Vec::with_capacity(prolongations.len() + 1);
        let mut current = a.clone();
        for p in prolongations {
            if p.nrows() != current.nrows() {
                return Err(Error::LinearSolver(format!(
                    "prolongation has {} rows, level has {} unknowns",
                    p.nrows(),
                    current.nrows()
                )));
            }
            let r = p.transpose();
            let coarse = r.matmul(&current.matmul(p));
            let diag = checked_diag(&current)?;
            levels.push(Level {
                a: current,
                diag,
                p: Some(p.clone()),
                r: Some(r),
            });
            current = coarse;
        }
        let coarse = if current.nrows() <= MAX_DIRECT {
            CoarseSolver::Direct(DenseLu::from_csr(&current)?)
        } else {
            CoarseSolver::Smoothing
        };
        let diag = checked_diag(&current)?;
        levels.push(Level {
            a: current,
            diag,
            p: None,
            r: None,
        });
        Ok(Multigrid { levels, coarse })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            match &self.coarse {
                CoarseSolver::Direct(lu) => x.copy_from_slice(&lu.solve(b)),
                CoarseSolver::Smoothing => {
                    for _ in 0..COARSE_SWEEPS {
                        level.a.gauss_seidel_forward(&level.diag, b, x);
                        level.a.gauss_seidel_backward(&level.diag, b, x);
                    }
                }
            }
            return;
        }
        let (p, r) = (level.p.as_ref().unwrap(), level.r.as_ref().unwrap());
        level.a.gauss_seidel_forward(&level.diag, b, x);
        let mut res = level.a.mul_vec(x);
        for (ri, bi) in res.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let rc = r.mul_vec(&res);
        let mut xc = vec![0.0; rc.len()];
        self.vcycle(l + 1, &rc, &mut xc);
        let corr = p.mul_vec(&xc);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        level.a.gauss_seidel_backward(&level.diag, b, x);
    }
}

fn checked_diag(a: &CsrMatrix) -> Result<Vec<f64>> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::LinearSolver(format!(
            "multigrid level has zero diagonal at row {i}"
        )));
    }
    Ok(d)
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.fill(0.0);
        self.vcycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pcg, Jacobi};

    /// 1D Dirichlet Laplacian on `n - 1` interior nodes plus its linear
    /// interpolation from the grid with `n / 2` intervals.
    fn laplacian(n: usize) -> CsrMatrix {
        let m = n - 1;
        let mut t = Vec::new();
        for i in 0..m {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < m {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(m, m, &t)
    }

    fn interpolation(n: usize) -> CsrMatrix {
        let nc = n / 2;
        let mut t = Vec::new();
        for i in 1..n {
            if i % 2 == 0 {
                t.push((i - 1, i / 2 - 1, 1.0));
            } else {
                for c in [(i - 1) / 2, (i + 1) / 2] {
                    if c >= 1 && c < nc {
                        t.push((i - 1, c - 1, 0.5));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n - 1, nc - 1, &t)
    }

    #[test]
    fn vcycle_preconditioner_beats_jacobi() {
        let n = 1024;
        let a = laplacian(n);
        let mut ps = Vec::new();
        let mut k = n;
        while k >= 8 {
            ps.push(interpolation(k));
            k /= 2;
        }
        let mg = Multigrid::new(&a, &ps).unwrap();
        assert!(mg.num_levels() > 5);
        let b: Vec<f64> = (0..n - 1).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let mut x = vec![0.0; n - 1];
        let s_mg = pcg(&a, &b, &mut x, &mg, 1e-10, 200).unwrap();
        let r = a.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7);
        let mut y = vec![0.0; n - 1];
        let s_j = pcg(&a, &b, &mut y, &Jacobi::new(&a).unwrap(), 1e-10, 5000).unwrap();
        assert!(s_mg.iterations * 10 < s_j.iterations, "{s_mg:?} vs {s_j:?}");
    }
}
