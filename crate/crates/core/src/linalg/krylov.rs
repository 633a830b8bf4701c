use super::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Approximate inverse applied as `z = M^{-1} r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d == 0.0 || !d.is_finite() {
                    Err(Error::LinearSolver(format!("zero diagonal at row {i}")))
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Jacobi { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual `||b - A x||_2 / ||b||_2`.
    pub relative_residual: f64,
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `A`.
/// `x` holds the initial guess on entry.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = norm2(&r) / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::LinearSolver(format!(
                "CG breakdown (p'Ap = {pq:.3e}) at iteration {it}"
            )));
        }
        let step = rz / pq;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * q[i];
        }
        rel = norm2(&r) / bnorm;
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel <= tol {
        return Ok(SolveStats {
            iterations: max_iter,
            relative_residual: rel,
        });
    }
    Err(Error::LinearSolver(format!(
        "CG did not reach tolerance {tol:.1e} in {max_iter} iterations (residual {rel:.3e})"
    )))
}

/// Right-preconditioned BiCGSTAB for general nonsymmetric `A`.
/// `x` holds the initial guess on entry.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut rel = norm2(&r) / bnorm;
    let mut restarts = 0;
    let mut it = 0;
    while it < max_iter {
        if rel <= tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // restart with the current residual as shadow vector
            restarts += 1;
            if restarts > 5 {
                return Err(Error::LinearSolver(format!(
                    "BiCGSTAB breakdown at iteration {it} (residual {rel:.3e})"
                )));
            }
            r_hat.copy_from_slice(&r);
            p.fill(0.0);
            v.fill(0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pc.apply(&p, &mut p_hat);
        a.matvec(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        // r becomes s
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        let snorm = norm2(&r) / bnorm;
        if snorm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(SolveStats {
                iterations: it,
                relative_residual: snorm,
            });
        }
        pc.apply(&r, &mut s_hat);
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] -= omega * t[i];
        }
        rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::LinearSolver("BiCGSTAB produced non-finite residual".into()));
        }
    }
    if rel <= tol {
        return Ok(SolveStats {
            iterations: it,
            relative_residual: rel,
        });
    }
    Err(Error::LinearSolver(format!(
        "BiCGSTAB did not reach tolerance {tol:.1e} in {max_iter} iterations (residual {rel:.3e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion(n: usize, b: f64) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (h * h) + 1.0));
            if i > 0 {
                t.push((i, i - 1, -1.0 / (h * h) - b / (2.0 * h)));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / (h * h) + b / (2.0 * h)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = convection_diffusion(50, 0.0);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).cos()).collect();
        let b = a.mul_vec(&xs);
        let mut x = vec![0.0; 50];
        let stats = pcg(&a, &b, &mut x, &Jacobi::new(&a).unwrap(), 1e-12, 500).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        for i in 0..50 {
            assert!((x[i] - xs[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let a = convection_diffusion(60, 20.0);
        assert!(!a.is_symmetric(1e-14));
        let xs: Vec<f64> = (0..60).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&xs);
        let mut x = vec![0.0; 60];
        bicgstab(&a, &b, &mut x, &Jacobi::new(&a).unwrap(), 1e-12, 1000).unwrap();
        for i in 0..60 {
            assert!((x[i] - xs[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = convection_diffusion(5, 0.0);
        let mut x = vec![1.0; 5];
        let s = pcg(&a, &[0.0; 5], &mut x, &IdentityPreconditioner, 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(x, vec![0.0; 5]);
    }
}
