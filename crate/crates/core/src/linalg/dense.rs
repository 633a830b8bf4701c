use super::CsrMatrix;
use crate::error::{Error, Result};

/// Dense LU factorization with partial pivoting (row-major storage).
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::LinearSolver(format!(
                    "singular matrix in dense LU at column {k}"
                )));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in (k + 1)..n {
                let l = a[i * n + k] / piv;
                a[i * n + k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= l * a[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    pub fn from_csr(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                d[i * n + j] = v;
            }
        }
        Self::factor(n, d)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Banded LU without pivoting, for diagonally dominant banded systems
/// (one-dimensional grids).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    // row i holds columns i-lower ..= i+upper+lower (fill-in stays within
    // the upper band when no pivoting is performed)
    band: Vec<f64>,
}

impl BandedLu {
    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.lower - i)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let (lower, upper) = a.bandwidth();
        let mut lu = BandedLu {
            n,
            lower,
            upper,
            band: vec![0.0; n * (lower + upper + 1)],
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = lu.idx(i, j);
                lu.band[k] = v;
            }
        }
        for k in 0..n {
            let piv = lu.band[lu.idx(k, k)];
            if piv.abs() < f64::MIN_POSITIVE || !piv.is_finite() {
                return Err(Error::LinearSolver(format!("zero pivot in banded LU at row {k}")));
            }
            let imax = (k + lower).min(n - 1);
            let jmax = (k + upper).min(n - 1);
            for i in (k + 1)..=imax {
                let ik = lu.idx(i, k);
                let l = lu.band[ik] / piv;
                lu.band[ik] = l;
                if l != 0.0 {
                    for j in (k + 1)..=jmax {
                        let kj = lu.idx(k, j);
                        let ij = lu.idx(i, j);
                        lu.band[ij] -= l * lu.band[kj];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let jmin = i.saturating_sub(self.lower);
            let mut s = x[i];
            for j in jmin..i {
                s -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let jmax = (i + self.upper).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=jmax {
                s -= self.band[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.band[self.idx(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64 * 0.1));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn banded_and_dense_lu_agree() {
        let a = tridiag(9);
        let b: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let x1 = BandedLu::factor(&a).unwrap().solve(&b);
        let x2 = DenseLu::from_csr(&a).unwrap().solve(&b);
        let r = a.mul_vec(&x1);
        for i in 0..9 {
            assert!((x1[i] - x2[i]).abs() < 1e-14);
            assert!((r[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_lu_pivots() {
        let lu = DenseLu::factor(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(lu.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
        assert!(DenseLu::factor(2, vec![1.0, 1.0, 1.0, 1.0]).is_err());
    }
}
