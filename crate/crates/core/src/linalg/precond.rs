use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    IncompleteCholesky0,
}

pub trait Preconditioner {
    /// `z = M^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d == 0.0 || !d.is_finite() {
                    Err(Error::Preconditioner(format!("zero diagonal in row {i}")))
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

/// Zero-fill incomplete Cholesky `A ~ L L^T` on the lower-triangular pattern of `A`.
///
/// When a pivot is not positive the factorization is restarted on
/// `A + shift * diag(A)` with a growing shift.
pub struct IncompleteCholesky {
    n: usize,
    // strictly lower part of L, CSR, sorted columns
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
    pub shift: f64,
}

impl IncompleteCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Preconditioner("IC(0) needs a square matrix".into()));
        }
        let mut shift = 0.0;
        for _ in 0..12 {
            if let Some(f) = Self::try_factor(a, shift) {
                return Ok(f);
            }
            shift = if shift == 0.0 { 1e-8 } else { shift * 10.0 };
        }
        Err(Error::Preconditioner(
            "IC(0) pivots stayed non-positive".into(),
        ))
    }

    fn try_factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.nrows();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr[i + 1] = col_idx.len();
        }
        let a_diag = a.diagonal();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let (ri0, ri1) = (row_ptr[i], row_ptr[i + 1]);
            for p in ri0..ri1 {
                let k = col_idx[p];
                // sparse dot of row i and row k over columns < k
                let (mut a_ptr, mut b_ptr) = (ri0, row_ptr[k]);
                let b_end = row_ptr[k + 1];
                let mut s = 0.0;
                while a_ptr < p && b_ptr < b_end {
                    let (ca, cb) = (col_idx[a_ptr], col_idx[b_ptr]);
                    if ca == cb {
                        s += values[a_ptr] * values[b_ptr];
                        a_ptr += 1;
                        b_ptr += 1;
                    } else if ca < cb {
                        a_ptr += 1;
                    } else {
                        b_ptr += 1;
                    }
                }
                values[p] = (values[p] - s) / diag[k];
            }
            let sq: f64 = values[ri0..ri1].iter().map(|v| v * v).sum();
            let d = a_diag[i] * (1.0 + shift) - sq;
            if !(d > 1e-14 * a_diag[i].abs()) || !d.is_finite() {
                return None;
            }
            diag[i] = d.sqrt();
        }
        Some(Self {
            n,
            row_ptr,
            col_idx,
            values,
            diag,
            shift,
        })
    }
}

impl Preconditioner for IncompleteCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        // L y = r
        for i in 0..self.n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = s / self.diag[i];
        }
        // L^T z = y, column sweep
        for i in (0..self.n).rev() {
            z[i] /= self.diag[i];
            let zi = z[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

pub fn build(kind: PreconditionerKind, a: &CsrMatrix) -> Result<Box<dyn Preconditioner>> {
    Ok(match kind {
        PreconditionerKind::None => Box::new(IdentityPrecond),
        PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)?),
        PreconditionerKind::IncompleteCholesky0 => Box::new(IncompleteCholesky::new(a)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // no fill-in for a tridiagonal matrix, so IC(0) is the full Cholesky factor
        let a = tridiag(6);
        let ic = IncompleteCholesky::new(&a).unwrap();
        assert_eq!(ic.shift, 0.0);
        let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let mut x = [0.0; 6];
        ic.apply(&b, &mut x);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn ic0_shifts_on_singular_laplacian() {
        let mut t = Vec::new();
        let n = 5;
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push((i, i, deg));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let ic = IncompleteCholesky::new(&a).unwrap();
        assert!(ic.shift > 0.0);
    }

    #[test]
    fn jacobi_rejects_zero_diagonal() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(Jacobi::new(&a).is_err());
    }
}
