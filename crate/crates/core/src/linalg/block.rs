//! The saddle-point Jacobian `[[A, B^T], [B, -C]]` with diagonal `A`,
//! solved through the exact factorization with `S = C + B A^{-1} B^T`.

use super::krylov::{krylov_solve, KrylovConfig, KrylovReport};
use super::sparse::{norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BlockSystem {
    /// One entry per conductance unknown.
    pub a_diag: Vec<f64>,
    /// Potential rows by conductance columns.
    pub b: CsrMatrix,
    pub c: CsrMatrix,
    pub s: CsrMatrix,
}

#[derive(Clone, Debug)]
pub struct BlockSolution {
    pub dc: Vec<f64>,
    pub du: Vec<f64>,
    pub krylov: KrylovReport,
    /// 2-norm of the residual of the full block system.
    pub residual: f64,
}

/// `S = C + B diag(a)^{-1} B^T`, accumulated into the pattern of `C`.
///
/// Each column of `B` touches a handful of rows, so the product is formed
/// column by column; pairs missing from `C`'s pattern are appended.
pub fn assemble_schur(a_diag: &[f64], b: &CsrMatrix, c: &CsrMatrix) -> Result<CsrMatrix> {
    if b.ncols() != a_diag.len() || b.nrows() != c.nrows() || c.nrows() != c.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} entries, B is {}x{}, C is {}x{}",
            a_diag.len(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    if let Some(cell) = a_diag.iter().position(|&a| a == 0.0 || !a.is_finite()) {
        return Err(Error::SingularBlock { cell });
    }
    let bt = b.transpose();
    let mut s = c.clone();
    let mut overflow = Vec::new();
    for (j, &aj) in a_diag.iter().enumerate() {
        let (rows, vals) = bt.row(j);
        for (&i, &bi) in rows.iter().zip(vals) {
            for (&k, &bk) in rows.iter().zip(vals) {
                let v = bi * bk / aj;
                match s.find(i, k) {
                    Some(pos) => s.values_mut()[pos] += v,
                    None => overflow.push((i, k, v)),
                }
            }
        }
    }
    if overflow.is_empty() {
        return Ok(s);
    }
    let extra = CsrMatrix::from_triplets(c.nrows(), c.ncols(), &overflow);
    let sum = s.add_scaled(1.0, &extra)?;
    Ok(if c.is_symmetric() {
        sum.assume_symmetric()
    } else {
        sum
    })
}

impl BlockSystem {
    pub fn new(a_diag: Vec<f64>, b: CsrMatrix, c: CsrMatrix) -> Result<Self> {
        let s = assemble_schur(&a_diag, &b, &c)?;
        Ok(Self { a_diag, b, c, s })
    }

    pub fn num_c(&self) -> usize {
        self.a_diag.len()
    }

    pub fn num_u(&self) -> usize {
        self.c.nrows()
    }

    /// `(A x_c + B^T x_u, B x_c - C x_u)`.
    pub fn apply(&self, xc: &[f64], xu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut yc = self.b.tr_mul_vec(xu);
        for (y, (a, x)) in yc.iter_mut().zip(self.a_diag.iter().zip(xc)) {
            *y += a * x;
        }
        let mut yu = self.b.mul_vec(xc);
        let cx = self.c.mul_vec(xu);
        yu.iter_mut().zip(&cx).for_each(|(y, c)| *y -= c);
        (yc, yu)
    }

    /// Solves `[[A, B^T], [B, -C]] (dc, du) = (rhs_c, rhs_u)`.
    ///
    /// `constant_kernel` marks the pure-Neumann case where `S` annihilates the
    /// constants; `du` is then returned with zero mean.
    pub fn solve(
        &self,
        rhs_c: &[f64],
        rhs_u: &[f64],
        config: &KrylovConfig,
        constant_kernel: bool,
    ) -> Result<BlockSolution> {
        if rhs_c.len() != self.num_c() || rhs_u.len() != self.num_u() {
            return Err(Error::DimensionMismatch("block right-hand side".into()));
        }
        let t: Vec<f64> = rhs_c.iter().zip(&self.a_diag).map(|(r, a)| r / a).collect();
        let mut g = self.b.mul_vec(&t);
        g.iter_mut().zip(rhs_u).for_each(|(gi, ri)| *gi -= ri);
        let (du, krylov) = krylov_solve(&self.s, &g, config, constant_kernel)?;
        let btu = self.b.tr_mul_vec(&du);
        let dc: Vec<f64> = rhs_c
            .iter()
            .zip(&btu)
            .zip(&self.a_diag)
            .map(|((r, b), a)| (r - b) / a)
            .collect();
        let (yc, yu) = self.apply(&dc, &du);
        let res: Vec<f64> = yc
            .iter()
            .zip(rhs_c)
            .map(|(y, r)| y - r)
            .chain(yu.iter().zip(rhs_u).map(|(y, r)| y - r))
            .collect();
        Ok(BlockSolution {
            dc,
            du,
            krylov,
            residual: norm2(&res),
        })
    }
}
