//! Preconditioned conjugate gradients and right-preconditioned restarted GMRES.

use serde::{Deserialize, Serialize};

use super::precond::{self, Preconditioner, PreconditionerKind};
use super::sparse::{dot, norm2, project_zero_mean, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KrylovMethod {
    Cg,
    Gmres { restart: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovConfig {
    pub method: KrylovMethod,
    pub rtol: f64,
    pub atol: f64,
    pub max_iters: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            method: KrylovMethod::Cg,
            rtol: 1e-10,
            atol: 1e-14,
            max_iters: 5000,
            preconditioner: PreconditionerKind::IncompleteCholesky0,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol >= 0.0 && self.atol >= 0.0) {
            return Err(Error::InvalidParameter(
                "krylov tolerances must be >= 0".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "krylov max_iters must be >= 1".into(),
            ));
        }
        if let KrylovMethod::Gmres { restart } = self.method {
            if restart == 0 {
                return Err(Error::InvalidParameter("gmres restart must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
}

/// Solves `M x = rhs` from a zero initial guess.
///
/// With `constant_kernel` the right-hand side is projected onto the
/// complement of the constants and the solution is returned with zero mean.
pub fn krylov_solve(
    m: &CsrMatrix,
    rhs: &[f64],
    config: &KrylovConfig,
    constant_kernel: bool,
) -> Result<(Vec<f64>, KrylovReport)> {
    config.validate()?;
    if m.nrows() != m.ncols() || m.nrows() != rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with rhs of length {}",
            m.nrows(),
            m.ncols(),
            rhs.len()
        )));
    }
    let pc = precond::build(config.preconditioner, m)?;
    let mut b = rhs.to_vec();
    if constant_kernel {
        project_zero_mean(&mut b);
    }
    let mut x = vec![0.0; b.len()];
    let report = match config.method {
        KrylovMethod::Cg => {
            if !m.is_symmetric() {
                return Err(Error::InvalidParameter(
                    "CG requires a matrix flagged symmetric".into(),
                ));
            }
            cg(m, &b, &mut x, pc.as_ref(), config, constant_kernel)?
        }
        KrylovMethod::Gmres { restart } => {
            gmres(m, &b, &mut x, pc.as_ref(), config, restart, constant_kernel)?
        }
    };
    Ok((x, report))
}

fn target(config: &KrylovConfig, bnorm: f64) -> f64 {
    config.atol.max(config.rtol * bnorm)
}

pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    config: &KrylovConfig,
    constant_kernel: bool,
) -> Result<KrylovReport> {
    let n = b.len();
    let bnorm = norm2(b);
    let tol = target(config, bnorm);
    let mut r = b.to_vec();
    let ax = a.mul_vec(x);
    r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
    let mut rnorm = norm2(&r);
    if rnorm <= tol {
        return Ok(KrylovReport {
            iterations: 0,
            residual_norm: rnorm,
            rhs_norm: bnorm,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    if constant_kernel {
        project_zero_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=config.max_iters {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::KrylovBreakdown { iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= tol {
            if constant_kernel {
                project_zero_mean(x);
            }
            return Ok(KrylovReport {
                iterations: it,
                residual_norm: rnorm,
                rhs_norm: bnorm,
            });
        }
        pc.apply(&r, &mut z);
        if constant_kernel {
            project_zero_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::KrylovDiverged {
        iterations: config.max_iters,
        residual: rnorm,
    })
}

/// GMRES(m) with right preconditioning, so the monitored residual is the true one.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &dyn Preconditioner,
    config: &KrylovConfig,
    restart: usize,
    constant_kernel: bool,
) -> Result<KrylovReport> {
    let n = b.len();
    let bnorm = norm2(b);
    let tol = target(config, bnorm);
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        let mut r = b.to_vec();
        let ax = a.mul_vec(x);
        r.iter_mut().zip(&ax).for_each(|(ri, ai)| *ri -= ai);
        let beta = norm2(&r);
        if beta <= tol {
            if constant_kernel {
                project_zero_mean(x);
            }
            return Ok(KrylovReport {
                iterations: total,
                residual_norm: beta,
                rhs_norm: bnorm,
            });
        }
        if total >= config.max_iters {
            return Err(Error::KrylovDiverged {
                iterations: total,
                residual: beta,
            });
        }
        let m = restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            pc.apply(&v[k], &mut z);
            if constant_kernel {
                project_zero_mean(&mut z);
            }
            a.mul_vec_into(&z, &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &v[j]);
                hess[j][k] = hjk;
                w.iter_mut().zip(&v[j]).for_each(|(wi, vj)| *wi -= hjk * vj);
            }
            let hnext = norm2(&w);
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = (hess[k][k].powi(2) + hess[k + 1][k].powi(2)).sqrt();
            if denom == 0.0 {
                return Err(Error::KrylovBreakdown { iterations: total });
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() <= tol || total >= config.max_iters || hnext == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            update
                .iter_mut()
                .zip(&v[j])
                .for_each(|(u, vj)| *u += yj * vj);
        }
        pc.apply(&update, &mut z);
        if constant_kernel {
            project_zero_mean(&mut z);
        }
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}
