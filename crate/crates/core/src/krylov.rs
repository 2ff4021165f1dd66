//! Matrix-free Krylov solvers on flat sample vectors.
//!
//! Operators are closures mapping a sample slice to a new vector. Inner
//! products are plain Euclidean sums; the grid weight `h^N` is a common factor
//! and cancels from every quantity the solvers use.

use crate::error::{FklError, Result};
use crate::grid::dot;

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct KrylovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual estimate (`‖r‖/‖b‖`, in the solver's norm).
    pub relative_residual: f64,
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator with a symmetric positive preconditioner. Starts from zero and
/// stops when the preconditioned residual has shrunk by `tol`.
pub fn pcg<A, M>(
    mut apply: A,
    mut precond: M,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovSolution>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    M: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(KrylovSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz.abs();
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FklError::NonConvergence {
                what: "conjugate gradients (operator not positive on search direction)".into(),
                iterations: it,
                last: pap,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        z = precond(&r)?;
        let rz_new = dot(&r, &z);
        let rel = (rz_new.abs() / rz0).sqrt();
        if rel <= tol {
            return Ok(KrylovSolution {
                x,
                iterations: it,
                relative_residual: dot(&r, &r).sqrt() / bnorm,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(FklError::NonConvergence {
        what: "conjugate gradients".into(),
        iterations: max_iter,
        last: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Preconditioned MINRES for a symmetric, possibly indefinite operator with a
/// symmetric positive definite preconditioner (Paige–Saunders recurrences).
/// Stops when the preconditioned residual norm has shrunk by `tol`.
pub fn minres<A, M>(
    mut apply: A,
    mut precond: M,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovSolution>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    M: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1)?;
    let beta1_sq = dot(&r1, &y);
    if beta1_sq < 0.0 {
        return Err(FklError::InvalidInput("preconditioner is not positive".into()));
    }
    if beta1_sq == 0.0 {
        return Ok(KrylovSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let beta1 = beta1_sq.sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for it in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply(&v)?;
        if it >= 2 {
            axpy(&mut y, -beta / oldb, &r1);
        }
        let alfa = dot(&v, &y);
        axpy(&mut y, -alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2)?;
        oldb = beta;
        let beta_sq = dot(&r2, &y);
        if beta_sq < 0.0 {
            return Err(FklError::InvalidInput("preconditioner is not positive".into()));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((vi, a), b)| (vi - oldeps * a - delta * b) * denom)
            .collect();
        axpy(&mut x, phi, &w);

        let rel = phibar / beta1;
        if rel <= tol || beta == 0.0 {
            return Ok(KrylovSolution {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
    }
    Err(FklError::NonConvergence {
        what: "MINRES".into(),
        iterations: max_iter,
        last: phibar / beta1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(diag: Vec<f64>) -> impl FnMut(&[f64]) -> Result<Vec<f64>> {
        move |x: &[f64]| {
            let n = x.len();
            Ok((0..n)
                .map(|i| {
                    let mut v = diag[i] * x[i];
                    if i > 0 {
                        v -= x[i - 1];
                    }
                    if i + 1 < n {
                        v -= x[i + 1];
                    }
                    v
                })
                .collect())
        }
    }

    fn identity(x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 50;
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.1 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let sol = pcg(tridiag(diag.clone()), identity, &b, 1e-13, 200).unwrap();
        let r = tridiag(diag)(&sol.x).unwrap();
        let err: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn minres_solves_indefinite_system() {
        let n = 60;
        let diag: Vec<f64> = (0..n).map(|i| if i == 7 { -4.0 } else { 2.5 + 0.05 * i as f64 }).collect();
        let b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let diag_p = diag.clone();
        let prec = move |x: &[f64]| -> Result<Vec<f64>> {
            Ok(x.iter().zip(&diag_p).map(|(v, d)| v / d.abs()).collect())
        };
        let sol = minres(tridiag(diag.clone()), prec, &b, 1e-13, 500).unwrap();
        let r = tridiag(diag)(&sol.x).unwrap();
        let err: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
