//! Lanczos iteration with full reorthogonalization, plus a dense oracle.

use nalgebra::{DMatrix, SymmetricEigen};

use super::tridiag;
use crate::error::{FklError, Result};
use crate::grid::dot;

/// Converged low end of a spectrum in a (sub)space of sample vectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit vectors in the Euclidean sample inner product.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v - λ v‖` (Euclidean) for each pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Options of [`lanczos_lowest`].
#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Converged when every requested Ritz residual is below
    /// `rel_tol · max|θ|`.
    pub rel_tol: f64,
    /// Convergence is tested every this many steps.
    pub check_every: usize,
    /// Ritz values above this threshold (typically inside the continuum,
    /// where they cluster) only need residuals below `loose_tol · max|θ|`.
    pub loose_above: Option<f64>,
    pub loose_tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            rel_tol: 1e-10,
            check_every: 25,
            loose_above: None,
            loose_tol: 1e-6,
        }
    }
}

/// The `k` lowest eigenpairs of the symmetric operator `apply` restricted to
/// the invariant subspace containing `start` (`apply` must map that subspace
/// to itself; `project` is applied to every new Krylov vector to suppress
/// rounding drift out of it).
pub fn lanczos_lowest<A, P>(
    mut apply: A,
    mut project: P,
    start: &[f64],
    k: usize,
    opts: &LanczosOptions,
) -> Result<EigenPairs>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: FnMut(&mut Vec<f64>),
{
    let mut q0 = start.to_vec();
    project(&mut q0);
    let nrm = dot(&q0, &q0).sqrt();
    if !(nrm > 0.0) {
        return Err(FklError::InvalidInput("Lanczos start vector vanishes in the subspace".into()));
    }
    q0.iter_mut().for_each(|v| *v /= nrm);

    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut exhausted = false;
    let mut converged = false;

    for j in 0..opts.max_iter {
        let mut w = apply(&basis[j])?;
        project(&mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for qi in &basis {
                let c = dot(qi, &w);
                for (wv, qv) in w.iter_mut().zip(qi) {
                    *wv -= c * qv;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = alpha.len();
        let scale = alpha.iter().chain(&beta).fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
        if b <= 1e-13 * scale {
            exhausted = true;
            break;
        }
        let check = (m >= k && (m % opts.check_every == 0)) || m == opts.max_iter;
        if check {
            let theta = tridiag::eigenvalues(&alpha, &beta);
            let tmax = theta.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let ok = theta.iter().take(k).all(|&t| {
                let s = tridiag::eigenvector(&alpha, &beta, t);
                let tol = match opts.loose_above {
                    Some(cut) if t > cut => opts.loose_tol,
                    _ => opts.rel_tol,
                };
                b * s[m - 1].abs() <= tol * tmax
            });
            if ok {
                beta.push(b);
                converged = true;
                break;
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|v| *v /= b);
        basis.push(w);
    }
    let m = alpha.len();
    if !(converged || exhausted) {
        return Err(FklError::NonConvergence {
            what: "Lanczos eigensolver".into(),
            iterations: m,
            last: f64::NAN,
        });
    }
    // Ritz pairs from a dense decomposition of the projected matrix.
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).expect("finite"));
    let take = k.min(m);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    let len = basis[0].len();
    for &idx in order.iter().take(take) {
        let theta = eig.eigenvalues[idx];
        let mut v = vec![0.0; len];
        for (i, qi) in basis.iter().enumerate().take(m) {
            let c = eig.eigenvectors[(i, idx)];
            for (vv, qv) in v.iter_mut().zip(qi) {
                *vv += c * qv;
            }
        }
        project(&mut v);
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let av = apply(&v)?;
        let r: f64 = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        values.push(theta);
        vectors.push(v);
        residuals.push(r);
    }
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        iterations: m,
    })
}

/// Dense eigen-decomposition of the operator restricted to the span of the
/// orthonormal `basis` (oracle for small grids).
pub fn dense_lowest<A>(mut apply: A, basis: &[Vec<f64>], k: usize) -> Result<EigenPairs>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = basis.len();
    let images: Vec<Vec<f64>> = basis.iter().map(|b| apply(b)).collect::<Result<_>>()?;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = dot(&basis[i], &images[j]);
        }
    }
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).expect("finite"));
    let len = basis.first().map_or(0, |b| b.len());
    let mut out = EigenPairs {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
        iterations: d,
    };
    for &idx in order.iter().take(k.min(d)) {
        let mut v = vec![0.0; len];
        for (i, bi) in basis.iter().enumerate() {
            let c = eig.eigenvectors[(i, idx)];
            for (vv, bv) in v.iter_mut().zip(bi) {
                *vv += c * bv;
            }
        }
        let theta = eig.eigenvalues[idx];
        let av = apply(&v)?;
        let r = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - theta * b).powi(2))
            .sum::<f64>()
            .sqrt();
        out.values.push(theta);
        out.vectors.push(v);
        out.residuals.push(r);
    }
    Ok(out)
}
