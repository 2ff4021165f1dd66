//! Symmetric tridiagonal eigenproblems (the Lanczos projection).

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e.len() == d.len() - 1`), ascending. Implicit QL with
/// Wilkinson shifts, no eigenvectors.
pub fn eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    e.truncate(n);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    d
}

/// Unit eigenvector for the (converged) eigenvalue `theta` by inverse
/// iteration with a slightly perturbed shift.
pub fn eigenvector(d: &[f64], e: &[f64], theta: f64) -> Vec<f64> {
    let n = d.len();
    let scale = d.iter().chain(e).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let shift = theta + 1e-13 * scale;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 97) as f64 / 97.0)).collect();
    normalize(&mut x);
    for _ in 0..3 {
        x = solve_shifted(d, e, shift, &x);
        normalize(&mut x);
    }
    x
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Solves `(T - shift) y = b` by Gaussian elimination with partial pivoting
/// specialised to tridiagonal structure (one extra super-diagonal of fill).
fn solve_shifted(d: &[f64], e: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        let piv = d[0] - shift;
        return vec![b[0] / if piv == 0.0 { f64::EPSILON } else { piv }];
    }
    // Row i holds entries at columns i, i+1, i+2 after elimination.
    let mut diag: Vec<f64> = d.iter().map(|v| v - shift).collect();
    let mut sup1: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    let mut sup2 = vec![0.0; n];
    let mut sub: Vec<f64> = e.to_vec();
    let mut rhs = b.to_vec();
    for i in 0..n - 1 {
        if sub[i].abs() > diag[i].abs() {
            // Swap rows i and i+1.
            let (a0, a1, a2) = (diag[i], sup1[i], sup2[i]);
            let (b0, b1, b2) = (sub[i], diag[i + 1], if i + 1 < n - 1 { sup1[i + 1] } else { 0.0 });
            diag[i] = b0;
            sup1[i] = b1;
            sup2[i] = b2;
            sub[i] = a0;
            diag[i + 1] = a1;
            if i + 1 < n - 1 {
                sup1[i + 1] = a2;
            }
            rhs.swap(i, i + 1);
        }
        let piv = if diag[i] == 0.0 { f64::EPSILON } else { diag[i] };
        let factor = sub[i] / piv;
        diag[i + 1] -= factor * sup1[i];
        if i + 1 < n - 1 {
            sup1[i + 1] -= factor * sup2[i];
        }
        rhs[i + 1] -= factor * rhs[i];
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = rhs[i];
        if i + 1 < n {
            v -= sup1[i] * y[i + 1];
        }
        if i + 2 < n {
            v -= sup2[i] * y[i + 2];
        }
        let piv = if diag[i] == 0.0 { f64::EPSILON } else { diag[i] };
        y[i] = v / piv;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_solver() {
        let n = 40;
        let d: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64) - 4.0).collect();
        let e: Vec<f64> = (0..n - 1).map(|i| 0.5 + ((i * 13 % 7) as f64) * 0.3).collect();
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
            if i + 1 < n {
                m[(i, i + 1)] = e[i];
                m[(i + 1, i)] = e[i];
            }
        }
        let mut dense: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ours = eigenvalues(&d, &e);
        for (a, b) in ours.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
        for &theta in &ours[..3] {
            let v = eigenvector(&d, &e, theta);
            let mv = &m * nalgebra::DVector::from_vec(v.clone());
            let res: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-9, "{res}");
        }
    }
}
