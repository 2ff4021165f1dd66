//! The constrained corrector `φ_{ε,y}` and an unconstrained Newton oracle.

use super::Frame;
use crate::error::{FklError, Result};
use crate::grid::Field;
use crate::krylov;

/// Options of [`solve_corrector`].
#[derive(Debug, Clone)]
pub struct CorrectorOptions {
    /// Stop when `‖φ_{k+1} - φ_k‖_ε ≤ step_tol · ε^{N/2}`.
    pub step_tol: f64,
    /// Required `‖P_E I_ε'(U+φ)‖ ≤ gradient_tol · ε^{N/2}` at exit.
    pub gradient_tol: f64,
    /// Relative tolerance of each constrained linear solve.
    pub linear_tol: f64,
    pub max_iter: usize,
    pub max_linear: usize,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            gradient_tol: 1e-9,
            linear_tol: 1e-12,
            max_iter: 60,
            max_linear: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrectorResult {
    pub phi: Field,
    pub iterations: usize,
    /// `‖φ‖_ε`.
    pub phi_norm: f64,
    /// `‖φ_{k+1} - φ_k‖_ε` per step.
    pub steps: Vec<f64>,
    /// Upper bound on the `ε`-dual norm of the projected gradient at exit.
    pub gradient_norm: f64,
    /// Worst constraint residual observed over all iterates.
    pub orthogonality: f64,
    pub linear_iterations: usize,
    /// `|l_ε|` proxy: `ε^{N/2}‖P_E (W - V(x₀))U‖₂`.
    pub l_norm: f64,
    /// Multipliers `c` with `F'(U+φ) = Σ c_i Z_i`.
    pub multipliers: Vec<f64>,
}

/// Solves `L_z x = r` on `E_{ε,y}` (`r` is projected first) by projected,
/// preconditioned MINRES; `L_z` is invertible but indefinite there.
pub(crate) fn solve_on_e(frame: &Frame<'_>, rhs: &Field, tol: f64, max_iter: usize) -> Result<(Field, usize)> {
    let grid = *frame.grid();
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let mut x = v.to_vec();
        frame.project_l2(&mut x);
        let mut y = frame.apply_l_z(&Field::new(grid, x)?)?.into_samples();
        frame.project_l2(&mut y);
        Ok(y)
    };
    let prec = |v: &[f64]| -> Result<Vec<f64>> {
        let mut x = v.to_vec();
        frame.project_l2(&mut x);
        let mut y = frame.precondition(&x)?;
        frame.project_l2(&mut y);
        Ok(y)
    };
    let mut b = rhs.samples().to_vec();
    frame.project_l2(&mut b);
    if b.iter().all(|v| *v == 0.0) {
        return Ok((Field::zeros(grid), 0));
    }
    let sol = krylov::minres(apply, prec, &b, tol, max_iter)?;
    let mut x = sol.x;
    frame.project_l2(&mut x);
    Ok((Field::new(grid, x)?, sol.iterations))
}

/// Fixed point of `φ ↦ -𝓛_ε^{-1}(l_ε + R_ε'(φ))` on `E_{ε,y}`.
pub fn solve_corrector(frame: &Frame<'_>, opts: &CorrectorOptions) -> Result<CorrectorResult> {
    let setup = frame.setup();
    let grid = *frame.grid();
    let half = frame.volume_factor().sqrt();
    let l = frame.l_field()?;
    let mut lp = l.samples().to_vec();
    frame.project_l2(&mut lp);
    let l_norm = half * Field::new(grid, lp)?.l2_norm();

    let mut phi = Field::zeros(grid);
    let mut steps = Vec::new();
    let mut linear_iterations = 0;
    let mut orthogonality: f64 = 0.0;
    let mut growth = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let rhs = l.add_scaled(1.0, &frame.remainder_gradient_z(&phi)?)?;
        let (x, its) = solve_on_e(frame, &rhs, opts.linear_tol, opts.max_linear)?;
        linear_iterations += its;
        let next = x.scaled(-1.0);
        let step = frame.norm(&next.sub(&phi)?)?;
        orthogonality = orthogonality.max(frame.orthogonality_residual(&next)?);
        if let Some(&prev) = steps.last() {
            if step > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        steps.push(step);
        phi = next;
        if !step.is_finite() || growth >= 3 {
            return Err(FklError::NonConvergence {
                what: format!(
                    "corrector contraction at ε = {} (ε too large or grid too coarse)",
                    frame.eps()
                ),
                iterations: steps.len(),
                last: step,
            });
        }
        if step <= opts.step_tol * half {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FklError::NonConvergence {
            what: format!("corrector contraction at ε = {}", frame.eps()),
            iterations: steps.len(),
            last: steps.last().copied().unwrap_or(f64::NAN),
        });
    }
    let w = setup.profile().add_scaled(1.0, &phi)?;
    let mut g = frame.z_gradient(&w)?.into_samples();
    frame.project_l2(&mut g);
    let inf_w = frame.potential_field().samples().iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let gradient_norm = half * Field::new(grid, g)?.l2_norm() / inf_w.sqrt();
    if gradient_norm > opts.gradient_tol * half {
        return Err(FklError::NonConvergence {
            what: "corrector gradient postcondition".into(),
            iterations: steps.len(),
            last: gradient_norm,
        });
    }
    Ok(CorrectorResult {
        phi_norm: frame.norm(&phi)?,
        multipliers: frame.multipliers(&w)?,
        phi,
        iterations: steps.len(),
        steps,
        gradient_norm,
        orthogonality,
        linear_iterations,
        l_norm,
    })
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub w: Field,
    pub iterations: usize,
    /// `‖F'(w)‖₂` in stretched variables.
    pub residual: f64,
}

/// Unconstrained Newton iteration on `F'(w) = 0` from `w0`, with the full
/// Hessian (including the Kirchhoff rank-one term) solved by MINRES.
pub fn full_newton(frame: &Frame<'_>, w0: &Field, tol: f64, max_iter: usize) -> Result<NewtonResult> {
    let setup = frame.setup();
    let kp = setup.params();
    let op = setup.operator();
    let grid = *frame.grid();
    let p = kp.base().p();
    let mut w = w0.clone();
    let mut residual = frame.z_gradient(&w)?.l2_norm();
    for it in 0..max_iter {
        if residual <= tol {
            return Ok(NewtonResult { w, iterations: it, residual });
        }
        let g = frame.z_gradient(&w)?;
        let aw = op.apply(&w)?;
        let coef = kp.a() + kp.b() * aw.dot(&w)?;
        let weight = w.map(|v| if v > 0.0 { p * v.powf(p - 1.0) } else { 0.0 });
        let pot = frame.potential_field();
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            let f = Field::new(grid, v.to_vec())?;
            let af = op.apply(&f)?;
            let sigma = aw.dot(&f)?;
            let out: Vec<f64> = af
                .samples()
                .iter()
                .zip(v)
                .zip(pot.samples())
                .zip(weight.samples())
                .zip(aw.samples())
                .map(|((((a, x), vv), pw), awv)| coef * a + vv * x - pw * x + 2.0 * kp.b() * sigma * awv)
                .collect();
            Ok(op.masked(&Field::new(grid, out)?).into_samples())
        };
        let prec = |v: &[f64]| frame.precondition(v);
        let sol = krylov::minres(apply, prec, g.samples(), 1e-13, 4000)?;
        w = w.sub(&Field::new(grid, sol.x)?)?;
        residual = frame.z_gradient(&w)?.l2_norm();
    }
    if residual <= tol {
        return Ok(NewtonResult { w, iterations: max_iter, residual });
    }
    Err(FklError::NonConvergence {
        what: "full Newton solve of the stretched equation".into(),
        iterations: max_iter,
        last: residual,
    })
}
