//! The base ground state `Q` of `(-Δ)^s Q + Q = Q^p` and its certificates.
//!
//! `Q` is computed by Petviashvili's iteration
//! `Q ← γ ((-Δ)^s + 1)^{-1} Q^p`,
//! `γ = (⟨Q, ((-Δ)^s+1)Q⟩ / ⟨Q^p, Q⟩)^{p/(p-1)}`, symmetrized every step,
//! followed by a Newton polish restricted to the symmetric sector where the
//! Jacobian `T₊ = (-Δ)^s + 1 - pQ^{p-1}` is invertible (but indefinite, hence
//! MINRES).

use crate::error::{FklError, Result};
use crate::grid::{Field, Grid};
use crate::krylov;
use crate::spectral::{gns_quotient, Exterior, FracOperator};

/// Order, power and dimension of the base equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseParams {
    s: f64,
    p: f64,
    dim: usize,
}

impl BaseParams {
    /// Validates `N ∈ {1,2}`, `N/4 < s < 1` and `1 < p < 2*_s - 1`.
    pub fn new(s: f64, p: f64, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FklError::UnsupportedDimension(dim));
        }
        let n = dim as f64;
        if !(s > n / 4.0) {
            return Err(FklError::InvalidParameter(format!(
                "requires s > N/4 = {} (got s = {s})",
                n / 4.0
            )));
        }
        if !(s < 1.0) {
            return Err(FklError::InvalidParameter(format!("requires s < 1 (got s = {s})")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(FklError::InvalidParameter(format!("requires p > 1 (got p = {p})")));
        }
        if let Some(pc) = critical_power(s, dim) {
            if !(p < pc) {
                return Err(FklError::InvalidParameter(format!(
                    "requires subcritical p < (N+2s)/(N-2s) = {pc} (got p = {p})"
                )));
            }
        }
        Ok(Self { s, p, dim })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Algebraic decay exponent `N + 2s` of the ground state.
    pub fn decay_exponent(&self) -> f64 {
        self.dim as f64 + 2.0 * self.s
    }
}

/// `(N+2s)/(N-2s)` when `s < N/2`, otherwise `None` (no upper bound on `p`).
pub fn critical_power(s: f64, dim: usize) -> Option<f64> {
    let n = dim as f64;
    (s < n / 2.0).then(|| (n + 2.0 * s) / (n - 2.0 * s))
}

/// The exterior model used when none is requested explicitly: zero padding by
/// 8 in one dimension, by 2 in two dimensions.
pub fn default_exterior(dim: usize) -> Exterior {
    if dim == 1 {
        Exterior::ZeroPadded(8)
    } else {
        Exterior::ZeroPadded(2)
    }
}

/// Options of [`solve_q`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Required final `‖(-Δ)^sQ + Q - Q^p‖₂`.
    pub tol: f64,
    /// Petviashvili stops once the relative sup-norm step drops below this.
    pub petviashvili_tol: f64,
    pub max_petviashvili: usize,
    /// Newton stops at this residual (or after `max_newton` steps).
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Box closure; `None` selects [`default_exterior`].
    pub exterior: Option<Exterior>,
    /// Starting profile; `None` uses `(1+|x|²)^{-(N+2s)/2}`.
    pub initial: Option<Field>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            petviashvili_tol: 1e-8,
            max_petviashvili: 5000,
            newton_tol: 1e-12,
            max_newton: 20,
            exterior: None,
            initial: None,
        }
    }
}

/// Measured constants of the bound `C₁ ≤ Q(x)(1+|x|^{N+2s}) ≤ C₂` on the
/// trust window `5 ≤ |x| ≤ L/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub c1: f64,
    pub c2: f64,
    pub window: (f64, f64),
    pub passed: bool,
}

/// Smallest `C₁/C₂` accepted by the decay certificate. Anything below means
/// the weighted profile is far from flat across the window, i.e. the decay is
/// not of the algebraic class `|x|^{-(N+2s)}`.
pub const DECAY_MIN_RATIO: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub q: Field,
    pub params: BaseParams,
    pub exterior: Exterior,
    pub residual_l2: f64,
    pub residual_linf: f64,
    /// Attained value of the Gagliardo–Nirenberg quotient.
    pub j_value: f64,
    pub decay_certificate: DecayCertificate,
    pub monotone: bool,
    /// Petviashvili iterations.
    pub iterations: usize,
    pub newton_iterations: usize,
}

/// Residual field `(-Δ)^sQ + Q - Q₊^p`.
pub fn residual_field(op: &FracOperator, p: f64, q: &Field) -> Result<Field> {
    let aq = op.apply(q)?;
    let qp = q.positive_power(p);
    let mut r = aq.zip_with(q, |a, b| a + b)?.sub(&qp)?;
    op.mask_in_place(r.samples_mut());
    Ok(r)
}

/// `(L², L∞)` norms of `(-Δ)^sQ + Q - Q₊^p`.
pub fn residual(params: &BaseParams, q: &Field, exterior: Exterior) -> Result<(f64, f64)> {
    let op = FracOperator::new(*q.grid(), params.s, exterior)?;
    let r = residual_field(&op, params.p, q)?;
    Ok((r.l2_norm(), r.linf_norm()))
}

/// Initial profile `(1+|x|²)^{-(N+2s)/2}` of unit height.
pub fn initial_profile(params: &BaseParams, grid: Grid) -> Field {
    let e = -params.decay_exponent() / 2.0;
    Field::from_radial(grid, |r| (1.0 + r * r).powf(e))
}

/// Computes the ground state of `(-Δ)^s Q + Q = Q^p` on `grid`.
pub fn solve_q(params: &BaseParams, grid: Grid, opts: &SolveOptions) -> Result<GroundStateResult> {
    if params.dim != grid.dim() {
        return Err(FklError::GridMismatch(format!(
            "parameters are {}-dimensional but grid is {}-dimensional",
            params.dim,
            grid.dim()
        )));
    }
    let exterior = opts.exterior.unwrap_or_else(|| default_exterior(grid.dim()));
    let op = FracOperator::new(grid, params.s, exterior)?;
    let p = params.p;

    let start = match &opts.initial {
        Some(f) => {
            grid.check_same(f.grid(), "initial profile")?;
            f.clone()
        }
        None => initial_profile(params, grid),
    };
    let mut q = op.masked(&start.symmetric_part());
    if !(q.max() > 0.0) {
        return Err(FklError::Collapse("initial profile has no positive part".into()));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut step = f64::INFINITY;
    while iterations < opts.max_petviashvili {
        iterations += 1;
        let aq = op.apply(&q)?;
        let numer = q.dot(&aq)? + q.dot(&q)?;
        let qp = q.positive_power(p);
        let denom = qp.dot(&q)?;
        if !(denom > 0.0) {
            return Err(FklError::Collapse("⟨Q^p, Q⟩ vanished".into()));
        }
        let gamma = (numer / denom).powf(p / (p - 1.0));
        let y = op.solve_shifted(1.0, 1.0, &qp, 1e-13)?;
        let next = op.masked(&y.scaled(gamma).symmetric_part());
        let sup = next.linf_norm();
        if !(sup > 1e-8) || !sup.is_finite() {
            return Err(FklError::Collapse(format!(
                "iterate sup-norm {sup:e} after {iterations} Petviashvili steps"
            )));
        }
        step = next.sub(&q)?.linf_norm() / sup;
        q = next;
        if step < opts.petviashvili_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(FklError::NonConvergence {
            what: "Petviashvili iteration".into(),
            iterations,
            last: step,
        });
    }

    let mut r = residual_field(&op, p, &q)?;
    let mut res = r.l2_norm();
    let mut newton_iterations = 0;
    while res > opts.newton_tol && newton_iterations < opts.max_newton {
        newton_iterations += 1;
        let weight = q.map(|v| if v > 0.0 { p * v.powf(p - 1.0) } else { 0.0 });
        let delta = symmetric_tplus_solve(&op, &weight, &r.scaled(-1.0), 1e-13)?;
        let candidate = op.masked(&q.add_scaled(1.0, &delta)?.symmetric_part());
        let r_new = residual_field(&op, p, &candidate)?;
        let res_new = r_new.l2_norm();
        if !(res_new < res) {
            // Rounding floor reached.
            break;
        }
        q = candidate;
        r = r_new;
        let improvement = res / res_new;
        res = res_new;
        if improvement < 2.0 {
            break;
        }
    }

    let residual_l2 = res;
    let residual_linf = r.linf_norm();
    if !(residual_l2 <= opts.tol) {
        return Err(FklError::NonConvergence {
            what: "ground-state Newton polish".into(),
            iterations: newton_iterations,
            last: residual_l2,
        });
    }
    if let Some(i) = (0..grid.total_points()).find(|&i| op.is_active(i) && !(q.samples()[i] > 0.0)) {
        return Err(FklError::Certificate(format!(
            "ground state not positive at {:?} (under-resolved grid?)",
            grid.point(i)
        )));
    }

    let j_value = gns_quotient(&op, &q, p)?;
    let decay_certificate = certify_decay(&q, params);
    let monotone = certify_monotone_radial(&q);
    Ok(GroundStateResult {
        q,
        params: *params,
        exterior,
        residual_l2,
        residual_linf,
        j_value,
        decay_certificate,
        monotone,
        iterations,
        newton_iterations,
    })
}

/// Re-certifies a previously computed profile (e.g. read back from a cache)
/// without iterating: residuals, quotient, decay and monotonicity are
/// recomputed from `q`. Iteration counts are reported as zero.
pub fn certify_profile(params: &BaseParams, q: Field, exterior: Exterior) -> Result<GroundStateResult> {
    if params.dim != q.grid().dim() {
        return Err(FklError::GridMismatch("profile dimension differs from parameters".into()));
    }
    let op = FracOperator::new(*q.grid(), params.s, exterior)?;
    let r = residual_field(&op, params.p, &q)?;
    let j_value = gns_quotient(&op, &q, params.p)?;
    let decay_certificate = certify_decay(&q, params);
    let monotone = certify_monotone_radial(&q);
    Ok(GroundStateResult {
        residual_l2: r.l2_norm(),
        residual_linf: r.linf_norm(),
        q,
        params: *params,
        exterior,
        j_value,
        decay_certificate,
        monotone,
        iterations: 0,
        newton_iterations: 0,
    })
}

/// Solves `((-Δ)^s + 1 - weight) x = rhs` on the symmetric sector by MINRES.
fn symmetric_tplus_solve(op: &FracOperator, weight: &Field, rhs: &Field, tol: f64) -> Result<Field> {
    let grid = *op.grid();
    let project = |v: &[f64]| op.masked(&Field::from_vec(grid, v.to_vec()).symmetric_part());
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let f = project(v);
        let af = op.apply(&f)?;
        let out = Field::from_vec(
            grid,
            af.samples()
                .iter()
                .zip(f.samples())
                .zip(weight.samples())
                .map(|((a, x), w)| a + x - w * x)
                .collect(),
        );
        Ok(op.masked(&out.symmetric_part()).into_samples())
    };
    let prec = |v: &[f64]| -> Result<Vec<f64>> {
        let f = Field::from_vec(grid, v.to_vec());
        Ok(op.shifted_inverse_approx(1.0, 1.0, &f)?.into_samples())
    };
    let b = project(rhs.samples());
    let sol = krylov::minres(apply, prec, b.samples(), tol, 2000)?;
    Ok(project(&sol.x))
}

/// Decay constants over the trust window `5 ≤ |x| ≤ L/2`.
pub fn certify_decay(q: &Field, params: &BaseParams) -> DecayCertificate {
    let grid = q.grid();
    let window = (5.0, grid.half_width() / 2.0);
    let e = params.decay_exponent();
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::NEG_INFINITY;
    for (i, &v) in q.samples().iter().enumerate() {
        let r = grid.radius(i);
        if r >= window.0 && r <= window.1 {
            let w = v * (1.0 + r.powf(e));
            c1 = c1.min(w);
            c2 = c2.max(w);
        }
    }
    let passed = c1.is_finite()
        && c2.is_finite()
        && c1 > 0.0
        && c1 <= c2
        && c1 / c2 >= DECAY_MIN_RATIO;
    DecayCertificate {
        c1,
        c2,
        window,
        passed,
    }
}

/// True iff the maximum sits at the origin and samples are nonincreasing
/// (within `1e-9 ‖Q‖∞`) along every grid ray from the origin: the coordinate
/// half-axes and, for `N = 2`, the diagonals.
pub fn certify_monotone_radial(q: &Field) -> bool {
    let grid = q.grid();
    let n = grid.points_per_axis() as i64;
    let c = n / 2;
    let slack = 1e-9 * q.linf_norm();
    let data = q.samples();
    let origin = data[grid.origin_index()];
    if data.iter().any(|&v| v > origin + slack) {
        return false;
    }
    let directions: Vec<(i64, i64)> = if grid.dim() == 1 {
        vec![(1, 0), (-1, 0)]
    } else {
        vec![(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    };
    for (d0, d1) in directions {
        let mut prev = origin;
        for t in 1.. {
            let i0 = c + t * d0;
            let i1 = if grid.dim() == 1 { 0 } else { c + t * d1 };
            if i0 < 0 || i0 >= n || i1 < 0 || i1 >= n {
                break;
            }
            let v = data[grid.flat_index([i0 as usize, i1 as usize])];
            if v > prev + slack {
                return false;
            }
            prev = v;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_validation() {
        assert!(BaseParams::new(0.5, 2.0, 1).is_ok());
        let e = BaseParams::new(0.2, 2.0, 1).unwrap_err().to_string();
        assert!(e.contains("s > N/4"), "{e}");
        assert!(BaseParams::new(0.4, 9.0, 2).is_err());
        assert!(BaseParams::new(0.75, 9.0, 1).is_ok());
        assert!(BaseParams::new(0.75, 1.0, 1).is_err());
        assert!(BaseParams::new(1.0, 2.0, 1).is_err());
        assert!(BaseParams::new(0.6, 2.0, 3).is_err());
    }

    #[test]
    fn critical_power_arithmetic() {
        let pc = critical_power(0.4, 2).unwrap();
        assert!((pc - 2.8 / 1.2).abs() < 1e-15);
        assert!(critical_power(0.5, 1).is_none());
    }

    #[test]
    fn residual_of_trivial_fields() {
        let g = Grid::new(1, 10.0, 64).unwrap();
        let params = BaseParams::new(0.6, 2.5, 1).unwrap();
        let (l2, linf) = residual(&params, &Field::zeros(g), Exterior::Periodic).unwrap();
        assert_eq!((l2, linf), (0.0, 0.0));
        let (_, linf) = residual(&params, &Field::constant(g, 2.0), Exterior::Periodic).unwrap();
        assert!((linf - (2f64.powf(2.5) - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn monotone_detects_shift_and_bump() {
        let g = Grid::new(1, 50.0, 1024).unwrap();
        let bo = Field::from_fn(g, |[x, _]| 2.0 / (1.0 + x * x));
        assert!(certify_monotone_radial(&bo));
        let shifted = Field::from_fn(g, |[x, _]| 2.0 / (1.0 + (x - 5.0).powi(2)));
        assert!(!certify_monotone_radial(&shifted));
        let bump = Field::from_fn(g, |[x, _]| {
            2.0 / (1.0 + x * x) + 0.01 * (-(x - 10.0).powi(2)).exp()
        });
        assert!(!certify_monotone_radial(&bump));
    }

    #[test]
    fn decay_certificate_oracles() {
        let g = Grid::new(1, 200.0, 8192).unwrap();
        let params = BaseParams::new(0.5, 2.0, 1).unwrap();
        let bo = Field::from_fn(g, |[x, _]| 2.0 / (1.0 + x * x));
        let c = certify_decay(&bo, &params);
        assert!(c.passed);
        assert!((c.c1 - 2.0).abs() < 0.04 && (c.c2 - 2.0).abs() < 0.04);
        let gauss = Field::from_fn(g, |[x, _]| (-x * x).exp());
        assert!(!certify_decay(&gauss, &params).passed);
        let flat = Field::constant(g, 1.0);
        let c = certify_decay(&flat, &params);
        assert!(!c.passed && c.c2 > 1000.0);
    }
}
