//! From the base ground state `Q` to the Kirchhoff ground state `U`.
//!
//! Writing `E = a + b‖(-Δ)^{s/2}U‖²₂`, a solution of the Kirchhoff equation
//! solves the constant-coefficient problem `E(-Δ)^sU + mU = U^p`, whose ground
//! state is the rescaling
//! `U(x) = m^{1/(p-1)} Q(m^{1/(2s)} E^{-1/(2s)} x)`.
//! Consistency of the two expressions for `E` is the scalar equation
//! `f(E) = E - a - b m^{2/(p-1)+(2s-N)/(2s)} ‖(-Δ)^{s/2}Q‖²₂ E^{(N-2s)/(2s)} = 0`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FklError, Result};
use crate::fft::TensorFft;
use crate::grid::{Field, Grid};
use crate::ground_state::{BaseParams, GroundStateResult};
use crate::spectral::{gns_quotient, Exterior, FracOperator};

/// Coefficients `(a, b, m)` of the Kirchhoff equation plus the base data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KirchhoffParams {
    a: f64,
    b: f64,
    m: f64,
    base: BaseParams,
}

impl KirchhoffParams {
    pub fn new(a: f64, b: f64, m: f64, base: BaseParams) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(FklError::InvalidParameter(format!("requires a > 0 (got a = {a})")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(FklError::InvalidParameter(format!("requires b >= 0 (got b = {b})")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(FklError::InvalidParameter(format!("requires m > 0 (got m = {m})")));
        }
        Ok(Self { a, b, m, base })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn base(&self) -> &BaseParams {
        &self.base
    }

    /// Same coefficients with a different `m`.
    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(self.a, self.b, m, self.base)
    }

    /// Same coefficients with a different `b`.
    pub fn with_b(&self, b: f64) -> Result<Self> {
        Self::new(self.a, b, self.m, self.base)
    }

    /// `2/(p-1) + (2s-N)/(2s)`, the power of `m` in `f`.
    pub fn m_exponent(&self) -> f64 {
        let (s, p, n) = (self.base.s(), self.base.p(), self.base.dim() as f64);
        2.0 / (p - 1.0) + (2.0 * s - n) / (2.0 * s)
    }

    /// `(N-2s)/(2s)`, the power of `E` in `f`.
    pub fn e_exponent(&self) -> f64 {
        let (s, n) = (self.base.s(), self.base.dim() as f64);
        (n - 2.0 * s) / (2.0 * s)
    }

    /// Spatial dilation `λ = (E/m)^{1/(2s)}` with `U(x) = m^{1/(p-1)}Q(x/λ)`.
    pub fn dilation(&self, e0: f64) -> f64 {
        (e0 / self.m).powf(1.0 / (2.0 * self.base.s()))
    }

    /// Amplitude `m^{1/(p-1)}`.
    pub fn amplitude(&self) -> f64 {
        self.m.powf(1.0 / (self.base.p() - 1.0))
    }

    fn kirchhoff_constant(&self, grad_q_sq: f64) -> f64 {
        self.b * self.m.powf(self.m_exponent()) * grad_q_sq
    }
}

/// `f(E)`.
pub fn f_of_e(e: f64, kp: &KirchhoffParams, grad_q_sq: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(FklError::InvalidParameter(format!("f(E) requires E > 0 (got {e})")));
    }
    if !(grad_q_sq > 0.0) {
        return Err(FklError::InvalidParameter(format!(
            "f(E) requires ‖(-Δ)^(s/2)Q‖² > 0 (got {grad_q_sq})"
        )));
    }
    Ok(f_raw(e, kp, grad_q_sq))
}

fn f_raw(e: f64, kp: &KirchhoffParams, grad_q_sq: f64) -> f64 {
    e - kp.a - kp.kirchhoff_constant(grad_q_sq) * e.powf(kp.e_exponent())
}

/// `f'(E)`.
pub fn f_prime(e: f64, kp: &KirchhoffParams, grad_q_sq: f64) -> f64 {
    let g = kp.e_exponent();
    1.0 - kp.kirchhoff_constant(grad_q_sq) * g * e.powf(g - 1.0)
}

/// Root of `f` with its uniqueness certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct E0Solution {
    pub e0: f64,
    /// `f'(E₀) > 0` and the scan found exactly one sign change.
    pub uniqueness_certificate: bool,
    /// Every root located by the scan, ascending.
    pub roots: Vec<f64>,
    pub f_prime: f64,
    /// Upper end of the scanned interval.
    pub e_hi: f64,
}

const SCAN_POINTS: usize = 4096;

/// Finds `E₀ > a` with `f(E₀) = 0` (bisection to width `1e-14 a`, then
/// Newton) and certifies uniqueness by a log-spaced sign-change scan.
pub fn solve_e0(kp: &KirchhoffParams, grad_q_sq: f64) -> Result<E0Solution> {
    let a = kp.a;
    if kp.b == 0.0 {
        return Ok(E0Solution {
            e0: a,
            uniqueness_certificate: true,
            roots: vec![a],
            f_prime: 1.0,
            e_hi: a,
        });
    }
    f_of_e(a, kp, grad_q_sq)?;
    let f = |e: f64| f_raw(e, kp, grad_q_sq);
    let mut lo = a;
    let mut hi = 2.0 * a;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !(hi < 1e300) {
            return Err(FklError::NonConvergence {
                what: "bracketing the root of f".into(),
                iterations: 1000,
                last: hi,
            });
        }
    }
    let e_hi = hi;
    let e0 = refine_root(&f, |e| f_prime(e, kp, grad_q_sq), lo, hi, a);
    if !(f(e0).abs() <= 1e-12 * e0) {
        return Err(FklError::NonConvergence {
            what: "root of f".into(),
            iterations: 200,
            last: f(e0),
        });
    }

    // Sign-change scan on a log-spaced mesh over (a, 16 E_hi].
    let top = 16.0 * e_hi;
    let mut roots = Vec::new();
    let mut prev_e = a;
    let mut prev_f = f(a);
    for i in 1..=SCAN_POINTS {
        let e = a * (top / a).powf(i as f64 / SCAN_POINTS as f64);
        let fe = f(e);
        if (prev_f < 0.0) != (fe < 0.0) {
            roots.push(refine_root(&f, |x| f_prime(x, kp, grad_q_sq), prev_e, e, a));
        }
        prev_e = e;
        prev_f = fe;
    }
    let increasing = roots
        .iter()
        .filter(|&&r| f_prime(r, kp, grad_q_sq) > 0.0)
        .count();
    if increasing > 1 {
        return Err(FklError::Certificate(format!(
            "f has {increasing} roots on its increasing branch: {roots:?}"
        )));
    }
    let fp = f_prime(e0, kp, grad_q_sq);
    Ok(E0Solution {
        e0,
        uniqueness_certificate: fp > 0.0 && roots.len() == 1,
        roots,
        f_prime: fp,
        e_hi,
    })
}

/// Bisection on a sign-changing bracket to width `1e-14·scale`, then a few
/// safeguarded Newton steps.
fn refine_root(
    f: &impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    scale: f64,
) -> f64 {
    let f_lo_neg = f(lo) < 0.0;
    for _ in 0..400 {
        if hi - lo <= 1e-14 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == f_lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut e = 0.5 * (lo + hi);
    for _ in 0..8 {
        let d = fp(e);
        if d == 0.0 {
            break;
        }
        let next = e - f(e) / d;
        if !(next.is_finite() && next >= lo - (hi - lo) && next <= hi + (hi - lo)) {
            break;
        }
        if next == e {
            break;
        }
        e = next;
    }
    e
}

/// Samples the band-limited (trigonometric) interpolant of `q` at
/// `factor · x` for every point `x` of `target`; arguments outside the source
/// box evaluate to zero. When the dilated target points coincide with source
/// grid points the samples are copied exactly.
pub fn resample_dilated(q: &Field, target: Grid, factor: f64) -> Result<Field> {
    let src = *q.grid();
    if src.dim() != target.dim() {
        return Err(FklError::GridMismatch("resampling across dimensions".into()));
    }
    let n_src = src.points_per_axis();
    let n_tgt = target.points_per_axis();
    let ls = src.half_width();
    let args: Vec<f64> = target.axis().iter().map(|&x| factor * x).collect();

    // Exact case: every argument is a source grid point.
    let hs = src.spacing();
    let exact: Option<Vec<usize>> = args
        .iter()
        .map(|&xi| {
            let j = (xi + ls) / hs;
            let jr = j.round();
            ((j - jr).abs() <= 1e-9 && jr >= 0.0 && (jr as usize) < n_src).then_some(jr as usize)
        })
        .collect();

    let line_interp = |line: &[f64]| -> Vec<f64> {
        match &exact {
            Some(idx) => idx.iter().map(|&j| line[j]).collect(),
            None => fourier_sum_line(line, ls, &args),
        }
    };
    let data = match src.dim() {
        1 => line_interp(q.samples()),
        _ => {
            // Separable: interpolate along axis 1 for every source row, then along axis 0.
            let rows: Vec<Vec<f64>> = (0..n_src)
                .into_par_iter()
                .map(|i| line_interp(&q.samples()[i * n_src..(i + 1) * n_src]))
                .collect();
            let cols: Vec<Vec<f64>> = (0..n_tgt)
                .into_par_iter()
                .map(|j| {
                    let col: Vec<f64> = (0..n_src).map(|i| rows[i][j]).collect();
                    line_interp(&col)
                })
                .collect();
            let mut out = vec![0.0; n_tgt * n_tgt];
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    out[i * n_tgt + j] = *v;
                }
            }
            out
        }
    };
    Field::new(target, data)
}

/// Evaluates the trigonometric interpolant of one periodic line of samples on
/// `[-half_width, half_width)` at arbitrary points (zero outside the box).
/// The Nyquist mode is split symmetrically (cosine only).
fn fourier_sum_line(line: &[f64], half_width: f64, args: &[f64]) -> Vec<f64> {
    let n = line.len();
    let fft = TensorFft::new(1, n);
    let mut c: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut c);
    let dk = std::f64::consts::PI / half_width;
    args.par_iter()
        .map(|&xi| {
            if xi < -half_width || xi > half_width {
                return 0.0;
            }
            let t = xi + half_width;
            // Bins b and n-b are conjugate for real data; the phases are
            // generated by a rotation recurrence reseeded every 64 bins.
            let half = n / 2;
            let step = Complex64::from_polar(1.0, dk * t);
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = c[0].re;
            for (b, cb) in c.iter().enumerate().take(half).skip(1) {
                if b % 64 == 0 {
                    rot = Complex64::from_polar(1.0, dk * t * b as f64);
                } else {
                    rot *= step;
                }
                acc += 2.0 * (cb * rot).re;
            }
            acc += c[half].re * (dk * t * half as f64).cos();
            acc / n as f64
        })
        .collect()
}

/// Fraction of `∫Q²` whose dilated image falls outside the target box.
fn mass_outside(q: &Field, limit: f64) -> f64 {
    let g = q.grid();
    let total: f64 = q.samples().iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outside: f64 = q
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let [x, y] = g.point(*i);
            x.abs() > limit || y.abs() > limit
        })
        .map(|(_, v)| v * v)
        .sum();
    outside / total
}

/// Tolerated fraction of `∫Q²` lost outside the target box.
pub const TAIL_MASS_TOLERANCE: f64 = 1e-6;

/// `U(x) = m^{1/(p-1)} Q(m^{1/(2s)} E₀^{-1/(2s)} x)` on `target`; `None`
/// selects U's own grid, the source box dilated by `(E₀/m)^{1/(2s)}`, where
/// the interpolation is exact.
pub fn rescale_to_u(
    q: &Field,
    kp: &KirchhoffParams,
    e0: f64,
    target: Option<Grid>,
) -> Result<Field> {
    let lambda = kp.dilation(e0);
    let target = match target {
        Some(g) => g,
        None => q.grid().dilated(lambda)?,
    };
    let mu = 1.0 / lambda;
    let lost = mass_outside(q, mu * target.half_width());
    if lost > TAIL_MASS_TOLERANCE {
        return Err(FklError::InvalidInput(format!(
            "dilation pushes {lost:e} of the mass outside the target box"
        )));
    }
    Ok(resample_dilated(q, target, mu)?.scaled(kp.amplitude()))
}

/// `(L², L∞)` of `(a + b‖(-Δ)^{s/2}U‖²)(-Δ)^sU + mU - U₊^p`.
pub fn kirchhoff_residual(u: &Field, kp: &KirchhoffParams, exterior: Exterior) -> Result<(f64, f64)> {
    let op = FracOperator::new(*u.grid(), kp.base.s(), exterior)?;
    let r = kirchhoff_residual_field(&op, u, kp)?;
    Ok((r.l2_norm(), r.linf_norm()))
}

pub(crate) fn kirchhoff_residual_field(op: &FracOperator, u: &Field, kp: &KirchhoffParams) -> Result<Field> {
    let c = kp.a + kp.b * op.energy(u)?;
    let au = op.apply(u)?;
    let up = u.positive_power(kp.base.p());
    let mut r = au.zip_with(u, |x, y| c * x + kp.m * y)?.sub(&up)?;
    op.mask_in_place(r.samples_mut());
    Ok(r)
}

/// Outcome of the whole construction `Q → E₀ → U`.
#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub params: KirchhoffParams,
    pub exterior: Exterior,
    pub e0: f64,
    pub grad_q_sq: f64,
    pub u: Field,
    /// `‖(-Δ)^{s/2}U‖²₂` measured on U's grid.
    pub grad_u_sq: f64,
    pub kirchhoff_residual: (f64, f64),
    pub uniqueness_certificate: bool,
    pub roots: Vec<f64>,
    pub f_prime: f64,
    /// `|E₀ - (a + b‖(-Δ)^{s/2}U‖²)| / E₀`.
    pub self_consistency: f64,
    pub j_value_u: f64,
}

impl ScalingResult {
    /// `c = a + b‖(-Δ)^{s/2}U‖²₂`.
    pub fn kirchhoff_coefficient(&self) -> f64 {
        self.params.a() + self.params.b() * self.grad_u_sq
    }

    /// The operator on U's grid.
    pub fn operator(&self) -> Result<FracOperator> {
        FracOperator::new(*self.u.grid(), self.params.base().s(), self.exterior)
    }
}

/// Runs the Kirchhoff construction on a converged base ground state.
pub fn build_kirchhoff(gs: &GroundStateResult, kp: &KirchhoffParams) -> Result<ScalingResult> {
    if gs.params != kp.base {
        return Err(FklError::InvalidInput(
            "ground state computed for different (s, p, N)".into(),
        ));
    }
    let op_q = FracOperator::new(*gs.q.grid(), kp.base.s(), gs.exterior)?;
    let grad_q_sq = op_q.energy(&gs.q)?;
    let sol = solve_e0(kp, grad_q_sq)?;
    let u = rescale_to_u(&gs.q, kp, sol.e0, None)?;
    let op_u = FracOperator::new(*u.grid(), kp.base.s(), gs.exterior)?;
    let grad_u_sq = op_u.energy(&u)?;
    let r = kirchhoff_residual_field(&op_u, &u, kp)?;
    let self_consistency = (sol.e0 - (kp.a + kp.b * grad_u_sq)).abs() / sol.e0;
    let j_value_u = gns_quotient(&op_u, &u, kp.base.p())?;
    Ok(ScalingResult {
        params: *kp,
        exterior: gs.exterior,
        e0: sol.e0,
        grad_q_sq,
        u,
        grad_u_sq,
        kirchhoff_residual: (r.l2_norm(), r.linf_norm()),
        uniqueness_certificate: sol.uniqueness_certificate,
        roots: sol.roots,
        f_prime: sol.f_prime,
        self_consistency,
        j_value_u,
    })
}
