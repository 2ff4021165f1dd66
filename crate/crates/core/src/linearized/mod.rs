//! Linearized operators around a ground state and their low spectrum.
//!
//! * `T₊φ = c(-Δ)^sφ + m φ - pU^{p-1}φ`
//! * `L₊φ = T₊φ + 2b σ_φ (-Δ)^sU`, `σ_φ = ∫(-Δ)^{s/2}U (-Δ)^{s/2}φ`
//!
//! with `c = a + b‖(-Δ)^{s/2}U‖²`. For the base problem `c = m = 1`, `b = 0`.
//! Symmetry sectors are realized by parity projectors (and, in two
//! dimensions, the axis exchange), which commute with both operators.

pub mod lanczos;
pub mod tridiag;

use crate::error::{FklError, Result};
use crate::grid::{dot, Field, Grid};
use crate::ground_state::GroundStateResult;
use crate::scaling::{resample_dilated, ScalingResult};
use crate::spectral::{Exterior, FracOperator};

pub use lanczos::{EigenPairs, LanczosOptions};

/// Which linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Tplus,
    Lplus,
}

/// Matrix-free `T₊` or `L₊` around a stored profile.
#[derive(Debug, Clone)]
pub struct LinearizedOp {
    kind: OperatorKind,
    profile: Field,
    op: FracOperator,
    c: f64,
    a: f64,
    m_coef: f64,
    b: f64,
    p: f64,
    /// `(-Δ)^sU`.
    frac_u: Field,
    /// `pU₊^{p-1}`.
    weight: Field,
}

impl LinearizedOp {
    /// General constructor; `c = a + b‖(-Δ)^{s/2}U‖²` is computed here.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: OperatorKind,
        profile: Field,
        s: f64,
        exterior: Exterior,
        a: f64,
        b: f64,
        m_coef: f64,
        p: f64,
    ) -> Result<Self> {
        let op = FracOperator::new(*profile.grid(), s, exterior)?;
        let profile = op.masked(&profile);
        let c = a + b * op.energy(&profile)?;
        let frac_u = op.apply(&profile)?;
        let weight = profile.map(|v| if v > 0.0 { p * v.powf(p - 1.0) } else { 0.0 });
        Ok(Self {
            kind,
            profile,
            op,
            c,
            a,
            m_coef,
            b,
            p,
            frac_u,
            weight,
        })
    }

    /// `T₊ = (-Δ)^s + 1 - pQ^{p-1}` around a base ground state.
    pub fn base(gs: &GroundStateResult) -> Result<Self> {
        Self::new(
            OperatorKind::Tplus,
            gs.q.clone(),
            gs.params.s(),
            gs.exterior,
            1.0,
            0.0,
            1.0,
            gs.params.p(),
        )
    }

    /// `T₊` or `L₊` around the Kirchhoff ground state with `m_coef = m`.
    pub fn kirchhoff(sr: &ScalingResult, kind: OperatorKind) -> Result<Self> {
        let kp = &sr.params;
        Self::new(
            kind,
            sr.u.clone(),
            kp.base().s(),
            sr.exterior,
            kp.a(),
            kp.b(),
            kp.m(),
            kp.base().p(),
        )
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn with_kind(&self, kind: OperatorKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn profile(&self) -> &Field {
        &self.profile
    }

    pub fn operator(&self) -> &FracOperator {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        self.profile.grid()
    }

    /// `c = a + b‖(-Δ)^{s/2}U‖²`.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m_coef(&self) -> f64 {
        self.m_coef
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn s(&self) -> f64 {
        self.op.order()
    }

    /// `(-Δ)^sU`.
    pub fn frac_profile(&self) -> &Field {
        &self.frac_u
    }

    /// `σ_φ = ∫ φ (-Δ)^sU` (equal to the Dirichlet pairing by self-adjointness).
    pub fn sigma(&self, phi: &Field) -> Result<f64> {
        phi.dot(&self.frac_u)
    }

    /// Applies the operator.
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        let aphi = self.op.apply(phi)?;
        let mut out: Vec<f64> = aphi
            .samples()
            .iter()
            .zip(phi.samples())
            .zip(self.weight.samples())
            .map(|((a, x), w)| self.c * a + self.m_coef * x - w * x)
            .collect();
        if self.kind == OperatorKind::Lplus && self.b != 0.0 {
            let sigma = self.sigma(phi)?;
            let coef = 2.0 * self.b * sigma;
            for (o, f) in out.iter_mut().zip(self.frac_u.samples()) {
                *o += coef * f;
            }
        }
        self.op.mask_in_place(&mut out);
        Ok(Field::from_vec(*self.grid(), out))
    }

    /// `2b σ_φ (-Δ)^sU`, the rank-one part of `L₊`.
    pub fn rank_one_term(&self, phi: &Field) -> Result<Field> {
        Ok(self.frac_u.scaled(2.0 * self.b * self.sigma(phi)?))
    }

    /// Spectral scale `c (π/h)^{2s}` used to normalize kernel tolerances.
    pub fn spectral_scale(&self) -> f64 {
        self.c * (std::f64::consts::PI / self.grid().spacing()).powf(2.0 * self.s())
    }

    /// `1e-6 · c (π/h)^{2s}`.
    pub fn kernel_tol(&self) -> f64 {
        1e-6 * self.spectral_scale()
    }
}

pub fn apply_linearized(op: &LinearizedOp, phi: &Field) -> Result<Field> {
    op.apply(phi)
}

/// `σ_v = ∫(-Δ)^{s/2}U (-Δ)^{s/2}v`, computed in frequency space and as
/// `∫ v (-Δ)^sU`; the two must agree to `1e-9` relative to
/// `‖(-Δ)^{s/2}U‖ ‖(-Δ)^{s/2}v‖`.
pub fn sigma_v(op: &FracOperator, u: &Field, v: &Field) -> Result<f64> {
    let spectral = op.pairing(u, v)?;
    let physical = v.dot(&op.apply(u)?)?;
    let scale = (op.energy(u)? * op.energy(v)?).sqrt();
    if (spectral - physical).abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(FklError::Certificate(format!(
            "σ_v cross-check diverged: {spectral:e} vs {physical:e}"
        )));
    }
    Ok(spectral)
}

/// Taper of the moment weight: untouched on `|x| ≤ inner·L`, smoothly down
/// to 0 at `outer·L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTaper {
    pub inner: f64,
    pub outer: f64,
}

impl Default for MomentTaper {
    fn default() -> Self {
        Self {
            inner: 0.9,
            outer: 1.0,
        }
    }
}

impl MomentTaper {
    fn ramp(&self, x: f64, half_width: f64) -> (f64, f64) {
        let width = (self.outer - self.inner) * half_width;
        let t = (x.abs() - self.inner * half_width) / width;
        if t <= 0.0 {
            (0.0, 0.0)
        } else if t >= 1.0 {
            (1.0, 0.0)
        } else {
            (t, 1.0 / width)
        }
    }

    /// `w(x) = x cos²(πt/2)` with `t` the clamped position inside the ramp.
    pub fn weight(&self, x: f64, half_width: f64) -> f64 {
        let (t, _) = self.ramp(x, half_width);
        x * (0.5 * std::f64::consts::PI * t).cos().powi(2)
    }

    /// Exact `dw/dx`.
    pub fn weight_derivative(&self, x: f64, half_width: f64) -> f64 {
        let (t, dt) = self.ramp(x, half_width);
        let pi = std::f64::consts::PI;
        let c2 = (0.5 * pi * t).cos().powi(2);
        c2 - x.abs() * 0.5 * pi * (pi * t).sin() * dt
    }
}

/// `x·∇U` with the linearly growing weight tapered near the box edge:
/// `Σ_i w_i ∂_iU`, evaluated as `∂_i(w_i U) - w_i' U` so that only the
/// product — which vanishes at the edge — is differentiated spectrally.
pub fn moment_field(op: &FracOperator, u: &Field, taper: MomentTaper) -> Result<Field> {
    let g = *u.grid();
    let l = g.half_width();
    let mut out = Field::zeros(g);
    for axis in 0..g.dim() {
        let wu = Field::from_fn(g, |pt| taper.weight(pt[axis], l)).mul(u)?;
        let dw = Field::from_fn(g, |pt| taper.weight_derivative(pt[axis], l));
        let term = op.derivative(&wu, axis)?.sub(&dw.mul(u)?)?;
        out = out.add_scaled(1.0, &term)?;
    }
    Ok(op.masked(&out))
}

/// Both sides of `∫(x·∇U)(-Δ)^sU = ((2s-N)/2)‖(-Δ)^{s/2}U‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / |rhs|` (infinite when `rhs = 0`).
    pub relative_mismatch: f64,
    /// `‖U‖²_{H^s} = ‖(-Δ)^{s/2}U‖² + ‖U‖²`, the natural scale.
    pub natural_scale: f64,
    pub taper: MomentTaper,
}

/// Requires a profile that decays inside the box: the sup-norm over the
/// outer tenth of the box must be below `1e-3 ‖U‖∞`.
pub fn pohozaev_check(op: &FracOperator, u: &Field) -> Result<PohozaevReport> {
    pohozaev_check_with(op, u, MomentTaper::default())
}

pub fn pohozaev_check_with(op: &FracOperator, u: &Field, taper: MomentTaper) -> Result<PohozaevReport> {
    check_decaying(u)?;
    let psi = moment_field(op, u, taper)?;
    let au = op.apply(u)?;
    let lhs = psi.dot(&au)?;
    let n = u.grid().dim() as f64;
    let s = op.order();
    let energy = op.energy(u)?;
    let rhs = (2.0 * s - n) / 2.0 * energy;
    let relative_mismatch = if rhs == 0.0 {
        f64::INFINITY
    } else {
        (lhs - rhs).abs() / rhs.abs()
    };
    Ok(PohozaevReport {
        lhs,
        rhs,
        relative_mismatch,
        natural_scale: energy + u.l2_norm().powi(2),
        taper,
    })
}

/// Independent estimate of the Pohozaev left-hand side:
/// `½ d/dμ|_{μ=1} ‖(-Δ)^{s/2}U(μ·)‖²` by a centered difference over
/// resampled dilations (step `delta`).
pub fn pohozaev_dilation_oracle(op: &FracOperator, u: &Field, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(FklError::InvalidParameter(format!("dilation step must be in (0, 0.5), got {delta}")));
    }
    let g = *u.grid();
    let energy_at = |mu: f64| -> Result<f64> { op.energy(&resample_dilated(u, g, mu)?) };
    Ok(0.25 * (energy_at(1.0 + delta)? - energy_at(1.0 - delta)?) / delta)
}

fn check_decaying(u: &Field) -> Result<()> {
    let g = u.grid();
    let edge = 0.9 * g.half_width();
    let outer = u
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let [x, y] = g.point(*i);
            x.abs() > edge || y.abs() > edge
        })
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if outer > 1e-3 * u.linf_norm() {
        return Err(FklError::InvalidInput(format!(
            "profile does not decay inside the box (edge/peak = {:e})",
            outer / u.linf_norm()
        )));
    }
    Ok(())
}

/// Residuals of `T₊Q = -(p-1)Q^p` and `T₊R = -2sQ` with
/// `R = (2s/(p-1))Q + x·∇Q`, for the base normalization `c = m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TplusIdentities {
    /// `‖T₊Q + (p-1)Q^p‖₂`.
    pub res1: f64,
    /// `‖T₊R + 2sQ‖₂`.
    pub res2: f64,
    /// `res2` restricted to `|x| ≤ L/2`.
    pub res2_core: f64,
    pub q_norm: f64,
    pub taper: MomentTaper,
}

pub fn tplus_identities(gs: &GroundStateResult) -> Result<TplusIdentities> {
    tplus_identities_with(gs, MomentTaper::default())
}

pub fn tplus_identities_with(gs: &GroundStateResult, taper: MomentTaper) -> Result<TplusIdentities> {
    let t = LinearizedOp::base(gs)?;
    let q = t.profile().clone();
    let p = t.p();
    let s = t.s();
    let tq = t.apply(&q)?;
    let qp = q.positive_power(p);
    let res1 = tq.add_scaled(p - 1.0, &qp)?.l2_norm();
    let psi = moment_field(t.operator(), &q, taper)?;
    let r = q.scaled(2.0 * s / (p - 1.0)).add_scaled(1.0, &psi)?;
    let e = t.apply(&r)?.add_scaled(2.0 * s, &q)?;
    let g = q.grid();
    let half = g.half_width() / 2.0;
    let core: f64 = e
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let [x, y] = g.point(*i);
            x.abs() <= half && y.abs() <= half
        })
        .map(|(_, v)| v * v)
        .sum();
    Ok(TplusIdentities {
        res1,
        res2: e.l2_norm(),
        res2_core: (core * g.cell_volume()).sqrt(),
        q_norm: q.l2_norm(),
        taper,
    })
}

/// Symmetry sector of a spectrum computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// The whole space (union of all parity classes).
    Full,
    /// Even in every coordinate; for `N = 2` also symmetric under the axis
    /// exchange — the lattice analogue of the radial sector.
    Even,
    /// Odd in `x₁` (and even in `x₂` when `N = 2`): the class of `∂₁U`.
    Odd,
}

impl Sector {
    pub fn label(&self) -> &'static str {
        match self {
            Sector::Full => "full",
            Sector::Even => "even",
            Sector::Odd => "odd",
        }
    }
}

/// A single symmetry class: parities per axis and an optional swap parity.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SymClass {
    parity: [f64; 2],
    swap: Option<f64>,
}

impl SymClass {
    fn project(&self, grid: &Grid, op: &FracOperator, v: &mut Vec<f64>) {
        let mut f = Field::from_vec(*grid, std::mem::take(v));
        for axis in 0..grid.dim() {
            let r = f.reflected(axis);
            let sgn = self.parity[axis];
            f = f.zip_with(&r, |a, b| 0.5 * (a + sgn * b)).expect("same grid");
        }
        if let Some(sgn) = self.swap {
            let t = f.transposed();
            f = f.zip_with(&t, |a, b| 0.5 * (a + sgn * b)).expect("same grid");
        }
        op.mask_in_place(f.samples_mut());
        *v = f.into_samples();
    }
}

fn classes(sector: Sector, dim: usize) -> Vec<SymClass> {
    let c = |p0: f64, p1: f64, swap: Option<f64>| SymClass {
        parity: [p0, p1],
        swap,
    };
    match (sector, dim) {
        (Sector::Full, 1) => vec![c(1.0, 1.0, None), c(-1.0, 1.0, None)],
        (Sector::Even, 1) => vec![c(1.0, 1.0, None)],
        (Sector::Odd, 1) => vec![c(-1.0, 1.0, None)],
        (Sector::Full, _) => vec![
            c(1.0, 1.0, None),
            c(-1.0, 1.0, None),
            c(1.0, -1.0, None),
            c(-1.0, -1.0, None),
        ],
        (Sector::Even, _) => vec![c(1.0, 1.0, Some(1.0))],
        (Sector::Odd, _) => vec![c(-1.0, 1.0, None)],
    }
}

/// Low end of the spectrum of a linearized operator in a sector.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub sector: Sector,
    pub eigenvalues: Vec<f64>,
    /// L²-normalized.
    pub eigenfields: Vec<Field>,
    /// `‖(A - λ)v‖₂ / ‖v‖₂` per pair.
    pub residuals: Vec<f64>,
    pub kernel_dim: usize,
    pub kernel_tol: f64,
    /// Distance from 0 to the nearest eigenvalue certified nonzero
    /// (`|λ| - residual > kernel_tol`); infinite if none was computed.
    pub gap: f64,
    pub iterations: usize,
}

impl SpectrumReport {
    /// Number of negative eigenvalues among the computed ones that are below
    /// `-kernel_tol`.
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < -self.kernel_tol).count()
    }
}

/// Options of [`spectrum`].
#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub lanczos: LanczosOptions,
    /// Use a dense decomposition instead of Lanczos (small grids only).
    pub dense: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            lanczos: LanczosOptions::default(),
            dense: false,
        }
    }
}

/// Largest grid (points per axis, `N = 1`) accepted by the dense oracle.
pub const DENSE_MAX_POINTS: usize = 512;

/// The `k ≤ 40` lowest eigenpairs of `op` restricted to `sector`.
pub fn spectrum(
    op: &LinearizedOp,
    sector: Sector,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    if k == 0 || k > 40 {
        return Err(FklError::InvalidParameter(format!("k must be in 1..=40, got {k}")));
    }
    let grid = *op.grid();
    if opts.dense && (grid.dim() != 1 || grid.points_per_axis() > DENSE_MAX_POINTS) {
        return Err(FklError::InvalidInput(format!(
            "dense oracle limited to N = 1, n <= {DENSE_MAX_POINTS}"
        )));
    }
    let frac = op.operator();
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        Ok(op.apply(&Field::from_vec(grid, v.to_vec()))?.into_samples())
    };
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = 0;
    for class in classes(sector, grid.dim()) {
        let pairs = if opts.dense {
            let basis = sector_basis(&grid, frac, &class);
            lanczos::dense_lowest(apply, &basis, k)?
        } else {
            let start = start_vector(grid.total_points());
            lanczos::lanczos_lowest(
                |v| {
                    let mut w = apply(v)?;
                    class.project(&grid, frac, &mut w);
                    Ok(w)
                },
                |v| class.project(&grid, frac, v),
                &start,
                k,
                &opts.lanczos,
            )?
        };
        iterations += pairs.iterations;
        values.extend(pairs.values);
        vectors.extend(pairs.vectors);
        residuals.extend(pairs.residuals);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
    order.truncate(k);

    let scale = 1.0 / grid.cell_volume().sqrt();
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenfields = Vec::with_capacity(order.len());
    let mut rel_res = Vec::with_capacity(order.len());
    for &i in &order {
        let v: Vec<f64> = vectors[i].iter().map(|x| x * scale).collect();
        let f = Field::from_vec(grid, v);
        let r = op.apply(&f)?.add_scaled(-values[i], &f)?.l2_norm() / f.l2_norm();
        rel_res.push(r);
        eigenfields.push(f);
    }
    let _ = residuals;
    let kernel_tol = op.kernel_tol();
    let kernel_dim = eigenvalues.iter().filter(|l| l.abs() < kernel_tol).count();
    let gap = eigenvalues
        .iter()
        .zip(&rel_res)
        .filter(|(l, r)| l.abs() - **r > kernel_tol)
        .map(|(l, _)| l.abs())
        .fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        sector,
        eigenvalues,
        eigenfields,
        residuals: rel_res,
        kernel_dim,
        kernel_tol,
        gap,
        iterations,
    })
}

/// Deterministic, non-symmetric start vector (hash-based pseudo-random).
fn start_vector(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let h = (i as u64)
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .rotate_left(17)
                .wrapping_mul(0xBF58_476D_1CE4_E5B9);
            (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Orthonormal basis of a symmetry class on the active samples.
fn sector_basis(grid: &Grid, op: &FracOperator, class: &SymClass) -> Vec<Vec<f64>> {
    let n = grid.total_points();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] || !op.is_active(i) {
            continue;
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        class.project(grid, op, &mut e);
        for (j, v) in e.iter().enumerate() {
            if *v != 0.0 {
                seen[j] = true;
            }
        }
        let nrm = dot(&e, &e).sqrt();
        if nrm > 1e-12 {
            e.iter_mut().for_each(|x| *x /= nrm);
            basis.push(e);
        }
    }
    basis
}

/// `min(‖v - d‖, ‖v + d‖)` with `d = ∂_axis U / ‖∂_axis U‖` — distance of a
/// unit field from the normalized translation mode.
pub fn distance_to_translation_mode(op: &LinearizedOp, v: &Field, axis: usize) -> Result<f64> {
    let d = op.operator().derivative(op.profile(), axis)?;
    let d = d.scaled(1.0 / d.l2_norm());
    let vn = v.scaled(1.0 / v.l2_norm());
    Ok(vn.sub(&d)?.l2_norm().min(vn.add_scaled(1.0, &d)?.l2_norm()))
}

/// The smallest even-sector eigenvalue of `L₊` (the coercivity constant
/// `ρ₀` of the symmetric sector) together with the report it came from.
pub fn even_sector_floor(op: &LinearizedOp, opts: &SpectrumOptions) -> Result<(f64, SpectrumReport)> {
    let report = spectrum(op, Sector::Even, 2, opts)?;
    let rho0 = report.eigenvalues.iter().copied().find(|l| *l > 0.0).unwrap_or(f64::NAN);
    Ok((rho0, report))
}

/// Numerical replay of the even-sector kernel argument: if `L₊v = 0` then
/// `T₊v = -2bσ_v(-Δ)^sU`, and testing against the dilation generator forces
/// `σ_v(1 + (c-a)(2s-N)/(2sc)) = 0`; the coefficient is never `1`, hence
/// `σ_v = 0` and `v ∈ ker T₊`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelArgumentReplay {
    /// `-(c-a)(2s-N)/(2sc)`.
    pub coefficient: f64,
    /// `|σ_v| / (‖U‖‖v‖)` for every computed kernel eigenfield.
    pub kernel_sigmas: Vec<f64>,
    /// Eigenvalue of smallest modulus in the even sector, with its relative
    /// `σ`.
    pub even_min_abs: f64,
    pub even_sigma: f64,
    /// Coefficient differs from one and every kernel `σ_v` is below `1e-8`.
    pub holds: bool,
}

pub fn kernel_argument_replay(
    op: &LinearizedOp,
    full: &SpectrumReport,
    even: &SpectrumReport,
) -> Result<KernelArgumentReplay> {
    let n = op.grid().dim() as f64;
    let s = op.s();
    let c = op.c();
    let coefficient = -(c - op.a()) * (2.0 * s - n) / (2.0 * s * c);
    let u_norm = op.profile().l2_norm();
    let rel_sigma = |v: &Field| -> Result<f64> {
        Ok(sigma_v(op.operator(), op.profile(), v)?.abs() / (u_norm * v.l2_norm()))
    };
    let kernel_sigmas = full
        .eigenvalues
        .iter()
        .zip(&full.eigenfields)
        .filter(|(l, _)| l.abs() < full.kernel_tol)
        .map(|(_, v)| rel_sigma(v))
        .collect::<Result<Vec<_>>>()?;
    let (idx, even_min_abs) = even
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| (i, l.abs()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
        .ok_or_else(|| FklError::InvalidInput("empty even-sector report".into()))?;
    let even_sigma = rel_sigma(&even.eigenfields[idx])?;
    let holds = (coefficient - 1.0).abs() > 1e-12 && kernel_sigmas.iter().all(|v| *v <= 1e-8);
    Ok(KernelArgumentReplay {
        coefficient,
        kernel_sigmas,
        even_min_abs,
        even_sigma,
        holds,
    })
}
