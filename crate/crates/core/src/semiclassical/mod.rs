//! Lyapunov–Schmidt reduction for the singularly perturbed Kirchhoff problem
//!
//! ```text
//! (ε^{2s}a + ε^{4s-N} b ∫|(-Δ)^{s/2}u|²)(-Δ)^s u + V(x) u = u^p.
//! ```
//!
//! Everything is computed in the stretched variable `z = (x-y)/ε` on the grid
//! of the Kirchhoff ground state `U` (built with `m = V(x₀)`). Writing
//! `u(x) = w((x-y)/ε)` and `W(z) = V(y+εz)`,
//!
//! ```text
//! I_ε(u)      = ε^N F(w),
//! F(w)        = ½∫(a|(-Δ)^{s/2}w|² + W w²) + (b/4)(∫|(-Δ)^{s/2}w|²)² - ∫w₊^{p+1}/(p+1),
//! ⟨u, v⟩_ε    = ε^N ∫(a (-Δ)^{s/2}w (-Δ)^{s/2}v + W w v),
//! ```
//!
//! so the `ε^{4s-N}` bookkeeping is absorbed once and for all. Linear
//! functionals and operators are represented against the plain `L²(dz)`
//! pairing on the grid, carrying their `ε^N` factor explicitly.

pub mod potential;
mod corrector;
mod reduced;

pub use corrector::{full_newton, solve_corrector, CorrectorOptions, CorrectorResult, NewtonResult};
pub use potential::{PotentialKind, PotentialSpec};
pub use reduced::{
    concentration_sweep, expansion_constants, expansion_residual, fit_expansion, j_samples, minimize_j,
    reduced_functional_j, sobolev_scaling_check, ExpansionConstants, ExpansionFit, MinimizeOptions,
    loglog_slope, Minimizer, SobolevReport, SweepOptions, SweepRow, SweepTable, OFFSET_FLOOR,
    sweep_row,
};

use crate::error::{FklError, Result};
use crate::grid::{Field, Grid};
use crate::linearized::{LinearizedOp, OperatorKind};
use crate::scaling::{KirchhoffParams, ScalingResult};
use crate::spectral::FracOperator;

/// Minimum number of lab-frame cells across the core width `ε`.
pub const MIN_CELLS_PER_CORE: f64 = 32.0;

/// Default lab-frame spacing used by the resolution guard.
pub const DEFAULT_LAB_DX: f64 = 1.0 / 2048.0;

/// ε-independent data: the profile `U` on its grid and the potential.
#[derive(Debug, Clone)]
pub struct Semiclassical {
    kp: KirchhoffParams,
    potential: PotentialSpec,
    u: Field,
    op: FracOperator,
    /// `(-Δ)^sU`.
    frac_u: Field,
    /// `‖(-Δ)^{s/2}U‖²`.
    grad_u_sq: f64,
    /// `∂_iU`.
    du: Vec<Field>,
    /// `(-Δ)^s ∂_iU`.
    frac_du: Vec<Field>,
    lab_dx: f64,
}

impl Semiclassical {
    /// Requires `U` built with `m = V(x₀)`.
    pub fn new(sr: &ScalingResult, potential: PotentialSpec, lab_dx: f64) -> Result<Self> {
        let kp = sr.params;
        if potential.dim() != kp.base().dim() {
            return Err(FklError::GridMismatch(format!(
                "potential is {}-dimensional, ground state {}-dimensional",
                potential.dim(),
                kp.base().dim()
            )));
        }
        let v0 = potential.minimum_value();
        if (kp.m() - v0).abs() > 1e-12 * v0 {
            return Err(FklError::InvalidInput(format!(
                "ground state built with m = {} but V(x0) = {v0}",
                kp.m()
            )));
        }
        if !(lab_dx > 0.0 && lab_dx.is_finite()) {
            return Err(FklError::InvalidParameter(format!("lab_dx must be positive, got {lab_dx}")));
        }
        let op = sr.operator()?;
        let u = op.masked(&sr.u);
        let frac_u = op.apply(&u)?;
        let grad_u_sq = op.energy(&u)?;
        let du: Vec<Field> = (0..u.grid().dim())
            .map(|i| op.derivative(&u, i))
            .collect::<Result<_>>()?;
        let frac_du = du.iter().map(|d| op.apply(d)).collect::<Result<_>>()?;
        Ok(Self {
            kp,
            potential,
            u,
            op,
            frac_u,
            grad_u_sq,
            du,
            frac_du,
            lab_dx,
        })
    }

    pub fn params(&self) -> &KirchhoffParams {
        &self.kp
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn profile(&self) -> &Field {
        &self.u
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn operator(&self) -> &FracOperator {
        &self.op
    }

    pub fn lab_dx(&self) -> f64 {
        self.lab_dx
    }

    /// `c = a + b‖(-Δ)^{s/2}U‖²`.
    pub fn c(&self) -> f64 {
        self.kp.a() + self.kp.b() * self.grad_u_sq
    }

    /// Smallest accepted `ε`.
    pub fn min_eps(&self) -> f64 {
        MIN_CELLS_PER_CORE * self.lab_dx
    }

    /// Whether `ε` passes the resolution guard.
    pub fn resolves(&self, eps: f64) -> bool {
        eps > 0.0 && eps.is_finite() && eps / self.lab_dx >= MIN_CELLS_PER_CORE * (1.0 - 1e-12)
    }

    /// The frame `(ε, y)`; rejects `ε` below the resolution guard.
    pub fn frame(&self, eps: f64, y: [f64; 2]) -> Result<Frame<'_>> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(FklError::InvalidParameter(format!("ε must be positive, got {eps}")));
        }
        if !self.resolves(eps) {
            return Err(FklError::InvalidParameter(format!(
                "ε = {eps} spans {:.1} lab cells of width {}; at least {MIN_CELLS_PER_CORE} required",
                eps / self.lab_dx,
                self.lab_dx
            )));
        }
        let g = *self.grid();
        let w = Field::from_fn(g, |z| self.potential.eval([y[0] + eps * z[0], y[1] + eps * z[1]]));
        self.frame_with(eps, y, w)
    }

    /// The frame `(ε, y)` with `V` replaced by the constant `V(x₀)`: the
    /// comparison case in which `𝓛_ε` reduces to `ε^N L₊`.
    pub fn flat_frame(&self, eps: f64, y: [f64; 2]) -> Result<Frame<'_>> {
        if !self.resolves(eps) {
            return Err(FklError::InvalidParameter(format!("ε = {eps} below the resolution guard")));
        }
        self.frame_with(eps, y, Field::constant(*self.grid(), self.potential.minimum_value()))
    }

    fn frame_with(&self, eps: f64, y: [f64; 2], w: Field) -> Result<Frame<'_>> {
        let w = self.op.masked(&w);
        let a = self.kp.a();
        let z_fields: Vec<Field> = self
            .du
            .iter()
            .zip(&self.frac_du)
            .map(|(d, ad)| ad.scaled(a).add_scaled(1.0, &w.mul(d)?))
            .collect::<Result<_>>()?;
        let n = z_fields.len();
        let mut zz = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut zd = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                zz[(i, j)] = z_fields[i].dot(&z_fields[j])?;
                zd[(i, j)] = z_fields[i].dot(&self.du[j])?;
            }
        }
        let zz_inv = zz
            .clone()
            .try_inverse()
            .ok_or_else(|| FklError::Certificate("constraint Gram matrix is singular".into()))?;
        let zd_inv = zd
            .clone()
            .try_inverse()
            .ok_or_else(|| FklError::Certificate("constraint Gram matrix is singular".into()))?;
        let weight = self.u.map(|v| if v > 0.0 { self.kp.base().p() * v.powf(self.kp.base().p() - 1.0) } else { 0.0 });
        Ok(Frame {
            setup: self,
            eps,
            y,
            w,
            z_fields,
            zz_inv,
            zd_inv,
            weight,
        })
    }

    /// `L₊` of the ground state with `m_coef = V(x₀)`, for comparison.
    pub fn lplus(&self) -> Result<LinearizedOp> {
        LinearizedOp::new(
            OperatorKind::Lplus,
            self.u.clone(),
            self.kp.base().s(),
            self.op.exterior(),
            self.kp.a(),
            self.kp.b(),
            self.kp.m(),
            self.kp.base().p(),
        )
    }
}

/// The problem at a fixed `(ε, y)`: potential samples `W(z) = V(y+εz)` and
/// the constraint data of `E_{ε,y}`.
#[derive(Debug, Clone)]
pub struct Frame<'a> {
    setup: &'a Semiclassical,
    eps: f64,
    y: [f64; 2],
    w: Field,
    /// `Z_i = a(-Δ)^s∂_iU + W∂_iU`: `∫Z_iφ = 0` ⇔ `⟨∂_{y_i}U_{ε,y}, φ⟩_ε = 0`.
    z_fields: Vec<Field>,
    zz_inv: nalgebra::DMatrix<f64>,
    zd_inv: nalgebra::DMatrix<f64>,
    /// `pU^{p-1}`.
    weight: Field,
}

/// Both evaluations of `l_ε(φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LEpsReport {
    /// `ε^N ∫(W - V(x₀))Uφ`.
    pub value: f64,
    /// `⟨I_ε'(U_{ε,y}), φ⟩` from the full gradient.
    pub definitional: f64,
    /// `|value - definitional| / |value|`.
    pub relative_gap: f64,
    /// `ε^N (c‖(-Δ)^sU‖ + m‖U‖ + ‖U^p‖)‖φ‖`: size of the cancelling terms.
    pub term_scale: f64,
}

impl<'a> Frame<'a> {
    pub fn setup(&self) -> &'a Semiclassical {
        self.setup
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn y(&self) -> [f64; 2] {
        self.y
    }

    /// `W(z) = V(y+εz)`.
    pub fn potential_field(&self) -> &Field {
        &self.w
    }

    pub fn grid(&self) -> &Grid {
        self.setup.grid()
    }

    /// `ε^N`.
    pub fn volume_factor(&self) -> f64 {
        self.eps.powi(self.grid().dim() as i32)
    }

    fn op(&self) -> &FracOperator {
        &self.setup.op
    }

    fn check(&self, f: &Field) -> Result<()> {
        self.grid().check_same(f.grid(), "semiclassical field")
    }

    /// `F(w)`: the energy in stretched variables.
    pub fn z_energy(&self, w: &Field) -> Result<f64> {
        self.check(w)?;
        let kp = &self.setup.kp;
        let p = kp.base().p();
        let g = self.op().energy(w)?;
        let pot = w.mul(w)?.dot(&self.w)?;
        let nonlin = w.positive_power(p + 1.0).integral() / (p + 1.0);
        Ok(0.5 * (kp.a() * g + pot) + 0.25 * kp.b() * g * g - nonlin)
    }

    /// `I_ε(u)` for `u(x) = w((x-y)/ε)`.
    pub fn energy(&self, w: &Field) -> Result<f64> {
        Ok(self.volume_factor() * self.z_energy(w)?)
    }

    /// `F'(w) = (a + b‖(-Δ)^{s/2}w‖²)(-Δ)^s w + W w - w₊^p`: the `L²(dz)`
    /// gradient of `F`, and the residual of the equation in stretched form.
    pub fn z_gradient(&self, w: &Field) -> Result<Field> {
        self.check(w)?;
        let kp = &self.setup.kp;
        let aw = self.op().apply(w)?;
        let coef = kp.a() + kp.b() * aw.dot(w)?;
        let out = aw
            .scaled(coef)
            .add_scaled(1.0, &self.w.mul(w)?)?
            .sub(&w.positive_power(kp.base().p()))?;
        Ok(self.op().masked(&out))
    }

    /// Gâteaux derivative `⟨I_ε'(w), ψ⟩`.
    pub fn gateaux(&self, w: &Field, psi: &Field) -> Result<f64> {
        Ok(self.volume_factor() * self.z_gradient(w)?.dot(psi)?)
    }

    /// `l_ε(φ) = ε^N ∫(W - V(x₀))Uφ`, cross-checked against the gradient of
    /// `I_ε` at `U_{ε,y}`.
    pub fn l_eps(&self, phi: &Field) -> Result<LEpsReport> {
        self.check(phi)?;
        let en = self.volume_factor();
        let s = self.setup;
        let m = s.kp.m();
        let value = en * self.w.map(|v| v - m).mul(&s.u)?.dot(phi)?;
        let definitional = en * self.z_gradient(&s.u)?.dot(phi)?;
        let term_scale = en
            * (s.c() * s.frac_u.l2_norm() + m * s.u.l2_norm() + s.u.positive_power(s.kp.base().p()).l2_norm())
            * phi.l2_norm();
        let diff = (value - definitional).abs();
        if diff > 1e-8 * value.abs() + 1e-11 * term_scale {
            return Err(FklError::Certificate(format!(
                "l_ε cross-check failed: {value:e} vs {definitional:e}"
            )));
        }
        Ok(LEpsReport {
            value,
            definitional,
            relative_gap: if value == 0.0 { diff } else { diff / value.abs() },
            term_scale,
        })
    }

    /// `l_ε` as an `L²(dz)` field (without the `ε^N` factor): `(W - m)U`.
    pub fn l_field(&self) -> Result<Field> {
        let m = self.setup.kp.m();
        self.w.map(|v| v - m).mul(&self.setup.u)
    }

    /// `L_z φ = c(-Δ)^sφ + Wφ - pU^{p-1}φ + 2bσ_φ(-Δ)^sU` (no `ε^N`).
    pub fn apply_l_z(&self, phi: &Field) -> Result<Field> {
        self.check(phi)?;
        let s = self.setup;
        let aphi = self.op().apply(phi)?;
        let sigma = s.frac_u.dot(phi)?;
        let out: Vec<f64> = aphi
            .samples()
            .iter()
            .zip(phi.samples())
            .zip(self.w.samples())
            .zip(self.weight.samples())
            .zip(s.frac_u.samples())
            .map(|((((a, x), w), pw), fu)| {
                s.c() * a + w * x - pw * x + 2.0 * s.kp.b() * sigma * fu
            })
            .collect();
        Ok(self.op().masked(&Field::new(*self.grid(), out)?))
    }

    /// Representative of `⟨𝓛_εφ, ψ⟩` against `∫ · dz`: `ε^N L_z φ`.
    pub fn apply_l_eps(&self, phi: &Field) -> Result<Field> {
        Ok(self.apply_l_z(phi)?.scaled(self.volume_factor()))
    }

    /// `R_ε(φ) = I_ε(U+φ) - I_ε(U) - l_ε(φ) - ½⟨𝓛_εφ, φ⟩`.
    pub fn remainder(&self, phi: &Field) -> Result<f64> {
        let u = &self.setup.u;
        let en = self.volume_factor();
        let full = self.z_energy(&u.add_scaled(1.0, phi)?)?;
        let base = self.z_energy(u)?;
        let lin = self.l_field()?.dot(phi)?;
        let quad = 0.5 * self.apply_l_z(phi)?.dot(phi)?;
        Ok(en * (full - base - lin - quad))
    }

    /// `R_ε'(φ)` as an `L²(dz)` field without `ε^N`, from the explicit
    /// Kirchhoff and power-nonlinearity pieces:
    /// `b(2σ_φ + g_φ)(-Δ)^sφ + b g_φ(-Δ)^sU - [(U+φ)₊^p - U^p - pU^{p-1}φ]`
    /// with `g_φ = ‖(-Δ)^{s/2}φ‖²`.
    pub fn remainder_gradient_z(&self, phi: &Field) -> Result<Field> {
        self.check(phi)?;
        let s = self.setup;
        let b = s.kp.b();
        let p = s.kp.base().p();
        let aphi = self.op().apply(phi)?;
        let g = aphi.dot(phi)?;
        let sigma = s.frac_u.dot(phi)?;
        let kirchhoff = aphi.scaled(b * (2.0 * sigma + g)).add_scaled(b * g, &s.frac_u)?;
        let upp = s.u.add_scaled(1.0, phi)?.positive_power(p);
        let up = s.u.positive_power(p);
        let power = upp.sub(&up)?.sub(&self.weight.mul(phi)?)?;
        Ok(self.op().masked(&kirchhoff.sub(&power)?))
    }

    /// `R_ε'(φ)` with its `ε^N` factor.
    pub fn remainder_gradient(&self, phi: &Field) -> Result<Field> {
        Ok(self.remainder_gradient_z(phi)?.scaled(self.volume_factor()))
    }

    /// `⟨u, v⟩_ε` for stretched fields.
    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        Ok(self.volume_factor() * self.inner_z(u, v)?)
    }

    fn inner_z(&self, u: &Field, v: &Field) -> Result<f64> {
        Ok(self.setup.kp.a() * self.op().pairing(u, v)? + self.w.mul(u)?.dot(v)?)
    }

    /// `‖u‖_ε`.
    pub fn norm(&self, u: &Field) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    /// The translation fields `∂U_{ε,y}/∂y^i = -ε^{-1}∂_iU` (stretched).
    pub fn translation_modes(&self) -> Vec<Field> {
        self.setup.du.iter().map(|d| d.scaled(-1.0 / self.eps)).collect()
    }

    /// `max_i |⟨∂_{y_i}U_{ε,y}, φ⟩_ε| / (‖∂_{y_i}U_{ε,y}‖_ε ‖φ‖_ε)`.
    pub fn orthogonality_residual(&self, phi: &Field) -> Result<f64> {
        let pn = self.norm(phi)?;
        if pn == 0.0 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for d in self.translation_modes() {
            let r = self.inner(&d, phi)?.abs() / (self.norm(&d)? * pn);
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// `⟨·,·⟩_ε`-orthogonal projection onto `E_{ε,y}`.
    pub fn project_to_e(&self, phi: &Field) -> Result<Field> {
        self.check(phi)?;
        let n = self.z_fields.len();
        let rhs = nalgebra::DVector::from_iterator(
            n,
            self.z_fields.iter().map(|z| z.dot(phi)).collect::<Result<Vec<_>>>()?,
        );
        // ∫Z_i(φ - Σ_j c_j ∂_jU) = 0 ⇔ (Z·∂U) c = Z·φ.
        let coef = &self.zd_inv * rhs;
        let mut out = phi.clone();
        for (j, d) in self.setup.du.iter().enumerate() {
            out = out.add_scaled(-coef[j], d)?;
        }
        Ok(out)
    }

    /// `L²(dz)`-orthogonal projection onto `E_{ε,y} = span{Z_i}^⊥`.
    pub(crate) fn project_l2(&self, v: &mut Vec<f64>) {
        let f = Field::new(*self.grid(), std::mem::take(v)).expect("grid-sized vector");
        let n = self.z_fields.len();
        let rhs = nalgebra::DVector::from_iterator(
            n,
            self.z_fields.iter().map(|z| z.dot(&f).expect("same grid")),
        );
        let coef = &self.zz_inv * rhs;
        let mut out = f;
        for (j, z) in self.z_fields.iter().enumerate() {
            out = out.add_scaled(-coef[j], z).expect("same grid");
        }
        *v = out.into_samples();
    }

    /// Lagrange multipliers `c` of `F'(w) ≈ Σ c_i Z_i` (least squares).
    pub fn multipliers(&self, w: &Field) -> Result<Vec<f64>> {
        let g = self.z_gradient(w)?;
        let n = self.z_fields.len();
        let rhs = nalgebra::DVector::from_iterator(
            n,
            self.z_fields.iter().map(|z| z.dot(&g)).collect::<Result<Vec<_>>>()?,
        );
        Ok((&self.zz_inv * rhs).iter().copied().collect())
    }

    /// Preconditioner `(c(-Δ)^s + V(x₀))^{-1}` on the periodic box.
    pub(crate) fn precondition(&self, v: &[f64]) -> Result<Vec<f64>> {
        let f = Field::new(*self.grid(), v.to_vec())?;
        Ok(self
            .op()
            .shifted_inverse_approx(self.setup.c(), self.setup.kp.m(), &f)?
            .into_samples())
    }
}
