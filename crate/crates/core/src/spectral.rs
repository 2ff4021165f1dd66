//! Fourier-multiplier fractional Laplacian, fractional seminorms, the
//! Gagliardo–Nirenberg quotient and the ε-weighted inner product.
//!
//! Two realizations of the whole-space operator on the box are provided:
//!
//! * [`Exterior::Periodic`] — the plain multiplier `|k|^{2s}` on the torus
//!   `[-L, L)^N`. Exact on trigonometric polynomials, but a slowly decaying
//!   profile interacts with its periodic images, which costs `O(L^{-2})` for
//!   the Benjamin–Ono profile.
//! * [`Exterior::ZeroPadded`] — the field is extended by zero to a box
//!   `factor` times larger with the same spacing, the multiplier is applied
//!   there and the result is restricted back. The edge sample `x = -L` is
//!   held at zero so the active box `[-L+h, L-h]` is symmetric. This is the
//!   spectral discretization of the whole-space operator acting on functions
//!   that vanish outside the box; images are pushed `factor` times further
//!   away. The operator stays symmetric positive semidefinite and all
//!   seminorms are evaluated on the padded box, so Plancherel identities hold
//!   to rounding.

use num_complex::Complex64;

use crate::error::{FklError, Result};
use crate::fft::{signed_bin, TensorFft};
use crate::grid::{Field, Grid};
use crate::krylov;

/// How the box is closed off from the rest of `ℝ^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exterior {
    /// Periodic continuation (the torus).
    Periodic,
    /// Zero continuation onto a box `factor` times larger (power of two ≥ 2).
    ZeroPadded(usize),
}

impl Exterior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Exterior::Periodic => Ok(()),
            Exterior::ZeroPadded(f) if f >= 2 && f.is_power_of_two() => Ok(()),
            Exterior::ZeroPadded(f) => Err(FklError::InvalidParameter(format!(
                "padding factor must be a power of two >= 2, got {f}"
            ))),
        }
    }

    fn factor(&self) -> usize {
        match *self {
            Exterior::Periodic => 1,
            Exterior::ZeroPadded(f) => f,
        }
    }

    /// Short label used in manifests (`periodic` or `zero-padded-<f>`).
    pub fn label(&self) -> String {
        match *self {
            Exterior::Periodic => "periodic".into(),
            Exterior::ZeroPadded(f) => format!("zero-padded-{f}"),
        }
    }

    /// Inverse of [`Exterior::label`].
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let e = if text == "periodic" {
            Exterior::Periodic
        } else if let Some(f) = text.strip_prefix("zero-padded-") {
            Exterior::ZeroPadded(f.parse().map_err(|_| {
                FklError::InvalidParameter(format!("bad padding factor in '{text}'"))
            })?)
        } else {
            return Err(FklError::InvalidParameter(format!(
                "unknown exterior '{text}' (expected periodic or zero-padded-<factor>)"
            )));
        };
        e.validate()?;
        Ok(e)
    }
}

/// The fractional Laplacian `(-Δ)^s` on a grid, realized spectrally.
#[derive(Debug, Clone)]
pub struct FracOperator {
    grid: Grid,
    s: f64,
    exterior: Exterior,
    big_n: usize,
    offset: usize,
    big_fft: TensorFft,
    small_fft: TensorFft,
    /// `|k|` on the (possibly padded) transform grid.
    big_kmag: Vec<f64>,
    /// `|k|^{2s}` on the transform grid.
    multiplier: Vec<f64>,
    /// Signed wavenumbers of the unpadded periodic grid, per axis index.
    small_k: Vec<f64>,
}

impl FracOperator {
    /// Builds the operator. `s` may be anywhere in `(0, 1]`; the theory range
    /// `N/4 < s < 1` is enforced by the model parameter types instead.
    pub fn new(grid: Grid, s: f64, exterior: Exterior) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(FklError::InvalidParameter(format!(
                "fractional order must lie in (0, 1], got {s}"
            )));
        }
        exterior.validate()?;
        let n = grid.points_per_axis();
        let big_n = n * exterior.factor();
        let offset = (big_n - n) / 2;
        let h = grid.spacing();
        let dk_big = 2.0 * std::f64::consts::PI / (big_n as f64 * h);
        let axis_k: Vec<f64> = (0..big_n)
            .map(|j| dk_big * signed_bin(j, big_n) as f64)
            .collect();
        let big_kmag = tensor_magnitude(&axis_k, grid.dim());
        let multiplier = big_kmag.iter().map(|&k| k.powf(2.0 * s)).collect();
        let dk_small = std::f64::consts::PI / grid.half_width();
        let small_k = (0..n).map(|j| dk_small * signed_bin(j, n) as f64).collect();
        Ok(Self {
            grid,
            s,
            exterior,
            big_n,
            offset,
            big_fft: TensorFft::new(grid.dim(), big_n),
            small_fft: TensorFft::new(grid.dim(), n),
            big_kmag,
            multiplier,
            small_k,
        })
    }

    /// Periodic operator, the plain torus multiplier.
    pub fn periodic(grid: Grid, s: f64) -> Result<Self> {
        Self::new(grid, s, Exterior::Periodic)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn exterior(&self) -> Exterior {
        self.exterior
    }

    /// The multiplier `|k|^{2s}` on the transform grid (FFT bin order).
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// Largest multiplier value, `≈ (√N π/h)^{2s}`.
    pub fn spectral_radius(&self) -> f64 {
        self.multiplier.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Whether a flat sample index belongs to the active box.
    pub fn is_active(&self, flat: usize) -> bool {
        match self.exterior {
            Exterior::Periodic => true,
            Exterior::ZeroPadded(_) => {
                let [i0, i1] = self.grid.multi_index(flat);
                i0 != 0 && (self.grid.dim() == 1 || i1 != 0)
            }
        }
    }

    /// Zeroes samples outside the active box in place.
    pub fn mask_in_place(&self, data: &mut [f64]) {
        if self.exterior == Exterior::Periodic {
            return;
        }
        let n = self.grid.points_per_axis();
        if self.grid.dim() == 1 {
            data[0] = 0.0;
        } else {
            for j in 0..n {
                data[j] = 0.0;
                data[j * n] = 0.0;
            }
        }
    }

    /// Copy of `f` with inactive samples set to zero.
    pub fn masked(&self, f: &Field) -> Field {
        let mut g = f.clone();
        self.mask_in_place(g.samples_mut());
        g
    }

    /// Number of active samples.
    pub fn active_count(&self) -> usize {
        match self.exterior {
            Exterior::Periodic => self.grid.total_points(),
            Exterior::ZeroPadded(_) => {
                (self.grid.points_per_axis() - 1).pow(self.grid.dim() as u32)
            }
        }
    }

    fn check(&self, f: &Field) -> Result<()> {
        self.grid.check_same(f.grid(), "fractional operator")
    }

    /// Zero-extends (and masks) samples onto the transform grid.
    fn extend(&self, data: &[f64]) -> Vec<Complex64> {
        let n = self.grid.points_per_axis();
        let nb = self.big_n;
        let mut big = vec![Complex64::default(); self.big_fft.len()];
        let first = usize::from(self.exterior != Exterior::Periodic);
        if self.grid.dim() == 1 {
            for j in first..n {
                big[self.offset + j].re = data[j];
            }
        } else {
            for i in first..n {
                let row = (self.offset + i) * nb + self.offset;
                for j in first..n {
                    big[row + j].re = data[i * n + j];
                }
            }
        }
        big
    }

    /// Restricts a transform-grid array back to the box (normalizing the
    /// inverse transform) and returns the largest imaginary residue.
    fn restrict(&self, big: &[Complex64]) -> (Vec<f64>, f64) {
        let n = self.grid.points_per_axis();
        let nb = self.big_n;
        let scale = 1.0 / big.len() as f64;
        let mut out = vec![0.0; self.grid.total_points()];
        let mut imag: f64 = 0.0;
        if self.grid.dim() == 1 {
            for j in 0..n {
                let z = big[self.offset + j];
                out[j] = z.re * scale;
                imag = imag.max((z.im * scale).abs());
            }
        } else {
            for i in 0..n {
                let row = (self.offset + i) * nb + self.offset;
                for j in 0..n {
                    let z = big[row + j];
                    out[i * n + j] = z.re * scale;
                    imag = imag.max((z.im * scale).abs());
                }
            }
        }
        self.mask_in_place(&mut out);
        (out, imag)
    }

    /// Forward transform of the extended field.
    pub(crate) fn transform(&self, f: &Field) -> Result<Vec<Complex64>> {
        self.check(f)?;
        let mut big = self.extend(f.samples());
        self.big_fft.forward(&mut big);
        Ok(big)
    }

    /// Applies an arbitrary real, even symbol given on the transform grid.
    pub fn apply_symbol(&self, f: &Field, symbol: &[f64]) -> Result<Field> {
        let mut big = self.transform(f)?;
        for (z, &m) in big.iter_mut().zip(symbol) {
            *z *= m;
        }
        self.big_fft.inverse(&mut big);
        let (out, imag) = self.restrict(&big);
        let scale = symbol.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
        let tol = 1e-12 * f.linf_norm() * scale;
        if imag > tol.max(f64::MIN_POSITIVE) {
            return Err(FklError::ImaginaryResidue {
                residue: imag,
                tolerance: tol,
            });
        }
        Ok(Field::from_vec(self.grid, out))
    }

    /// `(-Δ)^s f`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.apply_symbol(f, &self.multiplier)
    }

    /// `(-Δ)^σ f` for an arbitrary order `σ ≥ 0` with the same exterior.
    pub fn apply_power(&self, f: &Field, sigma: f64) -> Result<Field> {
        let symbol: Vec<f64> = self.big_kmag.iter().map(|&k| pow_symbol(k, sigma)).collect();
        self.apply_symbol(f, &symbol)
    }

    /// `∫ (-Δ)^{s/2} f · (-Δ)^{s/2} g` evaluated with Parseval weights.
    pub fn pairing(&self, f: &Field, g: &Field) -> Result<f64> {
        let ff = self.transform(f)?;
        let gg = self.transform(g)?;
        let sum: f64 = ff
            .iter()
            .zip(&gg)
            .zip(&self.multiplier)
            .map(|((a, b), &m)| m * (a.re * b.re + a.im * b.im))
            .sum();
        Ok(sum * self.grid.cell_volume() / ff.len() as f64)
    }

    /// `‖(-Δ)^{s/2} f‖²₂`.
    pub fn energy(&self, f: &Field) -> Result<f64> {
        let ff = self.transform(f)?;
        let sum: f64 = ff
            .iter()
            .zip(&self.multiplier)
            .map(|(a, &m)| m * a.norm_sqr())
            .sum();
        Ok(sum * self.grid.cell_volume() / ff.len() as f64)
    }

    /// Spectral derivative `∂f/∂x_axis` on the periodic box (Nyquist mode
    /// dropped), masked to the active box.
    pub fn derivative(&self, f: &Field, axis: usize) -> Result<Field> {
        self.check(f)?;
        if axis >= self.grid.dim() {
            return Err(FklError::InvalidParameter(format!(
                "axis {axis} out of range for dimension {}",
                self.grid.dim()
            )));
        }
        let n = self.grid.points_per_axis();
        let mut z: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.small_fft.forward(&mut z);
        for (flat, c) in z.iter_mut().enumerate() {
            let j = self.grid.multi_index(flat)[axis];
            let k = if j == n / 2 { 0.0 } else { self.small_k[j] };
            *c *= Complex64::new(0.0, k);
        }
        self.small_fft.inverse(&mut z);
        let scale = 1.0 / z.len() as f64;
        let mut out: Vec<f64> = z.iter().map(|c| c.re * scale).collect();
        self.mask_in_place(&mut out);
        Ok(Field::from_vec(self.grid, out))
    }

    /// Periodic approximation of `(c(-Δ)^s + m)^{-1}` on the unpadded box.
    /// Exact for [`Exterior::Periodic`]; a spectrally equivalent
    /// preconditioner otherwise.
    pub fn shifted_inverse_approx(&self, c: f64, m: f64, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut z: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.small_fft.forward(&mut z);
        for (flat, v) in z.iter_mut().enumerate() {
            let [i0, i1] = self.grid.multi_index(flat);
            let k2 = if self.grid.dim() == 1 {
                self.small_k[i0].powi(2)
            } else {
                self.small_k[i0].powi(2) + self.small_k[i1].powi(2)
            };
            *v /= c * k2.sqrt().powf(2.0 * self.s) + m;
        }
        self.small_fft.inverse(&mut z);
        let scale = 1.0 / z.len() as f64;
        let mut out: Vec<f64> = z.iter().map(|c| c.re * scale).collect();
        self.mask_in_place(&mut out);
        Ok(Field::from_vec(self.grid, out))
    }

    /// Solves `(c(-Δ)^s + m) x = rhs` for `c ≥ 0`, `m > 0` to relative
    /// tolerance `tol` (direct for the periodic exterior, preconditioned
    /// conjugate gradients otherwise).
    pub fn solve_shifted(&self, c: f64, m: f64, rhs: &Field, tol: f64) -> Result<Field> {
        self.check(rhs)?;
        if self.exterior == Exterior::Periodic {
            return self.shifted_inverse_approx(c, m, rhs);
        }
        let grid = self.grid;
        let apply = |v: &[f64]| -> Result<Vec<f64>> {
            let f = Field::from_vec(grid, v.to_vec());
            let a = self.apply(&f)?;
            Ok(a.samples().iter().zip(v).map(|(x, y)| c * x + m * y).collect())
        };
        let prec = |v: &[f64]| -> Result<Vec<f64>> {
            let f = Field::from_vec(grid, v.to_vec());
            Ok(self.shifted_inverse_approx(c, m, &f)?.into_samples())
        };
        let b = self.masked(rhs);
        let sol = krylov::pcg(apply, prec, b.samples(), tol, 500)?;
        Ok(Field::from_vec(grid, sol.x))
    }

    /// The same operator on the grid dilated by `factor` (same `n`, same
    /// exterior).
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid.dilated(factor)?, self.s, self.exterior)
    }
}

fn pow_symbol(k: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        1.0
    } else {
        k.powf(2.0 * sigma)
    }
}

fn tensor_magnitude(axis_k: &[f64], dim: usize) -> Vec<f64> {
    if dim == 1 {
        axis_k.iter().map(|k| k.abs()).collect()
    } else {
        let mut out = Vec::with_capacity(axis_k.len() * axis_k.len());
        for &k0 in axis_k {
            for &k1 in axis_k {
                out.push(k0.hypot(k1));
            }
        }
        out
    }
}

/// `(-Δ)^s f` with the given operator.
pub fn apply_frac_laplacian(op: &FracOperator, f: &Field) -> Result<Field> {
    op.apply(f)
}

/// `‖(-Δ)^{s/2} f‖²₂`.
pub fn gagliardo_energy(op: &FracOperator, f: &Field) -> Result<f64> {
    op.energy(f)
}

/// Exponents `(N(p-1)/(4s), (p-1)(2s-N)/(4s) + 1)` of the quotient.
pub fn gns_exponents(dim: usize, s: f64, p: f64) -> (f64, f64) {
    let n = dim as f64;
    (
        n * (p - 1.0) / (4.0 * s),
        (p - 1.0) * (2.0 * s - n) / (4.0 * s) + 1.0,
    )
}

/// The raw Gagliardo–Nirenberg quotient
/// `‖(-Δ)^{s/2}u‖^{2θ₁} ‖u‖₂^{2θ₂} / ∫|u|^{p+1}` (no sharp constant).
pub fn gns_quotient(op: &FracOperator, f: &Field, p: f64) -> Result<f64> {
    let (e1, e2) = gns_exponents(op.grid().dim(), op.order(), p);
    let denom = f.lq_norm(p + 1.0).powf(p + 1.0);
    if !(denom > 0.0) {
        return Err(FklError::InvalidInput(
            "quotient undefined: ∫|u|^(p+1) vanishes".into(),
        ));
    }
    let grad = op.energy(f)?;
    let mass = f.l2_norm().powi(2);
    Ok(grad.powf(e1) * mass.powf(e2) / denom)
}

/// `⟨u, v⟩_ε = ∫ ε^{2s} a (-Δ)^{s/2}u (-Δ)^{s/2}v + V u v`.
#[derive(Debug, Clone)]
pub struct EpsInnerProduct {
    eps: f64,
    a: f64,
    op: FracOperator,
    potential: Field,
}

impl EpsInnerProduct {
    /// Requires `ε > 0`, `a > 0` and a strictly positive sampled potential.
    pub fn new(eps: f64, a: f64, op: FracOperator, potential: Field) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(FklError::InvalidParameter(format!("ε must be positive, got {eps}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(FklError::InvalidParameter(format!("a must be positive, got {a}")));
        }
        op.grid().check_same(potential.grid(), "potential")?;
        if let Some(v) = potential.samples().iter().find(|&&v| !(v > 0.0)) {
            return Err(FklError::InvalidParameter(format!(
                "potential sample {v} is not positive (inf V > 0 required)"
            )));
        }
        Ok(Self { eps, a, op, potential })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn operator(&self) -> &FracOperator {
        &self.op
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn inner(&self, u: &Field, v: &Field) -> Result<f64> {
        u.grid().check_same(v.grid(), "inner product")?;
        let kinetic = self.op.pairing(u, v)?;
        let h = u.grid().cell_volume();
        let pot: f64 = u
            .samples()
            .iter()
            .zip(v.samples())
            .zip(self.potential.samples())
            .map(|((a, b), w)| a * b * w)
            .sum();
        Ok(self.eps.powf(2.0 * self.op.order()) * self.a * kinetic + h * pot)
    }

    pub fn norm(&self, u: &Field) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }
}

pub fn eps_inner(ip: &EpsInnerProduct, u: &Field, v: &Field) -> Result<f64> {
    ip.inner(u, v)
}

pub fn eps_norm(ip: &EpsInnerProduct, u: &Field) -> Result<f64> {
    ip.norm(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn multiplier_is_even_and_vanishes_at_zero() {
        let g = Grid::new(2, 7.0, 32).unwrap();
        let op = FracOperator::periodic(g, 0.7).unwrap();
        let m = op.multiplier();
        assert_eq!(m[0], 0.0);
        assert!(m.iter().all(|&v| v >= 0.0));
        let n = 32;
        for i in 0..n {
            for j in 0..n {
                let a = m[i * n + j];
                let b = m[((n - i) % n) * n + (n - j) % n];
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let g = Grid::new(1, 10.0, 128).unwrap();
        let k0 = 3.0 * PI / 10.0;
        let op = FracOperator::periodic(g, 0.6).unwrap();
        let f = Field::from_fn(g, |[x, _]| (k0 * x).cos());
        let out = op.apply(&f).unwrap();
        let expect = f.scaled(k0.powf(1.2));
        assert!(out.sub(&expect).unwrap().linf_norm() < 1e-12);
        let e = op.energy(&f).unwrap();
        assert!((e - k0.powf(1.2) * f.l2_norm().powi(2)).abs() < 1e-11);
    }

    #[test]
    fn unit_order_is_minus_laplacian() {
        let g = Grid::new(1, 4.0 * PI, 64).unwrap();
        let op = FracOperator::periodic(g, 1.0).unwrap();
        let f = Field::from_fn(g, |[x, _]| x.sin());
        assert!(op.apply(&f).unwrap().sub(&f).unwrap().linf_norm() < 1e-12);
    }

    #[test]
    fn exterior_labels_round_trip() {
        for e in [Exterior::Periodic, Exterior::ZeroPadded(8)] {
            assert_eq!(Exterior::parse(&e.label()).unwrap(), e);
        }
        assert!(Exterior::parse("zero-padded-3").is_err());
        assert!(Exterior::parse("dirichlet").is_err());
    }

    #[test]
    fn padded_mask_is_symmetric() {
        let g = Grid::new(1, 5.0, 32).unwrap();
        let op = FracOperator::new(g, 0.5, Exterior::ZeroPadded(4)).unwrap();
        let f = Field::constant(g, 1.0);
        let out = op.apply(&f).unwrap();
        assert_eq!(out.samples()[0], 0.0);
        for j in 1..32 {
            assert!((out.samples()[j] - out.samples()[32 - j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_order_out_of_range() {
        let g = Grid::new(1, 5.0, 32).unwrap();
        assert!(FracOperator::periodic(g, 0.0).is_err());
        assert!(FracOperator::periodic(g, 1.2).is_err());
    }
}
