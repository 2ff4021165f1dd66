//! External potentials `V` with a strict local minimum at `x₀`.

use crate::error::{FklError, Result};

/// Shape of the well.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V(x) = v₀ + min(κ|x-x₀|², h)`.
    QuadraticWell { curvature: f64, height: f64 },
    /// `V(x) = v₀ + min(κ|x-x₀|⁴, h)`.
    QuarticWell { coefficient: f64, height: f64 },
    /// `V(x) = v₀ + A(1 - Π_i cos(ω(x_i - x₀_i)))`.
    CosineWell { amplitude: f64, frequency: f64 },
    /// Radial profile `V(x) = T(|x-x₀|)` given by samples `(r_k, T_k)`,
    /// `r_0 = 0`, linearly interpolated and constant beyond the last node.
    /// The Hölder order near `x₀` is supplied by the user and trusted.
    CustomTable {
        radii: Vec<f64>,
        values: Vec<f64>,
        holder: f64,
    },
}

impl PotentialKind {
    pub fn label(&self) -> &'static str {
        match self {
            PotentialKind::QuadraticWell { .. } => "quadratic_well",
            PotentialKind::QuarticWell { .. } => "quartic_well",
            PotentialKind::CosineWell { .. } => "cosine_well",
            PotentialKind::CustomTable { .. } => "custom_table",
        }
    }

    /// Natural Hölder order of `V - V(x₀)` at `x₀`.
    fn natural_order(&self) -> f64 {
        match self {
            PotentialKind::QuadraticWell { .. } | PotentialKind::CosineWell { .. } => 2.0,
            PotentialKind::QuarticWell { .. } => 4.0,
            PotentialKind::CustomTable { holder, .. } => *holder,
        }
    }
}

/// Margin kept below the admissible bound `(N+4s)/2` when an order is capped.
pub const ALPHA_MARGIN: f64 = 1e-6;

/// A validated potential together with the data of the hypotheses on `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    dim: usize,
    x0: [f64; 2],
    base: f64,
    /// Hölder order used in diagnostics, `0 < α < (N+4s)/2`.
    pub alpha: f64,
    /// Radius of the strict-minimum neighbourhood.
    pub r0: f64,
    /// `inf V`.
    pub floor: f64,
    /// `sup V`.
    pub ceiling: f64,
}

impl PotentialSpec {
    /// `base = V(x₀)`; `s` fixes the admissible range of `α`.
    pub fn new(kind: PotentialKind, dim: usize, x0: [f64; 2], base: f64, s: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FklError::UnsupportedDimension(dim));
        }
        if !(base > 0.0 && base.is_finite()) {
            return Err(FklError::InvalidParameter(format!(
                "V(x0) must be positive (inf V > 0), got {base}"
            )));
        }
        if !(s > 0.0 && s <= 1.0) {
            return Err(FklError::InvalidParameter(format!("s must lie in (0, 1], got {s}")));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(FklError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        let (r0, floor, ceiling) = match &kind {
            PotentialKind::QuadraticWell { curvature, height } => {
                positive("curvature", *curvature)?;
                positive("height", *height)?;
                ((height / curvature).sqrt(), base, base + height)
            }
            PotentialKind::QuarticWell { coefficient, height } => {
                positive("coefficient", *coefficient)?;
                positive("height", *height)?;
                ((height / coefficient).powf(0.25), base, base + height)
            }
            PotentialKind::CosineWell { amplitude, frequency } => {
                positive("amplitude", *amplitude)?;
                positive("frequency", *frequency)?;
                (std::f64::consts::PI / frequency, base, base + 2.0 * amplitude)
            }
            PotentialKind::CustomTable { radii, values, holder } => {
                positive("holder exponent", *holder)?;
                if radii.len() < 2 || radii.len() != values.len() {
                    return Err(FklError::InvalidInput(
                        "custom table needs at least two (r, V) nodes of equal count".into(),
                    ));
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(FklError::InvalidInput(
                        "custom table radii must start at 0 and increase strictly".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(FklError::NonFinite("custom table value".into()));
                }
                if (values[0] - base).abs() > 1e-12 * base.abs() {
                    return Err(FklError::InvalidInput(format!(
                        "custom table starts at {} but V(x0) = {base}",
                        values[0]
                    )));
                }
                let r0 = radii
                    .iter()
                    .zip(values)
                    .skip(1)
                    .find(|(_, v)| **v <= values[0])
                    .map_or(*radii.last().expect("non-empty"), |(r, _)| *r);
                let floor = values.iter().copied().fold(f64::INFINITY, f64::min);
                let ceiling = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (r0, floor, ceiling)
            }
        };
        let bound = (dim as f64 + 4.0 * s) / 2.0;
        let natural = kind.natural_order();
        let alpha = if natural < bound { natural } else { bound - ALPHA_MARGIN };
        let spec = Self {
            kind,
            dim,
            x0,
            base,
            alpha,
            r0,
            floor,
            ceiling,
        };
        spec.check_hypotheses(200)?;
        Ok(spec)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0(&self) -> [f64; 2] {
        self.x0
    }

    /// `V(x₀)`.
    pub fn minimum_value(&self) -> f64 {
        self.base
    }

    /// Natural order before capping to the admissible range.
    pub fn natural_alpha(&self) -> f64 {
        self.kind.natural_order()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let d0 = x[0] - self.x0[0];
        let d1 = if self.dim == 2 { x[1] - self.x0[1] } else { 0.0 };
        let r2 = d0 * d0 + d1 * d1;
        match &self.kind {
            PotentialKind::QuadraticWell { curvature, height } => self.base + (curvature * r2).min(*height),
            PotentialKind::QuarticWell { coefficient, height } => {
                self.base + (coefficient * r2 * r2).min(*height)
            }
            PotentialKind::CosineWell { amplitude, frequency } => {
                let prod = (frequency * d0).cos() * if self.dim == 2 { (frequency * d1).cos() } else { 1.0 };
                self.base + amplitude * (1.0 - prod)
            }
            PotentialKind::CustomTable { radii, values, .. } => table_lookup(radii, values, r2.sqrt()),
        }
    }

    /// Checks the hypotheses on a uniform mesh of `[x₀ - 2r₀, x₀ + 2r₀]^N`
    /// with `2·half + 1` points per axis: `floor ≤ V ≤ ceiling`, `floor > 0`
    /// and `V(x₀) < V(x)` for `0 < |x-x₀| < r₀`.
    pub fn check_hypotheses(&self, half: usize) -> Result<()> {
        if !(self.floor > 0.0) {
            return Err(FklError::InvalidParameter(format!("inf V = {} is not positive", self.floor)));
        }
        if !(self.ceiling.is_finite()) {
            return Err(FklError::InvalidParameter("V is unbounded".into()));
        }
        let step = 2.0 * self.r0 / half as f64;
        let count = 2 * half + 1;
        let n1 = if self.dim == 2 { count } else { 1 };
        let v0 = self.eval(self.x0);
        for i in 0..count {
            for j in 0..n1 {
                let d = [
                    (i as f64 - half as f64) * step,
                    if self.dim == 2 { (j as f64 - half as f64) * step } else { 0.0 },
                ];
                let x = [self.x0[0] + d[0], self.x0[1] + d[1]];
                let v = self.eval(x);
                if !(v >= self.floor * (1.0 - 1e-14) && v <= self.ceiling * (1.0 + 1e-14)) {
                    return Err(FklError::InvalidParameter(format!(
                        "V({x:?}) = {v} outside [{}, {}]",
                        self.floor, self.ceiling
                    )));
                }
                let r = d[0].hypot(d[1]);
                if r > 0.0 && r < self.r0 && !(v > v0) {
                    return Err(FklError::InvalidParameter(format!(
                        "x0 is not a strict local minimum: V({x:?}) = {v} <= V(x0) = {v0}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn table_lookup(radii: &[f64], values: &[f64], r: f64) -> f64 {
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&x| x <= r).saturating_sub(1).min(last - 1);
    let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
    values[k] + t * (values[k + 1] - values[k])
}
