//! The reduced functional `j_ε(y)`, its minimization, the expansion
//! constants and the ε-sweep diagnostics.

use rayon::prelude::*;

use super::corrector::{full_newton, solve_corrector, CorrectorOptions, CorrectorResult};
use super::Semiclassical;
use crate::error::{FklError, Result};
use crate::grid::Field;

/// Constants of `I_ε(U_{ε,y}) = Aε^N + Bε^N(V(y) - V(x₀)) + O(ε^{N+α})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConstants {
    /// `A = ½∫(a|(-Δ)^{s/2}U|² + V(x₀)U²) + (b/4)(∫|(-Δ)^{s/2}U|²)² - ∫U^{p+1}/(p+1)`.
    pub a: f64,
    /// `B = ½∫U²`.
    pub b: f64,
}

pub fn expansion_constants(setup: &Semiclassical) -> Result<ExpansionConstants> {
    let kp = setup.params();
    let u = setup.profile();
    let g = setup.operator().energy(u)?;
    let l2 = u.dot(u)?;
    let p = kp.base().p();
    let a = 0.5 * (kp.a() * g + kp.m() * l2) + 0.25 * kp.b() * g * g
        - u.positive_power(p + 1.0).integral() / (p + 1.0);
    Ok(ExpansionConstants { a, b: 0.5 * l2 })
}

/// `I_ε(U_{ε,y}) - Aε^N - Bε^N(V(y) - V(x₀))`.
pub fn expansion_residual(setup: &Semiclassical, eps: f64, y: [f64; 2]) -> Result<f64> {
    let frame = setup.frame(eps, y)?;
    let k = expansion_constants(setup)?;
    let en = frame.volume_factor();
    let dv = setup.potential().eval(y) - setup.potential().minimum_value();
    Ok(frame.energy(setup.profile())? - en * (k.a + k.b * dv))
}

/// `j_ε(y) = I_ε(U_{ε,y} + φ_{ε,y})` with the corrector it used.
pub fn reduced_functional_j(
    setup: &Semiclassical,
    eps: f64,
    y: [f64; 2],
    opts: &CorrectorOptions,
) -> Result<(f64, CorrectorResult)> {
    let frame = setup.frame(eps, y)?;
    let corr = solve_corrector(&frame, opts)?;
    let w = setup.profile().add_scaled(1.0, &corr.phi)?;
    Ok((frame.energy(&w)?, corr))
}

/// `(y, j_ε(y))` at the given centres, evaluated in parallel.
pub fn j_samples(
    setup: &Semiclassical,
    eps: f64,
    centres: &[[f64; 2]],
    opts: &CorrectorOptions,
) -> Result<Vec<([f64; 2], f64)>> {
    centres
        .par_iter()
        .map(|y| reduced_functional_j(setup, eps, *y, opts).map(|r| (*y, r.0)))
        .collect()
}

/// Least-squares fit of `j/ε^N = A + B·(V(y) - V(x₀))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionFit {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square misfit of `j/ε^N`.
    pub rms: f64,
}

pub fn fit_expansion(setup: &Semiclassical, eps: f64, data: &[([f64; 2], f64)]) -> Result<ExpansionFit> {
    if data.len() < 2 {
        return Err(FklError::InvalidInput("expansion fit needs at least two points".into()));
    }
    let en = eps.powi(setup.grid().dim() as i32);
    let v0 = setup.potential().minimum_value();
    let xs: Vec<f64> = data.iter().map(|(y, _)| setup.potential().eval(*y) - v0).collect();
    let ys: Vec<f64> = data.iter().map(|(_, j)| j / en).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FklError::InvalidInput("expansion fit needs distinct potential values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExpansionFit { a, b, rms })
}

/// Options of [`minimize_j`].
#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Radius of the search ball; `r₀/2` when `None`.
    pub delta: Option<f64>,
    /// Scan points per axis (odd, so that `x₀` itself is sampled).
    pub scan_points: usize,
    /// Refine the scan minimum by a quadratic fit and a root search on the
    /// constraint multipliers.
    pub polish: bool,
    pub corrector: CorrectorOptions,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            delta: None,
            scan_points: 17,
            polish: true,
            corrector: CorrectorOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimizer {
    pub eps: f64,
    pub y: [f64; 2],
    pub j_value: f64,
    /// `|y - x₀| < 0.9δ`.
    pub interior: bool,
    pub delta: f64,
    /// `(y, j_ε(y))` over the coarse scan, row-major.
    pub scan: Vec<([f64; 2], f64)>,
    pub corrector: CorrectorResult,
}

/// Minimizes `j_ε` over `B_δ(x₀)`: coarse scan, quadratic refinement, then a
/// root search on the multipliers (which vanish exactly at critical points).
pub fn minimize_j(setup: &Semiclassical, eps: f64, opts: &MinimizeOptions) -> Result<Minimizer> {
    let pot = setup.potential();
    let delta = opts.delta.unwrap_or(0.5 * pot.r0);
    if !(delta > 0.0 && delta < pot.r0) {
        return Err(FklError::InvalidParameter(format!(
            "search radius {delta} must lie in (0, r0 = {})",
            pot.r0
        )));
    }
    let k = opts.scan_points;
    if k < 3 || k % 2 == 0 {
        return Err(FklError::InvalidParameter(format!("scan_points must be odd and >= 3, got {k}")));
    }
    setup.frame(eps, pot.x0())?;
    let dim = setup.grid().dim();
    let x0 = pot.x0();
    let step = 2.0 * delta / (k - 1) as f64;
    let offset = |i: usize| -delta + i as f64 * step;
    let points: Vec<[f64; 2]> = if dim == 1 {
        (0..k).map(|i| [x0[0] + offset(i), 0.0]).collect()
    } else {
        (0..k * k)
            .map(|f| [x0[0] + offset(f / k), x0[1] + offset(f % k)])
            .filter(|p| (p[0] - x0[0]).hypot(p[1] - x0[1]) <= delta * (1.0 + 1e-12))
            .collect()
    };
    let values: Vec<f64> = points
        .par_iter()
        .map(|y| reduced_functional_j(setup, eps, *y, &opts.corrector).map(|r| r.0))
        .collect::<Result<_>>()?;
    let scan: Vec<([f64; 2], f64)> = points.iter().copied().zip(values.iter().copied()).collect();
    let best = (0..scan.len())
        .min_by(|&a, &b| scan[a].1.partial_cmp(&scan[b].1).expect("finite j"))
        .expect("non-empty scan");
    let mut y = scan[best].0;

    if opts.polish {
        let vertex = quadratic_vertex(&scan, best, step, dim);
        if let Some(v) = vertex {
            if (v[0] - scan[best].0[0]).abs() <= step && (v[1] - scan[best].0[1]).abs() <= step {
                y = v;
            }
        }
        y = multiplier_root(setup, eps, y, step, &opts.corrector)?;
    }
    let (j_value, corrector) = reduced_functional_j(setup, eps, y, &opts.corrector)?;
    let dist = (y[0] - x0[0]).hypot(if dim == 2 { y[1] - x0[1] } else { 0.0 });
    Ok(Minimizer {
        eps,
        y,
        j_value,
        interior: dist < 0.9 * delta,
        delta,
        scan,
        corrector,
    })
}

/// Vertex of the quadratic through the scan minimum and its neighbours.
fn quadratic_vertex(scan: &[([f64; 2], f64)], best: usize, step: f64, dim: usize) -> Option<[f64; 2]> {
    let yb = scan[best].0;
    let near = |dx: f64, dy: f64| -> Option<f64> {
        scan.iter()
            .find(|(p, _)| (p[0] - yb[0] - dx * step).abs() < 1e-9 * step && (p[1] - yb[1] - dy * step).abs() < 1e-9 * step)
            .map(|(_, v)| *v)
    };
    let f0 = scan[best].1;
    let along = |fm: f64, fp: f64| -> Option<f64> {
        let curv = fp - 2.0 * f0 + fm;
        (curv > 0.0).then(|| 0.5 * step * (fm - fp) / curv)
    };
    let d0 = along(near(-1.0, 0.0)?, near(1.0, 0.0)?)?;
    let d1 = if dim == 2 { along(near(0.0, -1.0)?, near(0.0, 1.0)?)? } else { 0.0 };
    Some([yb[0] + d0, yb[1] + d1])
}

/// Newton/secant search for `c(y) = 0` started at `y`, confined to a box of
/// half-width `step` around the start.
fn multiplier_root(
    setup: &Semiclassical,
    eps: f64,
    start: [f64; 2],
    step: f64,
    opts: &CorrectorOptions,
) -> Result<[f64; 2]> {
    let dim = setup.grid().dim();
    let mult = |y: [f64; 2]| -> Result<Vec<f64>> {
        let frame = setup.frame(eps, y)?;
        let corr = solve_corrector(&frame, opts)?;
        Ok(corr.multipliers)
    };
    let mut y = start;
    let h = step / 16.0;
    for _ in 0..6 {
        let c = mult(y)?;
        let mut jac = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for j in 0..dim {
            let mut yp = y;
            yp[j] += h;
            let mut ym = y;
            ym[j] -= h;
            let (cp, cm) = (mult(yp)?, mult(ym)?);
            for i in 0..dim {
                jac[(i, j)] = (cp[i] - cm[i]) / (2.0 * h);
            }
        }
        let rhs = nalgebra::DVector::from_vec(c.clone());
        let Some(delta) = jac.lu().solve(&rhs) else { break };
        let mut next = y;
        for i in 0..dim {
            next[i] = (y[i] - delta[i]).clamp(start[i] - step, start[i] + step);
        }
        let moved = (0..dim).map(|i| (next[i] - y[i]).abs()).fold(0.0, f64::max);
        y = next;
        if moved <= 1e-13 * (1.0 + y[0].abs().max(y[1].abs())) {
            break;
        }
    }
    Ok(y)
}

/// Ratios `‖φ‖_q / (ε^{N/q - N/2}‖φ‖_ε)` for `φ(x) = g((x-x₀)/ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevReport {
    pub q: f64,
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max/min` over the list.
    pub spread: f64,
    /// Least-squares slope of `log ratio` against `log ε`.
    pub slope: f64,
}

pub fn sobolev_scaling_check(setup: &Semiclassical, eps_list: &[f64], q: f64, g: &Field) -> Result<SobolevReport> {
    let n = setup.grid().dim() as f64;
    let s = setup.params().base().s();
    let crit = if n > 2.0 * s { 2.0 * n / (n - 2.0 * s) } else { f64::INFINITY };
    if !(q >= 2.0 && q <= crit) {
        return Err(FklError::InvalidParameter(format!(
            "q = {q} outside [2, 2*_s = {crit}]"
        )));
    }
    if eps_list.len() < 2 {
        return Err(FklError::InvalidInput("need at least two values of ε".into()));
    }
    let x0 = setup.potential().x0();
    let mut ratios = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let frame = setup.frame(eps, x0)?;
        let lq = eps.powf(n / q) * g.lq_norm(q);
        ratios.push(lq / (eps.powf(n / q - n / 2.0) * frame.norm(g)?));
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SobolevReport {
        q,
        eps: eps_list.to_vec(),
        slope: loglog_slope(eps_list, &ratios),
        ratios,
        spread: max / min,
    })
}

/// Least-squares slope of `log |v|` against `log x`.
pub fn loglog_slope(x: &[f64], v: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|t| t.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|t| t.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let mv = lv.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&lv).map(|(a, b)| (a - mx) * (b - mv)).sum();
    sxy / sxx
}

/// Offsets `|y_ε - x₀|` below this are treated as zero when judging
/// monotonicity (the minimizer is then at `x₀` to solver precision).
pub const OFFSET_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub minimize: MinimizeOptions,
    /// Cross-validate the assembled solution with an unconstrained Newton
    /// solve at each `y_ε`.
    pub newton_check: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            minimize: MinimizeOptions::default(),
            newton_check: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub y: [f64; 2],
    /// `|y_ε - x₀|`.
    pub offset: f64,
    /// `‖φ_ε‖_ε`.
    pub phi_norm: f64,
    /// `‖φ_ε‖_ε / ε^{N/2}`.
    pub phi_norm_scaled: f64,
    pub j_value: f64,
    /// `I_ε(U_{ε,x₀}) - Aε^N`.
    pub energy_residual: f64,
    /// `‖equation residual of U_{ε,y_ε} + φ_ε‖_{L²(dx)} / ε^{N/2}`.
    pub residual_scaled: f64,
    pub interior: bool,
    pub corrector_iterations: usize,
    pub orthogonality: f64,
    /// Relative `L²` distance to the unconstrained Newton solution.
    pub newton_gap: Option<f64>,
    /// `(y, j)` scan data.
    pub scan: Vec<([f64; 2], f64)>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub constants: ExpansionConstants,
    /// Log-log slope of `energy_residual` over the whole list.
    pub energy_residual_slope: f64,
    /// `‖φ‖_ε/ε^{N/2}` ratios between consecutive rows (larger ε over smaller).
    pub halving_ratios: Vec<f64>,
    /// The normalized corrector column decreases strictly with ε.
    pub normalized_decreasing: bool,
    /// `|y_ε - x₀|` is non-increasing with ε (offsets below
    /// [`OFFSET_FLOOR`] count as zero) and strictly decreasing while above it.
    pub offsets_decreasing: bool,
}

/// Runs [`minimize_j`] for every `ε` (in parallel) and assembles the table,
/// sorted by decreasing `ε`.
pub fn concentration_sweep(setup: &Semiclassical, eps_list: &[f64], opts: &SweepOptions) -> Result<SweepTable> {
    if eps_list.is_empty() {
        return Err(FklError::InvalidInput("empty ε list".into()));
    }
    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite ε"));
    for &e in &eps_sorted {
        setup.frame(e, setup.potential().x0())?;
    }
    let constants = expansion_constants(setup)?;
    let rows: Vec<SweepRow> = eps_sorted
        .par_iter()
        .map(|&eps| sweep_row(setup, eps, opts))
        .collect::<Result<_>>()?;
    Ok(SweepTable::from_rows(constants, rows))
}

impl SweepTable {
    /// Assembles the summary columns from rows ordered by decreasing `ε`.
    pub fn from_rows(constants: ExpansionConstants, rows: Vec<SweepRow>) -> Self {
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let res: Vec<f64> = rows.iter().map(|r| r.energy_residual).collect();
        let energy_residual_slope = if rows.len() >= 2 { loglog_slope(&eps, &res) } else { f64::NAN };
        let halving_ratios: Vec<f64> = rows
            .windows(2)
            .map(|w| w[0].phi_norm_scaled / w[1].phi_norm_scaled)
            .collect();
        let normalized_decreasing = rows.windows(2).all(|w| w[1].phi_norm_scaled < w[0].phi_norm_scaled);
        let clip = |v: f64| if v < OFFSET_FLOOR { 0.0 } else { v };
        let offsets_decreasing = rows.windows(2).all(|w| {
            let (a, b) = (clip(w[0].offset), clip(w[1].offset));
            if a == 0.0 {
                b == 0.0
            } else {
                b < a
            }
        });
        Self {
            rows,
            constants,
            energy_residual_slope,
            halving_ratios,
            normalized_decreasing,
            offsets_decreasing,
        }
    }
}

/// One row of the sweep: minimizer, corrector and diagnostics at `ε`.
pub fn sweep_row(setup: &Semiclassical, eps: f64, opts: &SweepOptions) -> Result<SweepRow> {
    let min = minimize_j(setup, eps, &opts.minimize)?;
    let frame = setup.frame(eps, min.y)?;
    let en = frame.volume_factor();
    let half = en.sqrt();
    let w = setup.profile().add_scaled(1.0, &min.corrector.phi)?;
    let residual_scaled = frame.z_gradient(&w)?.l2_norm();
    let x0 = setup.potential().x0();
    let k = expansion_constants(setup)?;
    let at_x0 = setup.frame(eps, x0)?;
    let energy_residual = at_x0.energy(setup.profile())? - en * k.a;
    let newton_gap = if opts.newton_check {
        let nr = full_newton(&frame, &w, 1e-12 * w.l2_norm(), 30)?;
        Some(nr.w.sub(&w)?.l2_norm() / w.l2_norm())
    } else {
        None
    };
    let dim = setup.grid().dim();
    let offset = (min.y[0] - x0[0]).hypot(if dim == 2 { min.y[1] - x0[1] } else { 0.0 });
    Ok(SweepRow {
        eps,
        y: min.y,
        offset,
        phi_norm: min.corrector.phi_norm,
        phi_norm_scaled: min.corrector.phi_norm / half,
        j_value: min.j_value,
        energy_residual,
        residual_scaled,
        interior: min.interior,
        corrector_iterations: min.corrector.iterations,
        orthogonality: min.corrector.orthogonality,
        newton_gap,
        scan: min.scan,
    })
}
