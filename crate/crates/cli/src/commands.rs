//! The subcommands: each validates, computes, writes its artifacts and a
//! manifest, and classifies the outcome.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use fkl_core::ground_state::{certify_profile, solve_q, GroundStateResult};
use fkl_core::io::{decode_field, encode_field};
use fkl_core::linearized::{distance_to_translation_mode, spectrum, LinearizedOp, Sector, SpectrumOptions};
use fkl_core::manifest::{content_hash, format_f64, RunManifest, Section};
use fkl_core::scaling::{build_kirchhoff, ScalingResult};
use fkl_core::semiclassical::{expansion_constants, loglog_slope, sweep_row, Semiclassical, SweepOptions, OFFSET_FLOOR};
use fkl_core::{Field, FklError, CODE_VERSION};

use crate::config::{Config, ConfigError};
use crate::output::{num, plot_data, Artifacts, Cache};

/// Why a command did not succeed; maps onto the exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Certificate(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Certificate(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Solver(m) | Failure::Certificate(m) => m,
        }
    }
}

impl From<FklError> for Failure {
    fn from(e: FklError) -> Self {
        match e {
            FklError::Certificate(_) => Failure::Certificate(e.to_string()),
            e => Failure::Solver(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Solver(format!("io error: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

/// Shared context of one invocation.
pub struct Run<'a> {
    pub config: &'a Config,
    pub out: &'a Path,
    pub cache: Cache,
    started: Instant,
}

impl<'a> Run<'a> {
    pub fn new(config: &'a Config, out: &'a Path) -> Self {
        Self {
            config,
            out,
            cache: Cache::locate(out),
            started: Instant::now(),
        }
    }

    fn manifest(&self, command: &str, sections: &[&str]) -> RunManifest {
        let c = self.config;
        let hash = content_hash(&[CODE_VERSION, command, &c.canonical(sections)]);
        let mut m = RunManifest::new(command, &hash);
        let md = &c.model;
        m.params
            .set_f64("a", md.a)
            .set_f64("b", md.b)
            .set_f64("m", md.m)
            .set_f64("s", md.s)
            .set_f64("p", md.p)
            .set("N", md.dim);
        m.grid
            .set("dim", c.grid.dim())
            .set_f64("L", c.grid.half_width())
            .set("n", c.grid.points_per_axis())
            .set_f64("h", c.grid.spacing())
            .set("exterior", c.exterior.label());
        m.solver
            .set_f64("tol", c.solve.tol)
            .set_f64("petviashvili_tol", c.solve.petviashvili_tol)
            .set("max_petviashvili", c.solve.max_petviashvili)
            .set_f64("newton_tol", c.solve.newton_tol)
            .set("max_newton", c.solve.max_newton)
            .set_f64("kirchhoff_tol", c.kirchhoff_tol);
        m
    }

    fn artifacts(&self, manifest: RunManifest) -> Artifacts {
        Artifacts::new(self.out, manifest)
    }

    /// Key of the ground-state cache entry: only what `Q` depends on.
    fn ground_state_key(&self) -> String {
        let c = self.config;
        let text = format!(
            "s={};p={};N={};L={};n={};exterior={};tol={};ptol={};pmax={};ntol={};nmax={}",
            format_f64(c.model.s),
            format_f64(c.model.p),
            c.model.dim,
            format_f64(c.grid.half_width()),
            c.grid.points_per_axis(),
            c.exterior.label(),
            format_f64(c.solve.tol),
            format_f64(c.solve.petviashvili_tol),
            c.solve.max_petviashvili,
            format_f64(c.solve.newton_tol),
            c.solve.max_newton
        );
        content_hash(&[CODE_VERSION, "ground-state", &text])
    }

    /// `Q`, from the cache when possible.
    fn ground_state(&self) -> Result<(GroundStateResult, bool), Failure> {
        let c = self.config;
        let key = self.ground_state_key();
        if let Some(bytes) = self.cache.load("q", &key) {
            match decode_field(&bytes) {
                Ok(q) if q.grid().same_as(&c.grid) => {
                    let gs = certify_profile(&c.base, q, c.exterior)?;
                    log::info!("ground state loaded from cache ({key})");
                    return Ok((gs, true));
                }
                _ => log::warn!("ignoring unreadable cache entry q-{key}"),
            }
        }
        log::info!("solving for the ground state on {:?}", c.grid);
        let gs = solve_q(&c.base, c.grid, &c.solve)?;
        self.cache.store("q", &key, &encode_field(&gs.q));
        Ok((gs, false))
    }

    fn scaling(&self, gs: &GroundStateResult, b: Option<f64>) -> Result<ScalingResult, Failure> {
        let kp = match b {
            Some(b) => self.config.kirchhoff.with_b(b)?,
            None => self.config.kirchhoff,
        };
        Ok(build_kirchhoff(gs, &kp)?)
    }

    fn finish(&self, art: Artifacts, failures: Vec<String>) -> Outcome {
        let path = art.finish(self.started)?;
        log::info!("wrote {}", path.display());
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Failure::Certificate(failures.join("; ")))
        }
    }
}

/// `(x, f(x, 0))` along the first axis.
fn axis_profile(f: &Field) -> Vec<(f64, f64)> {
    let g = f.grid();
    let n = g.points_per_axis();
    let row = if g.dim() == 2 { n / 2 } else { 0 };
    (0..n)
        .map(|j| {
            let idx = if g.dim() == 2 { g.flat_index([j, row]) } else { j };
            (g.coord(j), f.samples()[idx])
        })
        .collect()
}

fn ground_state_results(gs: &GroundStateResult, cached: bool) -> Section {
    let mut r = Section::new();
    r.set_f64("residual_l2", gs.residual_l2)
        .set_f64("residual_linf", gs.residual_linf)
        .set_f64("q_max", gs.q.max())
        .set_f64("j_value", gs.j_value)
        .set("petviashvili_iterations", gs.iterations)
        .set("newton_iterations", gs.newton_iterations)
        .set("monotone_radial", gs.monotone)
        .set("from_cache", cached);
    let d = &gs.decay_certificate;
    let mut decay = Section::new();
    decay
        .set_f64("c1", d.c1)
        .set_f64("c2", d.c2)
        .set_f64("window_lo", d.window.0)
        .set_f64("window_hi", d.window.1)
        .set("passed", d.passed);
    r.set_section("decay", decay);
    r
}

pub fn ground_state(run: &Run<'_>) -> Outcome {
    let c = run.config;
    let (gs, cached) = run.ground_state()?;
    let mut art = run.artifacts(run.manifest("ground-state", &["model", "grid", "solver"]));
    art.manifest.results = ground_state_results(&gs, cached);
    art.write("q_field", "q.field", &encode_field(&gs.q))?;
    let profile = axis_profile(&gs.q);
    art.write("q_profile", "q_profile.dat", plot_data("x Q(x)", profile.iter().copied()).as_bytes())?;
    let tail = profile
        .iter()
        .filter(|(x, q)| *x >= 1.0 && *q > 0.0)
        .map(|(x, q)| (x.log10(), q.log10()));
    art.write("q_tail", "q_tail.dat", plot_data("log10(x) log10(Q(x))", tail).as_bytes())?;

    let mut failures = Vec::new();
    if !(gs.residual_l2 <= c.solve.tol) {
        failures.push(format!("residual {:e} above tol {:e}", gs.residual_l2, c.solve.tol));
    }
    if !gs.decay_certificate.passed {
        failures.push("decay certificate failed".into());
    }
    if !gs.monotone {
        failures.push("profile is not radially non-increasing".into());
    }
    run.finish(art, failures)
}

const SCALE_HEADER: &str =
    "b,E0,grad_q_sq,grad_u_sq,kirchhoff_residual_l2,kirchhoff_residual_linf,self_consistency,unique_root\n";

fn scale_row(sr: &ScalingResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        num(sr.params.b()),
        num(sr.e0),
        num(sr.grad_q_sq),
        num(sr.grad_u_sq),
        num(sr.kirchhoff_residual.0),
        num(sr.kirchhoff_residual.1),
        num(sr.self_consistency),
        sr.uniqueness_certificate
    )
}

fn scale_failures(sr: &ScalingResult, tol: f64) -> Vec<String> {
    let mut f = Vec::new();
    let b = sr.params.b();
    if !sr.uniqueness_certificate {
        f.push(format!("b = {b}: uniqueness certificate failed"));
    }
    if !(sr.kirchhoff_residual.0 <= tol) {
        f.push(format!("b = {b}: Kirchhoff residual {:e} above {tol:e}", sr.kirchhoff_residual.0));
    }
    if !(sr.self_consistency <= 1e-8) {
        f.push(format!("b = {b}: self-consistency {:e} above 1e-8", sr.self_consistency));
    }
    f
}

pub fn scale(run: &Run<'_>) -> Outcome {
    let c = run.config;
    let (gs, cached) = run.ground_state()?;
    let sr = run.scaling(&gs, None)?;
    let mut art = run.artifacts(run.manifest("scale", &["model", "grid", "solver", "scale"]));
    let mut failures = scale_failures(&sr, c.kirchhoff_tol);

    let mut r = Section::new();
    r.set_f64("E0", sr.e0)
        .set_f64("grad_q_sq", sr.grad_q_sq)
        .set_f64("grad_u_sq", sr.grad_u_sq)
        .set_f64("kirchhoff_residual_l2", sr.kirchhoff_residual.0)
        .set_f64("kirchhoff_residual_linf", sr.kirchhoff_residual.1)
        .set_f64("self_consistency", sr.self_consistency)
        .set("uniqueness_certificate", sr.uniqueness_certificate)
        .set_f64_list("roots", &sr.roots)
        .set_f64("f_prime", sr.f_prime)
        .set_f64("dilation", sr.params.dilation(sr.e0))
        .set_f64("u_half_width", sr.u.grid().half_width())
        .set_f64("j_value_u", sr.j_value_u)
        .set("ground_state_from_cache", cached);
    if (2.0 * c.model.s - c.model.dim as f64).abs() < 1e-15 {
        // With 2s = N the energy is dilation invariant and E₀ is explicit.
        let closed = c.model.a + c.model.b * c.model.m.powf(2.0 / (c.model.p - 1.0)) * sr.grad_q_sq;
        r.set_f64("E0_closed_form", closed)
            .set_f64("E0_closed_form_rel_error", (sr.e0 - closed).abs() / closed);
    }

    let mut csv = String::from(SCALE_HEADER);
    match &c.b_list {
        None => csv.push_str(&scale_row(&sr)),
        Some(list) => {
            let mut bs = list.clone();
            bs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
            let results: Vec<ScalingResult> = bs
                .par_iter()
                .map(|&b| run.scaling(&gs, Some(b)))
                .collect::<Result<_, _>>()?;
            for s in &results {
                csv.push_str(&scale_row(s));
                failures.extend(scale_failures(s, c.kirchhoff_tol));
            }
            let increasing = results.windows(2).all(|w| w[1].e0 > w[0].e0 || w[1].params.b() == w[0].params.b());
            r.set("E0_increasing_in_b", increasing);
            if !increasing {
                failures.push("E0 is not increasing in b".into());
            }
        }
    }
    art.manifest.results = r;
    art.write("u_field", "u.field", &encode_field(&sr.u))?;
    art.write("scale_csv", "scale.csv", csv.as_bytes())?;
    art.write(
        "u_profile",
        "u_profile.dat",
        plot_data("x U(x)", axis_profile(&sr.u)).as_bytes(),
    )?;
    run.finish(art, failures)
}

pub fn spectrum_cmd(run: &Run<'_>) -> Outcome {
    let c = run.config;
    let sc = &c.spectrum;
    let (gs, _) = run.ground_state()?;
    let sr = run.scaling(&gs, None)?;
    let op = LinearizedOp::kirchhoff(&sr, sc.kind)?;
    let mut opts = SpectrumOptions {
        dense: sc.dense,
        ..SpectrumOptions::default()
    };
    // Above half the continuum threshold `m` eigenvalues cluster; they are
    // reported with looser residuals.
    opts.lanczos.loose_above = Some(0.5 * c.model.m);
    let report = spectrum(&op, sc.sector, sc.k, &opts)?;

    let mut art = run.artifacts(run.manifest("spectrum", &["model", "grid", "solver", "spectrum"]));
    art.manifest.solver.set("operator", format!("{:?}", sc.kind).to_lowercase()).set("sector", sc.sector.label()).set("k", sc.k).set("dense", sc.dense);
    let dim = c.model.dim;
    let mut csv = String::from("index,eigenvalue,residual,in_kernel,translation_distance\n");
    let mut distances = Vec::new();
    for (i, (l, v)) in report.eigenvalues.iter().zip(&report.eigenfields).enumerate() {
        let kernel = l.abs() < report.kernel_tol;
        let dist = if kernel {
            let d = (0..dim)
                .map(|axis| distance_to_translation_mode(&op, v, axis))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            distances.push(d);
            num(d)
        } else {
            String::new()
        };
        csv.push_str(&format!("{i},{},{},{kernel},{dist}\n", num(*l), num(report.residuals[i])));
    }
    let mut r = Section::new();
    r.set_f64_list("eigenvalues", &report.eigenvalues)
        .set_f64_list("residuals", &report.residuals)
        .set("kernel_dim", report.kernel_dim)
        .set_f64("kernel_tol", report.kernel_tol)
        .set_f64("gap", report.gap)
        .set("negative_count", report.negative_count())
        .set("iterations", report.iterations)
        .set_f64("kirchhoff_coefficient", op.c())
        .set_f64_list("kernel_translation_distances", &distances);
    art.manifest.results = r;
    art.write("spectrum_csv", "spectrum.csv", csv.as_bytes())?;
    let pts = report.eigenvalues.iter().enumerate().map(|(i, l)| (i as f64, *l));
    art.write("eigenvalues", "eigenvalues.dat", plot_data("index eigenvalue", pts).as_bytes())?;

    let expected = match sc.sector {
        Sector::Full => dim,
        Sector::Even => 0,
        Sector::Odd => 1,
    };
    let mut failures = Vec::new();
    if report.kernel_dim != expected {
        failures.push(format!(
            "kernel dimension {} in the {} sector, expected {expected}",
            report.kernel_dim,
            sc.sector.label()
        ));
    }
    if sc.sector == Sector::Even && !(report.gap > 0.0) {
        failures.push("no spectral gap in the even sector".into());
    }
    run.finish(art, failures)
}

fn semiclassical_setup(run: &Run<'_>) -> Result<Semiclassical, Failure> {
    let c = run.config;
    let pot = c.require_potential()?.clone();
    let (gs, _) = run.ground_state()?;
    let sr = run.scaling(&gs, None)?;
    Ok(Semiclassical::new(&sr, pot, c.semiclassical.lab_dx)?)
}

fn add_potential(m: &mut RunManifest, c: &Config) {
    if let Some(p) = &c.potential {
        let mut s = Section::new();
        s.set("kind", p.kind().label())
            .set_f64_list("x0", &p.x0()[..c.model.dim])
            .set_f64("alpha", p.alpha)
            .set_f64("r0", p.r0)
            .set_f64("inf_V", p.floor)
            .set_f64("sup_V", p.ceiling);
        m.params.set_section("potential", s);
    }
    let sc = &c.semiclassical;
    m.solver
        .set_f64("lab_dx", sc.lab_dx)
        .set("scan_points", sc.minimize.scan_points)
        .set_f64("step_tol", sc.minimize.corrector.step_tol)
        .set_f64("gradient_tol", sc.minimize.corrector.gradient_tol)
        .set_f64("linear_tol", sc.minimize.corrector.linear_tol)
        .set_f64("residual_tol", sc.residual_tol);
    if let Some(d) = sc.minimize.delta {
        m.solver.set_f64("delta", d);
    }
}

const SEMI_SECTIONS: [&str; 5] = ["model", "grid", "solver", "potential", "semiclassical"];

pub fn semiclassical(run: &Run<'_>) -> Outcome {
    let c = run.config;
    let eps = c
        .semiclassical
        .eps
        .ok_or_else(|| Failure::Config("missing required key 'eps' in [semiclassical]".into()))?;
    let min_eps = fkl_core::semiclassical::MIN_CELLS_PER_CORE * c.semiclassical.lab_dx;
    if eps < min_eps * (1.0 - 1e-12) {
        return Err(Failure::Config(format!(
            "[semiclassical] eps = {eps} below the resolution guard {min_eps} (32 · lab_dx)"
        )));
    }
    c.require_potential()?;
    let setup = semiclassical_setup(run)?;
    let opts = SweepOptions {
        minimize: c.semiclassical.minimize.clone(),
        newton_check: c.newton_check,
    };
    let row = sweep_row(&setup, eps, &opts)?;
    let k = expansion_constants(&setup)?;
    let dim = c.model.dim;

    let mut art = run.artifacts(run.manifest("semiclassical", &SEMI_SECTIONS));
    add_potential(&mut art.manifest, c);
    let mut r = Section::new();
    r.set_f64("eps", eps)
        .set_f64_list("y", &row.y[..dim])
        .set_f64("offset", row.offset)
        .set_f64("phi_norm_eps", row.phi_norm)
        .set_f64("phi_norm_over_eps_halfN", row.phi_norm_scaled)
        .set_f64("j_value", row.j_value)
        .set_f64("I_residual", row.energy_residual)
        .set_f64("eq_residual_scaled", row.residual_scaled)
        .set("interior", row.interior)
        .set("corrector_iterations", row.corrector_iterations)
        .set_f64("orthogonality", row.orthogonality)
        .set_f64("A", k.a)
        .set_f64("B", k.b);
    if let Some(g) = row.newton_gap {
        r.set_f64("newton_gap", g);
    }
    art.manifest.results = r;

    let mut csv = String::from(if dim == 2 { "y1,y2,j_value\n" } else { "y,j_value\n" });
    for (y, j) in &row.scan {
        if dim == 2 {
            csv.push_str(&format!("{},{},{}\n", num(y[0]), num(y[1]), num(*j)));
        } else {
            csv.push_str(&format!("{},{}\n", num(y[0]), num(*j)));
        }
    }
    art.write("j_scan_csv", "semiclassical.csv", csv.as_bytes())?;
    let x0 = setup.potential().x0();
    let slice = row
        .scan
        .iter()
        .filter(|(y, _)| dim == 1 || (y[1] - x0[1]).abs() < 1e-12)
        .map(|(y, j)| (y[0], *j));
    art.write("j_curve", "j_curve.dat", plot_data("y j_eps(y)", slice).as_bytes())?;

    let mut failures = Vec::new();
    if !row.interior {
        failures.push(format!("minimizer {:?} not interior", &row.y[..dim]));
    }
    if !(row.residual_scaled <= c.semiclassical.residual_tol) {
        failures.push(format!(
            "equation residual {:e}·ε^(N/2) above {:e}",
            row.residual_scaled, c.semiclassical.residual_tol
        ));
    }
    run.finish(art, failures)
}

/// The numbers of one sweep row that reach the outputs.
#[derive(Debug, Clone, PartialEq)]
struct RowData {
    eps: f64,
    y: [f64; 2],
    offset: f64,
    phi_norm: f64,
    phi_norm_scaled: f64,
    j_value: f64,
    energy_residual: f64,
    residual_scaled: f64,
    interior: bool,
    newton_gap: f64,
}

impl RowData {
    fn to_text(&self) -> String {
        let f = format_f64;
        format!(
            "{} {} {} {} {} {} {} {} {} {} {}\n",
            f(self.eps),
            f(self.y[0]),
            f(self.y[1]),
            f(self.offset),
            f(self.phi_norm),
            f(self.phi_norm_scaled),
            f(self.j_value),
            f(self.energy_residual),
            f(self.residual_scaled),
            self.interior,
            f(self.newton_gap)
        )
    }

    fn from_text(text: &str) -> Option<Self> {
        let t: Vec<&str> = text.split_whitespace().collect();
        if t.len() != 11 {
            return None;
        }
        let g = |i: usize| t[i].parse::<f64>().ok();
        Some(Self {
            eps: g(0)?,
            y: [g(1)?, g(2)?],
            offset: g(3)?,
            phi_norm: g(4)?,
            phi_norm_scaled: g(5)?,
            j_value: g(6)?,
            energy_residual: g(7)?,
            residual_scaled: g(8)?,
            interior: t[9].parse().ok()?,
            newton_gap: g(10)?,
        })
    }
}

enum RowOutcome {
    Skipped,
    Done(RowData),
    Failed(String),
}

pub fn sweep(run: &Run<'_>) -> Outcome {
    let c = run.config;
    let mut eps_list = c
        .sweep_eps
        .clone()
        .ok_or_else(|| Failure::Config("missing required key 'eps' in [sweep]".into()))?;
    c.require_potential()?;
    eps_list.sort_by(|a, b| b.partial_cmp(a).expect("finite ε"));
    eps_list.dedup();
    let setup = semiclassical_setup(run)?;
    let opts = SweepOptions {
        minimize: c.semiclassical.minimize.clone(),
        newton_check: c.newton_check,
    };
    let canonical = c.canonical(&["model", "grid", "solver", "potential", "semiclassical", "sweep"]);

    let outcomes: Vec<RowOutcome> = eps_list
        .par_iter()
        .map(|&eps| {
            if !setup.resolves(eps) {
                log::warn!(
                    "ε = {eps} is below the resolution guard {} (32 · lab_dx); row SKIPPED",
                    setup.min_eps()
                );
                return RowOutcome::Skipped;
            }
            let key = content_hash(&[CODE_VERSION, "sweep-row", &canonical, &format_f64(eps)]);
            if let Some(row) = run
                .cache
                .load("row", &key)
                .and_then(|b| String::from_utf8(b).ok())
                .and_then(|t| RowData::from_text(&t))
            {
                log::info!("ε = {eps}: row loaded from cache");
                return RowOutcome::Done(row);
            }
            log::info!("ε = {eps}: minimizing the reduced functional");
            match sweep_row(&setup, eps, &opts) {
                Ok(r) => {
                    let row = RowData {
                        eps,
                        y: r.y,
                        offset: r.offset,
                        phi_norm: r.phi_norm,
                        phi_norm_scaled: r.phi_norm_scaled,
                        j_value: r.j_value,
                        energy_residual: r.energy_residual,
                        residual_scaled: r.residual_scaled,
                        interior: r.interior,
                        newton_gap: r.newton_gap.unwrap_or(f64::NAN),
                    };
                    // Completed rows persist immediately so that an
                    // interrupted sweep resumes from here.
                    run.cache.store("row", &key, row.to_text().as_bytes());
                    RowOutcome::Done(row)
                }
                Err(e) => {
                    log::error!("ε = {eps}: {e}");
                    RowOutcome::Failed(e.to_string())
                }
            }
        })
        .collect();

    let dim = c.model.dim;
    let k = expansion_constants(&setup)?;
    let mut art = run.artifacts(run.manifest("sweep", &["model", "grid", "solver", "potential", "semiclassical", "sweep"]));
    add_potential(&mut art.manifest, c);
    art.manifest.solver.set_f64_list("sweep_eps", &eps_list).set("newton_check", c.newton_check);

    let y_cols = if dim == 2 { "y1,y2" } else { "y" };
    let mut csv = format!(
        "eps,{y_cols},phi_norm_eps,phi_norm_over_eps_halfN,j_value,I_residual_slope,I_residual,offset,eq_residual_scaled,interior,newton_gap,status\n"
    );
    let blank_y = if dim == 2 { "," } else { "" };
    let mut prev: Option<&RowData> = None;
    let mut done: Vec<&RowData> = Vec::new();
    let mut failed = Vec::new();
    let mut skipped = 0;
    for (eps, outcome) in eps_list.iter().zip(&outcomes) {
        match outcome {
            RowOutcome::Skipped => {
                skipped += 1;
                csv.push_str(&format!("{},{blank_y},,,,,,,,,,SKIPPED\n", num(*eps)));
            }
            RowOutcome::Failed(msg) => {
                failed.push(format!("ε = {eps}: {msg}"));
                csv.push_str(&format!("{},{blank_y},,,,,,,,,,FAILED\n", num(*eps)));
            }
            RowOutcome::Done(row) => {
                let slope = match prev {
                    Some(p) => num((row.energy_residual / p.energy_residual).abs().ln() / (row.eps / p.eps).ln()),
                    None => "NA".into(),
                };
                let y = if dim == 2 {
                    format!("{},{}", num(row.y[0]), num(row.y[1]))
                } else {
                    num(row.y[0])
                };
                csv.push_str(&format!(
                    "{},{y},{},{},{},{slope},{},{},{},{},{},ok\n",
                    num(row.eps),
                    num(row.phi_norm),
                    num(row.phi_norm_scaled),
                    num(row.j_value),
                    num(row.energy_residual),
                    num(row.offset),
                    num(row.residual_scaled),
                    row.interior,
                    num(row.newton_gap)
                ));
                prev = Some(row);
                done.push(row);
            }
        }
    }
    art.write("sweep_csv", "sweep.csv", csv.as_bytes())?;
    let pts = done.iter().map(|r| (r.eps, r.phi_norm_scaled));
    art.write("phi_scaled", "phi_scaled.dat", plot_data("eps ||phi||_eps/eps^(N/2)", pts).as_bytes())?;

    let eps_done: Vec<f64> = done.iter().map(|r| r.eps).collect();
    let res_done: Vec<f64> = done.iter().map(|r| r.energy_residual).collect();
    let clip = |v: f64| if v < OFFSET_FLOOR { 0.0 } else { v };
    let mut r = Section::new();
    r.set_f64("A", k.a)
        .set_f64("B", k.b)
        .set("rows_done", done.len())
        .set("rows_skipped", skipped)
        .set("rows_failed", failed.len())
        .set_f64(
            "I_residual_slope",
            if done.len() >= 2 { loglog_slope(&eps_done, &res_done) } else { f64::NAN },
        )
        .set_f64_list(
            "halving_ratios",
            &done.windows(2).map(|w| w[0].phi_norm_scaled / w[1].phi_norm_scaled).collect::<Vec<_>>(),
        )
        .set(
            "offsets_decreasing",
            done.windows(2).all(|w| {
                let (a, b) = (clip(w[0].offset), clip(w[1].offset));
                if a == 0.0 {
                    b == 0.0
                } else {
                    b < a
                }
            }),
        );
    art.manifest.results = r;

    let mut failures = Vec::new();
    for row in &done {
        if !row.interior {
            failures.push(format!("ε = {}: minimizer not interior", row.eps));
        }
        if !(row.residual_scaled <= c.semiclassical.residual_tol) {
            failures.push(format!("ε = {}: equation residual {:e}·ε^(N/2)", row.eps, row.residual_scaled));
        }
    }
    let outcome = run.finish(art, failures);
    if !failed.is_empty() {
        return Err(Failure::Solver(failed.join("; ")));
    }
    outcome
}
