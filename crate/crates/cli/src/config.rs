//! Run configuration: flat `key = value` text with `[section]` headers.
//!
//! Lines starting with `#` are comments. Keys are unique within a section
//! and unknown sections or keys are errors. Every value is checked against
//! the preconditions of the library before anything is computed;
//! [`Config::load`] reports the first failing constraint.
//!
//! ```text
//! [model]          a, b, m, s, p, N
//! [grid]           L, n, exterior (periodic | zero-padded-<f>)
//! [solver]         tol, petviashvili_tol, max_petviashvili, newton_tol,
//!                  max_newton, kirchhoff_tol
//! [scale]          b_list
//! [spectrum]       operator (lplus | tplus), sector (full | even | odd),
//!                  k, dense
//! [potential]      kind (quadratic_well | quartic_well | cosine_well |
//!                  custom_table), x0, and per kind: curvature, height |
//!                  coefficient, height | amplitude, frequency |
//!                  radii, values, holder
//! [semiclassical]  eps, lab_dx, delta, scan_points, step_tol, gradient_tol,
//!                  linear_tol, max_iter, residual_tol
//! [sweep]          eps (list), newton_check
//! [output]         dir
//! ```
//!
//! `V(x₀)` is the model's `m`. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use fkl_core::ground_state::{default_exterior, BaseParams, SolveOptions};
use fkl_core::linearized::{OperatorKind, Sector};
use fkl_core::scaling::KirchhoffParams;
use fkl_core::semiclassical::{CorrectorOptions, MinimizeOptions, PotentialKind, PotentialSpec, DEFAULT_LAB_DX};
use fkl_core::{make_grid, Exterior, Grid};

/// A configuration error, naming the offending entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Res<T> {
    Err(ConfigError(msg.into()))
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["a", "b", "m", "s", "p", "N"]),
    ("grid", &["L", "n", "exterior"]),
    (
        "solver",
        &["tol", "petviashvili_tol", "max_petviashvili", "newton_tol", "max_newton", "kirchhoff_tol"],
    ),
    ("scale", &["b_list"]),
    ("spectrum", &["operator", "sector", "k", "dense"]),
    (
        "potential",
        &[
            "kind", "x0", "curvature", "height", "coefficient", "amplitude", "frequency", "radii", "values",
            "holder",
        ],
    ),
    (
        "semiclassical",
        &[
            "eps", "lab_dx", "delta", "scan_points", "step_tol", "gradient_tol", "linear_tol", "max_iter",
            "residual_tol",
        ],
    ),
    ("sweep", &["eps", "newton_check"]),
    ("output", &["dir"]),
];

/// Parsed but not yet interpreted `section → key → value` text.
pub type RawConfig = BTreeMap<String, BTreeMap<String, String>>;

pub fn parse_raw(text: &str) -> Res<RawConfig> {
    let mut raw = RawConfig::new();
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError(format!("line {n}: unterminated section header")))?
                .trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return err(format!("line {n}: unknown section [{name}]"));
            }
            if raw.contains_key(name) {
                return err(format!("line {n}: section [{name}] appears twice"));
            }
            raw.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let Some(section) = &current else {
            return err(format!("line {n}: entry outside of any [section]"));
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {n}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        let allowed = SCHEMA.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return err(format!("line {n}: unknown key '{key}' in [{section}]"));
        }
        let entries = raw.get_mut(section).expect("section inserted");
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return err(format!("line {n}: duplicate key '{key}' in [{section}]"));
        }
    }
    Ok(raw)
}

/// Typed access to one section with defaults.
struct View<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, String>>,
}

impl View<'_> {
    fn text(&self, key: &str) -> Option<&str> {
        self.entries.and_then(|e| e.get(key)).map(String::as_str)
    }

    fn required(&self, key: &str) -> Res<&str> {
        self.text(key)
            .ok_or_else(|| ConfigError(format!("missing required key '{key}' in [{}]", self.name)))
    }

    fn num(&self, key: &str, text: &str) -> Res<f64> {
        let v: f64 = text
            .parse()
            .map_err(|_| ConfigError(format!("[{}] {key} = '{text}' is not a number", self.name)))?;
        if !v.is_finite() {
            return err(format!("[{}] {key} must be finite", self.name));
        }
        Ok(v)
    }

    fn f64_req(&self, key: &str) -> Res<f64> {
        let t = self.required(key)?;
        self.num(key, t)
    }

    fn f64_or(&self, key: &str, default: f64) -> Res<f64> {
        self.text(key).map_or(Ok(default), |t| self.num(key, t))
    }

    fn f64_opt(&self, key: &str) -> Res<Option<f64>> {
        self.text(key).map(|t| self.num(key, t)).transpose()
    }

    fn positive(&self, key: &str, v: f64) -> Res<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            err(format!("[{}] {key} must be positive (got {v})", self.name))
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Res<usize> {
        match self.text(key) {
            None => Ok(default),
            Some(t) => t
                .parse()
                .map_err(|_| ConfigError(format!("[{}] {key} = '{t}' is not a non-negative integer", self.name))),
        }
    }

    fn usize_req(&self, key: &str) -> Res<usize> {
        let t = self.required(key)?;
        t.parse()
            .map_err(|_| ConfigError(format!("[{}] {key} = '{t}' is not a non-negative integer", self.name)))
    }

    fn bool_or(&self, key: &str, default: bool) -> Res<bool> {
        match self.text(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(t) => err(format!("[{}] {key} = '{t}' must be true or false", self.name)),
        }
    }

    fn list_opt(&self, key: &str) -> Res<Option<Vec<f64>>> {
        let Some(t) = self.text(key) else { return Ok(None) };
        let items: Vec<f64> = t
            .split(',')
            .map(|x| self.num(key, x.trim()))
            .collect::<Res<_>>()?;
        if items.is_empty() {
            return err(format!("[{}] {key} is an empty list", self.name));
        }
        Ok(Some(items))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub s: f64,
    pub p: f64,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct SpectrumConfig {
    pub kind: OperatorKind,
    pub sector: Sector,
    pub k: usize,
    pub dense: bool,
}

#[derive(Debug, Clone)]
pub struct SemiclassicalConfig {
    pub eps: Option<f64>,
    pub lab_dx: f64,
    pub minimize: MinimizeOptions,
    /// Bound on `‖equation residual‖/ε^{N/2}` required by the certificate.
    pub residual_tol: f64,
}

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub raw: RawConfig,
    pub model: Model,
    pub base: BaseParams,
    pub kirchhoff: KirchhoffParams,
    pub grid: Grid,
    pub exterior: Exterior,
    pub solve: SolveOptions,
    pub kirchhoff_tol: f64,
    pub b_list: Option<Vec<f64>>,
    pub spectrum: SpectrumConfig,
    pub potential: Option<PotentialSpec>,
    pub semiclassical: SemiclassicalConfig,
    pub sweep_eps: Option<Vec<f64>>,
    pub newton_check: bool,
    pub out_dir: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Res<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Res<Self> {
        let raw = parse_raw(text)?;
        let view = |name: &'static str| View {
            name,
            entries: raw.get(name),
        };
        let lib = |e: fkl_core::FklError| ConfigError(e.to_string());

        let mv = view("model");
        if mv.entries.is_none() {
            return err("missing required section [model]");
        }
        let dim = mv.usize_req("N")?;
        if dim != 1 && dim != 2 {
            return err(format!("[model] N = {dim}: unsupported dimension (only 1 and 2)"));
        }
        let s = mv.f64_req("s")?;
        let p = mv.f64_req("p")?;
        let base = BaseParams::new(s, p, dim).map_err(lib)?;
        let model = Model {
            a: mv.f64_or("a", 1.0)?,
            b: mv.f64_or("b", 0.0)?,
            m: mv.f64_or("m", 1.0)?,
            s,
            p,
            dim,
        };
        let kirchhoff = KirchhoffParams::new(model.a, model.b, model.m, base).map_err(lib)?;

        let gv = view("grid");
        if gv.entries.is_none() {
            return err("missing required section [grid]");
        }
        let half_width = gv.f64_req("L")?;
        let n = gv.usize_req("n")?;
        let grid = make_grid(dim, half_width, n).map_err(lib)?;
        let exterior = match gv.text("exterior") {
            Some(t) => Exterior::parse(t).map_err(lib)?,
            None => default_exterior(dim),
        };

        let sv = view("solver");
        let defaults = SolveOptions::default();
        let solve = SolveOptions {
            tol: sv.positive("tol", sv.f64_or("tol", defaults.tol)?)?,
            petviashvili_tol: sv.positive(
                "petviashvili_tol",
                sv.f64_or("petviashvili_tol", defaults.petviashvili_tol)?,
            )?,
            max_petviashvili: sv.usize_or("max_petviashvili", defaults.max_petviashvili)?,
            newton_tol: sv.positive("newton_tol", sv.f64_or("newton_tol", defaults.newton_tol)?)?,
            max_newton: sv.usize_or("max_newton", defaults.max_newton)?,
            exterior: Some(exterior),
            initial: None,
        };
        if solve.max_petviashvili == 0 {
            return err("[solver] max_petviashvili must be at least 1");
        }
        let kirchhoff_tol = sv.positive("kirchhoff_tol", sv.f64_or("kirchhoff_tol", 1e-7)?)?;

        let scv = view("scale");
        let b_list = scv.list_opt("b_list")?;
        if let Some(list) = &b_list {
            for &b in list {
                kirchhoff.with_b(b).map_err(|e| ConfigError(format!("[scale] b_list: {e}")))?;
            }
        }

        let spv = view("spectrum");
        let kind = match spv.text("operator").unwrap_or("lplus") {
            "lplus" => OperatorKind::Lplus,
            "tplus" => OperatorKind::Tplus,
            t => return err(format!("[spectrum] operator = '{t}' (expected lplus or tplus)")),
        };
        let sector = match spv.text("sector").unwrap_or("full") {
            "full" => Sector::Full,
            "even" => Sector::Even,
            "odd" => Sector::Odd,
            t => return err(format!("[spectrum] sector = '{t}' (expected full, even or odd)")),
        };
        let k = spv.usize_or("k", 6)?;
        if k == 0 || k > 40 {
            return err(format!("[spectrum] k = {k} must lie in 1..=40"));
        }
        let dense = spv.bool_or("dense", false)?;
        if dense && (dim != 1 || n > fkl_core::linearized::DENSE_MAX_POINTS) {
            return err(format!(
                "[spectrum] dense = true needs N = 1 and n <= {}",
                fkl_core::linearized::DENSE_MAX_POINTS
            ));
        }
        let spectrum = SpectrumConfig { kind, sector, k, dense };

        let potential = match raw.get("potential") {
            None => None,
            Some(_) => Some(parse_potential(&view("potential"), &model)?),
        };

        let sc = view("semiclassical");
        let eps = sc.f64_opt("eps")?.map(|e| sc.positive("eps", e)).transpose()?;
        let lab_dx = sc.positive("lab_dx", sc.f64_or("lab_dx", DEFAULT_LAB_DX)?)?;
        let cdef = CorrectorOptions::default();
        let corrector = CorrectorOptions {
            step_tol: sc.positive("step_tol", sc.f64_or("step_tol", cdef.step_tol)?)?,
            gradient_tol: sc.positive("gradient_tol", sc.f64_or("gradient_tol", cdef.gradient_tol)?)?,
            linear_tol: sc.positive("linear_tol", sc.f64_or("linear_tol", cdef.linear_tol)?)?,
            max_iter: sc.usize_or("max_iter", cdef.max_iter)?,
            max_linear: cdef.max_linear,
        };
        let mdef = MinimizeOptions::default();
        let delta = sc.f64_opt("delta")?;
        let scan_points = sc.usize_or("scan_points", mdef.scan_points)?;
        if scan_points < 3 || scan_points % 2 == 0 {
            return err(format!("[semiclassical] scan_points = {scan_points} must be odd and >= 3"));
        }
        if let (Some(d), Some(pot)) = (delta, &potential) {
            if !(d > 0.0 && d < pot.r0) {
                return err(format!("[semiclassical] delta = {d} must lie in (0, r0 = {})", pot.r0));
            }
        }
        let semiclassical = SemiclassicalConfig {
            eps,
            lab_dx,
            minimize: MinimizeOptions {
                delta,
                scan_points,
                polish: true,
                corrector,
            },
            residual_tol: sc.positive("residual_tol", sc.f64_or("residual_tol", 1e-6)?)?,
        };

        let swv = view("sweep");
        let sweep_eps = swv.list_opt("eps")?;
        if let Some(list) = &sweep_eps {
            if let Some(e) = list.iter().find(|e| !(**e > 0.0)) {
                return err(format!("[sweep] eps entries must be positive (got {e})"));
            }
        }
        let newton_check = swv.bool_or("newton_check", true)?;

        let out_dir = view("output").text("dir").map(PathBuf::from);
        Ok(Self {
            raw,
            model,
            base,
            kirchhoff,
            grid,
            exterior,
            solve,
            kirchhoff_tol,
            b_list,
            spectrum,
            potential,
            semiclassical,
            sweep_eps,
            newton_check,
            out_dir,
        })
    }

    /// Canonical text of the named sections (sorted keys, absent sections
    /// omitted) for content hashing.
    pub fn canonical(&self, sections: &[&str]) -> String {
        let mut out = String::new();
        for name in sections {
            if let Some(entries) = self.raw.get(*name) {
                out.push_str(&format!("[{name}]\n"));
                for (k, v) in entries {
                    out.push_str(&format!("{k}={v}\n"));
                }
            }
        }
        out
    }

    /// The validated potential; an error when the section is absent.
    pub fn require_potential(&self) -> Res<&PotentialSpec> {
        self.potential
            .as_ref()
            .ok_or_else(|| ConfigError("missing required section [potential]".into()))
    }
}

fn parse_potential(v: &View<'_>, model: &Model) -> Res<PotentialSpec> {
    let kind = match v.required("kind")? {
        "quadratic_well" => PotentialKind::QuadraticWell {
            curvature: v.f64_req("curvature")?,
            height: v.f64_req("height")?,
        },
        "quartic_well" => PotentialKind::QuarticWell {
            coefficient: v.f64_req("coefficient")?,
            height: v.f64_req("height")?,
        },
        "cosine_well" => PotentialKind::CosineWell {
            amplitude: v.f64_req("amplitude")?,
            frequency: v.f64_req("frequency")?,
        },
        "custom_table" => PotentialKind::CustomTable {
            radii: v.list_opt("radii")?.ok_or_else(|| ConfigError("missing required key 'radii' in [potential]".into()))?,
            values: v
                .list_opt("values")?
                .ok_or_else(|| ConfigError("missing required key 'values' in [potential]".into()))?,
            holder: v.f64_req("holder")?,
        },
        t => {
            return err(format!(
                "[potential] kind = '{t}' (expected quadratic_well, quartic_well, cosine_well or custom_table)"
            ))
        }
    };
    let x0_list = v.list_opt("x0")?.unwrap_or_else(|| vec![0.0; model.dim]);
    if x0_list.len() != model.dim {
        return err(format!("[potential] x0 needs {} coordinate(s), got {}", model.dim, x0_list.len()));
    }
    let x0 = [x0_list[0], x0_list.get(1).copied().unwrap_or(0.0)];
    PotentialSpec::new(kind, model.dim, x0, model.m, model.s).map_err(|e| ConfigError(format!("[potential] {e}")))
}
