//! Sectioned `key = value` experiment configuration.
//!
//! ```text
//! [grid]
//! nx = 200
//! nv = 100
//! [physics]
//! epsilon = 1e-3
//! sigma = vanishing_quartic
//! [solver]
//! dt = dx_over_3
//! t_max = 0.1
//! [output]
//! dir = out
//! ```
//!
//! `#` starts a comment. Unknown sections and keys are rejected with the
//! nearest valid name.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::cross_section::{CrossSectionModel, LowRankKernel, Problem};
use crate::diagnostics::{ConditionMethod, DtRule};
use crate::error::{Error, Result};
use crate::field::KineticField;
use crate::mesh::SpatialMesh;
use crate::operators::EvenStencil;
use crate::quadrature::AngularQuadrature;
use crate::stepper::{Scheme, SolverConfig, TimeOrder};

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "grid",
        &[
            "geometry",
            "x_min",
            "x_max",
            "y_min",
            "y_max",
            "nx",
            "ny",
            "nv",
            "quadrature",
            "sweep_nx",
            "sweep_nv",
        ],
    ),
    (
        "physics",
        &[
            "epsilon",
            "epsilons",
            "sigma",
            "sigma_value",
            "kernel",
            "initial",
            "initial_file",
        ],
    ),
    (
        "solver",
        &[
            "scheme",
            "order",
            "dt",
            "t_max",
            "tol",
            "max_iter",
            "restart",
            "warm_start",
            "stencil",
            "condition_method",
        ],
    ),
    ("output", &["mode", "dir", "prefix", "times", "reference"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Slab1d,
    Planar2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    Midpoint,
    Gauss,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPreset {
    Constant(f64),
    /// `100 (x − 1)⁴`.
    VanishingQuartic,
    /// `0.02` on `[0.35, 0.65] ∪ [1.35, 1.65]`, `1` elsewhere.
    Striped,
    /// `0.02` on two squares of side 0.1 around `(0.3, 0.3)` and `(0.7, 0.7)`.
    Blocks2d,
}

impl SigmaPreset {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Self::Constant(c) => c,
            Self::VanishingQuartic => 100.0 * (x - 1.0).powi(4),
            Self::Striped => {
                let weak = (0.35..=0.65).contains(&x) || (1.35..=1.65).contains(&x);
                if weak {
                    0.02
                } else {
                    1.0
                }
            }
            Self::Blocks2d => {
                let inside = |lo: f64, hi: f64| (lo..=hi).contains(&x) && (lo..=hi).contains(&y);
                if inside(0.25, 0.35) || inside(0.65, 0.75) {
                    0.02
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Isotropic,
    /// `σ₀ (1 + Ω·Ω′)`.
    Degree1,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    /// `f = 2` on `0.8 < x < 1.2`, zero elsewhere.
    Box,
    /// `1 + exp(−40((x − ½)² + (y − ½)²))`.
    Gaussian2d,
    /// Isotropic density samples, one per cell, read from a CSV file.
    Custom(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtSpec {
    Rule(DtRule),
    /// Every calibration candidate; condition mode only.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Condition,
    Bench,
    ApSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    None,
    Explicit,
    Diffusion,
    /// Explicit for `ε ≥ 0.1`, diffusion otherwise.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: GeometryKind,
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub nv: usize,
    pub quadrature: QuadratureKind,
    pub sweep_nx: Vec<usize>,
    pub sweep_nv: Vec<usize>,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub sigma: SigmaPreset,
    pub kernel: KernelChoice,
    pub initial: InitialPreset,
    pub scheme: Scheme,
    pub order: TimeOrder,
    pub dt: DtSpec,
    pub t_max: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub warm_start: bool,
    pub stencil: EvenStencil,
    /// `None` picks dense when it fits under the assembly cap.
    pub condition_method: Option<ConditionMethod>,
    pub mode: Mode,
    pub dir: PathBuf,
    pub prefix: String,
    /// Snapshot times; empty means `t_max` only.
    pub times: Vec<f64>,
    pub reference: ReferenceKind,
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
    last_line: usize,
}

impl Raw {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn missing(&self, section: &str, key: &str) -> Error {
        let line = self
            .sections
            .get(section)
            .copied()
            .unwrap_or(self.last_line);
        Error::config(line, format!("missing required key `{key}` in [{section}]"))
    }

    fn parse<T>(
        &self,
        section: &str,
        key: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).ok_or_else(|| {
                Error::config(e.line, format!("`{key}` expects {what}, got `{}`", e.value))
            }),
        }
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse(section, key, "a number", parse_f64)
    }

    fn usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.parse(section, key, "a non-negative integer", |v| v.parse().ok())
    }

    fn f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse(section, key, "a comma-separated list of numbers", |v| {
            split_list(v).map(parse_f64).collect()
        })
    }

    fn usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        self.parse(section, key, "a comma-separated list of integers", |v| {
            split_list(v).map(|s| s.parse().ok()).collect()
        })
    }

    fn choice<T: Copy>(
        &self,
        section: &str,
        key: &str,
        options: &[(&str, T)],
    ) -> Result<Option<T>> {
        let names: Vec<&str> = options.iter().map(|o| o.0).collect();
        self.parse(
            section,
            key,
            &format!("one of {}", names.join(" | ")),
            |v| options.iter().find(|o| o.0 == v).map(|o| o.1),
        )
    }

    fn line(&self, section: &str, key: &str) -> usize {
        self.get(section, key).map_or(self.last_line, |e| e.line)
    }
}

fn parse_f64(v: &str) -> Option<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn nearest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(word, c), c))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c)
}

fn tokenize(text: &str) -> Result<Raw> {
    let mut raw = Raw {
        entries: BTreeMap::new(),
        sections: BTreeMap::new(),
        last_line: 0,
    };
    let mut section: Option<&'static str> = None;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        raw.last_line = n;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config(n, format!("malformed section header `{line}`")))?
                .trim();
            let Some(&(known, _)) = SCHEMA.iter().find(|(s, _)| *s == name) else {
                let hint = nearest(name, SCHEMA.iter().map(|s| s.0)).unwrap_or("grid");
                return Err(Error::config(
                    n,
                    format!("unknown section [{name}]; did you mean [{hint}]?"),
                ));
            };
            if raw.sections.insert(known.to_string(), n).is_some() {
                return Err(Error::config(n, format!("section [{known}] appears twice")));
            }
            section = Some(known);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(n, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .ok_or_else(|| Error::config(n, format!("key `{key}` appears before any section")))?;
        let keys = SCHEMA
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|s| s.1)
            .unwrap_or(&[]);
        if !keys.contains(&key) {
            let hint = nearest(key, keys.iter().copied()).unwrap_or("");
            return Err(Error::config(
                n,
                format!("unknown key `{key}` in [{sec}]; did you mean `{hint}`?"),
            ));
        }
        if value.is_empty() {
            return Err(Error::config(n, format!("key `{key}` has no value")));
        }
        let prev = raw.entries.insert(
            (sec.to_string(), key.to_string()),
            Entry {
                value: value.trim_matches('"').to_string(),
                line: n,
            },
        );
        if prev.is_some() {
            return Err(Error::config(
                n,
                format!("key `{key}` is set twice in [{sec}]"),
            ));
        }
    }
    Ok(raw)
}

const SCHEMES: &[(&str, Scheme)] = &[
    ("parity_cg", Scheme::ParityCg),
    ("nonsym_gmres", Scheme::NonsymGmres),
    ("aniso_gmres", Scheme::AnisoGmres),
];
const MODES: &[(&str, Mode)] = &[
    ("run", Mode::Run),
    ("condition", Mode::Condition),
    ("bench", Mode::Bench),
    ("ap_sweep", Mode::ApSweep),
];
const GEOMETRIES: &[(&str, GeometryKind)] = &[
    ("slab1d", GeometryKind::Slab1d),
    ("planar2d", GeometryKind::Planar2d),
];
const QUADRATURES: &[(&str, QuadratureKind)] = &[
    ("midpoint", QuadratureKind::Midpoint),
    ("gauss", QuadratureKind::Gauss),
    ("circle", QuadratureKind::Circle),
];
const KERNELS: &[(&str, KernelChoice)] = &[
    ("isotropic", KernelChoice::Isotropic),
    ("degree1", KernelChoice::Degree1),
];
const STENCILS: &[(&str, EvenStencil)] = &[
    ("compact", EvenStencil::Compact),
    ("centered", EvenStencil::Centered),
];
const METHODS: &[(&str, Option<ConditionMethod>)] = &[
    ("auto", None),
    ("dense", Some(ConditionMethod::Dense)),
    ("iterative", Some(ConditionMethod::Iterative)),
];
const REFERENCES: &[(&str, ReferenceKind)] = &[
    ("none", ReferenceKind::None),
    ("explicit", ReferenceKind::Explicit),
    ("diffusion", ReferenceKind::Diffusion),
    ("auto", ReferenceKind::Auto),
];
const BOOLS: &[(&str, bool)] = &[("true", true), ("false", false)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|o| o.1 == v).map_or("?", |o| o.0)
}

/// Parses and validates a configuration, applying defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_as(text, None)
}

/// Like [`parse_config`], with `mode` taking precedence over `output.mode`
/// before validation (a condition run needs no `t_max`, for example).
pub fn parse_config_as(text: &str, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let raw = tokenize(text)?;
    let forced = mode;
    let geometry = raw
        .choice("grid", "geometry", GEOMETRIES)?
        .unwrap_or(GeometryKind::Slab1d);
    let planar = geometry == GeometryKind::Planar2d;
    let x_min = raw.f64("grid", "x_min")?.unwrap_or(0.0);
    let x_max = raw.f64("grid", "x_max")?.unwrap_or(2.0);
    if x_max <= x_min {
        return Err(Error::config(
            raw.line("grid", "x_max"),
            "x_max must exceed x_min",
        ));
    }
    let y_min = raw.f64("grid", "y_min")?.unwrap_or(x_min);
    let y_max = raw.f64("grid", "y_max")?.unwrap_or(x_max);
    if y_max <= y_min {
        return Err(Error::config(
            raw.line("grid", "y_max"),
            "y_max must exceed y_min",
        ));
    }
    let nx = raw
        .usize("grid", "nx")?
        .ok_or_else(|| raw.missing("grid", "nx"))?;
    if nx == 0 {
        return Err(Error::config(raw.line("grid", "nx"), "nx must be positive"));
    }
    let ny = raw
        .usize("grid", "ny")?
        .unwrap_or(if planar { nx } else { 1 });
    if ny == 0 || (!planar && ny != 1) {
        return Err(Error::config(
            raw.line("grid", "ny"),
            "ny must be positive, and 1 for slab1d",
        ));
    }
    let nv = raw
        .usize("grid", "nv")?
        .ok_or_else(|| raw.missing("grid", "nv"))?;
    let quadrature = raw
        .choice("grid", "quadrature", QUADRATURES)?
        .unwrap_or(if planar {
            QuadratureKind::Circle
        } else {
            QuadratureKind::Midpoint
        });
    if planar != (quadrature == QuadratureKind::Circle) {
        return Err(Error::config(
            raw.line("grid", "quadrature"),
            "planar2d needs the circle quadrature and slab1d needs midpoint or gauss",
        ));
    }
    let min_nv = if planar { 4 } else { 2 };
    if nv < min_nv || nv % 2 == 1 {
        return Err(Error::config(
            raw.line("grid", "nv"),
            format!("nv must be even and at least {min_nv}, got {nv}"),
        ));
    }
    let sweep_nx = raw
        .usize_list("grid", "sweep_nx")?
        .unwrap_or_else(|| vec![nx]);
    let sweep_nv = raw
        .usize_list("grid", "sweep_nv")?
        .unwrap_or_else(|| vec![nv]);
    if sweep_nx.is_empty() || sweep_nv.is_empty() {
        return Err(Error::config(
            raw.line("grid", "sweep_nx"),
            "sweep lists must be non-empty",
        ));
    }

    let epsilon = raw
        .f64("physics", "epsilon")?
        .ok_or_else(|| raw.missing("physics", "epsilon"))?;
    if epsilon <= 0.0 {
        return Err(Error::config(
            raw.line("physics", "epsilon"),
            "epsilon must be positive",
        ));
    }
    let epsilons = raw
        .f64_list("physics", "epsilons")?
        .unwrap_or_else(|| vec![epsilon]);
    if epsilons.is_empty() || epsilons.iter().any(|e| *e <= 0.0) {
        return Err(Error::config(
            raw.line("physics", "epsilons"),
            "epsilons must be a non-empty list of positive numbers",
        ));
    }
    let sigma_value = raw.f64("physics", "sigma_value")?;
    let sigma = match raw.get("physics", "sigma").map(|e| e.value.as_str()) {
        None | Some("constant") => {
            let c = sigma_value.unwrap_or(1.0);
            if c < 0.0 {
                return Err(Error::config(
                    raw.line("physics", "sigma_value"),
                    "sigma_value must be non-negative",
                ));
            }
            SigmaPreset::Constant(c)
        }
        Some(other) => {
            let preset = match other {
                "vanishing_quartic" => SigmaPreset::VanishingQuartic,
                "striped" => SigmaPreset::Striped,
                "blocks2d" => SigmaPreset::Blocks2d,
                _ => {
                    return Err(Error::config(
                        raw.line("physics", "sigma"),
                        format!(
                            "`sigma` expects one of constant | vanishing_quartic | striped | \
                             blocks2d, got `{other}`"
                        ),
                    ))
                }
            };
            if sigma_value.is_some() {
                return Err(Error::config(
                    raw.line("physics", "sigma_value"),
                    "sigma_value only applies to sigma = constant",
                ));
            }
            preset
        }
    };
    if sigma == SigmaPreset::Blocks2d && !planar {
        return Err(Error::config(
            raw.line("physics", "sigma"),
            "blocks2d needs planar2d",
        ));
    }
    let kernel = raw
        .choice("physics", "kernel", KERNELS)?
        .unwrap_or(KernelChoice::Isotropic);
    let initial = match raw.get("physics", "initial").map(|e| e.value.as_str()) {
        None | Some("box") => InitialPreset::Box,
        Some("gaussian2d") => {
            if !planar {
                return Err(Error::config(
                    raw.line("physics", "initial"),
                    "gaussian2d needs planar2d",
                ));
            }
            InitialPreset::Gaussian2d
        }
        Some("custom") => InitialPreset::Custom(
            raw.get("physics", "initial_file")
                .map(|e| PathBuf::from(&e.value))
                .ok_or_else(|| raw.missing("physics", "initial_file"))?,
        ),
        Some(other) => {
            return Err(Error::config(
                raw.line("physics", "initial"),
                format!("`initial` expects one of box | gaussian2d | custom, got `{other}`"),
            ))
        }
    };
    if raw.get("physics", "initial_file").is_some() && !matches!(initial, InitialPreset::Custom(_))
    {
        return Err(Error::config(
            raw.line("physics", "initial_file"),
            "initial_file only applies to initial = custom",
        ));
    }

    let default_scheme = if kernel == KernelChoice::Degree1 {
        Scheme::AnisoGmres
    } else {
        Scheme::ParityCg
    };
    let scheme = raw
        .choice("solver", "scheme", SCHEMES)?
        .unwrap_or(default_scheme);
    if (scheme == Scheme::AnisoGmres) != (kernel == KernelChoice::Degree1) {
        return Err(Error::config(
            raw.line("solver", "scheme"),
            "aniso_gmres is the only scheme for kernel = degree1, and needs it",
        ));
    }
    let order = match raw.usize("solver", "order")? {
        None | Some(1) => TimeOrder::First,
        Some(2) => TimeOrder::Second,
        Some(k) => {
            return Err(Error::config(
                raw.line("solver", "order"),
                format!("order must be 1 or 2, got {k}"),
            ))
        }
    };
    let mode = match forced {
        Some(m) => {
            raw.choice("output", "mode", MODES)?;
            m
        }
        None => raw.choice("output", "mode", MODES)?.unwrap_or(Mode::Run),
    };
    let dt_entry = raw
        .get("solver", "dt")
        .ok_or_else(|| raw.missing("solver", "dt"))?;
    let dt = match dt_entry.value.as_str() {
        "dx_over_3" => DtSpec::Rule(DtRule::DxOver3),
        "dx" => DtSpec::Rule(DtRule::Dx),
        "sweep" => DtSpec::Sweep,
        v => match parse_f64(v) {
            Some(x) if x > 0.0 => DtSpec::Rule(DtRule::Fixed(x)),
            _ => {
                return Err(Error::config(
                    dt_entry.line,
                    format!("`dt` expects a positive number, dx_over_3, dx or sweep, got `{v}`"),
                ))
            }
        },
    };
    if dt == DtSpec::Sweep && mode != Mode::Condition {
        return Err(Error::config(
            dt_entry.line,
            "dt = sweep is only valid in condition mode",
        ));
    }
    let t_max = match raw.f64("solver", "t_max")? {
        Some(t) => t,
        None if matches!(mode, Mode::Condition | Mode::Bench) => 0.0,
        None => return Err(raw.missing("solver", "t_max")),
    };
    if t_max < 0.0 {
        return Err(Error::config(
            raw.line("solver", "t_max"),
            "t_max must be non-negative",
        ));
    }
    let tol = raw.f64("solver", "tol")?.unwrap_or(1e-10);
    if tol <= 0.0 {
        return Err(Error::config(
            raw.line("solver", "tol"),
            "tol must be positive",
        ));
    }
    let max_iter = raw.usize("solver", "max_iter")?.unwrap_or(1000);
    let restart = raw.usize("solver", "restart")?.unwrap_or(30);
    if max_iter == 0 || restart == 0 {
        return Err(Error::config(
            raw.line("solver", if max_iter == 0 { "max_iter" } else { "restart" }),
            "max_iter and restart must be positive",
        ));
    }
    let warm_start = raw.choice("solver", "warm_start", BOOLS)?.unwrap_or(false);
    let stencil = raw
        .choice("solver", "stencil", STENCILS)?
        .unwrap_or(EvenStencil::Compact);
    let condition_method = raw
        .choice("solver", "condition_method", METHODS)?
        .unwrap_or(None);

    let dir = raw
        .get("output", "dir")
        .map_or_else(|| PathBuf::from("."), |e| PathBuf::from(&e.value));
    let prefix = raw
        .get("output", "prefix")
        .map_or_else(|| "rtsolve".to_string(), |e| e.value.clone());
    if prefix.contains(['/', '\\']) {
        return Err(Error::config(
            raw.line("output", "prefix"),
            "prefix must be a plain name",
        ));
    }
    let mut times = raw.f64_list("output", "times")?.unwrap_or_default();
    if times.iter().any(|t| *t < 0.0 || *t > t_max) {
        return Err(Error::config(
            raw.line("output", "times"),
            "snapshot times must lie in [0, t_max]",
        ));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let reference = raw
        .choice("output", "reference", REFERENCES)?
        .unwrap_or(ReferenceKind::None);

    Ok(ExperimentConfig {
        geometry,
        x_bounds: (x_min, x_max),
        y_bounds: if planar { (y_min, y_max) } else { (0.0, 1.0) },
        nx,
        ny,
        nv,
        quadrature,
        sweep_nx,
        sweep_nv,
        epsilon,
        epsilons,
        sigma,
        kernel,
        initial,
        scheme,
        order,
        dt,
        t_max,
        tol,
        max_iter,
        restart,
        warm_start,
        stencil,
        condition_method,
        mode,
        dir,
        prefix,
        times,
        reference,
    })
}

impl ExperimentConfig {
    pub fn is_planar(&self) -> bool {
        self.geometry == GeometryKind::Planar2d
    }

    pub fn mesh_with(&self, nx: usize) -> Result<SpatialMesh> {
        if self.is_planar() {
            let ny = if nx == self.nx { self.ny } else { nx };
            SpatialMesh::planar(self.x_bounds, self.y_bounds, nx, ny)
        } else {
            SpatialMesh::slab(self.x_bounds.0, self.x_bounds.1, nx)
        }
    }

    pub fn quadrature_with(&self, nv: usize) -> Result<AngularQuadrature> {
        match self.quadrature {
            QuadratureKind::Midpoint => AngularQuadrature::midpoint(nv),
            QuadratureKind::Gauss => AngularQuadrature::gauss(nv),
            QuadratureKind::Circle => AngularQuadrature::circle(nv),
        }
    }

    /// Builds the transport problem at grid size `nx` and angular count `nv`.
    pub fn problem_with(&self, nx: usize, nv: usize) -> Result<Problem> {
        let mesh = self.mesh_with(nx)?;
        let quad = self.quadrature_with(nv)?;
        let sigma = {
            let preset = self.sigma;
            crate::cross_section::sample(&mesh, |x, y| preset.eval(x, y))
        };
        let model = match self.kernel {
            KernelChoice::Isotropic => CrossSectionModel::isotropic(sigma)?,
            KernelChoice::Degree1 => {
                CrossSectionModel::anisotropic(sigma, LowRankKernel::linear(&quad)?)?
            }
        };
        Problem::new(mesh, quad, model)
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_with(self.nx, self.nv)
    }

    pub fn dt_for(&self, dx: f64) -> Result<f64> {
        match self.dt {
            DtSpec::Rule(r) => Ok(r.dt(dx)),
            DtSpec::Sweep => Err(Error::invalid("dt = sweep has no single value")),
        }
    }

    /// Resolved time step on the configured mesh.
    pub fn resolved_dt(&self) -> Result<f64> {
        self.dt_for((self.x_bounds.1 - self.x_bounds.0) / self.nx as f64)
    }

    pub fn solver_config(&self, epsilon: f64, dt: f64) -> SolverConfig {
        let mut c = SolverConfig::new(epsilon, dt)
            .with_scheme(self.scheme)
            .with_order(self.order)
            .with_tol(self.tol)
            .with_stencil(self.stencil);
        c.max_iter = self.max_iter;
        c.restart = self.restart;
        c.warm_start = self.warm_start;
        c
    }

    pub fn initial_field(&self, problem: &Problem) -> Result<KineticField> {
        let (mesh, quad) = (&problem.mesh, &problem.quadrature);
        Ok(match &self.initial {
            InitialPreset::Box => {
                KineticField::from_fn(
                    mesh,
                    quad,
                    |x, _, _, _| {
                        if x > 0.8 && x < 1.2 {
                            2.0
                        } else {
                            0.0
                        }
                    },
                )
            }
            InitialPreset::Gaussian2d => KineticField::from_fn(mesh, quad, |x, y, _, _| {
                1.0 + (-40.0 * (x - 0.5).powi(2) - 40.0 * (y - 0.5).powi(2)).exp()
            }),
            InitialPreset::Custom(path) => {
                let table = crate::csv::read_csv(path)?;
                let col = table.columns.iter().position(|c| c == "rho").unwrap_or(0);
                let rho: Vec<f64> = table.rows.iter().map(|r| r[col]).collect();
                if rho.len() != mesh.n_cells() {
                    return Err(Error::DimensionMismatch {
                        expected: mesh.n_cells(),
                        got: rho.len(),
                    });
                }
                let nv = quad.len();
                let values = rho
                    .iter()
                    .flat_map(|r| std::iter::repeat_n(*r, nv))
                    .collect();
                KineticField::from_values(mesh.n_cells(), nv, values)?
            }
        })
    }

    /// Which reference solution accompanies a run at `epsilon`.
    pub fn reference_for(&self, epsilon: f64) -> ReferenceKind {
        match self.reference {
            ReferenceKind::Auto if epsilon >= 0.1 => ReferenceKind::Explicit,
            ReferenceKind::Auto => ReferenceKind::Diffusion,
            r => r,
        }
    }

    /// Canonical `section.key = value` pairs; feeding [`Self::to_text`]
    /// back through [`parse_config`] reproduces this configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        let ulist = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        put("grid.geometry", name_of(GEOMETRIES, self.geometry).into());
        put("grid.x_min", fmt_f64(self.x_bounds.0));
        put("grid.x_max", fmt_f64(self.x_bounds.1));
        if self.is_planar() {
            put("grid.y_min", fmt_f64(self.y_bounds.0));
            put("grid.y_max", fmt_f64(self.y_bounds.1));
        }
        put("grid.nx", self.nx.to_string());
        put("grid.ny", self.ny.to_string());
        put("grid.nv", self.nv.to_string());
        put(
            "grid.quadrature",
            name_of(QUADRATURES, self.quadrature).into(),
        );
        put("grid.sweep_nx", ulist(&self.sweep_nx));
        put("grid.sweep_nv", ulist(&self.sweep_nv));
        put("physics.epsilon", fmt_f64(self.epsilon));
        put("physics.epsilons", list(&self.epsilons));
        match self.sigma {
            SigmaPreset::Constant(c) => {
                put("physics.sigma", "constant".into());
                put("physics.sigma_value", fmt_f64(c));
            }
            SigmaPreset::VanishingQuartic => put("physics.sigma", "vanishing_quartic".into()),
            SigmaPreset::Striped => put("physics.sigma", "striped".into()),
            SigmaPreset::Blocks2d => put("physics.sigma", "blocks2d".into()),
        }
        put("physics.kernel", name_of(KERNELS, self.kernel).into());
        match &self.initial {
            InitialPreset::Box => put("physics.initial", "box".into()),
            InitialPreset::Gaussian2d => put("physics.initial", "gaussian2d".into()),
            InitialPreset::Custom(p) => {
                put("physics.initial", "custom".into());
                put("physics.initial_file", p.display().to_string());
            }
        }
        put("solver.scheme", name_of(SCHEMES, self.scheme).into());
        put(
            "solver.order",
            if self.order == TimeOrder::Second {
                "2"
            } else {
                "1"
            }
            .into(),
        );
        put(
            "solver.dt",
            match self.dt {
                DtSpec::Rule(DtRule::DxOver3) => "dx_over_3".into(),
                DtSpec::Rule(DtRule::Dx) => "dx".into(),
                DtSpec::Rule(DtRule::Fixed(v)) => fmt_f64(v),
                DtSpec::Sweep => "sweep".into(),
            },
        );
        put("solver.t_max", fmt_f64(self.t_max));
        put("solver.tol", fmt_f64(self.tol));
        put("solver.max_iter", self.max_iter.to_string());
        put("solver.restart", self.restart.to_string());
        put("solver.warm_start", self.warm_start.to_string());
        put("solver.stencil", name_of(STENCILS, self.stencil).into());
        put(
            "solver.condition_method",
            name_of(METHODS, self.condition_method).into(),
        );
        put("output.mode", name_of(MODES, self.mode).into());
        put("output.dir", self.dir.display().to_string());
        put("output.prefix", self.prefix.clone());
        if !self.times.is_empty() {
            put("output.times", list(&self.times));
        }
        put(
            "output.reference",
            name_of(REFERENCES, self.reference).into(),
        );
        out
    }

    pub fn to_text(&self) -> String {
        let mut text = String::new();
        let mut current = String::new();
        for (k, v) in self.echo() {
            let (sec, key) = k.split_once('.').unwrap_or(("grid", &k));
            if sec != current {
                let _ = writeln!(text, "[{sec}]");
                current = sec.to_string();
            }
            let _ = writeln!(text, "{key} = {v}");
        }
        text
    }
}

/// Shortest decimal that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nnx = 200\nnv = 16\n[physics]\nepsilon = 1e-3\n\
                           [solver]\ndt = dx_over_3\nt_max = 0.1\n";

    #[test]
    fn minimal_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.quadrature, QuadratureKind::Midpoint);
        assert_eq!(c.tol, 1e-10);
        assert_eq!(c.scheme, Scheme::ParityCg);
        assert_eq!(c.x_bounds, (0.0, 2.0));
        assert_eq!(c.mode, Mode::Run);
        assert_eq!(c.sigma, SigmaPreset::Constant(1.0));
    }

    #[test]
    fn dx_over_3_resolves() {
        let c = parse_config(MINIMAL).unwrap();
        assert!((c.resolved_dt().unwrap() - 1.0 / 300.0).abs() < 1e-18);
    }

    #[test]
    fn typo_names_nearest_key() {
        let text = MINIMAL.replace("epsilon = 1e-3", "epsilonn = 1e-3");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("epsilonn"), "{message}");
                assert!(message.contains("`epsilon`"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_section_and_comments() {
        let text = "# header\n[grdi]\nnx = 4\n";
        match parse_config(text).unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("[grid]"));
            }
            other => panic!("{other}"),
        }
        let text = MINIMAL.replace("nx = 200", "nx = 200   # cells");
        assert_eq!(parse_config(&text).unwrap().nx, 200);
    }

    #[test]
    fn type_mismatch_and_missing() {
        let text = MINIMAL.replace("nx = 200", "nx = many");
        assert!(matches!(
            parse_config(&text),
            Err(Error::Config { line: 2, .. })
        ));
        let text = MINIMAL.replace("t_max = 0.1\n", "");
        assert_eq!(
            parse_config_as(&text, Some(Mode::Condition)).unwrap().mode,
            Mode::Condition
        );
        match parse_config(&text).unwrap_err() {
            Error::Config { message, .. } => assert!(message.contains("t_max")),
            other => panic!("{other}"),
        }
        let text = MINIMAL.replace("nv = 16", "nv = 15");
        assert!(matches!(
            parse_config(&text),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = MINIMAL.replace("nv = 16", "nv = 16\nnv = 8");
        assert!(matches!(
            parse_config(&text),
            Err(Error::Config { line: 4, .. })
        ));
    }

    #[test]
    fn echo_round_trips() {
        let text = "[grid]\ngeometry = planar2d\nx_min = 0\nx_max = 1\nnx = 8\nnv = 8\n\
                    [physics]\nepsilon = 1e-4\nsigma = blocks2d\ninitial = gaussian2d\n\
                    epsilons = 0.1, 0.01\n[solver]\ndt = 0.003\nt_max = 0.1\ntol = 1e-9\n\
                    [output]\ntimes = 0.05, 0.1\nmode = ap_sweep\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.y_bounds, (0.0, 1.0));
        assert_eq!(c.ny, 8);
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c, parse_config(&c.to_text()).unwrap());
    }

    #[test]
    fn geometry_consistency() {
        let text = MINIMAL.replace("nv = 16", "nv = 16\nquadrature = circle");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("t_max = 0.1", "t_max = 0.1\nscheme = aniso_gmres");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("epsilon = 1e-3", "epsilon = 1e-3\nkernel = degree1");
        assert_eq!(parse_config(&text).unwrap().scheme, Scheme::AnisoGmres);
        let text = MINIMAL.replace("dt = dx_over_3", "dt = sweep");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn presets_of_sigma() {
        assert_eq!(SigmaPreset::VanishingQuartic.eval(1.0, 0.0), 0.0);
        assert_eq!(SigmaPreset::VanishingQuartic.eval(0.0, 0.0), 100.0);
        assert_eq!(SigmaPreset::Striped.eval(0.5, 0.0), 0.02);
        assert_eq!(SigmaPreset::Striped.eval(1.0, 0.0), 1.0);
        assert_eq!(SigmaPreset::Striped.eval(1.5, 0.0), 0.02);
        assert_eq!(SigmaPreset::Blocks2d.eval(0.3, 0.3), 0.02);
        assert_eq!(SigmaPreset::Blocks2d.eval(0.3, 0.7), 1.0);
    }

    #[test]
    fn builds_problem_and_initial_field() {
        let c = parse_config(MINIMAL).unwrap();
        let p = c.problem().unwrap();
        let f = c.initial_field(&p).unwrap();
        let rho = f.density(&p.quadrature).unwrap();
        assert_eq!(rho.len(), 200);
        assert_eq!(rho.max(), 2.0);
        assert_eq!(rho.min(), 0.0);
    }
}
