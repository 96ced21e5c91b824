//! Run configuration. Every default reproduces the reference experiment.

use std::path::{Path, PathBuf};

use horizon_ez::{
    build_grid, heston_coefficients, mcverify::Monitoring, Grid, HestonCoefficients, HestonParams, ModelError,
    Preferences, RectDomain, Scheme, SolverOptions,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferencesSection {
    pub gamma: f64,
    pub psi: f64,
    pub delta: f64,
}

impl Default for PreferencesSection {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            psi: 1.5,
            delta: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    pub alpha: f64,
    pub k2: f64,
    pub m2: f64,
    pub r: f64,
    pub lambda: f64,
    pub eps: f64,
    pub rho: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            k2: 0.25,
            m2: 0.0225,
            r: 0.05,
            lambda: 0.47,
            eps: 0.0,
            rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    #[serde(rename = "L")]
    pub l: f64,
    pub y1: f64,
    pub y2: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            l: 0.02,
            y1: 0.001,
            y2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Interior nodes along w.
    pub nw: usize,
    /// Interior nodes along y.
    pub ny: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub c_bar: f64,
    pub c_bar_max: f64,
    /// `newton` or `picard`.
    pub scheme: String,
    pub corner_radius: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            nw: 63,
            ny: 1331,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            damping: d.damping,
            c_bar: d.c_bar,
            c_bar_max: d.c_bar_max,
            scheme: "newton".into(),
            corner_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// `bridge` or `discrete`.
    pub monitoring: String,
    /// Start of the exit-time sample.
    pub start: [f64; 2],
    pub probes: Vec<[f64; 2]>,
    pub ks_tolerance: f64,
    pub max_steps: usize,
    /// Also write the raw band exit times.
    pub dump_samples: bool,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-5,
            seed: 2024,
            monitoring: "bridge".into(),
            start: [0.0, 0.04],
            probes: vec![[0.0, 0.04], [0.005, 0.04], [-0.005, 0.04], [0.0, 0.1], [0.0025, 0.02]],
            ks_tolerance: 0.01,
            max_steps: 50_000_000,
            dump_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionSection {
    pub q_ladder: Vec<f64>,
    /// Start point of τ in the moment functionals.
    pub start: [f64; 2],
    pub n_terms: usize,
}

impl Default for AssumptionSection {
    fn default() -> Self {
        Self {
            q_ladder: vec![1.01, 1.1, 1.5, 2.0],
            start: [0.0, 0.04],
            n_terms: horizon_ez::passage::DEFAULT_TERMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    pub w0: f64,
    pub y0: f64,
    pub t_max: f64,
    pub n_points: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            w0: 0.0,
            y0: 0.04,
            t_max: 0.5,
            n_points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputSection {
    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }

    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preferences: PreferencesSection,
    pub market: MarketSection,
    pub domain: DomainSection,
    pub solver: SolverSection,
    pub mc: McSection,
    pub assumption: AssumptionSection,
    pub density: DensitySection,
    pub output: OutputSection,
}

/// Core objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub prefs: Preferences,
    pub params: HestonParams,
    pub coeffs: HestonCoefficients,
    pub domain: RectDomain,
    pub grid: Grid,
    pub solver: SolverOptions,
    pub monitoring: Monitoring,
}

fn map_model(section: &str, e: ModelError) -> ConfigError {
    match e {
        ModelError::OutOfRange { name, value, bound } => {
            field_err(&format!("{section}.{name}"), format!("{value} {bound}"))
        }
        other => field_err(section, other.to_string()),
    }
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("{v} must be finite")))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks every field and builds the core objects.
    pub fn model(&self) -> Result<Model, ConfigError> {
        let p = &self.preferences;
        let prefs = Preferences::new(p.gamma, p.psi, p.delta).map_err(|e| map_model("preferences", e))?;

        let m = &self.market;
        for (name, v) in [
            ("alpha", m.alpha),
            ("k2", m.k2),
            ("m2", m.m2),
            ("r", m.r),
            ("lambda", m.lambda),
            ("eps", m.eps),
            ("rho", m.rho),
        ] {
            finite(&format!("market.{name}"), v)?;
        }
        if !(m.k2 > 0.0) {
            return Err(field_err("market.k2", format!("{} must be positive", m.k2)));
        }
        let mut params =
            HestonParams::new(m.alpha, m.k2.sqrt(), m.m2, m.r, m.lambda, m.eps).map_err(|e| map_model("market", e))?;
        params.rho = m.rho;
        params.validate().map_err(|e| map_model("market", e))?;
        let coeffs = heston_coefficients(&params).map_err(|e| map_model("market", e))?;

        let d = &self.domain;
        let domain = RectDomain::new(d.l, d.y1, d.y2).map_err(|e| map_model("domain", e))?;

        let s = &self.solver;
        let scheme: Scheme = s
            .scheme
            .parse()
            .map_err(|_| field_err("solver.scheme", format!("unknown scheme {:?}", s.scheme)))?;
        let grid_field = if s.nw < horizon_ez::pde::MIN_NODES {
            "solver.nw"
        } else {
            "solver.ny"
        };
        let grid = build_grid(&domain, s.nw, s.ny).map_err(|e| field_err(grid_field, e.to_string()))?;
        let solver = SolverOptions {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            damping: s.damping,
            c_bar: s.c_bar,
            c_bar_max: s.c_bar_max,
            scheme,
            corner_radius: s.corner_radius,
        };
        if let Err(e) = solver.validate() {
            let field = match e.to_string() {
                m if m.contains("tolerance") => "solver.tolerance",
                m if m.contains("iterations") => "solver.max_iterations",
                m if m.contains("damping") => "solver.damping",
                m if m.contains("corner") => "solver.corner_radius",
                _ => "solver.c_bar",
            };
            return Err(field_err(field, e.to_string()));
        }

        let mc = &self.mc;
        let monitoring = match mc.monitoring.as_str() {
            "bridge" => Monitoring::Bridge,
            "discrete" => Monitoring::Discrete,
            other => return Err(field_err("mc.monitoring", format!("unknown monitoring {other:?}"))),
        };
        if mc.n_paths == 0 {
            return Err(field_err("mc.n_paths", "must be at least 1"));
        }
        if !(mc.dt > 0.0) || !mc.dt.is_finite() {
            return Err(field_err("mc.dt", format!("{} must be positive", mc.dt)));
        }
        if mc.max_steps == 0 {
            return Err(field_err("mc.max_steps", "must be at least 1"));
        }
        if !(mc.ks_tolerance > 0.0 && mc.ks_tolerance <= 1.0) {
            return Err(field_err("mc.ks_tolerance", "must lie in (0, 1]"));
        }
        if !domain.contains(mc.start[0], mc.start[1]) {
            return Err(field_err("mc.start", "must lie strictly inside the domain"));
        }
        for (i, pr) in mc.probes.iter().enumerate() {
            if !domain.contains(pr[0], pr[1]) {
                return Err(field_err(
                    &format!("mc.probes[{i}]"),
                    "must lie strictly inside the domain",
                ));
            }
        }

        let a = &self.assumption;
        if a.q_ladder.is_empty() {
            return Err(field_err("assumption.q_ladder", "must not be empty"));
        }
        for (i, q) in a.q_ladder.iter().enumerate() {
            if !(*q > 1.0) || !q.is_finite() {
                return Err(field_err(
                    &format!("assumption.q_ladder[{i}]"),
                    format!("{q} must exceed 1"),
                ));
            }
        }
        if !(a.start[0].abs() < domain.half_width() && a.start[1] > 0.0) {
            return Err(field_err("assumption.start", "must lie strictly inside the band"));
        }
        if a.n_terms == 0 {
            return Err(field_err("assumption.n_terms", "must be at least 1"));
        }

        let den = &self.density;
        if !(den.t_max > 0.0) || !den.t_max.is_finite() {
            return Err(field_err("density.t_max", "must be positive"));
        }
        if den.n_points < 2 {
            return Err(field_err("density.n_points", "must be at least 2"));
        }

        for (i, f) in self.output.formats.iter().enumerate() {
            if f != "csv" && f != "json" {
                return Err(field_err(
                    &format!("output.formats[{i}]"),
                    format!("unknown format {f:?}"),
                ));
            }
        }

        Ok(Model {
            prefs,
            params,
            coeffs,
            domain,
            grid,
            solver,
            monitoring,
        })
    }
}
