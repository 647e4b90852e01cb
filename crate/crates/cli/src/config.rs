//! The run configuration: one JSON document, optionally patched by
//! `--set key=value` overrides before it is typed.

use std::path::{Path, PathBuf};

use fpt_core::{BinSpec, BoundarySpec, DriftSpec, InversionParams, MVariant, ReflectedReading, SimConfig, System};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "all_systems")]
    pub systems: Vec<System>,
    pub drift: DriftSpec,
    /// Needed by `transform`, `validate` and `simulate`.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub grid: QueryGrid,
    /// What `transform` tabulates and `validate` checks.
    #[serde(default = "default_quantities")]
    pub quantities: Vec<Quantity>,
    #[serde(default)]
    pub inversion: InversionParams,
    #[serde(default)]
    pub sim: SimConfig,
    /// Joint-transform variants evaluated side by side.
    #[serde(default)]
    pub variants: VariantSet,
    /// Histogram check of the transition density, run by `validate`.
    #[serde(default)]
    pub density_check: Option<DensityCheck>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryGrid {
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// The joint transform of the hitting time and place.
    Joint,
    /// The quadruple of transforms at the jump time.
    Phi,
    /// Exit transforms for a boundary fixed at `b`.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantSet {
    pub rates: Vec<MVariant>,
    pub readings: Vec<ReflectedReading>,
}

impl Default for VariantSet {
    fn default() -> Self {
        Self { rates: MVariant::ALL.to_vec(), readings: ReflectedReading::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityCheck {
    pub x: f64,
    pub t: Vec<f64>,
    pub bins: BinSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest accepted `|z|` for transform cells.
    pub z_max: f64,
    /// Largest accepted `|z|` over histogram bins.
    pub density_z_max: f64,
    pub max_censored_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { z_max: 3.0, density_z_max: 4.0, max_censored_fraction: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
    /// `simulate` also writes one row per path.
    pub samples: bool,
}

fn all_systems() -> Vec<System> {
    System::ALL.to_vec()
}

fn default_quantities() -> Vec<Quantity> {
    vec![Quantity::Joint]
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Domain(msg()))
    }
}

fn all_finite(name: &str, v: &[f64], lower: f64, strict: bool) -> Result<(), CliError> {
    for &a in v {
        let inside = if strict { a > lower } else { a >= lower };
        check(a.is_finite() && inside, || {
            let op = if strict { ">" } else { ">=" };
            format!("grid.{name} entries must be finite and {op} {lower}, got {a}")
        })?;
    }
    Ok(())
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ReadConfig { path: path.to_path_buf(), source: e })?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| CliError::Schema(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let domain = |e: fpt_core::FptError| CliError::Domain(e.to_string());
        check(!self.systems.is_empty(), || "systems must not be empty".into())?;
        let mut seen = self.systems.clone();
        seen.dedup();
        check(seen.len() == self.systems.len(), || "systems must not repeat".into())?;
        self.drift.validate().map_err(domain)?;
        if let Some(b) = &self.boundary {
            b.validate().map_err(domain)?;
        }
        self.inversion.validate().map_err(domain)?;
        self.sim.validate().map_err(domain)?;
        let g = &self.grid;
        all_finite("alpha", &g.alpha, 0.0, false)?;
        all_finite("theta", &g.theta, 0.0, true)?;
        all_finite("x", &g.x, f64::NEG_INFINITY, false)?;
        all_finite("t", &g.t, 0.0, true)?;
        all_finite("y", &g.y, f64::NEG_INFINITY, false)?;
        if self.systems.contains(&System::Reflected) {
            check(g.x.iter().all(|&x| x >= 0.0), || "reflected starts must be nonnegative".into())?;
        }
        check(!self.variants.rates.is_empty() && !self.variants.readings.is_empty(), || {
            "variants.rates and variants.readings must not be empty".into()
        })?;
        if let Some(d) = &self.density_check {
            d.bins.validate().map_err(domain)?;
            check(d.x.is_finite(), || "density_check.x must be finite".into())?;
            check(!d.t.is_empty() && d.t.iter().all(|t| *t > 0.0 && t.is_finite()), || {
                "density_check.t must be a nonempty list of positive times".into()
            })?;
            check(d.t.windows(2).all(|w| w[0] < w[1]), || "density_check.t must be strictly increasing".into())?;
        }
        let t = &self.thresholds;
        check(t.z_max > 0.0 && t.density_z_max > 0.0, || "z thresholds must be positive".into())?;
        check((0.0..=1.0).contains(&t.max_censored_fraction), || {
            "thresholds.max_censored_fraction must lie in [0, 1]".into()
        })?;
        Ok(())
    }

    pub fn boundary(&self) -> Result<&BoundarySpec, CliError> {
        self.boundary.as_ref().ok_or_else(|| CliError::Domain("this subcommand needs a `boundary`".into()))
    }

    pub fn require(&self, name: &str, values: &[f64]) -> Result<(), CliError> {
        check(!values.is_empty(), || format!("grid.{name} must not be empty for this subcommand"))
    }
}

/// `a.b.c=value`; the value is read as JSON when it parses, as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let bad = |why: &str| CliError::Override { assignment: assignment.to_string(), reason: why.to_string() };
    let (key, raw) = assignment.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("empty key segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            _ => return Err(bad(&format!("`{}` is not an object", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!()
}
