//! The versioned run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::besov::Exponent;
use crate::error::{Error, Result};
use crate::solver::IterationConfig;
use crate::spectral::{Flavor, GridSpec};
use crate::verifier::CommutatorForm;

pub const SCHEMA: &str = "hpspec-run/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Decompose,
    Norm,
    Simulate,
    SolveCritical,
    Verify,
    Sweep,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::Norm => "norm",
            Command::Simulate => "simulate",
            Command::SolveCritical => "solve-critical",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}
fn yes() -> bool {
    true
}
fn default_per_family() -> usize {
    20
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_points: usize,
    #[serde(rename = "L", default = "two_pi")]
    pub length: f64,
    /// Components when no system fixes them (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl GridConfig {
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        GridSpec::new(self.d, self.n_points, self.length, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub params: serde_json::Value,
}

/// One additive term of the initial perturbation `V₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataTerm {
    /// `a·cos(k·x + phase)` with integer wavevector `k`.
    Mode {
        component: usize,
        k: Vec<i64>,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Periodized Gaussian `a·exp(−|x − c|²/(2w²))`, centred in the box by default.
    Bump {
        component: usize,
        amplitude: f64,
        width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// Random phases with amplitude `|k|^slope` on `1 ≤ |k| ≤ band`, scaled to
    /// sup norm `amplitude`; seeded by the run seed.
    Random {
        component: usize,
        amplitude: f64,
        band: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope: Option<f64>,
    },
    /// A binary field file, path relative to the config file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoT0 {
    /// `T` is set to the `compute_T0` value and split into this many steps.
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monitors {
    #[serde(default = "yes")]
    pub norms: bool,
    #[serde(default = "yes")]
    pub continuation: bool,
    /// Write every `k`-th sample of the final iterate as a field file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors { norms: true, continuation: true, snapshot_stride: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out(), formats: default_formats() }
    }
}

fn default_r() -> Exponent {
    Exponent::One
}
fn default_flavor() -> Flavor {
    Flavor::Nonhomogeneous
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub s: f64,
    #[serde(default = "default_r")]
    pub r: Exponent,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapName {
    Identity,
    Square,
    Sin,
    ExpM1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Subcritical,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    Product { s: f64 },
    Commutator { sigma: f64, form: CommutatorForm },
    Composition { map: MapName, s: f64 },
    Garding { epsilon: f64 },
    GardingLocalized,
    AprioriHyperbolic {
        sigma: f64,
        #[serde(default)]
        scheme: Scheme,
    },
    AprioriParabolic {
        s: f64,
        #[serde(default)]
        scheme: Scheme,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_per_family")]
    pub per_family: usize,
    /// Repeat every check at `N → 2N` (corpus checks) or `dt → dt/2`
    /// (trajectory checks) and flag unstable constants.
    #[serde(default = "yes")]
    pub refine: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta,
    #[serde(rename = "T")]
    T,
    Dt,
    #[serde(rename = "R")]
    R,
    S,
    /// Multiplies the initial data.
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    #[default]
    Simulate,
    SolveCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default)]
    pub target: SweepTarget,
}

/// A complete, reproducible run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data: Vec<DataTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<IterationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_t0: Option<AutoT0>,
    #[serde(default)]
    pub monitors: Monitors,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    /// Directory relative data paths resolve against; set by [`RunConfig::load`].
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Parses and validates a config document; errors name the failing path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("$", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks beyond the schema: required sections per command and value ranges.
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(config_error("schema", format!("expected \"{SCHEMA}\", got \"{}\"", self.schema)));
        }
        self.grid.grid(self.grid.n.unwrap_or(1)).map_err(|e| config_error("grid", e.to_string()))?;
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(config_error(what, format!("required by the {} command", self.command.as_str())))
            }
        };
        match self.command {
            Command::Decompose => {}
            Command::Norm => need(self.norm.is_some(), "norm")?,
            Command::Simulate | Command::SolveCritical | Command::Sweep => {
                need(self.system.is_some(), "system")?;
                need(self.iteration.is_some(), "iteration")?;
            }
            Command::Verify => need(self.verify.is_some(), "verify")?,
        }
        if self.command == Command::Sweep {
            need(self.sweep.is_some(), "sweep")?;
        }
        if let Some(it) = &self.iteration {
            // auto_t0 replaces T and dt, so only the other fields need to be valid here
            let probe = if self.auto_t0.is_some() { IterationConfig { t: 1.0, dt: 0.5, ..*it } } else { *it };
            probe.validate().map_err(|e| config_error("iteration", e.to_string()))?;
        }
        if let Some(a) = &self.auto_t0 {
            if a.steps < 2 {
                return Err(config_error("auto_t0.steps", "at least 2 steps are needed"));
            }
        }
        if let Some(v) = &self.verify {
            if v.per_family == 0 {
                return Err(config_error("verify.per_family", "must be positive"));
            }
            for (i, c) in v.checks.iter().enumerate() {
                let trajectory = matches!(
                    c,
                    Check::Garding { .. } | Check::GardingLocalized | Check::AprioriHyperbolic { .. } | Check::AprioriParabolic { .. }
                );
                if trajectory && self.system.is_none() {
                    return Err(config_error(format!("verify.checks[{i}]"), "needs a system section"));
                }
                if matches!(c, Check::AprioriHyperbolic { .. } | Check::AprioriParabolic { .. }) && self.iteration.is_none() {
                    return Err(config_error(format!("verify.checks[{i}]"), "needs an iteration section"));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_error("sweep.values", "at least one value is needed"));
            }
        }
        if self.monitors.snapshot_stride == Some(0) {
            return Err(config_error("monitors.snapshot_stride", "must be positive"));
        }
        for (i, t) in self.data.iter().enumerate() {
            let (component, d_ok) = match t {
                DataTerm::Mode { component, k, .. } => (Some(*component), k.len() == self.grid.d),
                DataTerm::Bump { component, width, center, .. } => {
                    if !(*width > 0.0) {
                        return Err(config_error(format!("data[{i}].width"), "must be positive"));
                    }
                    (Some(*component), center.as_ref().map_or(true, |c| c.len() == self.grid.d))
                }
                DataTerm::Random { component, band, .. } => {
                    if *band < 1 {
                        return Err(config_error(format!("data[{i}].band"), "must be at least 1"));
                    }
                    (Some(*component), true)
                }
                DataTerm::File { .. } => (None, true),
            };
            if !d_ok {
                return Err(config_error(format!("data[{i}]"), format!("vector length must equal d = {}", self.grid.d)));
            }
            if let (Some(c), Some(n)) = (component, self.grid.n) {
                if c >= n && self.system.is_none() {
                    return Err(config_error(format!("data[{i}].component"), format!("must be below n = {n}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMULATE: &str = r#"{
        "schema": "hpspec-run/1",
        "command": "simulate",
        "seed": 3,
        "grid": {"d": 1, "N": 64},
        "system": {"name": "barotropic", "params": {"d": 1, "pressure": {"a": 1.0, "gamma": 2.0},
                   "transport": {"mu": 1.0, "lambda": 0.0}, "rho_range": [0.1, 10.0]}},
        "data": [{"kind": "mode", "component": 0, "k": [1], "amplitude": 0.01}],
        "iteration": {"s": 1.0, "R": 1.0, "eta": 0.5, "T": 0.1, "dt": 0.01}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_json(SIMULATE).unwrap();
        assert_eq!(c.command, Command::Simulate);
        assert_eq!(c.output, OutputConfig::default());
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    fn path_of(text: &str) -> String {
        match RunConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_path() {
        assert_eq!(path_of(&SIMULATE.replace("\"eta\": 0.5", "\"eta\": 0.5, \"bogus\": 1")), "iteration.bogus");
        assert_eq!(path_of(&SIMULATE.replace("\"N\": 64", "\"N\": \"64\"")), "grid.N");
        assert_eq!(path_of(&SIMULATE.replace("\"amplitude\": 0.01", "\"amplitude\": 0.01, \"x\": 0")), "data[0]");
        assert_eq!(path_of(&SIMULATE.replace("hpspec-run/1", "hpspec-run/0")), "schema");
        assert_eq!(path_of(&SIMULATE.replace("\"eta\": 0.5", "\"eta\": 1.5")), "iteration");
        assert_eq!(path_of(&SIMULATE.replace("\"N\": 64", "\"N\": 60")), "grid");
        assert_eq!(path_of(&SIMULATE.replace("\"k\": [1]", "\"k\": [1, 2]")), "data[0]");
        assert_eq!(path_of(&SIMULATE.replace("\"command\": \"simulate\"", "\"command\": \"norm\"")), "norm");
    }
}
