use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::profile_hash;

fn default_p_max() -> usize {
    40
}
fn default_tol() -> f64 {
    1e-12
}
fn default_cfl() -> f64 {
    0.5
}
fn default_c_x() -> f64 {
    1.0
}

/// Parameters of the iteration. `R`, `eta`, `T` and `m` are the size bound,
/// smallness parameter, horizon and low-frequency truncation index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub eta: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default)]
    pub m: i32,
    pub dt: f64,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    /// Stop once `X_p` falls below this value.
    #[serde(default = "default_tol")]
    pub contraction_tol: f64,
    /// Constant `C` of the contraction estimate; the weight on the first block is `ε = 1/(4C)`.
    #[serde(default = "default_c_x")]
    pub c_contraction: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

impl IterationConfig {
    pub fn new(s: f64, r: f64, eta: f64, t: f64, dt: f64) -> Self {
        IterationConfig {
            s,
            r,
            eta,
            t,
            m: 0,
            dt,
            p_max: default_p_max(),
            contraction_tol: default_tol(),
            c_contraction: default_c_x(),
            cfl_safety: default_cfl(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.r >= 1.0) {
            return bad(format!("R = {} must be at least 1", self.r));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad(format!("T = {} must be positive", self.t));
        }
        if self.m < 0 {
            return bad(format!("m = {} must be nonnegative", self.m));
        }
        if !(self.dt > 0.0 && self.dt <= self.t) {
            return bad(format!("dt = {} must lie in (0, T]", self.dt));
        }
        if !(self.contraction_tol >= 0.0) || !(self.c_contraction > 0.0) || !self.s.is_finite() {
            return bad("contraction_tol >= 0, c_contraction > 0 and finite s required".into());
        }
        if self.p_max == 0 {
            return bad("p_max must be positive".into());
        }
        Ok(())
    }

    /// `ε = 1/(4C)`.
    pub fn epsilon(&self) -> f64 {
        0.25 / self.c_contraction
    }

    /// Number of steps and the step that divides `T` exactly.
    pub fn time_grid(&self) -> (usize, f64) {
        let steps = ((self.t / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t / steps as f64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HypothesisStatus {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub holds: bool,
    /// `threshold − value`; negative when violated.
    pub margin: f64,
}

impl HypothesisStatus {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        HypothesisStatus { name: name.into(), value, threshold, holds: value <= threshold, margin: threshold - value }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        HypothesisStatus { name: name.into(), value, threshold, holds: value >= threshold, margin: value - threshold }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub p: usize,
    /// `X_p` measured on `V_{p+1} − V_p`.
    pub x: f64,
    /// `X_p / X_{p−1}` when `X_{p−1}` is above the ratio floor.
    pub ratio: Option<f64>,
    /// `∫₀^T ‖r(t)‖_{L²}` for the nonlinear residual of `V_{p+1}`.
    pub residual: f64,
    pub hypotheses: Vec<HypothesisStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    Cap,
    HypothesisFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub scheme: String,
    pub system: String,
    pub config: IterationConfig,
    /// Horizon and step actually used.
    pub t_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// `X_p` fell below the tolerance before the iteration cap.
    pub converged: bool,
    /// Constants used by the monitors, by name.
    pub constants: Vec<(String, f64)>,
    pub ratio_floor: f64,
    /// Residuals decrease until they reach twice their minimum.
    pub residual_monotone: bool,
    /// Largest change of the spatial mean of the transported block over the run.
    pub mean_drift: f64,
    pub profile_hash: String,
    pub warnings: Vec<String>,
}

impl IterationDiagnostics {
    pub(crate) fn new(scheme: &str, system: &str, config: IterationConfig, steps: usize, dt: f64) -> Self {
        IterationDiagnostics {
            scheme: scheme.into(),
            system: system.into(),
            config,
            t_end: steps as f64 * dt,
            dt,
            steps,
            records: Vec::new(),
            status: RunStatus::Cap,
            converged: false,
            constants: Vec::new(),
            ratio_floor: 0.0,
            residual_monotone: true,
            mean_drift: 0.0,
            profile_hash: profile_hash(),
            warnings: Vec::new(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_hypotheses_hold(&self) -> bool {
        self.last().is_some_and(|r| r.hypotheses.iter().all(|h| h.holds))
    }

    /// Ratios for `p ≥ from`.
    pub fn ratios_from(&self, from: usize) -> Vec<f64> {
        self.records.iter().filter(|r| r.p >= from).filter_map(|r| r.ratio).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }
}

/// Residuals decrease from one iterate to the next until they reach the
/// discretization floor, taken as twice the smallest residual observed.
pub fn residual_monotone_to_floor(res: &[f64]) -> bool {
    let floor = 2.0 * res.iter().copied().fold(f64::INFINITY, f64::min);
    res.windows(2).all(|w| w[1] <= w[0] || w[0] <= floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let c = IterationConfig::new(1.0, 1.0, 0.5, 0.1, 0.01);
        assert!(c.validate().is_ok());
        assert!(IterationConfig { eta: 1.0, ..c }.validate().is_err());
        assert!(IterationConfig { r: 0.5, ..c }.validate().is_err());
        assert!(IterationConfig { m: -1, ..c }.validate().is_err());
        assert_eq!(c.time_grid().0, 10);
        assert!((c.epsilon() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn monotone_rule() {
        assert!(residual_monotone_to_floor(&[1.0, 0.5, 0.1, 1e-3, 1.2e-3, 1.1e-3]));
        assert!(!residual_monotone_to_floor(&[1.0, 0.5, 0.8, 1e-3]));
    }
}
