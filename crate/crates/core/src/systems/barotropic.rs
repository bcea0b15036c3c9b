//! Barotropic compressible Navier–Stokes, `U = (ρ, u)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AssumptionProfile, SystemModel, SystemSpec};
use crate::error::{Error, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `p(ρ) = a ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureLaw {
    pub a: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn p(&self, rho: f64) -> f64 {
        self.a * rho.powf(self.gamma)
    }
    pub fn dp(&self, rho: f64) -> f64 {
        self.a * self.gamma * rho.powf(self.gamma - 1.0)
    }
}

/// `μ(ρ) = μ₀ ρ^β`, `λ(ρ) = λ₀ ρ^β`; `beta = 0` gives constant viscosities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transport {
    pub mu: f64,
    pub lambda: f64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Clone)]
pub struct Barotropic {
    pub d: usize,
    pub rho_bar: f64,
    pub dp: Scalar,
    pub mu: Scalar,
    pub lambda: Scalar,
}

impl SystemModel for Barotropic {
    fn name(&self) -> &str {
        "barotropic"
    }
    fn n1(&self) -> usize {
        1
    }
    fn n2(&self) -> usize {
        self.d
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn reference_state(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.d + 1];
        u[0] = self.rho_bar;
        u
    }
    fn profile(&self) -> AssumptionProfile {
        AssumptionProfile::C
    }

    fn s0(&self, u: &[f64], out: &mut [f64]) {
        let n = self.d + 1;
        out.iter_mut().for_each(|v| *v = 0.0);
        let rho = u[0];
        out[0] = (self.dp)(rho) / rho;
        for i in 1..n {
            out[i * n + i] = rho;
        }
    }

    fn s_alpha(&self, u: &[f64], alpha: usize, out: &mut [f64]) {
        let n = self.d + 1;
        out.iter_mut().for_each(|v| *v = 0.0);
        let rho = u[0];
        let ua = u[1 + alpha];
        let dp = (self.dp)(rho);
        out[0] = dp / rho * ua;
        out[1 + alpha] = dp;
        out[(1 + alpha) * n] = dp;
        for i in 1..n {
            out[i * n + i] = rho * ua;
        }
    }

    fn z(&self, u: &[f64], alpha: usize, beta: usize, out: &mut [f64]) {
        let d = self.d;
        let rho = u[0];
        let (mu, lambda) = ((self.mu)(rho), (self.lambda)(rho));
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = mu * delta(alpha, beta) * delta(i, j)
                    + mu * delta(i, beta) * delta(j, alpha)
                    + lambda * delta(i, alpha) * delta(j, beta);
            }
        }
    }

    fn has_source(&self) -> bool {
        false
    }

    fn phase_distance(&self, u: &[f64]) -> f64 {
        u[0]
    }

    fn phase_distance_first(&self, u1: &[f64]) -> f64 {
        u1[0]
    }
}

/// Barotropic system around `(ρ̄, 0)`. The admitted density range
/// `[rho_min, rho_max]` is where the sign conditions are verified; it must stay
/// away from vacuum.
pub fn assemble_barotropic(
    d: usize,
    pressure: PressureLaw,
    transport: Transport,
    rho_bar: f64,
    rho_range: (f64, f64),
) -> Result<SystemSpec> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension {d} outside 1..=3")));
    }
    let (lo, hi) = rho_range;
    if !(lo > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "density range [{lo}, {hi}] admits vacuum; the phase space requires rho bounded away from 0"
        )));
    }
    if !(hi >= lo && rho_bar >= lo && rho_bar <= hi) {
        return Err(Error::InvalidArgument(format!("reference density {rho_bar} outside [{lo}, {hi}]")));
    }
    let Transport { mu, lambda, beta } = transport;
    for rho in [lo, rho_bar, hi] {
        let w = rho.powf(beta);
        if !(pressure.dp(rho) > 0.0) {
            return Err(Error::InvalidArgument(format!("p'({rho}) must be positive")));
        }
        if !(mu * w > 0.0 && (2.0 * mu + lambda) * w > 0.0) {
            return Err(Error::InvalidArgument(format!("need mu > 0 and 2mu + lambda > 0 at rho = {rho}")));
        }
    }
    let params = serde_json::json!({
        "d": d, "pressure": pressure, "transport": transport, "rho_bar": rho_bar, "rho_range": [lo, hi]
    });
    let model = Barotropic {
        d,
        rho_bar,
        dp: Arc::new(move |rho| pressure.dp(rho)),
        mu: Arc::new(move |rho| mu * rho.powf(beta)),
        lambda: Arc::new(move |rho| lambda * rho.powf(beta)),
    };
    Ok(SystemSpec::new(model, params))
}
