//! Compressible Navier–Stokes–Fourier for an ideal gas, `U = (ρ, u, θ)`.

use serde::{Deserialize, Serialize};

use super::{AssumptionProfile, SourceParts, SystemModel, SystemSpec};
use crate::error::{Error, Result};

/// `p = Rρθ`, `e = c_v θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gas {
    #[serde(rename = "R")]
    pub r: f64,
    pub c_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsfTransport {
    pub mu: f64,
    pub lambda: f64,
    pub k: f64,
}

#[derive(Debug, Clone)]
pub struct Nsf {
    pub d: usize,
    pub gas: Gas,
    pub transport: NsfTransport,
    pub rho_bar: f64,
    pub theta_bar: f64,
}

impl Nsf {
    fn idx_theta(&self) -> usize {
        self.d + 1
    }
}

impl SystemModel for Nsf {
    fn name(&self) -> &str {
        "nsf"
    }
    fn n1(&self) -> usize {
        1
    }
    fn n2(&self) -> usize {
        self.d + 1
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn reference_state(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.d + 2];
        u[0] = self.rho_bar;
        u[self.d + 1] = self.theta_bar;
        u
    }
    fn profile(&self) -> AssumptionProfile {
        AssumptionProfile::B
    }

    fn s0(&self, u: &[f64], out: &mut [f64]) {
        let n = self.d + 2;
        out.iter_mut().for_each(|v| *v = 0.0);
        let (rho, theta) = (u[0], u[self.idx_theta()]);
        out[0] = self.gas.r * theta / rho;
        for i in 1..=self.d {
            out[i * n + i] = rho;
        }
        let t = self.idx_theta();
        out[t * n + t] = rho * self.gas.c_v / theta;
    }

    fn s_alpha(&self, u: &[f64], alpha: usize, out: &mut [f64]) {
        let n = self.d + 2;
        let t = self.idx_theta();
        out.iter_mut().for_each(|v| *v = 0.0);
        let (rho, theta) = (u[0], u[t]);
        let ua = u[1 + alpha];
        let p_rho = self.gas.r * theta;
        let p_theta = self.gas.r * rho;
        out[0] = p_rho / rho * ua;
        out[1 + alpha] = p_rho;
        out[(1 + alpha) * n] = p_rho;
        for i in 1..=self.d {
            out[i * n + i] = rho * ua;
        }
        out[(1 + alpha) * n + t] = p_theta;
        out[t * n + 1 + alpha] = p_theta;
        out[t * n + t] = rho * self.gas.c_v / theta * ua;
    }

    fn z(&self, u: &[f64], alpha: usize, beta: usize, out: &mut [f64]) {
        let n2 = self.d + 1;
        let NsfTransport { mu, lambda, k } = self.transport;
        out.iter_mut().for_each(|v| *v = 0.0);
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..self.d {
            for j in 0..self.d {
                out[i * n2 + j] = mu * delta(alpha, beta) * delta(i, j)
                    + mu * delta(i, beta) * delta(j, alpha)
                    + lambda * delta(i, alpha) * delta(j, beta);
            }
        }
        let theta = u[self.idx_theta()];
        out[self.d * n2 + self.d] = k / theta * delta(alpha, beta);
    }

    /// Heat release `𝕋/θ + k|∇θ|²/θ²`; the other rows vanish.
    fn source(&self, u: &[f64], grad: &[f64]) -> SourceParts {
        let d = self.d;
        let n = d + 2;
        let t = self.idx_theta();
        let NsfTransport { mu, lambda, k } = self.transport;
        let theta = u[t];
        let du = |i: usize, a: usize| grad[a * n + 1 + i];
        let mut visc = 0.0;
        let mut div = 0.0;
        for i in 0..d {
            div += du(i, i);
            for j in 0..d {
                let e = du(i, j) + du(j, i);
                visc += 0.5 * mu * e * e;
            }
        }
        visc += lambda * div * div;
        let mut grad_theta_sq = 0.0;
        for a in 0..d {
            let g = grad[a * n + t];
            grad_theta_sq += g * g;
        }
        let mut parts = SourceParts::zeros(1, d + 1);
        parts.f23[d] = visc / theta + k * grad_theta_sq / (theta * theta);
        parts
    }

    fn phase_distance(&self, u: &[f64]) -> f64 {
        u[0].min(u[self.idx_theta()])
    }

    fn phase_distance_first(&self, u1: &[f64]) -> f64 {
        u1[0]
    }
}

/// Navier–Stokes–Fourier system around `(ρ̄, 0, θ̄)`.
pub fn assemble_nsf(d: usize, gas: Gas, transport: NsfTransport, rho_bar: f64, theta_bar: f64) -> Result<SystemSpec> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidArgument(format!("dimension {d} outside 1..=3")));
    }
    let NsfTransport { mu, lambda, k } = transport;
    if !(mu > 0.0 && 2.0 * mu + lambda > 0.0 && k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transport coefficients need mu > 0, 2mu + lambda > 0, k > 0 (got mu = {mu}, lambda = {lambda}, k = {k})"
        )));
    }
    if !(gas.r > 0.0 && gas.c_v > 0.0) {
        return Err(Error::InvalidArgument("gas constants R and c_v must be positive".into()));
    }
    if !(rho_bar > 0.0 && theta_bar > 0.0) {
        return Err(Error::InvalidArgument("reference density and temperature must be positive".into()));
    }
    let params = serde_json::json!({
        "d": d, "gas": gas, "transport": transport, "rho_bar": rho_bar, "theta_bar": theta_bar
    });
    Ok(SystemSpec::new(Nsf { d, gas, transport, rho_bar, theta_bar }, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_gas() -> Gas {
        Gas { r: 1.0, c_v: 1.0 }
    }

    #[test]
    fn s0_at_unit_state() {
        let spec = assemble_nsf(2, unit_gas(), NsfTransport { mu: 1.0, lambda: 0.0, k: 1.0 }, 1.0, 1.0).unwrap();
        let s0 = spec.s0(&spec.u_bar);
        assert_eq!(s0, nalgebra::DMatrix::identity(4, 4));
    }

    #[test]
    fn pressure_coupling_at_rest() {
        let spec = assemble_nsf(2, unit_gas(), NsfTransport { mu: 1.0, lambda: 0.0, k: 1.0 }, 1.0, 1.0).unwrap();
        let xi = [0.6, 0.8];
        let m = spec.s_alpha(&spec.u_bar, 0) * xi[0] + spec.s_alpha(&spec.u_bar, 1) * xi[1];
        for i in 0..4 {
            assert_eq!(m[(i, i)], 0.0);
        }
        assert!((m[(0, 1)] - 0.6).abs() < 1e-15 && (m[(2, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn rejects_bad_transport() {
        let bad = NsfTransport { mu: 1.0, lambda: -2.0, k: 1.0 };
        assert!(assemble_nsf(2, unit_gas(), bad, 1.0, 1.0).is_err());
        let bad = NsfTransport { mu: 0.0, lambda: 0.0, k: 1.0 };
        assert!(assemble_nsf(1, unit_gas(), bad, 1.0, 1.0).is_err());
    }

    #[test]
    fn heat_release_of_shear() {
        let spec = assemble_nsf(2, unit_gas(), NsfTransport { mu: 2.0, lambda: 0.0, k: 1.0 }, 1.0, 2.0).unwrap();
        let mut grad = vec![0.0; 2 * 4];
        grad[4 + 1] = 1.0; // ∂_2 u_1 = 1
        let u = [1.0, 0.0, 0.0, 2.0];
        let f = spec.source(&u, &grad);
        // 𝕋 = (μ/2)(1 + 1) = μ, divided by θ
        assert!((f.f23[2] - 1.0).abs() < 1e-15);
    }
}
