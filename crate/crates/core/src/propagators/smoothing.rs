//! Per-block checks of the parabolic smoothing estimates and of the
//! integrated ODE inequality used to close energy estimates.

use nalgebra::DMatrix;
use serde::Serialize;

use super::constant::ConstantParabolicOp;
use crate::besov::{b21_total, trapezoid};
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{Field, Flavor};
use crate::trajectory::Trajectory;

/// `x ↦ M u(x)` for a constant matrix.
pub fn apply_constant_matrix(u: &Field, m: &DMatrix<f64>) -> Field {
    let g = *u.grid();
    let n = g.n;
    assert_eq!(m.shape(), (n, n));
    let pts = g.points();
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    par::fill(&mut out, |idx| {
        let i = idx / pts;
        let p = idx % pts;
        (0..n).map(|j| m[(i, j)] * v[j * pts + p]).sum()
    });
    Field::new(g, out).expect("same shape")
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSmoothing {
    pub j: i32,
    pub initial: f64,
    pub vacuous: bool,
    pub note: String,
    /// `sup_t ‖Δ_j V(t)‖ / ‖Δ_j V₀‖`.
    pub linf_ratio: f64,
    pub linf_ok: bool,
    /// Least-squares decay rate of `log ‖Δ_j V(t)‖_{L²_S}`.
    pub fitted_rate: f64,
    pub envelope: (f64, f64),
    pub rate_ok: bool,
    /// Largest observed constant in the windowed `L¹` bound.
    pub l1_fit: f64,
    pub l1_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowBlockSmoothing {
    /// `max ∫_T^{T+h} max(‖Δ₋₁V‖, ‖∂_tΔ₋₁V‖) / (h ‖V₀‖_{B^s_{2,1}})` over the windows.
    pub c0_fit: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub s: f64,
    pub flavor: Flavor,
    /// `cond(S̄)^{1/2}`.
    pub c0: f64,
    /// Decay constant `c = a_min (3/4)²`.
    pub c: f64,
    /// Constant of the windowed `L¹` bound, `C₀(1 + a_max(8/3)²)/c`.
    pub l1_constant: f64,
    pub blocks: Vec<BlockSmoothing>,
    pub low_block: Option<LowBlockSmoothing>,
}

impl SmoothingReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.vacuous || (b.linf_ok && b.rate_ok && b.l1_ok))
            && self.low_block.as_ref().is_none_or(|l| l.ok)
    }
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt) * (t - mt)).sum();
    num / den
}

/// Checks the per-block smoothing bounds on a trajectory of the exact
/// propagator. `windows` lists `(T, h)` pairs for the time-integrated bounds;
/// they are snapped to the sample grid.
pub fn verify_smoothing_estimates(
    traj: &Trajectory,
    op: &ConstantParabolicOp,
    s: f64,
    flavor: Flavor,
    windows: &[(f64, f64)],
) -> Result<SmoothingReport> {
    if traj.len() < 3 {
        return Err(Error::InvalidArgument("smoothing check needs at least 3 samples".into()));
    }
    let n2 = op.n2;
    let comps = 0..n2;
    let series = traj.series(flavor, comps.clone())?;
    let weighted = traj.map(|v| apply_constant_matrix(v, op.s_half())).series(flavor, comps.clone())?;
    let dtraj = traj.map(|v| op.time_derivative(v));
    let dseries = dtraj.series(flavor, comps.clone())?;
    let (c, c0, l1_constant) = op.smoothing_constants();
    let dt = traj.dt();
    let times = traj.times();
    let max_init = series.values[0].iter().fold(0.0f64, |m, v| m.max(*v));
    let snapped: Vec<(usize, usize)> = windows
        .iter()
        .map(|&(t, h)| {
            let k0 = traj.index_at(t);
            let k1 = traj.index_at(t + h).max(k0 + 1).min(traj.len() - 1);
            (k0, k1)
        })
        .filter(|(k0, k1)| k1 > k0)
        .collect();

    let mut blocks = Vec::new();
    let mut low_block = None;
    for (b, &j) in series.js.iter().enumerate() {
        let col: Vec<f64> = series.values.iter().map(|r| r[b]).collect();
        let dcol: Vec<f64> = dseries.values.iter().map(|r| r[b]).collect();
        let init = col[0];
        if flavor == Flavor::Nonhomogeneous && j == -1 {
            if init > 1e-14 * max_init.max(1e-300) {
                let v0_norm = b21_total(&traj.profiles()?[0], s, flavor, comps.clone());
                let pair: Vec<f64> = col.iter().zip(&dcol).map(|(a, b)| a.max(*b)).collect();
                let mut fit = 0.0f64;
                for &(k0, k1) in &snapped {
                    let lhs = trapezoid(&pair[k0..=k1], dt);
                    fit = fit.max(lhs / ((k1 - k0) as f64 * dt * v0_norm));
                }
                low_block = Some(LowBlockSmoothing { c0_fit: fit, bound: c0, ok: fit <= c0 * (1.0 + 1e-9) });
            }
            continue;
        }
        let scale = 4f64.powi(j);
        let envelope = (op.a_min * 0.5625 * scale, op.a_max * (64.0 / 9.0) * scale);
        let mut rep = BlockSmoothing {
            j,
            initial: init,
            vacuous: false,
            note: String::new(),
            linf_ratio: 0.0,
            linf_ok: true,
            fitted_rate: f64::NAN,
            envelope,
            rate_ok: true,
            l1_fit: 0.0,
            l1_ok: true,
        };
        if !(init > 1e-12 * max_init.max(1e-300)) {
            rep.vacuous = true;
            rep.note = "block empty in the data; skipped".into();
            blocks.push(rep);
            continue;
        }
        rep.linf_ratio = col.iter().fold(0.0f64, |m, v| m.max(*v)) / init;
        rep.linf_ok = rep.linf_ratio <= c0 * (1.0 + 1e-9);

        let wcol: Vec<f64> = weighted.values.iter().map(|r| r[b]).collect();
        let keep: Vec<usize> = (0..wcol.len()).filter(|&k| wcol[k] > 1e-11 * wcol[0]).collect();
        if keep.len() >= 2 {
            let ts: Vec<f64> = keep.iter().map(|&k| times[k]).collect();
            let ys: Vec<f64> = keep.iter().map(|&k| wcol[k].ln()).collect();
            rep.fitted_rate = -slope(&ts, &ys);
            rep.rate_ok = rep.fitted_rate >= envelope.0 * (1.0 - 1e-6) && rep.fitted_rate <= envelope.1 * (1.0 + 1e-6);
        } else {
            rep.note = "decays below roundoff within one sample; rate not fitted".into();
        }

        let w_s = 2f64.powf(j as f64 * s);
        let w_s2 = 2f64.powf(j as f64 * (s + 2.0));
        let integrand: Vec<f64> = col.iter().zip(&dcol).map(|(v, dv)| w_s2 * v + w_s * dv).collect();
        for &(k0, k1) in &snapped {
            let (t0, h) = (times[k0], times[k1] - times[k0]);
            let denom = (-c * scale * t0).exp() * (1.0 - (-c * scale * h).exp()) * w_s * init;
            if denom < 1e-250 {
                continue;
            }
            let lhs = trapezoid(&integrand[k0..=k1], dt);
            rep.l1_fit = rep.l1_fit.max(lhs / denom);
        }
        rep.l1_ok = rep.l1_fit <= l1_constant * (1.0 + 1e-6);
        blocks.push(rep);
    }
    Ok(SmoothingReport { s, flavor, c0, c, l1_constant, blocks, low_block })
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeLemmaReport {
    pub hypothesis_ok: bool,
    /// Largest `½X′ + BX − AX^{1/2}` over samples (positive means violated).
    pub hypothesis_excess: f64,
    pub conclusion_ok: Option<bool>,
    /// Largest `X^{1/2}(t) + B∫X^{1/2} − X^{1/2}(0) − ∫A`.
    pub conclusion_excess: f64,
}

/// Checks `X^{1/2}(t) + B∫₀^t X^{1/2} ≤ X^{1/2}(0) + ∫₀^t A` on samples at
/// spacing `dt`, after confirming the differential hypothesis
/// `½X′ + BX ≤ AX^{1/2}` (finite differences, relative tolerance `tol`).
pub fn verify_ode_lemma(dt: f64, x: &[f64], a: &[f64], b: f64, tol: f64) -> Result<OdeLemmaReport> {
    let n = x.len();
    if n < 3 || a.len() != n {
        return Err(Error::InvalidArgument("need at least 3 samples of X and A of equal length".into()));
    }
    if x.iter().any(|v| *v < 0.0) || a.iter().any(|v| *v < 0.0) || b < 0.0 {
        return Err(Error::InvalidArgument("X, A and B must be nonnegative".into()));
    }
    let dx = |k: usize| {
        if k == 0 {
            (-1.5 * x[0] + 2.0 * x[1] - 0.5 * x[2]) / dt
        } else if k == n - 1 {
            (1.5 * x[n - 1] - 2.0 * x[n - 2] + 0.5 * x[n - 3]) / dt
        } else {
            (x[k + 1] - x[k - 1]) / (2.0 * dt)
        }
    };
    let mut hyp = f64::NEG_INFINITY;
    let mut hyp_ok = true;
    for k in 0..n {
        let terms = [0.5 * dx(k), b * x[k], a[k] * x[k].sqrt()];
        let excess = terms[0] + terms[1] - terms[2];
        hyp = hyp.max(excess);
        if excess > tol * (1.0 + terms.iter().map(|v| v.abs()).sum::<f64>()) {
            hyp_ok = false;
        }
    }
    let root: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
    let mut concl = f64::NEG_INFINITY;
    let mut concl_ok = true;
    for k in 1..n {
        let lhs = root[k] + b * trapezoid(&root[..=k], dt);
        let rhs = root[0] + trapezoid(&a[..=k], dt);
        concl = concl.max(lhs - rhs);
        if lhs - rhs > tol * (1.0 + rhs.abs()) {
            concl_ok = false;
        }
    }
    Ok(OdeLemmaReport {
        hypothesis_ok: hyp_ok,
        hypothesis_excess: hyp,
        conclusion_ok: if hyp_ok { Some(concl_ok) } else { None },
        conclusion_excess: concl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ode_lemma_equality_case() {
        let n = 201;
        let dt = 1.0 / 200.0;
        let x: Vec<f64> = (0..n).map(|k| (1.0 - 0.5 * k as f64 * dt).powi(2)).collect();
        let a: Vec<f64> = (0..n).map(|k| 0.5 * (1.0 - k as f64 * dt)).collect();
        let r = verify_ode_lemma(dt, &x, &a, 1.0, 1e-6).unwrap();
        assert!(r.hypothesis_ok);
        assert_eq!(r.conclusion_ok, Some(true));
        assert!(r.conclusion_excess.abs() < 1e-8);
    }

    #[test]
    fn ode_lemma_reports_bad_hypothesis() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let r = verify_ode_lemma(0.1, &x, &[0.0; 4], 0.0, 1e-6).unwrap();
        assert!(!r.hypothesis_ok);
        assert_eq!(r.conclusion_ok, None);
    }
}
