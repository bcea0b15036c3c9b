use std::io::Write;

use serde::{Deserialize, Serialize};

use super::assemble::{field_from_rows, with_reference};
use super::config::IterationConfig;
use super::subcritical::iterate_subcritical;
use crate::besov::{cumulative_trapezoid, Exponent};
use crate::error::{Error, Result};
use crate::propagators::per_point;
use crate::spectral::io::format_float;
use crate::spectral::{divergence, spectral_gradient, Field, Flavor};
use crate::systems::{AssumptionProfile, SystemSpec};
use crate::trajectory::Trajectory;

/// Cumulative continuation quantities at every sample time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationSeries {
    pub t: Vec<f64>,
    /// `∫₀^t ‖∇V‖²_∞ + ‖∂_tS⁰₁₁(U) + Σ∂_αS^α₁₁(U)‖_∞ + ‖∂_tS⁰₂₂(U)‖_∞`.
    pub integral: Vec<f64>,
    /// `sup_{[0,t]} ‖∇V¹‖_∞`.
    pub sup_grad_v1: Vec<f64>,
    /// `∫₀^t ‖∇V¹‖²_∞ + ‖∇V²‖_∞`, for systems with the critical structure.
    pub reduced: Option<Vec<f64>>,
}

impl ContinuationSeries {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,integral,sup_grad_v1,reduced")?;
        for k in 0..self.t.len() {
            let red = self.reduced.as_ref().map(|r| format_float(r[k])).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{}",
                format_float(self.t[k]),
                format_float(self.integral[k]),
                format_float(self.sup_grad_v1[k]),
                red
            )?;
        }
        Ok(())
    }
}

/// Coefficient blocks of `U` at one time: `S⁰₁₁`, `S⁰₂₂` and `[S^α₁₁]_α`.
pub(crate) fn coefficient_blocks(spec: &SystemSpec, u: &Field) -> Result<(Field, Field, Field)> {
    let (n, n1, n2, d) = (spec.n(), spec.n1, spec.n2, spec.d);
    let w = n1 * n1 + n2 * n2 + d * n1 * n1;
    let model = spec.model();
    let rows = per_point(u, w, |_, s, o| {
        let mut m: crate::linalg::Scratch = crate::linalg::SCRATCH;
        let m = &mut m[..n * n];
        model.s0(s, m);
        let mut k = 0;
        for i in 0..n1 {
            for j in 0..n1 {
                o[k] = m[i * n + j];
                k += 1;
            }
        }
        for i in n1..n {
            for j in n1..n {
                o[k] = m[i * n + j];
                k += 1;
            }
        }
        for a in 0..d {
            model.s_alpha(s, a, m);
            for i in 0..n1 {
                for j in 0..n1 {
                    o[k] = m[i * n + j];
                    k += 1;
                }
            }
        }
    });
    let all = field_from_rows(u, &rows, w)?;
    let a = n1 * n1;
    let b = a + n2 * n2;
    Ok((all.select(0..a), all.select(a..b), all.select(b..w)))
}

/// Continuation quantities along a trajectory `V` (time derivatives by finite differences).
pub fn continuation_monitor(spec: &SystemSpec, v: &Trajectory) -> Result<ContinuationSeries> {
    if v.len() < 3 {
        return Err(Error::InvalidArgument("continuation monitor needs at least 3 samples".into()));
    }
    let (n, n1) = (spec.n(), spec.n1);
    let blocks: Vec<(Field, Field, Field)> = crate::par::map_slice(v.fields(), |f| {
        coefficient_blocks(spec, &with_reference(spec, f))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let dt = v.dt();
    let s11 = Trajectory::new(dt, blocks.iter().map(|b| b.0.clone()).collect())?.time_derivative()?;
    let s22 = Trajectory::new(dt, blocks.iter().map(|b| b.1.clone()).collect())?.time_derivative()?;
    let idx: Vec<usize> = (0..v.len()).collect();
    let pointwise: Vec<(f64, f64, f64, f64)> = crate::par::map_slice(&idx, |&k| {
        let grad = spectral_gradient(v.field(k));
        let g1 = grad_block(&grad, n, 0..n1, spec.d);
        let g2 = grad_block(&grad, n, n1..n, spec.d);
        let flux = divergence(&blocks[k].2, n1 * n1);
        let coef = s11.field(k).add(&flux).linf_norm() + s22.field(k).linf_norm();
        (grad.linf_norm(), g1.linf_norm(), g2.linf_norm(), coef)
    });
    let q: Vec<f64> = pointwise.iter().map(|(g, _, _, c)| g * g + c).collect();
    let mut sup = 0.0f64;
    let sup_grad_v1 = pointwise
        .iter()
        .map(|(_, g1, _, _)| {
            sup = sup.max(*g1);
            sup
        })
        .collect();
    let reduced = (spec.profile == AssumptionProfile::C).then(|| {
        let r: Vec<f64> = pointwise.iter().map(|(_, g1, g2, _)| g1 * g1 + g2).collect();
        cumulative_trapezoid(&r, dt)
    });
    Ok(ContinuationSeries { t: v.times(), integral: cumulative_trapezoid(&q, dt), sup_grad_v1, reduced })
}

/// Components `∂_α V^c` for `c ∈ comps` out of a full gradient.
fn grad_block(grad: &Field, n: usize, comps: std::ops::Range<usize>, d: usize) -> Field {
    let parts: Vec<Field> = (0..d).map(|a| grad.select(a * n + comps.start..a * n + comps.end)).collect();
    let refs: Vec<&Field> = parts.iter().collect();
    Field::concat(&refs).expect("same grid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependenceEntry {
    pub eps: f64,
    /// `sup_t (‖δV¹‖_{B^s_{2,1}} + ‖δV²‖_{B^{s−1}_{2,1}})`.
    pub sup_delta: Option<f64>,
    /// `sup_delta / ε`.
    pub ratio: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependenceReport {
    pub t_end: f64,
    pub entries: Vec<DependenceEntry>,
    /// `max ratio / min ratio` over the converged runs with `ε > 0`.
    pub variation: f64,
    pub passed: bool,
}

/// Reruns the iteration from `V₀ + ε·perturbation` for every `ε` and compares
/// with the unperturbed run in the weak norm.
pub fn continuous_dependence_experiment(
    spec: &SystemSpec,
    v0: &Field,
    perturbation: &Field,
    eps: &[f64],
    cfg: &IterationConfig,
) -> Result<DependenceReport> {
    let base = iterate_subcritical(spec, v0, cfg)?;
    if !base.diagnostics.converged {
        return Err(Error::InvalidArgument("the unperturbed run did not converge".into()));
    }
    let (n, n1, s) = (spec.n(), spec.n1, cfg.s);
    let base_v = &base.trajectory;
    let entries: Vec<DependenceEntry> = crate::par::map_slice(eps, |&e| {
        let run = iterate_subcritical(spec, &v0.axpy(e, perturbation), cfg);
        let measured = run.and_then(|out| {
            let delta = out.trajectory.sub(base_v)?;
            let a = delta.series(Flavor::Nonhomogeneous, 0..n1)?.besov_series(s, Exponent::One);
            let b = delta.series(Flavor::Nonhomogeneous, n1..n)?.besov_series(s - 1.0, Exponent::One);
            let sup = a.iter().zip(&b).map(|(x, y)| x + y).fold(0.0, f64::max);
            Ok((sup, out.diagnostics.converged))
        });
        match measured {
            Ok((sup, converged)) => DependenceEntry {
                eps: e,
                sup_delta: Some(sup),
                ratio: (e > 0.0).then(|| sup / e),
                converged,
                error: None,
            },
            Err(err) => DependenceEntry { eps: e, sup_delta: None, ratio: None, converged: false, error: Some(err.to_string()) },
        }
    });
    let ratios: Vec<f64> = entries.iter().filter(|e| e.converged).filter_map(|e| e.ratio).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let variation = if ratios.is_empty() { f64::NAN } else { hi / lo };
    Ok(DependenceReport {
        t_end: base.diagnostics.t_end,
        passed: ratios.len() >= 2 && variation < 3.0,
        entries,
        variation,
    })
}
