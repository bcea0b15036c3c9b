//! Friedrichs-type iteration for the nonlinear system, in the subcritical
//! and critical regularity settings, with run-time monitors.

mod assemble;
mod config;
mod critical;
pub(crate) mod monitors;
mod subcritical;
mod t0;

pub use assemble::{diffusion_term, frozen_correction, iteration_sources, residual_field, residual_series, with_reference};
pub use config::{
    residual_monotone_to_floor, HypothesisStatus, IterationConfig, IterationDiagnostics, IterationRecord, RunStatus,
};
pub use critical::solve_critical;
pub use monitors::{
    continuation_monitor, continuous_dependence_experiment, ContinuationSeries, DependenceEntry, DependenceReport,
};
pub use subcritical::{check_hypotheses_subcritical, iterate_subcritical, SplitState};
pub use t0::{compute_t0, critical_time_cap, default_t0_constants};

use crate::besov::Exponent;
use crate::error::Result;
use crate::spectral::{Field, Flavor};
use crate::trajectory::Trajectory;

/// Everything a run produces: the last iterate `V`, the state `U_p` its
/// coefficients were frozen at, and the sources it was driven by.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trajectory: Trajectory,
    pub coefficients: Trajectory,
    pub theta1: Trajectory,
    pub theta2: Trajectory,
    pub diagnostics: IterationDiagnostics,
}

/// `‖u‖_{L^ρ_T(B^s_{2,1})}` over the components `comps`.
pub(crate) fn time_besov(tr: &Trajectory, s: f64, rho: Exponent, flavor: Flavor, comps: std::ops::Range<usize>) -> Result<f64> {
    let series = tr.series(flavor, comps)?;
    Ok(series.lebesgue_besov(s, Exponent::One, rho, series.len() - 1))
}

/// `‖u‖_{L̃^ρ_T(B^s_{2,1})}` over the components `comps`.
pub(crate) fn chemin_lerner(tr: &Trajectory, s: f64, rho: Exponent, flavor: Flavor, comps: std::ops::Range<usize>) -> Result<f64> {
    let series = tr.series(flavor, comps)?;
    Ok(series.chemin_lerner_total(s, Exponent::One, rho, series.len() - 1))
}

/// Stacks two trajectories component-wise, sample by sample.
pub(crate) fn stack(a: &Trajectory, b: &Trajectory) -> Result<Trajectory> {
    a.zip_map(b, |x, y| Field::concat(&[x, y]).expect("same grid"))
}

/// `max_k |mean of component c at t_k − at t_0|`, largest over `comps`.
pub(crate) fn mean_drift(tr: &Trajectory, comps: std::ops::Range<usize>) -> f64 {
    comps
        .map(|c| {
            let m0 = tr.field(0).mean(c);
            tr.fields().iter().map(|f| (f.mean(c) - m0).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
