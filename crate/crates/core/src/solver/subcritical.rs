use super::assemble::{iteration_sources, residual_series, with_reference};
use super::config::{residual_monotone_to_floor, HypothesisStatus, IterationConfig, IterationDiagnostics, IterationRecord, RunStatus};
use super::{mean_drift, stack, time_besov, SolveOutcome};
use crate::besov::{trapezoid, Exponent};
use crate::error::{Error, Result};
use crate::propagators::{
    check_phase, integrate_hyperbolic, integrate_parabolic, per_point, ConstantParabolicOp, FrozenCoeffStep, TimeField,
};
use crate::spectral::{low_freq_cutoff, Field, Flavor};
use crate::systems::SystemSpec;
use crate::trajectory::Trajectory;

/// `V² = V²_L + V_S`, where `V²_L` is the reference parabolic flow of `V₀²`.
#[derive(Debug, Clone)]
pub struct SplitState {
    pub v_l: Trajectory,
    /// Exact `∂_tV²_L = −S̄⁻¹Z̄(D)V²_L`.
    pub dt_v_l: Trajectory,
    pub v_s: Trajectory,
    /// `max_t ‖V² − (V²_L + V_S)‖_{L²} / ‖V²‖_{L²}`.
    pub defect: f64,
}

/// `t ↦ e^{−tS̄⁻¹Z̄(D)}V₀²` sampled like `like`.
pub(crate) fn reference_flow(op: &ConstantParabolicOp, v0_2: &Field, dt: f64, samples: usize) -> Result<Trajectory> {
    let idx: Vec<usize> = (0..samples).collect();
    Trajectory::new(dt, crate::par::map_slice(&idx, |&k| op.apply(v0_2, k as f64 * dt)))
}

impl SplitState {
    pub fn new(op: &ConstantParabolicOp, v0_2: &Field, v2: &Trajectory) -> Result<Self> {
        let v_l = reference_flow(op, v0_2, v2.dt(), v2.len())?;
        let dt_v_l = v_l.map(|f| op.time_derivative(f));
        let v_s = v2.sub(&v_l)?;
        let mut defect = 0.0f64;
        for k in 0..v2.len() {
            let total = v2.field(k).l2_norm();
            if total > 0.0 {
                let back = v_l.field(k).add(v_s.field(k));
                defect = defect.max(v2.field(k).sub(&back).l2_norm() / total);
            }
        }
        Ok(SplitState { v_l, dt_v_l, v_s, defect })
    }
}

/// Smallest phase distance of `Ū + V` over all samples.
pub(crate) fn min_phase_distance(spec: &SystemSpec, v: &Trajectory) -> f64 {
    v.fields()
        .iter()
        .map(|f| {
            let u = with_reference(spec, f);
            per_point(&u, 1, |_, s, o| o[0] = spec.phase_distance(s)).into_iter().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Measured values of the five smallness hypotheses for `V` on `[0, T]`:
/// size bound `R`, `η²` for the free parabolic part, `η` for the rest of the
/// diffused block, `√η` for `∂_tV`, and the phase-space margin.
pub fn check_hypotheses_subcritical(
    v: &Trajectory,
    dv: &Trajectory,
    split: &SplitState,
    n1: usize,
    cfg: &IterationConfig,
    phase: (f64, f64),
) -> Result<Vec<HypothesisStatus>> {
    let nh = Flavor::Nonhomogeneous;
    let n = v.grid().n;
    let s = cfg.s;
    let n2 = n - n1;
    let h1 = time_besov(v, s + 1.0, Exponent::Inf, nh, 0..n1)?.max(time_besov(v, s, Exponent::Inf, nh, n1..n)?);
    let h2 = time_besov(&split.dt_v_l, s, Exponent::One, nh, 0..n2)?
        + time_besov(&split.v_l, s + 2.0, Exponent::One, nh, 0..n2)?;
    let dt_v_s = dv.select(n1..n).sub(&split.dt_v_l)?;
    let h3 = time_besov(&split.v_s, s, Exponent::Inf, nh, 0..n2)?
        + time_besov(&split.v_s, s + 2.0, Exponent::One, nh, 0..n2)?
        + time_besov(&dt_v_s, s, Exponent::One, nh, 0..n2)?;
    let h4 = time_besov(dv, s, Exponent::One, nh, 0..n)?;
    Ok(vec![
        HypothesisStatus::le("H1", h1, cfg.r),
        HypothesisStatus::le("H2", h2, cfg.eta * cfg.eta),
        HypothesisStatus::le("H3", h3, cfg.eta),
        HypothesisStatus::le("H4", h4, cfg.eta.sqrt()),
        HypothesisStatus::ge("H5", phase.0, 0.5 * phase.1),
    ])
}

/// `εR⁻¹‖δV¹‖_{L^∞_T(B^s)} + ‖δV²‖_{L^∞_T(B^{s−1})} + ‖δV²‖_{L¹_T(B^{s+1})}`.
pub(crate) fn contraction_norm(delta: &Trajectory, n1: usize, s: f64, weight: f64, flavor: Flavor) -> Result<f64> {
    let n = delta.grid().n;
    let mut x = weight * time_besov(delta, s, Exponent::Inf, flavor, 0..n1)?
        + time_besov(delta, s - 1.0, Exponent::Inf, flavor, n1..n)?
        + time_besov(delta, s + 1.0, Exponent::One, flavor, n1..n)?;
    if flavor == Flavor::Homogeneous {
        // the mean is invisible to homogeneous blocks
        let profiles = delta.profiles()?;
        x += profiles.iter().map(|p| weight * p.tail(flavor, 0..n1) + p.tail(flavor, n1..n)).fold(0.0, f64::max);
    }
    Ok(x)
}

pub(crate) fn validate_inputs(spec: &SystemSpec, v0: &Field, cfg: &IterationConfig) -> Result<()> {
    cfg.validate()?;
    if v0.n_components() != spec.n() || v0.grid().d != spec.d {
        return Err(Error::Shape(format!(
            "data has {} components in dimension {}, system {} expects {} in dimension {}",
            v0.n_components(),
            v0.grid().d,
            spec.name(),
            spec.n(),
            spec.d
        )));
    }
    v0.check_finite()?;
    check_phase(spec, &with_reference(spec, v0), 0.0)
}

/// Runs the frozen-coefficient iteration on `[0, cfg.T]` with data `S_{p+1}V₀`
/// for the `p`-th step. Hypothesis monitors are recorded but never stop the
/// iteration; leaving the phase space does.
pub fn iterate_subcritical(spec: &SystemSpec, v0: &Field, cfg: &IterationConfig) -> Result<SolveOutcome> {
    validate_inputs(spec, v0, cfg)?;
    let (n, n1) = (spec.n(), spec.n1);
    let op = ConstantParabolicOp::from_system(spec)?;
    let (steps, dt) = cfg.time_grid();
    let mut diag = IterationDiagnostics::new("subcritical", spec.name(), *cfg, steps, dt);
    let half_d = spec.d as f64 / 2.0;
    if cfg.s < half_d {
        diag.warnings.push(format!("s = {} is below d/2 = {half_d}; the iteration is outside its regime", cfg.s));
    } else if spec.d == 1 && cfg.s == 0.5 {
        diag.warnings.push("d = 1, s = 1/2 is the endpoint case; running the generic path".into());
    }
    let (c, c_l1) = super::default_t0_constants(&op);
    diag.constants = vec![
        ("epsilon".into(), cfg.epsilon()),
        ("c".into(), c),
        ("C".into(), c_l1),
        ("kappa".into(), op.kappa),
    ];

    let hyp = FrozenCoeffStep { cfl_safety: cfg.cfl_safety, ..FrozenCoeffStep::hyperbolic(dt) };
    let par = FrozenCoeffStep { cfl_safety: cfg.cfl_safety, ..FrozenCoeffStep::parabolic(dt) };
    let v0_2 = v0.select(n1..n);
    let phase_data = min_phase_distance(spec, &Trajectory::new(dt, vec![v0.clone()])?);

    // V_0 = (0, V²_L)
    let v_l = reference_flow(&op, &v0_2, dt, steps + 1)?;
    let zero1 = Field::zeros(v0.grid().with_components(n1));
    let mut v = stack(&Trajectory::new(dt, vec![zero1; steps + 1])?, &v_l)?;
    let weight = cfg.epsilon() / cfg.r;
    let mut x0 = None;
    let mut prev_x: Option<f64> = None;
    let mut last = None;
    let mut converged = false;

    for p in 0..cfg.p_max {
        let data = low_freq_cutoff(v0, p as i32 + 1, Flavor::Nonhomogeneous)?;
        let u = v.map(|f| with_reference(spec, f));
        for (k, f) in u.fields().iter().enumerate() {
            check_phase(spec, f, k as f64 * dt)?;
        }
        let srcs: Vec<(Field, Field)> = crate::par::map_slice(v.fields(), |f| iteration_sources(spec, f))
            .into_iter()
            .collect::<Result<_>>()?;
        let (t1, t2): (Vec<Field>, Vec<Field>) = srcs.into_iter().unzip();
        let theta1 = Trajectory::new(dt, t1)?;
        let theta2 = Trajectory::new(dt, t2)?;
        let v1 = integrate_hyperbolic(
            spec,
            &data.select(0..n1),
            TimeField::Sampled(&u),
            Some(TimeField::Sampled(&theta1)),
            &hyp,
            0.0,
            steps,
        )?;
        let v2 = integrate_parabolic(
            spec,
            &op,
            &data.select(n1..n),
            TimeField::Sampled(&u),
            Some(TimeField::Sampled(&theta2)),
            &par,
            0.0,
            steps,
        )?;
        let next = stack(&v1, &v2)?;
        let x = contraction_norm(&next.sub(&v)?, n1, cfg.s, weight, Flavor::Nonhomogeneous)?;
        let x_first = *x0.get_or_insert(x);
        diag.ratio_floor = 1e-11 * x_first;
        let ratio = prev_x.filter(|&px| px > diag.ratio_floor).map(|px| x / px);
        let residual = trapezoid(&residual_series(spec, &next)?, dt);
        let dv = next.time_derivative()?;
        let split = SplitState::new(&op, &v0_2, &next.select(n1..n))?;
        let phase_run = min_phase_distance(spec, &next);
        let hypotheses = check_hypotheses_subcritical(&next, &dv, &split, n1, cfg, (phase_run, phase_data))?;
        diag.records.push(IterationRecord { p, x, ratio, residual, hypotheses });
        prev_x = Some(x);
        v = next;
        last = Some((u, theta1, theta2));
        if x < cfg.contraction_tol {
            converged = true;
            break;
        }
    }
    finish(&mut diag, converged, &v, n1);
    let (coefficients, theta1, theta2) = last.expect("p_max >= 1");
    Ok(SolveOutcome { trajectory: v, coefficients, theta1, theta2, diagnostics: diag })
}

pub(crate) fn finish(diag: &mut IterationDiagnostics, converged: bool, v: &Trajectory, n1: usize) {
    diag.residual_monotone = residual_monotone_to_floor(&diag.residuals());
    diag.mean_drift = mean_drift(v, 0..n1);
    diag.status = if !diag.final_hypotheses_hold() {
        RunStatus::HypothesisFailure
    } else if converged {
        RunStatus::Converged
    } else {
        RunStatus::Cap
    };
    diag.converged = converged;
}
