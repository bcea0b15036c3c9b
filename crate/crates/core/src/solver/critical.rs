use super::assemble::{frozen_correction, iteration_sources, residual_series, with_reference};
use super::config::{HypothesisStatus, IterationConfig, IterationDiagnostics, IterationRecord};
use super::subcritical::{contraction_norm, finish, reference_flow, validate_inputs};
use super::t0::{critical_time_cap, default_t0_constants};
use super::{chemin_lerner, stack, time_besov, SolveOutcome};
use crate::besov::{b21_total, trapezoid, BlockProfile, Exponent};
use crate::error::{Error, Result};
use crate::propagators::{
    check_phase, integrate_hyperbolic, integrate_parabolic, per_point, ConstantParabolicOp, FrozenCoeffStep, TimeField,
};
use crate::spectral::{low_freq_cutoff, Field, Flavor};
use crate::systems::{AssumptionProfile, SystemSpec};
use crate::trajectory::Trajectory;

/// Smallest `m ≥ floor` with `Σ_{j≥m} 2^{jd/2}‖Δ̇_jV₀¹‖ ≤ ½√η`.
fn choose_m(v0_1: &Field, eta: f64, floor: i32) -> Result<i32> {
    let d = v0_1.grid().d as f64;
    let prof = BlockProfile::of(v0_1)?;
    let hom = Flavor::Homogeneous;
    let js: Vec<i32> = prof.block_range(hom).collect();
    let w: Vec<f64> = js
        .iter()
        .zip(prof.blocks(hom, 0..prof.n_components()))
        .map(|(&j, b)| 2f64.powf(j as f64 * d / 2.0) * b)
        .collect();
    let tail = |m: i32| -> f64 { js.iter().zip(&w).filter(|(j, _)| **j >= m).map(|(_, v)| v).sum() };
    let mut m = floor;
    while tail(m) > 0.5 * eta.sqrt() {
        m += 1;
    }
    Ok(m)
}

/// Largest pointwise `|V¹(t, x) − V₀¹(x)|` and where it happens.
fn max_deviation(v1: &Trajectory, v0_1: &Field) -> (f64, f64, usize) {
    let mut worst = (0.0, 0.0, 0);
    for (k, f) in v1.fields().iter().enumerate() {
        let diff = f.sub(v0_1);
        let cat = per_point(&diff, 1, |_, s, o| o[0] = s.iter().map(|x| x * x).sum::<f64>().sqrt());
        for (p, &dev) in cat.iter().enumerate() {
            if dev > worst.0 {
                worst = (dev, k as f64 * v1.dt(), p);
            }
        }
    }
    worst
}

/// Runs the critical-regularity scheme: `V¹₀ ∈ Ḃ^{d/2}_{2,1}`, `V²₀ ∈ Ḃ^{d/2−1}_{2,1}`,
/// `d ≥ 2`. The diffused block is solved with coefficients frozen at
/// `U_m = (Ū¹ + Ṡ_{m+1}V¹, Ū² + V²)`; the difference to the true coefficients
/// is carried explicitly in the source.
pub fn solve_critical(spec: &SystemSpec, v0: &Field, cfg: &IterationConfig) -> Result<SolveOutcome> {
    if spec.d < 2 {
        return Err(Error::InvalidArgument("the critical scheme needs d >= 2".into()));
    }
    if spec.profile != AssumptionProfile::C {
        return Err(Error::InvalidArgument(format!("system {} does not have the critical structure", spec.name())));
    }
    validate_inputs(spec, v0, cfg)?;
    let (n, n1) = (spec.n(), spec.n1);
    let half_d = spec.d as f64 / 2.0;
    let hom = Flavor::Homogeneous;
    let op = ConstantParabolicOp::from_system(spec)?;
    let (c, c_l1) = default_t0_constants(&op);
    let v0_1 = v0.select(0..n1);
    let v0_2 = v0.select(n1..n);

    let m = choose_m(&v0_1, cfg.eta, cfg.m)?;
    let t_cap = critical_time_cap(&v0_2, cfg.eta, c, c_l1)?;
    let mut run_cfg = *cfg;
    run_cfg.s = half_d;
    run_cfg.m = m;
    run_cfg.t = cfg.t.min(t_cap);
    run_cfg.dt = cfg.dt.min(run_cfg.t);
    let (steps, dt) = run_cfg.time_grid();
    let mut diag = IterationDiagnostics::new("critical", spec.name(), run_cfg, steps, dt);
    if cfg.s != half_d {
        diag.warnings.push(format!("s = {} replaced by d/2 = {half_d}", cfg.s));
    }

    let u0_1 = with_reference(spec, v0).select(0..n1);
    let d1 = 0.5
        * per_point(&u0_1, 1, |_, s, o| o[0] = spec.phase_distance_first(s)).into_iter().fold(f64::INFINITY, f64::min);
    let m1 = 1.0 + 2.0 * b21_total(&BlockProfile::of(&v0_1)?, half_d, hom, 0..n1);
    diag.constants = vec![
        ("epsilon".into(), cfg.epsilon()),
        ("c".into(), c),
        ("C".into(), c_l1),
        ("m".into(), m as f64),
        ("T_cap".into(), t_cap),
        ("d1".into(), d1),
        ("M1".into(), m1),
    ];

    let hyp = FrozenCoeffStep { cfl_safety: cfg.cfl_safety, ..FrozenCoeffStep::hyperbolic(dt) };
    let par = FrozenCoeffStep { cfl_safety: cfg.cfl_safety, ..FrozenCoeffStep::parabolic(dt) };
    let v_l = reference_flow(&op, &v0_2, dt, steps + 1)?;
    let dt_v_l = v_l.map(|f| op.time_derivative(f));
    let mut v = stack(&Trajectory::new(dt, vec![v0_1.clone(); steps + 1])?, &v_l)?;
    let weight = cfg.epsilon() / cfg.r;
    let mut x0 = None;
    let mut prev_x: Option<f64> = None;
    let mut last = None;
    let mut converged = false;

    for p in 0..cfg.p_max {
        let u = v.map(|f| with_reference(spec, f));
        for (k, f) in u.fields().iter().enumerate() {
            check_phase(spec, f, k as f64 * dt)?;
        }
        let v1_low = v.select(0..n1).map(|f| low_freq_cutoff(f, m + 1, hom).expect("grid validated"));
        let u_m = stack(&v1_low, &v.select(n1..n))?.map(|f| with_reference(spec, f));
        let dv2 = v.select(n1..n).time_derivative()?;
        let idx: Vec<usize> = (0..v.len()).collect();
        let srcs: Vec<(Field, Field)> = crate::par::map_slice(&idx, |&k| {
            let (t1, t2) = iteration_sources(spec, v.field(k))?;
            let corr = frozen_correction(spec, u_m.field(k), u.field(k), &v.field(k).select(n1..n), dv2.field(k))?;
            Ok((t1, t2.add(&corr)))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let (t1, t2): (Vec<Field>, Vec<Field>) = srcs.into_iter().unzip();
        let theta1 = Trajectory::new(dt, t1)?;
        let theta2 = Trajectory::new(dt, t2)?;
        let v1 = integrate_hyperbolic(spec, &v0_1, TimeField::Sampled(&u), Some(TimeField::Sampled(&theta1)), &hyp, 0.0, steps)?;
        let (dev, t_dev, p_dev) = max_deviation(&v1, &v0_1);
        if dev > d1 {
            return Err(Error::Deviation { t: t_dev, point: p_dev, deviation: dev, bound: d1 });
        }
        let v2 = integrate_parabolic(
            spec,
            &op,
            &v0_2,
            TimeField::Sampled(&u_m),
            Some(TimeField::Sampled(&theta2)),
            &par,
            0.0,
            steps,
        )?;
        let next = stack(&v1, &v2)?;
        let x = contraction_norm(&next.sub(&v)?, n1, half_d, weight, hom)?;
        let x_first = *x0.get_or_insert(x);
        diag.ratio_floor = 1e-11 * x_first;
        let ratio = prev_x.filter(|&px| px > diag.ratio_floor).map(|px| x / px);
        let residual = trapezoid(&residual_series(spec, &next)?, dt);

        let v_s = next.select(n1..n).sub(&v_l)?;
        let series1 = next.series(hom, 0..n1)?;
        let tail: f64 = series1
            .chemin_lerner_blocks(half_d, Exponent::Inf, series1.len() - 1)
            .iter()
            .zip(&series1.js)
            .filter(|(_, j)| **j >= m)
            .map(|(v, _)| v)
            .sum();
        let n2 = n - n1;
        let c4 = chemin_lerner(&v_s, half_d - 1.0, Exponent::Inf, hom, 0..n2)?
            + time_besov(&v_s, half_d + 1.0, Exponent::One, hom, 0..n2)?;
        let c5 = time_besov(&dt_v_l, half_d - 1.0, Exponent::One, hom, 0..n2)?
            + time_besov(&v_l, half_d + 1.0, Exponent::One, hom, 0..n2)?;
        let hypotheses = vec![
            HypothesisStatus::le("C1", chemin_lerner(&next, half_d, Exponent::Inf, hom, 0..n1)?, m1),
            HypothesisStatus::le("C2", tail, cfg.eta.sqrt()),
            HypothesisStatus::le("C3", dev, d1),
            HypothesisStatus::le("C4", c4, cfg.eta),
            HypothesisStatus::le("C5", c5, cfg.eta * cfg.eta),
        ];
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    #[test]
    fn m_choice_monotone_in_floor() {
        let g = GridSpec::torus(2, 32, 1).unwrap();
        let f = Field::from_fn(g, |x, _| 0.1 * (3.0 * x[0]).cos());
        let m = choose_m(&f, 0.25, 0).unwrap();
        assert!(m >= 0);
        assert_eq!(choose_m(&f, 0.25, m + 3).unwrap(), m + 3);
        assert_eq!(choose_m(&Field::zeros(g), 0.25, 0).unwrap(), 0);
    }
}
