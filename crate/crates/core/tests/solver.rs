use hpspec::propagators::ConstantParabolicOp;
use hpspec::solver::*;
use hpspec::spectral::{dyadic_block, BlockIndex, Field, GridSpec};
use hpspec::systems::{assemble_barotropic, PressureLaw, SystemSpec, Transport};
use hpspec::Trajectory;

fn baro(d: usize) -> SystemSpec {
    assemble_barotropic(d, PressureLaw { a: 1.0, gamma: 2.0 }, Transport { mu: 1.0, lambda: 0.0, beta: 0.0 }, 1.0, (0.05, 20.0))
        .unwrap()
}

fn small_data_1d(n: usize, amp: f64) -> Field {
    let g = GridSpec::torus(1, n, 2).unwrap();
    Field::from_fn(g, |x, c| if c == 0 { amp * x[0].sin() } else { amp * x[0].cos() })
}

fn t0_for(spec: &SystemSpec, v0: &Field, eta: f64) -> f64 {
    let op = ConstantParabolicOp::from_system(spec).unwrap();
    let (c, big_c) = default_t0_constants(&op);
    compute_t0(&v0.select(1..2), 1.0, eta, c, big_c).unwrap()
}

#[test]
fn zero_data_converges_at_once() {
    let spec = baro(1);
    let v0 = Field::zeros(GridSpec::torus(1, 64, 2).unwrap());
    let out = iterate_subcritical(&spec, &v0, &IterationConfig::new(1.0, 1.0, 0.5, 0.05, 0.005)).unwrap();
    assert!(out.diagnostics.converged);
    assert_eq!(out.diagnostics.records[0].x, 0.0);
    assert!(out.trajectory.fields().iter().all(Field::is_zero));

    let spec = baro(2);
    let v0 = Field::zeros(GridSpec::torus(2, 32, 3).unwrap());
    let out = solve_critical(&spec, &v0, &IterationConfig::new(1.0, 1.0, 0.5, 0.02, 0.005)).unwrap();
    assert!(out.diagnostics.converged);
    assert!(out.diagnostics.records.iter().all(|r| r.x == 0.0));
}

/// Newton iteration on the scalar equation for a field with one nonzero block.
fn t0_oracle(rate: f64, weight: f64, target: f64) -> f64 {
    let mut h = 0.0f64;
    for _ in 0..100 {
        let g = h + weight * (1.0 - (-rate * h).exp()) - target;
        let dg = 1.0 + weight * rate * (-rate * h).exp();
        h -= g / dg;
    }
    h
}

#[test]
fn t0_matches_single_block_oracle() {
    let g = GridSpec::torus(1, 64, 1).unwrap();
    let a = 0.003;
    let v = Field::from_fn(g, |x, _| a * (11.0 * x[0]).cos());
    let norm = dyadic_block(&v, BlockIndex::nonhomogeneous(3)).unwrap().l2_norm();
    assert!((norm - a * std::f64::consts::PI.sqrt()).abs() < 1e-15);
    let (c, big_c, s, eta) = (0.7, 3.0, 1.0, 0.4);
    let got = compute_t0(&v, s, eta, c, big_c).unwrap();
    let want = t0_oracle(c * 64.0, 8.0 * norm, eta * eta / big_c);
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn t0_increases_with_eta_and_zero_data_gives_the_cap() {
    let spec = baro(1);
    let v0 = small_data_1d(128, 0.01);
    let ts: Vec<f64> = [0.1, 0.2, 0.4, 0.8].iter().map(|&e| t0_for(&spec, &v0, e)).collect();
    assert!(ts.windows(2).all(|w| w[1] > w[0]), "{ts:?}");
    let z = Field::zeros(GridSpec::torus(1, 64, 1).unwrap());
    assert_eq!(compute_t0(&z, 1.0, 0.5, 1.0, 2.0).unwrap(), 0.125);
    assert!(compute_t0(&z, 1.0, 1.5, 1.0, 2.0).is_err());
}

#[test]
fn long_horizon_breaks_the_parabolic_smallness() {
    let spec = baro(1);
    // velocity data well above η², so T0 is set by the data term
    let g = GridSpec::torus(1, 64, 2).unwrap();
    let v0 = Field::from_fn(g, |x, c| if c == 1 { 0.05 * (6.0 * x[0]).cos() } else { 0.0 });
    let eta = 0.1;
    let t0 = t0_for(&spec, &v0, eta);
    let h2 = |t: f64| {
        let out = iterate_subcritical(&spec, &v0, &IterationConfig { p_max: 1, ..IterationConfig::new(1.0, 1.0, eta, t, t / 20.0) })
            .unwrap();
        out.diagnostics.records[0].hypotheses.iter().find(|h| h.name == "H2").unwrap().clone()
    };
    let short = h2(t0);
    let long = h2(10.0 * t0);
    assert!(short.holds, "{short:?}");
    assert!(!long.holds, "{long:?}");
}

#[test]
fn splitting_is_exact() {
    let spec = baro(1);
    let op = ConstantParabolicOp::from_system(&spec).unwrap();
    let v0 = small_data_1d(64, 0.01);
    let out = iterate_subcritical(&spec, &v0, &IterationConfig::new(1.0, 1.0, 0.5, 0.01, 0.001)).unwrap();
    let v2 = out.trajectory.select(1..2);
    let split = SplitState::new(&op, &v0.select(1..2), &v2).unwrap();
    assert!(split.defect < 1e-14, "{}", split.defect);
    assert!(split.v_l.field(0).sub(&v0.select(1..2)).max_abs() < 1e-15);
}

#[test]
fn constant_state_has_zero_continuation_quantities() {
    let spec = baro(2);
    let g = GridSpec::torus(2, 16, 3).unwrap();
    let tr = Trajectory::constant(Field::constant(g, &[0.2, 0.1, -0.3]), 0.1, 6).unwrap();
    let m = continuation_monitor(&spec, &tr).unwrap();
    assert!(m.integral.iter().chain(&m.sup_grad_v1).all(|&v| v.abs() < 1e-12), "{m:?}");
}

#[test]
fn zero_perturbation_gives_zero_difference() {
    let spec = baro(1);
    let v0 = small_data_1d(64, 0.01);
    let t0 = t0_for(&spec, &v0, 0.5);
    let p = Field::from_fn(*v0.grid(), |x, _| (2.0 * x[0]).cos());
    let rep = continuous_dependence_experiment(&spec, &v0, &p, &[0.0, 1e-3], &IterationConfig::new(1.0, 1.0, 0.5, t0, t0 / 10.0))
        .unwrap();
    assert_eq!(rep.entries[0].sup_delta, Some(0.0));
    assert!(rep.entries[0].ratio.is_none());
    assert!(rep.entries[1].sup_delta.unwrap() > 0.0);
}

#[test]
fn runs_are_deterministic() {
    let spec = baro(1);
    let v0 = small_data_1d(64, 0.01);
    let t0 = t0_for(&spec, &v0, 0.5);
    let cfg = IterationConfig::new(1.0, 1.0, 0.5, t0, t0 / 10.0);
    let a = iterate_subcritical(&spec, &v0, &cfg).unwrap();
    let b = iterate_subcritical(&spec, &v0, &cfg).unwrap();
    assert_eq!(a.trajectory.last().values(), b.trajectory.last().values());
    assert_eq!(serde_json::to_string(&a.diagnostics).unwrap(), serde_json::to_string(&b.diagnostics).unwrap());
}
