use hpspec::solver::{iterate_subcritical, with_reference, IterationConfig};
use hpspec::spectral::{Field, GridSpec};
use hpspec::systems::{assemble_barotropic, PressureLaw, SystemSpec, Transport};
use hpspec::verifier::*;
use hpspec::{Error, Trajectory};

fn corpus(d: usize, n: usize, per_family: usize) -> Corpus {
    Corpus::generate(GridSpec::torus(d, n, 1).unwrap(), 99, per_family).unwrap()
}

fn baro() -> SystemSpec {
    assemble_barotropic(1, PressureLaw { a: 1.0, gamma: 2.0 }, Transport { mu: 1.0, lambda: 0.0, beta: 0.0 }, 1.0, (0.05, 20.0))
        .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn bilinear_checks_ignore_rescaling() {
    let c = corpus(1, 64, 4);
    let s = c.scaled(37.5);
    for (a, b) in verify_product_law(&c, 0.25).unwrap().iter().zip(&verify_product_law(&s, 0.25).unwrap()) {
        assert!(rel(a.fitted_c, b.fitted_c) < 1e-10, "{} vs {}", a.fitted_c, b.fitted_c);
    }
    for form in [CommutatorForm::Tame, CommutatorForm::Critical] {
        let a = verify_commutator(&c, 0.75, form).unwrap();
        let b = verify_commutator(&s, 0.75, form).unwrap();
        assert!(rel(a.fitted_c, b.fitted_c) < 1e-10);
    }
}

#[test]
fn squaring_constant_is_amplitude_free() {
    // both sides of the square-map estimate are quadratic in the amplitude
    let c = corpus(1, 64, 4);
    let fit = |lambda: f64| verify_composition(&c.scaled(lambda), &ScalarMap::square(), 1.0).unwrap()[0].fitted_c;
    assert!(rel(fit(0.1), fit(0.01)) < 1e-10);
}

fn with_constant(c: &Corpus) -> Corpus {
    let mut out = c.clone();
    out.members.truncate(1);
    out.members.insert(0, Member { family: Family::Mode, label: "one".into(), field: Field::constant(c.grid, &[1.0]) });
    out
}

#[test]
fn constant_multiplier() {
    for d in [1usize, 2] {
        let c = with_constant(&corpus(d, 32, 1));
        // ‖1‖ in nonhomogeneous B^{d/2}: only the low block, (2π)^{d/2}·2^{-d/2}
        let want = std::f64::consts::PI.powf(-(d as f64) / 2.0);
        let law = &verify_product_law(&c, 0.5).unwrap()[0];
        let one_times_b = law.instances.iter().find(|i| i.label.starts_with("one x random")).unwrap();
        assert!(rel(one_times_b.lhs / one_times_b.rhs, want) < 1e-12);
        for form in [CommutatorForm::Tame, CommutatorForm::Critical] {
            let r = verify_commutator(&c, 1.0, form).unwrap();
            assert!(r.violations.is_empty(), "{:?}", r.violations);
            for i in r.instances.iter().filter(|i| i.label.starts_with("one x")) {
                assert!(i.lhs < 1e-13 && i.rhs == 0.0, "{i:?}");
            }
        }
    }
}

#[test]
fn verification_is_deterministic() {
    let a = verify_commutator(&corpus(2, 32, 3), 1.0, CommutatorForm::Critical).unwrap();
    let b = verify_commutator(&corpus(2, 32, 3), 1.0, CommutatorForm::Critical).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn garding_constant_shrinks_as_epsilon_grows() {
    let spec = baro();
    let c = corpus(1, 64, 5);
    let u = with_reference(&spec, &Field::from_fn(c.grid.with_components(2), |x, k| 0.3 * (x[0] + k as f64).sin()));
    let fs = c.vector_fields(spec.n2);
    let fits: Vec<f64> = [0.0, 1e-3, 1e-2, 1e-1, 1.0].iter().map(|&e| verify_garding(&spec, &u, &fs, e).unwrap().fitted_c).collect();
    assert!(fits.windows(2).all(|w| w[1] <= w[0]), "{fits:?}");
    assert!(verify_garding(&spec, &u, &fs, -1.0).is_err());
    let loc = verify_garding_localized(&spec, &u, &fs).unwrap();
    assert!(loc.violations.is_empty());
}

fn zero_run(spec: &SystemSpec) -> (Trajectory, Trajectory, Trajectory, Trajectory) {
    let g = GridSpec::torus(1, 32, 1).unwrap();
    let z = |n| Trajectory::constant(Field::zeros(g.with_components(n)), 0.1, 11).unwrap();
    let u = Trajectory::constant(Field::constant(g.with_components(2), &spec.u_bar), 0.1, 11).unwrap();
    (z(2), u, z(1), z(1))
}

#[test]
fn zero_solution_has_nothing_to_bound() {
    let spec = baro();
    let (sol, u, t1, t2) = zero_run(&spec);
    let run = LinearRun { spec: &spec, solution: &sol, coefficients: &u, theta1: Some(&t1), theta2: Some(&t2) };
    for r in [verify_apriori_hyperbolic(&run, 1.0).unwrap().0, verify_apriori_parabolic(&run, 0.0).unwrap().0] {
        assert!(r.passed(), "{}", r.summary());
        assert_eq!(r.fitted_c, 0.0);
        assert!(r.instances.iter().all(|i| i.lhs == 0.0));
    }
}

#[test]
fn missing_source_is_reported() {
    let spec = baro();
    let (sol, u, t1, _) = zero_run(&spec);
    let run = LinearRun { spec: &spec, solution: &sol, coefficients: &u, theta1: Some(&t1), theta2: None };
    assert!(matches!(verify_apriori_parabolic(&run, 0.0), Err(Error::MissingRecord(_))));
    assert!(verify_apriori_hyperbolic(&run, 0.0).is_ok());
    let short = z_solution(&spec);
    let run = LinearRun { spec: &spec, solution: &short, coefficients: &u, theta1: Some(&t1), theta2: None };
    assert!(matches!(verify_apriori_hyperbolic(&run, 0.0), Err(Error::Shape(_))));
}

fn z_solution(spec: &SystemSpec) -> Trajectory {
    let g = GridSpec::torus(1, 32, spec.n2).unwrap();
    Trajectory::constant(Field::zeros(g), 0.1, 11).unwrap()
}

#[test]
fn apriori_on_a_converged_run() {
    let spec = baro();
    let g = GridSpec::torus(1, 64, 2).unwrap();
    let v0 = Field::from_fn(g, |x, c| 0.01 * if c == 0 { x[0].sin() } else { x[0].cos() });
    let out = iterate_subcritical(&spec, &v0, &IterationConfig::new(1.0, 1.0, 0.5, 0.01, 5e-4)).unwrap();
    let run = LinearRun::from_outcome(&spec, &out);
    let (rep, series) = verify_apriori_hyperbolic(&run, 1.0).unwrap();
    assert!(rep.violations.is_empty());
    assert_eq!(series.t.len(), series.lhs.len());
    assert!(series.lhs.windows(2).all(|w| w[1] >= w[0]));
    let (rep, series) = verify_apriori_parabolic(&run, 0.0).unwrap();
    assert!(rep.violations.is_empty());
    assert!(series.gain.unwrap() > 0.0);
}
