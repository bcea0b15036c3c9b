use hpspec::besov::{besov_norm, BesovIndex};
use hpspec::spectral::io::format_float;
use hpspec::spectral::{chi, dyadic_block, phi, BlockIndex, Field, FilterBank, Flavor, GridSpec};
use hpspec::verifier::{Instance, InequalityReport};
use proptest::prelude::*;

fn field_from(coeffs: &[(i64, f64, f64)]) -> Field {
    let g = GridSpec::torus(1, 64, 1).unwrap();
    Field::from_fn(g, |x, _| coeffs.iter().map(|&(k, a, p)| a * (k as f64 * x[0] + p).cos()).sum())
}

fn coeffs() -> impl Strategy<Value = Vec<(i64, f64, f64)>> {
    prop::collection::vec((0i64..=12, -2.0f64..2.0, 0.0f64..6.3), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_sums_to_one(r in 0.0f64..200.0) {
        let jmax = 10;
        let s = chi(r) + (0..=jmax).map(|j| phi(r / 2f64.powi(j))).sum::<f64>();
        if r <= 1.5 * 2f64.powi(jmax) {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&chi(r)) && (0.0..=1.0).contains(&phi(r)));
    }

    #[test]
    fn blocks_reconstruct(c in coeffs()) {
        let u = field_from(&c);
        let bank = FilterBank::for_grid(u.grid()).unwrap();
        let mut sum = Field::zeros(*u.grid());
        for j in bank.block_range(Flavor::Nonhomogeneous) {
            sum = sum.add(&dyadic_block(&u, BlockIndex::nonhomogeneous(j)).unwrap());
        }
        prop_assert!(sum.sub(&u).max_abs() <= 1e-12 * (1.0 + u.max_abs()));
    }

    #[test]
    fn norm_is_absolutely_homogeneous(c in coeffs(), lambda in -10.0f64..10.0, s in -1.0f64..2.0) {
        let u = field_from(&c);
        let idx = BesovIndex::b21(s, Flavor::Nonhomogeneous);
        let a = besov_norm(&u, idx).unwrap().total;
        let b = besov_norm(&u.scale(lambda), idx).unwrap().total;
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn norm_triangle(c1 in coeffs(), c2 in coeffs(), s in -1.0f64..2.0) {
        let (u, v) = (field_from(&c1), field_from(&c2));
        let idx = BesovIndex::b21(s, Flavor::Homogeneous);
        let n = |f: &Field| besov_norm(f, idx).unwrap().total;
        prop_assert!(n(&u.add(&v)) <= n(&u) + n(&v) + 1e-12);
    }

    #[test]
    fn float_text_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn fitted_constant_dominates_ratios(pairs in prop::collection::vec((0.0f64..10.0, 0.01f64..10.0), 1..20)) {
        let inst: Vec<Instance> = pairs.iter().enumerate().map(|(k, &(lhs, rhs))| Instance { label: k.to_string(), lhs, rhs }).collect();
        let r = InequalityReport::from_instances("p", inst);
        prop_assert!(r.violations.is_empty());
        prop_assert!(r.ratios().iter().all(|&q| q <= r.fitted_c));
        prop_assert!(r.ratios().contains(&r.fitted_c));
    }
}
