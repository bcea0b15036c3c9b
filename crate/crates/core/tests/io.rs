use hpspec::run::{exit_code_for_reports, run, RunConfig, RunOptions, EXIT_OK, EXIT_VIOLATION};
use hpspec::spectral::io::{load_field, save_field};
use hpspec::verifier::{InequalityReport, Instance};
use hpspec::{Field, GridSpec, Trajectory};

#[test]
fn field_and_trajectory_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::torus(2, 16, 2).unwrap();
    let u = Field::from_fn(g, |x, c| (x[0] + c as f64).sin() * x[1].cos());
    let path = dir.path().join("u.hpsf");
    save_field(&u, &path).unwrap();
    assert_eq!(load_field(&path).unwrap().values(), u.values());

    let tr = Trajectory::new(0.1, vec![u.clone(), u.scale(0.5), u.scale(0.25)]).unwrap();
    tr.save(&dir.path().join("tr"), "test").unwrap();
    let (back, manifest) = Trajectory::load(&dir.path().join("tr")).unwrap();
    assert_eq!(manifest.scheme, "test");
    assert_eq!(manifest.times, tr.times());
    for (a, b) in back.fields().iter().zip(tr.fields()) {
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn library_run_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/simulate_zero.json")).unwrap();
    let out = run(&cfg, &RunOptions { out: Some(dir.path().to_path_buf()), threads: None }).unwrap();
    assert_eq!(out.exit_code, EXIT_OK);
    assert!(dir.path().join("manifest.json").is_file());
    assert!(dir.path().join("norms.csv").is_file());
}

#[test]
fn violations_map_to_exit_one() {
    let ok = InequalityReport::from_instances("a", vec![Instance { label: "x".into(), lhs: 1.0, rhs: 1.0 }]);
    let bad = InequalityReport::from_instances("b", vec![Instance { label: "y".into(), lhs: 1.0, rhs: 0.0 }]);
    assert_eq!(exit_code_for_reports(&[ok.clone()]), EXIT_OK);
    assert_eq!(exit_code_for_reports(&[ok, bad]), EXIT_VIOLATION);
    assert_eq!(exit_code_for_reports(&[]), EXIT_OK);
}
