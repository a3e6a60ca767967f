use kickmap::{validate_config, AGrid, EpsRule, SweepConfig};

fn base() -> SweepConfig {
    SweepConfig::from_json(r#"{"a_grid": {"count": 4}, "L_grid": [10, 100], "eps_rule": {"constant": 0.1}}"#)
        .unwrap()
}

#[test]
fn parses_every_eps_rule_form() {
    for (text, rule) in [
        (r#"{"constant": 0.25}"#, EpsRule::Constant(0.25)),
        (r#"{"power": {"c": 2.0, "beta": 0.5}}"#, EpsRule::Power { c: 2.0, beta: 0.5 }),
        (r#""schedule""#, EpsRule::Schedule),
    ] {
        let cfg = SweepConfig::from_json(&format!(
            r#"{{"a_grid": {{"values": [0.1, 0.2]}}, "L_grid": [100], "eps_rule": {text}}}"#
        ))
        .unwrap();
        assert_eq!(cfg.eps_rule, rule);
    }
}

#[test]
fn defaults_fill_optional_fields() {
    let cfg = base();
    assert_eq!(cfg.master_seed, 0);
    assert_eq!(cfg.output_dir.to_str(), Some("out"));
    assert_eq!(cfg.psi, kickmap_core::PsiCoeffs::sine());
    assert!(cfg.estimator.monte_carlo && cfg.estimator.quadrature);
    assert!(SweepConfig::from_json(r#"{"a_grid": {"count": 1}, "L_grid": [1], "eps_rule": "schedule", "typo": 1}"#).is_err());
}

#[test]
fn eps_rules_evaluate() {
    assert_eq!(EpsRule::Constant(0.2).eps(1e4), 0.2);
    assert!((EpsRule::Power { c: 1.0, beta: 0.5 }.eps(1e4) - 0.01).abs() < 1e-15);
    assert_eq!(EpsRule::Power { c: 1.0, beta: 1.0 }.eps(1e4), 0.5);
    assert!((EpsRule::Schedule.eps(1e4) - 0.01).abs() < 1e-15);
}

#[test]
fn cells_run_l_outer_a_inner() {
    let cells = base().cells();
    assert_eq!(cells.len(), 8);
    assert_eq!(AGrid::Count(4).values(), vec![0.0, 0.25, 0.5, 0.75]);
    for (i, c) in cells.iter().enumerate() {
        assert_eq!(c.index, i);
        assert_eq!(c.amplitude, if i < 4 { 10.0 } else { 100.0 });
        assert_eq!(c.a, (i % 4) as f64 / 4.0);
    }
}

#[test]
fn valid_config_passes() {
    let v = validate_config(&base());
    assert!(v.is_ok(), "{:?}", v.errors);
    assert!(v.warnings.is_empty(), "{:?}", v.warnings);
}

#[test]
fn eps_above_half_is_rejected() {
    let mut cfg = base();
    cfg.eps_rule = EpsRule::Constant(0.6);
    let v = validate_config(&cfg);
    assert!(v.errors.iter().any(|e| e.contains("outside (0, 1/2]")), "{:?}", v.errors);
}

#[test]
fn empty_grids_are_rejected() {
    let mut cfg = base();
    cfg.a_grid = AGrid::Values(vec![]);
    cfg.l_grid.clear();
    let v = validate_config(&cfg);
    assert!(v.errors.iter().any(|e| e.contains("a_grid is empty")));
    assert!(v.errors.iter().any(|e| e.contains("L_grid is empty")));
}

#[test]
fn errors_are_aggregated() {
    let mut cfg = base();
    cfg.a_grid = AGrid::Values(vec![0.1, 0.1]);
    cfg.l_grid = vec![-1.0, 10.0];
    cfg.estimator.n_replicas = 0;
    cfg.estimator.n_cells = 16;
    let v = validate_config(&cfg);
    assert!(v.errors.len() >= 4, "{:?}", v.errors);
}

#[test]
fn small_eps_warns_but_runs() {
    let mut cfg = base();
    cfg.l_grid = vec![100.0];
    cfg.eps_rule = EpsRule::Constant(0.002);
    cfg.estimator.n_cells = 4096;
    let v = validate_config(&cfg);
    assert!(v.is_ok(), "{:?}", v.errors);
    assert!(v.warnings.iter().any(|w| w.contains("b_2/2")), "{:?}", v.warnings);
}

#[test]
fn underresolved_kernel_is_a_config_error() {
    let mut cfg = base();
    cfg.eps_rule = EpsRule::Constant(0.001);
    cfg.estimator.n_cells = 1024;
    assert!(!validate_config(&cfg).is_ok());
    cfg.estimator.quadrature = false;
    assert!(validate_config(&cfg).is_ok());
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = SweepConfig::load(&path).unwrap();
        let v = validate_config(&cfg);
        assert!(v.is_ok(), "{}: {:?}", path.display(), v.errors);
        seen += 1;
    }
    assert!(seen >= 4);
}
