use std::path::PathBuf;

use fracsolve_core::{load_config, Error, RunConfig};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_load() {
    for name in ["interval_1d.json", "disk_2d.json"] {
        let cfg = load_config(&configs().join(name)).unwrap();
        assert!(cfg.hypotheses().passed());
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.resolution, 17);
    }
}

#[test]
fn negative_configs_fail_the_named_check() {
    let cases = [
        ("q_not_below_p.json", "2<q<p<N/s1"),
        ("s1p_not_above_one.json", "s1*p>1"),
        ("gamma_not_below_one.json", "0<gamma<1"),
        ("r_not_below_p_minus_one.json", "1<r<p-1"),
        ("zeta_not_below_p_minus_one.json", "1<zeta<p-1"),
        ("s1_above_critical_ratio.json", "s1<1/(p'gamma)"),
    ];
    for (file, check) in cases {
        let path = configs().join("negative").join(file);
        match load_config(&path) {
            Err(Error::Hypothesis { name, .. }) => assert_eq!(name, check, "{file}"),
            other => panic!("{file}: expected a hypothesis failure, got {other:?}"),
        }
        assert!(RunConfig::from_file(&path).is_ok());
    }
}

#[test]
fn unknown_fields_and_bad_values_are_named() {
    let base = r#"{"domain": {"kind": "interval", "a": 0, "b": 1},
        "exponents": {"s": 0.6, "s1": 0.7, "s2": 0.5, "p": 3, "q": 2.5}"#;
    let field = |text: String| match RunConfig::from_json(&text) {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected a config error, got {other:?}"),
    };
    assert_eq!(field(format!("{base}, \"g\": {{\"c3\": 0.1, \"zta\": 1.5}}}}")), "g.zta");
    assert_eq!(field(format!("{base}, \"solver\": {{\"outer\": {{\"theta\": 2.0}}}}}}")), "solver.outer.theta");
    assert_eq!(field(format!("{base}, \"resolution\": 2}}")), "resolution");
    assert_eq!(field(base.replace("\"b\": 1", "\"b\": -1") + "}"), "domain");
    let cfg = RunConfig::from_json(&format!("{base}}}")).unwrap();
    assert_eq!(cfg.minimizer.tolerance, 1e-6);
    assert_eq!(cfg.f.r, 1.25);
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_config(&configs().join("absent.json")), Err(Error::Io(_))));
}
