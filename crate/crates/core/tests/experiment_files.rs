use std::path::PathBuf;

use plandos_core::experiment::{resolve_seed, ExperimentSpec};
use plandos_core::fuzzer::Mode;

fn experiments_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

#[test]
fn bundled_experiments_load_and_resolve() {
    let mut n = 0;
    for entry in std::fs::read_dir(experiments_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let spec = ExperimentSpec::load(&path).unwrap();
        assert!(spec.modes.contains(&Mode::Full), "{}", path.display());
        for e in &spec.entries {
            let sc = resolve_seed(&e.seed_file, path.parent()).unwrap();
            assert_eq!(sc.kind, e.subject.scenario_kind());
        }
        n += 1;
    }
    assert!(n >= 2);
}

#[test]
fn v1_experiment_compares_all_modes() {
    let spec = ExperimentSpec::load(experiments_dir().join("experiment_v1.json")).unwrap();
    assert_eq!(spec.runs, 10);
    assert_eq!(spec.budget, 50_000);
    assert_eq!(spec.modes, Mode::ALL.to_vec());
}

#[test]
fn malformed_spec_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"entries":[],"modes":["full"],"runs":0,"budget":1}"#).unwrap();
    assert!(ExperimentSpec::load(&p).is_err());
    std::fs::write(&p, "{not json").unwrap();
    let err = ExperimentSpec::load(&p).unwrap_err().to_string();
    assert!(err.contains("bad.json"), "{err}");
}
