//! Full acceptance suite on the desk scenario: one line per criterion.

use std::io::Write;
use std::path::{Path, PathBuf};

use uavsched::bench::{verify, ScenarioConfig, VerifyConfig};

fn desk() -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/desk.toml");
    ScenarioConfig::load(&path).expect("desk scenario")
}

#[test]
fn acceptance() {
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let cfg = VerifyConfig::new(desk(), out);
    let report = verify(&cfg).expect("suite runs to completion");
    let mut out = std::io::stdout().lock();
    writeln!(out, "\n{report}").unwrap();
    out.flush().unwrap();
    let ids: Vec<u8> = report.criteria.iter().map(|c| c.id).collect();
    assert_eq!(ids, (1..=11).collect::<Vec<u8>>());
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
