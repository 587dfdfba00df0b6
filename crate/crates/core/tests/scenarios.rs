use std::path::Path;
use std::time::Instant;

use esr_core::scenario::report::parse_csv;
use esr_core::scenario::selftest::{Fault, SelfTestOptions};
use esr_core::scenario::{run_scenario, run_self_test, OutputFormat, Record, RunOverrides, RunReport, ScenarioConfig, ScenarioType};

fn shipped() -> Vec<(String, ScenarioConfig)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg = ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            (path.file_name().unwrap().to_string_lossy().into_owned(), cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_scenario_type_has_a_shipped_example() {
    let types: std::collections::BTreeSet<_> = shipped().iter().map(|(_, c)| c.scenario_type.as_str()).collect();
    assert_eq!(types.len(), 11);
}

#[test]
fn config_round_trip_gives_identical_reports() {
    for (name, cfg) in shipped() {
        if cfg.scenario_type == ScenarioType::SelfTest {
            continue;
        }
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg, "{name}");
        let a = run_scenario(&cfg, RunOverrides::default()).unwrap();
        let b = run_scenario(&back, RunOverrides::default()).unwrap();
        for fmt in [OutputFormat::Csv, OutputFormat::Json] {
            assert_eq!(a.encode(fmt).unwrap(), b.encode(fmt).unwrap(), "{name}");
        }
    }
}

#[test]
fn reports_are_finite_and_csv_parses() {
    for (name, cfg) in shipped() {
        if cfg.scenario_type == ScenarioType::SelfTest {
            continue;
        }
        let r = run_scenario(&cfg, RunOverrides::default()).unwrap();
        assert!(!r.records.is_empty(), "{name}");
        let rows = parse_csv(&r.to_csv().unwrap()).unwrap();
        assert_eq!(rows.len(), r.records.len());
        assert!(rows.iter().all(|row| row.scenario == cfg.scenario_type.as_str()));
    }
}

#[test]
fn single_record_csv_is_header_plus_one_row() {
    let r = RunReport {
        scenario: ScenarioType::GhzQuantum,
        config: ScenarioConfig::minimal(ScenarioType::GhzQuantum),
        records: vec![Record::plain("x", 0.1)],
        summary: vec![],
        diagnostics: vec![],
        wall_time: Default::default(),
    };
    assert_eq!(
        r.to_csv().unwrap(),
        "scenario,record_name,value,residual\nghz-quantum,x,1.0000000000000001e-1,0.0000000000000000e0\n"
    );
}

#[test]
fn full_self_test_passes_within_budget() {
    let start = Instant::now();
    let r = run_self_test(&SelfTestOptions::default()).unwrap();
    assert!(r.passed(), "{:?}", r.suites);
    assert!(start.elapsed().as_secs() < 60);
    assert!(r.suite("fundamental-equation").unwrap().checks > 1000);
}

#[test]
fn injected_fault_fails_the_fundamental_suite() {
    let r = run_self_test(&SelfTestOptions {
        fault: Some(Fault::FlipLudersSign),
        ..SelfTestOptions::default()
    })
    .unwrap();
    let s = r.suite("fundamental-equation").unwrap();
    assert!(!s.passed);
    assert!(s.max_deviation > 0.5, "deviation {}", s.max_deviation);
}
