use qcp_core::cd::{run_copy_detection_game, CdConfig, DuplicateEverything};
use qcp_core::games::{run_direct_product_game, GameConfig, GameReport, MeasureGuess};
use qcp_core::money::{run_money_honest, MoneyConfig};
use qcp_core::report::{Report, RunManifest, REPORT_SCHEMA};
use qcp_core::verify::run_suite;
use serde_json::Value;

fn assert_conforms(report: &Report) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn manifest(sub: &str, config: impl serde::Serialize) -> RunManifest {
    RunManifest::new(sub, config, 3).unwrap()
}

#[test]
fn game_reports_conform() {
    let cfg = GameConfig {
        trials: 50,
        ..GameConfig::default()
    };
    let r = run_direct_product_game(&cfg, &MeasureGuess).unwrap();
    assert_conforms(&Report::new(manifest("game", &cfg), r));

    let cfg = CdConfig {
        trials: 5,
        record_trials: true,
        ..CdConfig::default()
    };
    let r = run_copy_detection_game(&cfg, &DuplicateEverything).unwrap();
    assert_conforms(&Report::new(manifest("demo-cd", &cfg), r));

    let cfg = MoneyConfig {
        trials: 5,
        ..MoneyConfig::default()
    };
    let r = run_money_honest(&cfg).unwrap();
    assert_conforms(&Report::new(manifest("demo-money", &cfg), r));
}

#[test]
fn suite_and_empty_reports_conform() {
    let suite = run_suite(&[4], 1).unwrap();
    let report = Report::new(
        manifest("verify", serde_json::json!({"suite": "4"})),
        suite.to_game_report(),
    );
    assert_conforms(&report);
    let empty = Report::new(
        manifest("report", serde_json::json!({})),
        GameReport::empty(),
    );
    assert_conforms(&empty);
    let stamped = Report::new(
        manifest("report", serde_json::json!({})).with_timestamp(Some("0".into())),
        GameReport::empty(),
    );
    assert_conforms(&stamped);
}

#[test]
fn schema_rejects_missing_fields() {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let bad = serde_json::json!({"manifest": {}, "results": {"wins": 1}});
    assert!(!validator.is_valid(&bad));
}
