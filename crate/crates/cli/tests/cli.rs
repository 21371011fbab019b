use std::process::{Command, Output};

use serde_json::Value;

fn qcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcp"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("qcp runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("qcp-cli-{}-{name}", std::process::id()))
}

#[test]
fn direct_product_rate_brackets_nine_sixty_fourths() {
    let r = json(&qcp(&[
        "game",
        "direct-product",
        "--lambda",
        "4",
        "--adversary",
        "measure-guess",
        "--trials",
        "4000",
        "--seed",
        "3",
    ]));
    let ci = r["results"]["ci95"].as_array().unwrap();
    let (lo, hi) = (ci[0].as_f64().unwrap(), ci[1].as_f64().unwrap());
    assert!(lo <= 9.0 / 64.0 && 9.0 / 64.0 <= hi, "{lo} {hi}");
    assert_eq!(r["manifest"]["subcommand"], "game");
    assert_eq!(r["manifest"]["config"]["game"], "direct-product");
    assert!(r["manifest"]["timestamp"].is_null());
}

#[test]
fn same_seed_same_bytes() {
    let args = ["demo-cd", "--trials", "20", "--seed", "5"];
    assert_eq!(qcp(&args).stdout, qcp(&args).stdout);
}

#[test]
fn demo_cp_writes_report_and_transcript() {
    let (out, csv) = (tmp("cp.json"), tmp("cp.csv"));
    let o = qcp(&[
        "demo-cp",
        "--evals",
        "4",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--timestamp",
        "1700000000",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["manifest"]["timestamp"], "1700000000");
    assert_eq!(r["results"]["trials"], 4);
    let transcript = std::fs::read_to_string(&csv).unwrap();
    assert!(transcript.lines().count() > 1);
    let again = qcp(&["report", "--input", out.to_str().unwrap()]);
    assert_eq!(json(&again), r);
    let _ = std::fs::remove_file(out);
    let _ = std::fs::remove_file(csv);
}

#[test]
fn money_honest_and_attack() {
    let honest = json(&qcp(&["demo-money", "--trials", "100"]));
    assert_eq!(honest["results"]["wins"], 100);
    let clone = json(&qcp(&[
        "demo-money",
        "--attack",
        "keep-and-forge",
        "--trials",
        "200",
    ]));
    assert_eq!(clone["results"]["diagnostics"]["attack"], "keep-and-forge");
}

#[test]
fn source_date_epoch_fills_the_timestamp() {
    let out = Command::new(env!("CARGO_BIN_EXE_qcp"))
        .arg("report")
        .env("SOURCE_DATE_EPOCH", "12")
        .output()
        .unwrap();
    assert_eq!(json(&out)["manifest"]["timestamp"], "12");
}

#[test]
fn bad_input_exits_two() {
    for args in [
        vec!["game", "nonsense", "--adversary", "x"],
        vec!["game", "direct-product", "--adversary", "nobody"],
        vec!["demo-cp", "--lambda", "abc"],
        vec!["demo-money", "--attack", "nope"],
        vec!["verify", "--suite", "12"],
        vec![
            "game",
            "anti-piracy",
            "--adversary",
            "split",
            "--csv",
            "x.csv",
        ],
        vec!["report", "--input", "/nonexistent/report.json"],
    ] {
        assert_eq!(qcp(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_subset_passes() {
    let o = qcp(&["verify", "--suite", "4,6", "--seed", "1"]);
    let r = json(&o);
    assert_eq!(r["results"]["wins"], 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("criterion  4 PASS"));
}
