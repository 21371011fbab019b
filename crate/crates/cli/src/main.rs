use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qcp_core::cd::{cd_pirate, run_copy_detection_game, CdConfig};
use qcp_core::cp::{run_cp_demo, CpDemoConfig};
use qcp_core::games::{
    anti_piracy_pirate, direct_product_adversary, direct_product_transcripts, learning_adversary,
    learning_transcripts, run_anti_piracy_game, run_direct_product_game, run_learning_game,
    GameConfig, GameReport, Scheme,
};
use qcp_core::money::{money_attack, run_money_clone_game, run_money_honest, MoneyConfig};
use qcp_core::oracles::QueryWeightRecord;
use qcp_core::report::{emit_report, emit_transcript_csv, resolve_timestamp, Report, RunManifest};
use qcp_core::verify::{parse_suite, run_suite};
use qcp_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SUITE_FAILED: u8 = 3;

/// Simulation laboratory for copy-protection, copy-detection and quantum money.
#[derive(Parser)]
#[command(name = "qcp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest timestamp; defaults to SOURCE_DATE_EPOCH, else omitted.
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one copy-protected program repeatedly.
    DemoCp {
        #[arg(long, default_value_t = 8)]
        lambda: usize,
        #[arg(long, default_value_t = 16)]
        domain: usize,
        #[arg(long, default_value_t = 2)]
        width: usize,
        #[arg(long, default_value_t = 20)]
        evals: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Query-weight transcript CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the copy-detection game against a built-in pirate.
    DemoCd {
        #[arg(long, default_value_t = 8)]
        lambda: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value = "duplicate-everything")]
        pirate: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        domain: usize,
        #[arg(long, default_value_t = 8)]
        width: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Keep per-trial records in the report.
        #[arg(long)]
        record_trials: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Verify honest banknotes, or run a cloning attack.
    DemoMoney {
        #[arg(long, default_value_t = 8)]
        lambda: usize,
        #[arg(long, default_value_t = 8)]
        msg_space: usize,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        k: usize,
        /// Test goodness with k sampled challenges instead of exactly.
        #[arg(long)]
        sampled: bool,
        /// `honest`, or a cloning attack.
        #[arg(long, default_value = "honest")]
        attack: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run a security game.
    Game {
        #[arg(value_enum)]
        kind: GameKind,
        #[arg(long)]
        adversary: String,
        #[arg(long, default_value_t = 4)]
        lambda: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        domain: usize,
        #[arg(long, default_value_t = 1)]
        width: usize,
        /// Program handed to an anti-piracy pirate: `cp` or `toy`.
        #[arg(long, default_value = "cp")]
        scheme: Scheme,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        record_trials: bool,
        /// Query-weight transcript CSV (direct-product and learning games).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the acceptance suite.
    Verify {
        /// `all` or a comma-separated list of criterion numbers.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Check a report file and re-emit it canonically; with no input, emit an
    /// empty report.
    Report {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameKind {
    DirectProduct,
    Learning,
    AntiPiracy,
}

fn write(report: &Report, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => emit_report(report, path),
        None => {
            print!("{}", report.to_json()?);
            Ok(())
        }
    }
}

fn finish(
    sub: &str,
    config: Value,
    seed: u64,
    results: GameReport,
    output: &Output,
) -> Result<Report, Error> {
    let manifest = RunManifest::new(sub, config, seed)?
        .with_timestamp(resolve_timestamp(output.timestamp.as_deref()));
    let report = Report::new(manifest, results);
    write(&report, output.out.as_deref())?;
    Ok(report)
}

fn csv_out(records: &[QueryWeightRecord], path: Option<&Path>) -> Result<(), Error> {
    match path {
        Some(p) => emit_transcript_csv(records, p),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::DemoCp {
            lambda,
            domain,
            width,
            evals,
            seed,
            csv,
            output,
        } => {
            let cfg = CpDemoConfig {
                lambda,
                domain,
                width,
                evals,
                seed,
            };
            let (results, records) = run_cp_demo(&cfg)?;
            csv_out(&records, csv.as_deref())?;
            finish(
                "demo-cp",
                serde_json::to_value(&cfg)?,
                seed,
                results,
                &output,
            )?;
        }
        Command::DemoCd {
            lambda,
            q,
            pirate,
            trials,
            seed,
            domain,
            width,
            gamma,
            record_trials,
            output,
        } => {
            let cfg = CdConfig {
                lambda,
                domain,
                width,
                gamma,
                q,
                trials,
                seed,
                pirate,
                record_trials,
            };
            let results = run_copy_detection_game(&cfg, cd_pirate(&cfg.pirate)?.as_ref())?;
            finish(
                "demo-cd",
                serde_json::to_value(&cfg)?,
                seed,
                results,
                &output,
            )?;
        }
        Command::DemoMoney {
            lambda,
            msg_space,
            gamma,
            k,
            sampled,
            attack,
            trials,
            seed,
            output,
        } => {
            let cfg = MoneyConfig {
                lambda,
                msg_space,
                gamma,
                k,
                sampled,
                trials,
                seed,
                attack,
                ..MoneyConfig::default()
            };
            let results = if cfg.attack == "honest" {
                run_money_honest(&cfg)?
            } else {
                run_money_clone_game(&cfg, money_attack(&cfg.attack)?.as_ref())?
            };
            finish(
                "demo-money",
                serde_json::to_value(&cfg)?,
                seed,
                results,
                &output,
            )?;
        }
        Command::Game {
            kind,
            adversary,
            lambda,
            gamma,
            trials,
            seed,
            domain,
            width,
            scheme,
            epsilon,
            delta,
            record_trials,
            csv,
            output,
        } => {
            let cfg = GameConfig {
                lambda,
                domain,
                width,
                gamma,
                trials,
                seed,
                adversary,
                scheme,
                epsilon,
                delta,
                record_trials,
            };
            let (name, results) = match kind {
                GameKind::DirectProduct => {
                    let adv = direct_product_adversary(&cfg.adversary)?;
                    if let Some(path) = csv.as_deref() {
                        emit_transcript_csv(
                            &direct_product_transcripts(&cfg, adv.as_ref())?,
                            path,
                        )?;
                    }
                    (
                        "direct-product",
                        run_direct_product_game(&cfg, adv.as_ref())?,
                    )
                }
                GameKind::Learning => {
                    let adv = learning_adversary(&cfg.adversary)?;
                    if let Some(path) = csv.as_deref() {
                        emit_transcript_csv(&learning_transcripts(&cfg, adv.as_ref())?, path)?;
                    }
                    ("learning", run_learning_game(&cfg, adv.as_ref())?)
                }
                GameKind::AntiPiracy => {
                    if csv.is_some() {
                        return Err(Error::InvalidParameter(
                            "the anti-piracy game has no oracle transcript to export".into(),
                        ));
                    }
                    let pirate = anti_piracy_pirate(&cfg.adversary)?;
                    ("anti-piracy", run_anti_piracy_game(&cfg, pirate.as_ref())?)
                }
            };
            let config = json!({"game": name, "params": &cfg});
            finish("game", config, seed, results, &output)?;
        }
        Command::Verify {
            suite,
            seed,
            output,
        } => {
            let ids = parse_suite(&suite)?;
            let report = run_suite(&ids, seed)?;
            for c in &report.criteria {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("criterion {:>2} {verdict} {}", c.id, c.name);
                for f in &c.failed_checks {
                    eprintln!("    failed: {f}");
                }
            }
            finish(
                "verify",
                json!({"suite": suite}),
                seed,
                report.to_game_report(),
                &output,
            )?;
            if !report.passed {
                return Ok(EXIT_SUITE_FAILED);
            }
        }
        Command::Report { input, output } => {
            let report = match input {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                    Report::from_json(&text)?
                }
                None => {
                    let manifest = RunManifest::new("report", json!({}), 0)?
                        .with_timestamp(resolve_timestamp(output.timestamp.as_deref()));
                    Report::new(manifest, GameReport::empty())
                }
            };
            write(&report, output.out.as_deref())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
