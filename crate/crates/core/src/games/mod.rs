//! Security-game harnesses and a library of adversary strategies.

mod direct;
mod extract;
mod learning;
mod piracy;

pub use direct::{
    direct_product_adversary, direct_product_transcripts, run_direct_product_game, BothToken,
    DirectProductAdversary, DirectProductChallenge, GiveUp, KeyRequest, MeasureGuess,
    DIRECT_PRODUCT_ADVERSARIES,
};
pub use extract::{
    case_split_probe, extract_vectors_from_pirate, Branch, CaseSplitReport, CpHandles, Extraction,
    ExtractionFailure, NON_NEGLIGIBLE,
};
pub use learning::{
    learning_adversary, learning_transcripts, run_learning_game, table_evaluator, table_program,
    DummyProgram, LearningAdversary, LearningChallenge, TableCopy, ZeroQueryGuess,
    LEARNING_ADVERSARIES,
};
pub use piracy::{
    anti_piracy_pirate, dummy_evaluator, run_anti_piracy_game, toy_evaluator, AntiPiracyPirate,
    Correlated, Dummy, HonestForward, Issued, MeasureCopy, Scheme, Split, Swap,
    ANTI_PIRACY_PIRATES,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::measure::{
    approx_threshold, goodness_family, goodness_povm_predicate, proj_impl, threshold_impl,
    Evaluator, Predicate, ProjectiveFamily,
};
use crate::qsim::QuantumState;
use crate::stats::ci95;

/// Largest state dimension for which goodness is tested exactly.
pub const EXACT_DIM_CAP: usize = 1 << 12;

/// Parameters shared by the game harnesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub lambda: usize,
    /// Domain size `N` of the function.
    pub domain: usize,
    /// Output width `m`.
    pub width: usize,
    pub gamma: f64,
    pub trials: u64,
    pub seed: u64,
    pub adversary: String,
    pub scheme: Scheme,
    pub epsilon: f64,
    pub delta: f64,
    /// Keep per-trial diagnostics in the report.
    pub record_trials: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            lambda: 4,
            domain: 4,
            width: 1,
            gamma: 0.5,
            trials: 1000,
            seed: 0,
            adversary: String::new(),
            scheme: Scheme::Cp,
            epsilon: 0.1,
            delta: 0.05,
            record_trials: false,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("γ = {} outside (0, 1]", self.gamma));
        }
        if self.domain == 0 {
            return bad("domain must be non-empty".into());
        }
        if self.width == 0 || self.width > 16 {
            return bad(format!("output width {} outside 1..=16", self.width));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0 && self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!(
                "need 0 < ε, δ < 1, got ({}, {})",
                self.epsilon, self.delta
            ));
        }
        if self.lambda % 2 == 1 {
            return Err(Error::OddLambda(self.lambda));
        }
        Ok(())
    }
}

/// Aggregate outcome of a game run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub wins: u64,
    pub trials: u64,
    pub win_rate: f64,
    pub ci95: [f64; 2],
    pub derived_expectation: Option<f64>,
    pub diagnostics: Map<String, Value>,
}

impl GameReport {
    pub fn new(wins: u64, trials: u64, derived_expectation: Option<f64>) -> Self {
        Self {
            wins,
            trials,
            win_rate: if trials == 0 {
                0.0
            } else {
                wins as f64 / trials as f64
            },
            ci95: ci95(wins, trials),
            derived_expectation,
            diagnostics: Map::new(),
        }
    }

    /// Report over no trials.
    pub fn empty() -> Self {
        Self::new(0, 0, None)
    }

    pub fn with_diagnostic(mut self, key: &str, value: impl Serialize) -> Self {
        self.diagnostics.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    /// Concatenates the trial counts of two reports over the same game.
    pub fn merge(&self, other: &GameReport) -> GameReport {
        let mut r = GameReport::new(
            self.wins + other.wins,
            self.trials + other.trials,
            self.derived_expectation,
        );
        r.diagnostics = self.diagnostics.clone();
        r
    }
}

/// One trial's result before aggregation.
#[derive(Clone, Debug)]
pub(crate) struct TrialOutcome {
    pub win: bool,
    /// Exact win probability of the trial, when known.
    pub exact: Option<f64>,
    pub detail: Value,
}

pub(crate) fn aggregate(
    cfg: &GameConfig,
    outcomes: &[TrialOutcome],
    derived: Option<f64>,
) -> GameReport {
    let wins = outcomes.iter().filter(|o| o.win).count() as u64;
    let mut r = GameReport::new(wins, outcomes.len() as u64, derived)
        .with_diagnostic("adversary", &cfg.adversary);
    let exact: Vec<f64> = outcomes.iter().filter_map(|o| o.exact).collect();
    if exact.len() == outcomes.len() && !exact.is_empty() {
        r = r.with_diagnostic(
            "mean_exact_win_probability",
            exact.iter().sum::<f64>() / exact.len() as f64,
        );
    }
    if cfg.record_trials {
        let per: Vec<&Value> = outcomes.iter().map(|o| &o.detail).collect();
        r = r.with_diagnostic("per_trial", per);
    }
    r
}

/// How a goodness test was carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodnessMode {
    Exact,
    Sampled,
}

/// Result of testing one register for `γ`-goodness.
#[derive(Clone, Debug)]
pub struct GoodnessTest {
    pub good: bool,
    /// `Tr[TI_γ ρ]` when computed exactly.
    pub trace: Option<f64>,
    pub mode: GoodnessMode,
    pub post: QuantumState,
}

/// Tests the program register of `eval` inside `state` for `γ`-goodness:
/// exact threshold implementation when the state is small enough, else the
/// sampled approximate threshold implementation.
pub fn test_goodness<R: Rng + ?Sized>(
    state: &QuantumState,
    eval: &Evaluator,
    predicate: &Predicate,
    cfg: &GameConfig,
    rng: &mut R,
) -> Result<GoodnessTest> {
    let reg = eval.program_register();
    if state.dim() <= EXACT_DIM_CAP {
        let p = goodness_povm_predicate(eval, predicate)?;
        let ti = threshold_impl(&proj_impl(&p)?, cfg.gamma)?;
        let accepted = state.apply_local(&[reg], &ti)?;
        let trace = accepted.trace().clamp(0.0, 1.0);
        let good = rng.gen::<f64>() < trace;
        let post = if good {
            accepted.renormalized()?
        } else {
            let comp = crate::linalg::identity(ti.nrows()) - &ti;
            state.apply_local(&[reg], &comp)?.renormalized()?
        };
        return Ok(GoodnessTest {
            good,
            trace: Some(trace),
            mode: GoodnessMode::Exact,
            post,
        });
    }
    let family = ProjectiveFamily::from_family(&goodness_family(eval, predicate)?)?;
    let (bit, out) = approx_threshold(
        state,
        &[reg],
        &family,
        cfg.gamma,
        cfg.epsilon,
        cfg.delta,
        rng,
    )?;
    Ok(GoodnessTest {
        good: bit == 0,
        trace: None,
        mode: GoodnessMode::Sampled,
        post: out.post,
    })
}
