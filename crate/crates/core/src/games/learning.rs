use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{aggregate, test_goodness, GameConfig, GameReport, TrialOutcome};
use crate::circuit::{self, oracle_set, Circuit, OracleSet};
use crate::error::{Error, Result};
use crate::measure::{uniform_inputs, Evaluator, Predicate, QuantumProgram};
use crate::oracles::{classical_gate, ClassicalFunction, QueryWeightRecord, Transcript};
use crate::qsim::{QuantumState, RegisterLayout};
use crate::seed::run_trials;

/// The adversary's access to `f`: classical queries and a quantum oracle
/// slot `U_f`, sharing one query budget.
pub struct LearningChallenge {
    f: ClassicalFunction,
    oracles: OracleSet,
    transcript: Transcript,
    classical_queries: usize,
    budget: usize,
}

impl LearningChallenge {
    pub fn new(f: ClassicalFunction, budget: usize, trial: u64) -> Result<Self> {
        let gate = classical_gate(&f)?;
        Ok(Self {
            f,
            oracles: oracle_set([("U_f", gate)]),
            transcript: Transcript::new(trial),
            classical_queries: 0,
            budget,
        })
    }

    pub fn domain(&self) -> usize {
        self.f.domain()
    }

    pub fn width(&self) -> usize {
        self.f.width()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn queries_used(&self) -> usize {
        self.classical_queries + self.transcript.queries_to("U_f")
    }

    fn charge(&self) -> Result<()> {
        if self.queries_used() > self.budget {
            return Err(Error::ProtocolViolation(format!(
                "{} queries exceed the budget of {}",
                self.queries_used(),
                self.budget
            )));
        }
        Ok(())
    }

    pub fn query(&mut self, x: u64) -> Result<u64> {
        if x as usize >= self.f.domain() {
            return Err(Error::InvalidParameter(format!(
                "input {x} outside the domain"
            )));
        }
        self.classical_queries += 1;
        self.charge()?;
        Ok(self.f.eval(x))
    }

    /// Runs a circuit with quantum access to slot `U_f`.
    pub fn run(&mut self, circuit: &Circuit, state: &QuantumState) -> Result<QuantumState> {
        let out = circuit::run(circuit, state, &self.oracles, &mut self.transcript)?;
        self.charge()?;
        Ok(out)
    }
}

pub trait LearningAdversary: Sync {
    fn name(&self) -> &'static str;

    /// Returns the program that will be tested for `γ`-goodness.
    fn play(
        &self,
        challenge: &mut LearningChallenge,
        rng: &mut dyn RngCore,
    ) -> Result<QuantumProgram>;

    /// Closed-form win probability, when known.
    fn expected_win(&self, _cfg: &GameConfig) -> Option<f64> {
        None
    }
}

/// A one-qubit program on `reg` that ignores its register and writes
/// `table[x]` into `reg.out`.
pub fn table_evaluator(reg: &str, table: Vec<u64>, width: usize) -> Evaluator {
    let out = format!("{reg}.out");
    let o = out.clone();
    Evaluator::new(
        reg,
        1,
        move |x| {
            let y = table.get(x as usize).copied().unwrap_or(0);
            Circuit::new().classical(&[], &o, move |_| y)
        },
        OracleSet::new(),
    )
    .with_ancilla(&out, width)
    .with_output(&[out.as_str()], Some)
}

/// [`table_evaluator`] on `prog`, in `|0⟩`.
pub fn table_program(table: Vec<u64>, width: usize) -> Result<QuantumProgram> {
    QuantumProgram::new(
        QuantumState::zero(RegisterLayout::single("prog", 1))?,
        table_evaluator("prog", table, width),
    )
}

/// Queries every input classically and outputs the table.
pub struct TableCopy;

impl LearningAdversary for TableCopy {
    fn name(&self) -> &'static str {
        "table-copy"
    }

    fn play(&self, c: &mut LearningChallenge, _: &mut dyn RngCore) -> Result<QuantumProgram> {
        let table = (0..c.domain() as u64)
            .map(|x| c.query(x))
            .collect::<Result<Vec<_>>>()?;
        table_program(table, c.width())
    }

    fn expected_win(&self, _: &GameConfig) -> Option<f64> {
        Some(1.0)
    }
}

/// Makes no queries and outputs a uniformly random table.
pub struct ZeroQueryGuess;

/// `Pr[Binomial(n, p) ≥ k]`.
fn binomial_tail(n: usize, p: f64, k: usize) -> f64 {
    let mut total = 0.0;
    let mut coeff = 1.0f64;
    for i in 0..=n {
        if i > 0 {
            coeff *= (n - i + 1) as f64 / i as f64;
        }
        if i >= k {
            total += coeff * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
        }
    }
    total
}

impl LearningAdversary for ZeroQueryGuess {
    fn name(&self) -> &'static str {
        "zero-query"
    }

    fn play(&self, c: &mut LearningChallenge, rng: &mut dyn RngCore) -> Result<QuantumProgram> {
        let guess = ClassicalFunction::random(c.domain(), c.width(), rng)?;
        table_program(guess.table().to_vec(), c.width())
    }

    fn expected_win(&self, cfg: &GameConfig) -> Option<f64> {
        let n = cfg.domain;
        let k = (cfg.gamma * n as f64 - 1e-9).ceil().max(0.0) as usize;
        Some(binomial_tail(n, 0.5f64.powi(cfg.width as i32), k))
    }
}

/// Outputs a program whose answer is always `⊥`.
pub struct DummyProgram;

impl LearningAdversary for DummyProgram {
    fn name(&self) -> &'static str {
        "dummy"
    }

    fn play(&self, _: &mut LearningChallenge, _: &mut dyn RngCore) -> Result<QuantumProgram> {
        let eval = Evaluator::new("prog", 1, |_| Circuit::new(), OracleSet::new())
            .with_output(&[], |_| None);
        QuantumProgram::new(QuantumState::zero(RegisterLayout::single("prog", 1))?, eval)
    }

    fn expected_win(&self, _: &GameConfig) -> Option<f64> {
        Some(0.0)
    }
}

pub const LEARNING_ADVERSARIES: &[&str] = &["table-copy", "zero-query", "dummy"];

pub fn learning_adversary(name: &str) -> Result<Box<dyn LearningAdversary>> {
    Ok(match name {
        "table-copy" => Box::new(TableCopy),
        "zero-query" => Box::new(ZeroQueryGuess),
        "dummy" => Box::new(DummyProgram),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown learning adversary `{name}`; expected one of {LEARNING_ADVERSARIES:?}"
            )))
        }
    })
}

fn learning_trial(
    cfg: &GameConfig,
    adversary: &dyn LearningAdversary,
    i: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(TrialOutcome, Vec<QueryWeightRecord>)> {
    let f = ClassicalFunction::random(cfg.domain, cfg.width, rng)?;
    let mut ch = LearningChallenge::new(f.clone(), cfg.domain, i)?;
    let prog = adversary.play(&mut ch, rng)?;
    if !prog.evaluator.oracles().is_empty() {
        return Err(Error::ProtocolViolation(
            "the output program may not keep oracle access".into(),
        ));
    }
    let d = uniform_inputs(cfg.domain);
    let t = test_goodness(
        &prog.state,
        &prog.evaluator,
        &Predicate::equality(&f, &d),
        cfg,
        rng,
    )?;
    let outcome = TrialOutcome {
        win: t.good,
        exact: t.trace,
        detail: json!({"queries": ch.queries_used(), "trace": t.trace, "mode": t.mode}),
    };
    Ok((outcome, ch.transcript.records()))
}

/// Fresh random `f` per trial with budget `N`; the adversary wins iff its
/// program tests `γ`-good for `f` under the uniform input distribution.
pub fn run_learning_game(
    cfg: &GameConfig,
    adversary: &dyn LearningAdversary,
) -> Result<GameReport> {
    cfg.validate()?;
    let outcomes = run_trials(cfg.seed, cfg.trials, |i, rng| {
        Ok(learning_trial(cfg, adversary, i, rng)?.0)
    })?;
    let mut cfg = cfg.clone();
    cfg.adversary = adversary.name().to_string();
    Ok(aggregate(&cfg, &outcomes, adversary.expected_win(&cfg)))
}

/// Query-weight records of every trial of [`run_learning_game`].
pub fn learning_transcripts(
    cfg: &GameConfig,
    adversary: &dyn LearningAdversary,
) -> Result<Vec<QueryWeightRecord>> {
    cfg.validate()?;
    let per_trial = run_trials(cfg.seed, cfg.trials, |i, rng| {
        Ok(learning_trial(cfg, adversary, i, rng)?.1)
    })?;
    Ok(per_trial.into_iter().flatten().collect())
}
