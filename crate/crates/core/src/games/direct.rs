use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{aggregate, GameConfig, GameReport, TrialOutcome};
use crate::circuit::{self, oracle_set, Circuit, OracleSet};
use crate::cp::{setup, CpSecretKey};
use crate::error::{Error, Result};
use crate::f2::F2Vector;
use crate::oracles::{membership_oracle, QueryWeightRecord, Transcript};
use crate::qsim::{measure_register, QuantumState};
use crate::seed::run_trials;

/// Register holding `|A⟩` in the direct-product game.
pub const TOKEN_REGISTER: &str = "A";

/// What the adversary gets: one copy of `|A⟩` and the membership oracles
/// `U_A`, `U_A_perp`.
pub struct DirectProductChallenge {
    state: Option<QuantumState>,
    oracles: OracleSet,
    transcript: Transcript,
    lambda: usize,
}

impl DirectProductChallenge {
    pub fn new(sk: &CpSecretKey, trial: u64) -> Result<Self> {
        Ok(Self {
            state: Some(QuantumState::subspace_state(TOKEN_REGISTER, sk.subspace())?),
            oracles: oracle_set([
                ("U_A", membership_oracle(sk.subspace())?),
                ("U_A_perp", membership_oracle(sk.dual())?),
            ]),
            transcript: Transcript::new(trial),
            lambda: sk.lambda(),
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// The single copy of `|A⟩`, on register [`TOKEN_REGISTER`].
    pub fn take_state(&mut self) -> Result<QuantumState> {
        self.state
            .take()
            .ok_or_else(|| Error::ProtocolViolation("the token state was already taken".into()))
    }

    /// Runs a circuit with oracle access to `U_A` and `U_A_perp`.
    pub fn run(&mut self, circuit: &Circuit, state: &QuantumState) -> Result<QuantumState> {
        circuit::run(circuit, state, &self.oracles, &mut self.transcript)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Always refused.
    pub fn secret_key(&self) -> Result<CpSecretKey> {
        Err(Error::ProtocolViolation(
            "the adversary asked for the secret key".into(),
        ))
    }
}

pub trait DirectProductAdversary: Sync {
    fn name(&self) -> &'static str;

    /// Outputs `(u, v)`, aiming for `u ∈ A \ {0}` and `v ∈ A⊥ \ {0}`.
    fn play(
        &self,
        challenge: &mut DirectProductChallenge,
        rng: &mut dyn RngCore,
    ) -> Result<(F2Vector, F2Vector)>;

    /// Closed-form win probability, when known.
    fn expected_win(&self, _lambda: usize) -> Option<f64> {
        None
    }
}

/// Outputs `(0, 0)`.
pub struct GiveUp;

impl DirectProductAdversary for GiveUp {
    fn name(&self) -> &'static str {
        "give-up"
    }

    fn play(
        &self,
        c: &mut DirectProductChallenge,
        _: &mut dyn RngCore,
    ) -> Result<(F2Vector, F2Vector)> {
        Ok((F2Vector::zero(c.lambda()), F2Vector::zero(c.lambda())))
    }

    fn expected_win(&self, _: usize) -> Option<f64> {
        Some(0.0)
    }
}

/// Measures `|A⟩` for `u` and guesses `v` uniformly.
pub struct MeasureGuess;

/// `(1 − 2^{−λ/2}) · (2^{λ/2} − 1) / 2^λ`.
fn measure_then_uniform(lambda: usize) -> f64 {
    let half = (1u64 << (lambda / 2)) as f64;
    (1.0 - 1.0 / half) * (half - 1.0) / (1u64 << lambda) as f64
}

impl DirectProductAdversary for MeasureGuess {
    fn name(&self) -> &'static str {
        "measure-guess"
    }

    fn play(
        &self,
        c: &mut DirectProductChallenge,
        rng: &mut dyn RngCore,
    ) -> Result<(F2Vector, F2Vector)> {
        let s = c.take_state()?;
        let u = measure_register(&s, TOKEN_REGISTER, rng)?.outcome;
        Ok((
            F2Vector::new(c.lambda(), u)?,
            F2Vector::random(c.lambda(), rng),
        ))
    }

    fn expected_win(&self, lambda: usize) -> Option<f64> {
        Some(measure_then_uniform(lambda))
    }
}

/// Measures `|A⟩` for `u`, then Hadamards the collapsed state and measures
/// again for `v`.
pub struct BothToken;

impl DirectProductAdversary for BothToken {
    fn name(&self) -> &'static str {
        "both-token"
    }

    fn play(
        &self,
        c: &mut DirectProductChallenge,
        rng: &mut dyn RngCore,
    ) -> Result<(F2Vector, F2Vector)> {
        let s = c.take_state()?;
        let first = measure_register(&s, TOKEN_REGISTER, rng)?;
        let h = first.post.hadamard_all(TOKEN_REGISTER)?;
        let v = measure_register(&h, TOKEN_REGISTER, rng)?.outcome;
        Ok((
            F2Vector::new(c.lambda(), first.outcome)?,
            F2Vector::new(c.lambda(), v)?,
        ))
    }

    fn expected_win(&self, lambda: usize) -> Option<f64> {
        Some(measure_then_uniform(lambda))
    }
}

/// Asks for the secret key, which the challenger refuses.
pub struct KeyRequest;

impl DirectProductAdversary for KeyRequest {
    fn name(&self) -> &'static str {
        "key-request"
    }

    fn play(
        &self,
        c: &mut DirectProductChallenge,
        _: &mut dyn RngCore,
    ) -> Result<(F2Vector, F2Vector)> {
        let sk = c.secret_key()?;
        let v = sk.dual().basis()[0];
        Ok((sk.subspace().basis()[0], v))
    }
}

pub const DIRECT_PRODUCT_ADVERSARIES: &[&str] =
    &["give-up", "measure-guess", "both-token", "key-request"];

pub fn direct_product_adversary(name: &str) -> Result<Box<dyn DirectProductAdversary>> {
    Ok(match name {
        "give-up" => Box::new(GiveUp),
        "measure-guess" => Box::new(MeasureGuess),
        "both-token" => Box::new(BothToken),
        "key-request" => Box::new(KeyRequest),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown direct-product adversary `{name}`; expected one of {DIRECT_PRODUCT_ADVERSARIES:?}"
            )))
        }
    })
}

fn direct_trial(
    cfg: &GameConfig,
    adversary: &dyn DirectProductAdversary,
    i: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(TrialOutcome, Vec<QueryWeightRecord>)> {
    let sk = setup(cfg.lambda, rng)?;
    let mut ch = DirectProductChallenge::new(&sk, i)?;
    let (u, v) = adversary.play(&mut ch, rng)?;
    if u.len() != cfg.lambda || v.len() != cfg.lambda {
        return Err(Error::ProtocolViolation(
            "output vectors have the wrong length".into(),
        ));
    }
    let win = !u.is_zero() && sk.subspace().member(&u)? && !v.is_zero() && sk.dual().member(&v)?;
    let outcome = TrialOutcome {
        win,
        exact: None,
        detail: json!({"u": u.to_hex(), "v": v.to_hex(), "queries": ch.transcript().len()}),
    };
    Ok((outcome, ch.transcript().records()))
}

/// Fresh `A` per trial; the adversary wins iff `u ∈ A \ {0}` and `v ∈ A⊥ \ {0}`.
pub fn run_direct_product_game(
    cfg: &GameConfig,
    adversary: &dyn DirectProductAdversary,
) -> Result<GameReport> {
    cfg.validate()?;
    let outcomes = run_trials(cfg.seed, cfg.trials, |i, rng| {
        Ok(direct_trial(cfg, adversary, i, rng)?.0)
    })?;
    let mut cfg = cfg.clone();
    cfg.adversary = adversary.name().to_string();
    Ok(
        aggregate(&cfg, &outcomes, adversary.expected_win(cfg.lambda))
            .with_diagnostic("lambda", cfg.lambda),
    )
}

/// Query-weight records of every trial of [`run_direct_product_game`].
pub fn direct_product_transcripts(
    cfg: &GameConfig,
    adversary: &dyn DirectProductAdversary,
) -> Result<Vec<QueryWeightRecord>> {
    cfg.validate()?;
    let per_trial = run_trials(cfg.seed, cfg.trials, |i, rng| {
        Ok(direct_trial(cfg, adversary, i, rng)?.1)
    })?;
    Ok(per_trial.into_iter().flatten().collect())
}
