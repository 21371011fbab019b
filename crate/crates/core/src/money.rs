//! Public-key quantum money from copy detection and a toy public-key
//! encryption scheme.

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cd::{
    cd_issue, cd_judge, cd_setup, check_branch, note_register, CdChallenge, CdPirate,
    CdPirateOutput, CdProgram, TableTest, ToyAux, ToyCd, ToyPublicKey, ToySecretKey, NOTE_REGISTER,
};
use crate::error::{Error, Result};
use crate::games::GameReport;
use crate::oracles::ClassicalFunction;
use crate::qsim::{measure_register, QuantumState, RegisterLayout};
use crate::seed::run_trials;

/// Table-based encryption: `Enc(m, r)` is a lookup in an injective random
/// table into `[C]`, `Dec` the inverse table, extended at random outside the
/// image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyPke {
    pub messages: usize,
    pub randomness: usize,
    pub ciphertexts: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkePublicKey {
    /// `enc[m][r]`.
    pub enc: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkeSecretKey {
    pub dec: Vec<u64>,
}

impl ToyPke {
    pub fn new(messages: usize, randomness: usize, ciphertexts: usize) -> Result<Self> {
        if !messages.is_power_of_two() || !(2..=1 << 16).contains(&messages) {
            return Err(Error::InvalidParameter(format!(
                "message space {messages} must be a power of two in 2..=65536"
            )));
        }
        if randomness == 0 || messages * randomness > ciphertexts {
            return Err(Error::InvalidParameter(format!(
                "{messages}·{randomness} encryptions do not fit in {ciphertexts} ciphertexts"
            )));
        }
        Ok(Self {
            messages,
            randomness,
            ciphertexts,
        })
    }

    pub fn message_bits(&self) -> usize {
        self.messages.trailing_zeros() as usize
    }

    pub fn keygen<R: Rng + ?Sized>(&self, rng: &mut R) -> (PkePublicKey, PkeSecretKey) {
        let slots = sample(rng, self.ciphertexts, self.messages * self.randomness).into_vec();
        let mut dec: Vec<u64> = (0..self.ciphertexts)
            .map(|_| rng.gen_range(0..self.messages as u64))
            .collect();
        let enc = (0..self.messages)
            .map(|m| {
                (0..self.randomness)
                    .map(|r| {
                        let c = slots[m * self.randomness + r];
                        dec[c] = m as u64;
                        c as u64
                    })
                    .collect()
            })
            .collect();
        (PkePublicKey { enc }, PkeSecretKey { dec })
    }

    pub fn enc(&self, pk: &PkePublicKey, m: u64, r: usize) -> Result<u64> {
        pk.enc
            .get(m as usize)
            .and_then(|row| row.get(r))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("(m, r) = ({m}, {r}) outside the key")))
    }

    pub fn dec(&self, sk: &PkeSecretKey, c: u64) -> Option<u64> {
        sk.dec.get(c as usize).copied()
    }

    /// `Dec(sk, ·)` as a table.
    pub fn dec_function(&self, sk: &PkeSecretKey) -> Result<ClassicalFunction> {
        ClassicalFunction::new(self.message_bits(), sk.dec.clone())
    }

    /// Challenges `Enc(pk, m; r)` for uniform `(m, r)`, answer `m`.
    pub fn decryption_test(&self, pk: &PkePublicKey) -> Result<TableTest> {
        let w = 1.0 / (self.messages * self.randomness) as f64;
        let mut coins = Vec::with_capacity(self.messages * self.randomness);
        for m in 0..self.messages as u64 {
            for r in 0..self.randomness {
                coins.push((self.enc(pk, m, r)?, w, m));
            }
        }
        TableTest::new(coins)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoneyConfig {
    pub lambda: usize,
    /// `|M|`.
    pub msg_space: usize,
    pub randomness: usize,
    pub ciphertexts: usize,
    pub gamma: f64,
    /// Challenges used by the sampled goodness test.
    pub k: usize,
    /// Use `k` sampled challenges instead of the exact threshold test.
    pub sampled: bool,
    pub trials: u64,
    pub seed: u64,
    pub attack: String,
    pub record_trials: bool,
}

impl Default for MoneyConfig {
    fn default() -> Self {
        Self {
            lambda: 8,
            msg_space: 8,
            randomness: 8,
            ciphertexts: 256,
            gamma: 0.9,
            k: 16,
            sampled: false,
            trials: 1000,
            seed: 0,
            attack: String::new(),
            record_trials: false,
        }
    }
}

impl MoneyConfig {
    pub fn validate(&self) -> Result<()> {
        ToyMoney::new(self)?;
        if self.trials == 0 || self.k == 0 {
            return Err(Error::InvalidParameter(
                "trials and k must be at least 1".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "γ = {} outside (0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// The money scheme: a toy PKE and a toy copy-detection scheme over
/// decryption tables, serials drawn from the message space.
#[derive(Clone, Debug)]
pub struct ToyMoney {
    pub pke: ToyPke,
    pub cd: ToyCd,
}

#[derive(Clone, Debug)]
pub struct MoneyPublicKey {
    pub pke: PkePublicKey,
    pub cd: ToyPublicKey,
}

#[derive(Clone, Debug)]
pub struct MoneySecretKey {
    pub pke: PkeSecretKey,
    pub cd: ToySecretKey,
}

/// A copy-detection program for `Dec(sk, ·)` with its public sampling info.
#[derive(Clone, Debug)]
pub struct Banknote {
    pub program: CdProgram,
    pub aux: ToyAux,
}

impl ToyMoney {
    pub fn new(cfg: &MoneyConfig) -> Result<Self> {
        let pke = ToyPke::new(cfg.msg_space, cfg.randomness, cfg.ciphertexts)?;
        Ok(Self {
            cd: ToyCd::toy(cfg.lambda, cfg.ciphertexts, pke.message_bits())?,
            pke,
        })
    }

    fn aux(&self) -> ToyAux {
        ToyAux {
            domain: self.pke.ciphertexts,
            width: self.pke.message_bits(),
        }
    }
}

pub fn money_keygen(
    scheme: &ToyMoney,
    rng: &mut dyn RngCore,
) -> Result<(MoneyPublicKey, MoneySecretKey)> {
    let (ppk, psk) = scheme.pke.keygen(rng);
    let (cpk, csk) = cd_setup(&scheme.cd, rng)?;
    Ok((
        MoneyPublicKey { pke: ppk, cd: cpk },
        MoneySecretKey { pke: psk, cd: csk },
    ))
}

pub fn money_gennote<R: Rng + ?Sized>(
    scheme: &ToyMoney,
    sk: &MoneySecretKey,
    rng: &mut R,
) -> Result<Banknote> {
    let f = scheme.pke.dec_function(&sk.pke)?;
    let (mut programs, state) = cd_issue(&scheme.cd, &sk.cd, &f, 1, rng)?;
    let (table, serial) = programs.remove(0);
    let state = state.relabel(RegisterLayout::single(NOTE_REGISTER, scheme.cd.lambda()))?;
    Ok(Banknote {
        program: CdProgram {
            table,
            serial,
            state,
        },
        aux: scheme.aux(),
    })
}

/// Outcome of verifying one note register.
#[derive(Clone, Debug)]
pub struct NoteVerdict {
    pub accepted: bool,
    /// Check acceptance probability.
    pub check_prob: f64,
    /// Fraction of decryption challenges the table answers correctly.
    pub success: f64,
    pub good: bool,
    /// The state after the check, conditioned on its outcome.
    pub post: QuantumState,
}

/// Verifies the note on `reg` of `state` carrying `(table, serial)`: Check,
/// then the `γ`-goodness test on decryption challenges.
#[allow(clippy::too_many_arguments)]
pub fn verify_register<R: Rng + ?Sized>(
    scheme: &ToyMoney,
    pk: &MoneyPublicKey,
    cfg: &MoneyConfig,
    table: &ClassicalFunction,
    serial: u64,
    state: &QuantumState,
    reg: &str,
    rng: &mut R,
) -> Result<NoteVerdict> {
    let aux = scheme.aux();
    let c = check_branch(&scheme.cd, &pk.cd, &aux, table, serial, state, reg)?;
    let test = scheme.pke.decryption_test(&pk.pke)?;
    let success = test.success(table);
    let passed = c.accepted.is_some() && rng.gen::<f64>() < c.accept_prob;
    let rejected = |state: &QuantumState| -> Result<QuantumState> {
        if c.extracted != Some(serial) || c.accept_prob == 0.0 {
            return Ok(state.clone());
        }
        use crate::cd::MoneyMiniScheme;
        scheme
            .cd
            .qm
            .reject_branch(&pk.cd.verifier, serial, state, reg)?
            .renormalized()
    };
    if !passed {
        return Ok(NoteVerdict {
            accepted: false,
            check_prob: c.accept_prob,
            success,
            good: false,
            post: rejected(state)?,
        });
    }
    let good = if cfg.sampled {
        let coins = test.coins();
        let need = (cfg.gamma * cfg.k as f64 - 1e-9).ceil() as usize;
        let hits = (0..cfg.k)
            .filter(|_| {
                let (x, _, want) = coins[rng.gen_range(0..coins.len())];
                (x as usize) < table.domain() && table.eval(x) == want
            })
            .count();
        hits >= need
    } else {
        success >= cfg.gamma - 1e-12
    };
    Ok(NoteVerdict {
        accepted: good,
        check_prob: c.accept_prob,
        success,
        good,
        post: c.accepted.expect("accepted branch exists"),
    })
}

/// `0` accepts, `1` rejects.
pub fn money_verify<R: Rng + ?Sized>(
    scheme: &ToyMoney,
    pk: &MoneyPublicKey,
    note: &Banknote,
    cfg: &MoneyConfig,
    rng: &mut R,
) -> Result<(u8, Banknote)> {
    if note.aux != scheme.aux() {
        return Ok((1, note.clone()));
    }
    let v = verify_register(
        scheme,
        pk,
        cfg,
        &note.program.table,
        note.program.serial,
        &note.program.state,
        NOTE_REGISTER,
        rng,
    )?;
    let mut out = note.clone();
    out.program.state = v.post;
    Ok((u8::from(!v.accepted), out))
}

/// A cloning attack: one note in, two claimed notes out on `note0`, `note1`.
pub trait MoneyAttack: Sync {
    fn name(&self) -> &'static str;
    /// `state` holds the note on `note0`.
    fn clone_note(
        &self,
        pk: &MoneyPublicKey,
        note: (ClassicalFunction, u64),
        state: QuantumState,
        rng: &mut dyn RngCore,
    ) -> Result<CdPirateOutput>;

    fn expected_win(&self, _cfg: &MoneyConfig) -> Option<f64> {
        None
    }
}

/// Measures the note and hands out two copies of the outcome.
pub struct MeasureClone;

impl MoneyAttack for MeasureClone {
    fn name(&self) -> &'static str {
        "measure-clone"
    }

    fn clone_note(
        &self,
        _: &MoneyPublicKey,
        note: (ClassicalFunction, u64),
        state: QuantumState,
        rng: &mut dyn RngCore,
    ) -> Result<CdPirateOutput> {
        let lambda = state.layout().width(&note_register(0))?;
        let u = measure_register(&state, &note_register(0), rng)?.outcome;
        let layout = RegisterLayout::new([(note_register(0), lambda), (note_register(1), lambda)])?;
        let (n0, n1) = (note_register(0), note_register(1));
        Ok(CdPirateOutput {
            programs: vec![note.clone(), note],
            state: QuantumState::basis(layout, &[(n0.as_str(), u), (n1.as_str(), u)])?,
        })
    }

    fn expected_win(&self, cfg: &MoneyConfig) -> Option<f64> {
        Some(0.5f64.powi(cfg.lambda as i32))
    }
}

/// Keeps the note and adds a copy of the table and serial with a `|0⟩` note.
pub struct KeepAndForge;

impl MoneyAttack for KeepAndForge {
    fn name(&self) -> &'static str {
        "keep-and-forge"
    }

    fn clone_note(
        &self,
        _: &MoneyPublicKey,
        note: (ClassicalFunction, u64),
        state: QuantumState,
        _: &mut dyn RngCore,
    ) -> Result<CdPirateOutput> {
        let lambda = state.layout().width(&note_register(0))?;
        Ok(CdPirateOutput {
            programs: vec![note.clone(), note],
            state: state.with_register(&note_register(1), lambda)?,
        })
    }

    fn expected_win(&self, cfg: &MoneyConfig) -> Option<f64> {
        Some(0.5f64.powi((cfg.lambda / 2) as i32))
    }
}

pub const MONEY_ATTACKS: &[&str] = &["measure-clone", "keep-and-forge"];

pub fn money_attack(name: &str) -> Result<Box<dyn MoneyAttack>> {
    Ok(match name {
        "measure-clone" => Box::new(MeasureClone),
        "keep-and-forge" => Box::new(KeepAndForge),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown money attack `{name}`; expected one of {MONEY_ATTACKS:?}"
            )))
        }
    })
}

/// A money attack run as a one-query copy-detection pirate.
pub struct AsCdPirate<'a> {
    pub attack: &'a dyn MoneyAttack,
    pub pk: &'a MoneyPublicKey,
}

impl CdPirate for AsCdPirate<'_> {
    fn name(&self) -> &'static str {
        self.attack.name()
    }

    fn play(&self, mut ch: CdChallenge<'_>, rng: &mut dyn RngCore) -> Result<CdPirateOutput> {
        if ch.q() != 1 {
            return Err(Error::InvalidParameter(
                "money attacks take exactly one note".into(),
            ));
        }
        self.attack
            .clone_note(self.pk, ch.programs.remove(0), ch.state, rng)
    }
}

/// One clone-game trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoneyTrial {
    pub win: bool,
    pub accepted: Vec<bool>,
    pub exact_win: f64,
}

fn clone_trial(
    cfg: &MoneyConfig,
    attack: &dyn MoneyAttack,
    rng: &mut dyn RngCore,
) -> Result<MoneyTrial> {
    let scheme = ToyMoney::new(cfg)?;
    let (pk, sk) = money_keygen(&scheme, rng)?;
    let note = money_gennote(&scheme, &sk, rng)?;
    let state = note
        .program
        .state
        .relabel(RegisterLayout::single(&note_register(0), cfg.lambda))?;
    let out = attack.clone_note(&pk, (note.program.table, note.program.serial), state, rng)?;
    if out.programs.len() != 2 {
        return Err(Error::ProtocolViolation(format!(
            "attack returned {} notes, expected 2",
            out.programs.len()
        )));
    }
    let mut accepted = Vec::with_capacity(2);
    let mut state = out.state.clone();
    for (b, (table, serial)) in out.programs.iter().enumerate() {
        let v = verify_register(
            &scheme,
            &pk,
            cfg,
            table,
            *serial,
            &state,
            &note_register(b),
            rng,
        )?;
        accepted.push(v.accepted);
        if !v.accepted {
            break;
        }
        state = v.post;
    }
    let exact = exact_pair_acceptance(&scheme, &pk, cfg, &out)?;
    Ok(MoneyTrial {
        win: accepted.len() == 2 && accepted.iter().all(|&a| a),
        accepted,
        exact_win: exact,
    })
}

/// Probability that both notes pass Check, times whether both tables are
/// `γ`-good under the exact test.
fn exact_pair_acceptance(
    scheme: &ToyMoney,
    pk: &MoneyPublicKey,
    cfg: &MoneyConfig,
    out: &CdPirateOutput,
) -> Result<f64> {
    let aux = scheme.aux();
    let test = scheme.pke.decryption_test(&pk.pke)?;
    let mut p = 1.0;
    let mut state = Some(out.state.clone());
    for (b, (table, serial)) in out.programs.iter().enumerate() {
        let Some(s) = state.take() else {
            return Ok(0.0);
        };
        if test.success(table) < cfg.gamma - 1e-12 {
            return Ok(0.0);
        }
        let c = check_branch(
            &scheme.cd,
            &pk.cd,
            &aux,
            table,
            *serial,
            &s,
            &note_register(b),
        )?;
        p *= c.accept_prob;
        state = c.accepted;
    }
    Ok(p)
}

/// The same trial, seen as a one-query copy-detection game with the
/// decryption challenges as the goodness test.
pub fn reduction_trial(
    cfg: &MoneyConfig,
    attack: &dyn MoneyAttack,
    rng: &mut dyn RngCore,
) -> Result<bool> {
    let scheme = ToyMoney::new(cfg)?;
    let (pk, sk) = money_keygen(&scheme, rng)?;
    let f = scheme.pke.dec_function(&sk.pke)?;
    let (programs, state) = cd_issue(&scheme.cd, &sk.cd, &f, 1, rng)?;
    let issued: Vec<u64> = programs.iter().map(|p| p.1).collect();
    let ch = CdChallenge {
        scheme: &scheme.cd,
        pk: &pk.cd,
        aux: scheme.aux(),
        programs,
        state,
    };
    let pirate = AsCdPirate { attack, pk: &pk };
    let out = pirate.play(ch, rng)?;
    let test = scheme.pke.decryption_test(&pk.pke)?;
    Ok(cd_judge(
        &scheme.cd,
        &pk.cd,
        &scheme.aux(),
        &test,
        &issued,
        &out,
        cfg.gamma,
        rng,
    )?
    .win)
}

/// Fresh keys and note per trial; the attack wins iff both notes verify.
pub fn run_money_clone_game(cfg: &MoneyConfig, attack: &dyn MoneyAttack) -> Result<GameReport> {
    cfg.validate()?;
    let trials = run_trials(cfg.seed, cfg.trials, |_, rng| clone_trial(cfg, attack, rng))?;
    let wins = trials.iter().filter(|t| t.win).count() as u64;
    let mean_exact = trials.iter().map(|t| t.exact_win).sum::<f64>() / trials.len() as f64;
    let mut r = GameReport::new(wins, trials.len() as u64, attack.expected_win(cfg))
        .with_diagnostic("attack", attack.name())
        .with_diagnostic("mean_exact_win_probability", mean_exact)
        .with_diagnostic("mode", if cfg.sampled { "sampled" } else { "exact" });
    if cfg.record_trials {
        r = r.with_diagnostic("per_trial", &trials);
    }
    Ok(r)
}

/// Fresh keys and an honest note per trial; counts acceptances.
pub fn run_money_honest(cfg: &MoneyConfig) -> Result<GameReport> {
    cfg.validate()?;
    let trials = run_trials(cfg.seed, cfg.trials, |_, rng| {
        let scheme = ToyMoney::new(cfg)?;
        let (pk, sk) = money_keygen(&scheme, rng)?;
        let note = money_gennote(&scheme, &sk, rng)?;
        let test = scheme.pke.decryption_test(&pk.pke)?;
        let success = test.success(&note.program.table);
        let (bit, _) = money_verify(&scheme, &pk, &note, cfg, rng)?;
        Ok((bit == 0, success))
    })?;
    let wins = trials.iter().filter(|t| t.0).count() as u64;
    let worst = trials.iter().map(|t| t.1).fold(1.0f64, f64::min);
    Ok(GameReport::new(wins, trials.len() as u64, None)
        .with_diagnostic("attack", "honest")
        .with_diagnostic("min_decryption_success", worst)
        .with_diagnostic("mode", if cfg.sampled { "sampled" } else { "exact" })
        .with_diagnostic("params", json!({"lambda": cfg.lambda, "msg_space": cfg.msg_space, "gamma": cfg.gamma, "k": cfg.k})))
}

#[cfg(test)]
mod tests;
