//! The copy-detection security game and built-in pirates.

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    cd_generate_with_serial, cd_setup, check_branch, notes_layout, CdPublicKey, CdSecretKey,
    MoneyMiniScheme, TableTest, ToyAux, ToyCd, ToySubspaceMoney, ToyWatermark, WatermarkScheme,
    MARK_POSITIONS, NOTE_REGISTER,
};
use crate::error::{Error, Result};
use crate::games::GameReport;
use crate::oracles::ClassicalFunction;
use crate::qsim::{measure_register, QuantumState, RegisterLayout, PURE_QUBIT_CAP};
use crate::seed::run_trials;

pub type ToyPublicKey = CdPublicKey<ToyWatermark, ToySubspaceMoney>;
pub type ToySecretKey = CdSecretKey<ToyWatermark, ToySubspaceMoney>;

/// Name of the note register of program `i` in a joint state.
pub fn note_register(i: usize) -> String {
    format!("{NOTE_REGISTER}{i}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdConfig {
    pub lambda: usize,
    pub domain: usize,
    pub width: usize,
    pub gamma: f64,
    /// Programs handed to the pirate.
    pub q: usize,
    pub trials: u64,
    pub seed: u64,
    pub pirate: String,
    pub record_trials: bool,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            lambda: 8,
            domain: 64,
            width: 8,
            gamma: 0.9,
            q: 1,
            trials: 1000,
            seed: 0,
            pirate: String::new(),
            record_trials: false,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        ToyCd::toy(self.lambda, self.domain, self.width)?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "γ = {} outside (0, 1]",
                self.gamma
            )));
        }
        if self.q == 0 || (self.q as u64) >= (1u64 << self.width) {
            return Err(Error::InvalidParameter(format!(
                "q = {} needs 1 ≤ q < |S| = {}",
                self.q,
                1u64 << self.width
            )));
        }
        let qubits = (self.q + 1) * self.lambda;
        if qubits > PURE_QUBIT_CAP {
            return Err(Error::Resource {
                what: "copy-detection notes (qubits)",
                requested: qubits,
                cap: PURE_QUBIT_CAP,
            });
        }
        Ok(())
    }

    /// Whether an unmodified marked table is always `γ`-good.
    fn marked_tables_good(&self) -> bool {
        self.gamma <= 1.0 - MARK_POSITIONS as f64 / self.domain as f64 + 1e-12
    }
}

/// The two events of the security argument on a pair that passes Check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CdEvent {
    /// Every extracted mark equals its serial and some serial was never issued.
    #[serde(rename = "E")]
    E,
    /// Every extracted mark equals its serial and every serial was issued.
    #[serde(rename = "E_prime")]
    EPrime,
}

fn classify(claims: &[u64], extracted: &[Option<u64>], issued: &[u64]) -> Option<CdEvent> {
    if claims.iter().zip(extracted).any(|(&s, e)| *e != Some(s)) {
        return None;
    }
    Some(if claims.iter().all(|s| issued.contains(s)) {
        CdEvent::EPrime
    } else {
        CdEvent::E
    })
}

/// What a pirate is handed: the public key and `q` programs whose notes
/// live on `note0 … note{q-1}` of one joint state.
pub struct CdChallenge<'a> {
    pub scheme: &'a ToyCd,
    pub pk: &'a ToyPublicKey,
    pub aux: ToyAux,
    pub programs: Vec<(ClassicalFunction, u64)>,
    pub state: QuantumState,
}

impl CdChallenge<'_> {
    pub fn q(&self) -> usize {
        self.programs.len()
    }
}

/// `q + 1` claimed programs, notes on `note0 … note{q}`.
#[derive(Clone, Debug)]
pub struct CdPirateOutput {
    pub programs: Vec<(ClassicalFunction, u64)>,
    pub state: QuantumState,
}

pub trait CdPirate: Sync {
    fn name(&self) -> &'static str;
    fn play(&self, challenge: CdChallenge<'_>, rng: &mut dyn RngCore) -> Result<CdPirateOutput>;

    /// Closed-form win probability, when known.
    fn expected_win(&self, _cfg: &CdConfig) -> Option<f64> {
        None
    }
}

/// Measures every note and hands out a copy of program 0 with the measured
/// basis state as its note.
pub struct DuplicateEverything;

impl CdPirate for DuplicateEverything {
    fn name(&self) -> &'static str {
        "duplicate-everything"
    }

    fn play(&self, ch: CdChallenge<'_>, rng: &mut dyn RngCore) -> Result<CdPirateOutput> {
        let q = ch.q();
        let mut state = ch.state;
        let mut seen = Vec::with_capacity(q + 1);
        for i in 0..q {
            let m = measure_register(&state, &note_register(i), rng)?;
            seen.push(m.outcome);
            state = m.post;
        }
        seen.push(seen[0]);
        let names: Vec<String> = (0..=q).map(note_register).collect();
        let values: Vec<(&str, u64)> = names.iter().map(String::as_str).zip(seen).collect();
        let mut programs = ch.programs;
        programs.push(programs[0].clone());
        Ok(CdPirateOutput {
            programs,
            state: QuantumState::basis(notes_layout(q + 1, ch.scheme.lambda())?, &values)?,
        })
    }

    fn expected_win(&self, cfg: &CdConfig) -> Option<f64> {
        cfg.marked_tables_good()
            .then(|| 0.5f64.powi(((cfg.q + 1) * cfg.lambda / 2) as i32))
    }
}

/// Keeps the issued programs and adds one re-marked, through the public
/// extraction key, with a fresh serial and a `|0⟩` note.
pub struct MarkEraser;

impl CdPirate for MarkEraser {
    fn name(&self) -> &'static str {
        "mark-eraser"
    }

    fn play(&self, ch: CdChallenge<'_>, rng: &mut dyn RngCore) -> Result<CdPirateOutput> {
        let q = ch.q();
        let issued: Vec<u64> = ch.programs.iter().map(|p| p.1).collect();
        let serials = ch.scheme.qm.serial_space();
        let fresh = loop {
            let s = rng.gen_range(0..serials);
            if !issued.contains(&s) {
                break s;
            }
        };
        let mut table = ch.programs[0].0.table().to_vec();
        for &h in &ch.pk.xk.positions {
            table[h as usize] = fresh;
        }
        let mut programs = ch.programs;
        programs.push((ClassicalFunction::new(ch.aux.width, table)?, fresh));
        Ok(CdPirateOutput {
            programs,
            state: ch
                .state
                .with_register(&note_register(q), ch.scheme.lambda())?,
        })
    }

    fn expected_win(&self, cfg: &CdConfig) -> Option<f64> {
        cfg.marked_tables_good()
            .then(|| 0.5f64.powi((cfg.lambda / 2) as i32))
    }
}

/// Returns the issued programs plus an all-zero table claiming serial 0.
pub struct HonestPlusDummy;

impl CdPirate for HonestPlusDummy {
    fn name(&self) -> &'static str {
        "honest-plus-dummy"
    }

    fn play(&self, ch: CdChallenge<'_>, _: &mut dyn RngCore) -> Result<CdPirateOutput> {
        let q = ch.q();
        let mut programs = ch.programs;
        programs.push((
            ClassicalFunction::new(ch.aux.width, vec![0; ch.aux.domain])?,
            0,
        ));
        Ok(CdPirateOutput {
            programs,
            state: ch
                .state
                .with_register(&note_register(q), ch.scheme.lambda())?,
        })
    }
}

pub const CD_PIRATES: &[&str] = &["duplicate-everything", "mark-eraser", "honest-plus-dummy"];

pub fn cd_pirate(name: &str) -> Result<Box<dyn CdPirate>> {
    Ok(match name {
        "duplicate-everything" => Box::new(DuplicateEverything),
        "mark-eraser" => Box::new(MarkEraser),
        "honest-plus-dummy" => Box::new(HonestPlusDummy),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown copy-detection pirate `{name}`; expected one of {CD_PIRATES:?}"
            )))
        }
    })
}

/// One game trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdTrial {
    pub win: bool,
    /// Every program passed Check.
    pub checks_passed: bool,
    /// Event of the passing tuple.
    pub event: Option<CdEvent>,
    /// Event implied by the claimed serials alone, whether or not the notes verify.
    pub claimed_event: Option<CdEvent>,
    /// Exact probability of winning given the pirate's output.
    pub exact_win: f64,
    /// Smallest re-check acceptance probability over the passing programs.
    pub recheck_min: Option<f64>,
    pub issued: Vec<u64>,
    pub serials: Vec<u64>,
    pub extracted: Vec<Option<u64>>,
    pub success: Vec<f64>,
}

/// Issues `q` programs for `f` with distinct serials, notes on `note0 …`.
pub fn cd_issue<R: Rng + ?Sized>(
    scheme: &ToyCd,
    sk: &ToySecretKey,
    f: &ClassicalFunction,
    q: usize,
    rng: &mut R,
) -> Result<(Vec<(ClassicalFunction, u64)>, QuantumState)> {
    let serials = sample(rng, scheme.qm.serial_space() as usize, q);
    let mut programs = Vec::with_capacity(q);
    let mut state: Option<QuantumState> = None;
    for (i, s) in serials.into_iter().enumerate() {
        let p = cd_generate_with_serial(scheme, sk, f, s as u64)?;
        let note = p
            .state
            .relabel(RegisterLayout::single(&note_register(i), scheme.lambda()))?;
        state = Some(match state {
            None => note,
            Some(acc) => acc.tensor(&note)?,
        });
        programs.push((p.table, p.serial));
    }
    let state = state.ok_or_else(|| Error::InvalidParameter("q must be at least 1".into()))?;
    Ok((programs, state))
}

/// Runs Check on every output program in order, then tests each table for
/// `γ`-goodness under `test`.
#[allow(clippy::too_many_arguments)]
pub fn cd_judge<R: Rng + ?Sized>(
    scheme: &ToyCd,
    pk: &ToyPublicKey,
    aux: &ToyAux,
    test: &TableTest,
    issued: &[u64],
    out: &CdPirateOutput,
    gamma: f64,
    rng: &mut R,
) -> Result<CdTrial> {
    let serials: Vec<u64> = out.programs.iter().map(|p| p.1).collect();
    let extracted: Vec<Option<u64>> = out
        .programs
        .iter()
        .map(|(t, _)| scheme.wm.extract(&pk.xk, aux, t))
        .collect();
    let success: Vec<f64> = out.programs.iter().map(|(t, _)| test.success(t)).collect();
    let all_good = success.iter().all(|&p| p >= gamma - 1e-12);

    // `actual` follows the sampled outcomes; once it fails, `chain` keeps
    // following the accepting branches to finish the exact probability.
    let mut actual = Some(out.state.clone());
    let mut chain: Option<QuantumState> = None;
    let mut exact = 1.0;
    let mut recheck_min: Option<f64> = None;
    for (b, (table, serial)) in out.programs.iter().enumerate() {
        let reg = note_register(b);
        if let Some(state) = actual.take() {
            let c = check_branch(scheme, pk, aux, table, *serial, &state, &reg)?;
            exact *= c.accept_prob;
            match c.accepted {
                Some(post) if rng.gen::<f64>() < c.accept_prob => {
                    let again = scheme
                        .qm
                        .ver_branch(&pk.verifier, *serial, &post, &reg)?
                        .map_or(0.0, |s| s.trace());
                    recheck_min = Some(recheck_min.map_or(again, |m: f64| m.min(again)));
                    actual = Some(post);
                }
                accepted => chain = accepted,
            }
        } else if let Some(state) = chain.take() {
            let c = check_branch(scheme, pk, aux, table, *serial, &state, &reg)?;
            exact *= c.accept_prob;
            chain = c.accepted;
        } else {
            exact = 0.0;
        }
    }
    let checks_passed = actual.is_some();
    let claimed_event = classify(&serials, &extracted, issued);
    let event = if checks_passed { claimed_event } else { None };
    Ok(CdTrial {
        win: checks_passed && all_good,
        checks_passed,
        event,
        claimed_event,
        exact_win: if all_good { exact } else { 0.0 },
        recheck_min,
        issued: issued.to_vec(),
        serials,
        extracted,
        success,
    })
}

/// Issue, play and judge one trial.
#[allow(clippy::too_many_arguments)]
pub fn cd_trial(
    scheme: &ToyCd,
    pk: &ToyPublicKey,
    sk: &ToySecretKey,
    f: &ClassicalFunction,
    aux: &ToyAux,
    test: &TableTest,
    pirate: &dyn CdPirate,
    q: usize,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<CdTrial> {
    let (programs, state) = cd_issue(scheme, sk, f, q, rng)?;
    let issued: Vec<u64> = programs.iter().map(|p| p.1).collect();
    let ch = CdChallenge {
        scheme,
        pk,
        aux: *aux,
        programs,
        state,
    };
    let out = pirate.play(ch, rng)?;
    if out.programs.len() != q + 1 {
        return Err(Error::ProtocolViolation(format!(
            "pirate returned {} programs, expected {}",
            out.programs.len(),
            q + 1
        )));
    }
    cd_judge(scheme, pk, aux, test, &issued, &out, gamma, rng)
}

/// Fresh keys and a fresh uniform table per trial; the pirate wins iff all
/// `q + 1` programs pass Check and are `γ`-good on uniform inputs.
pub fn run_copy_detection_game(cfg: &CdConfig, pirate: &dyn CdPirate) -> Result<GameReport> {
    cfg.validate()?;
    let trials = run_trials(cfg.seed, cfg.trials, |_, rng| {
        let scheme = ToyCd::toy(cfg.lambda, cfg.domain, cfg.width)?;
        let (pk, sk) = cd_setup(&scheme, rng)?;
        let (f, aux) = scheme.wm.samp(rng)?;
        cd_trial(
            &scheme,
            &pk,
            &sk,
            &f,
            &aux,
            &TableTest::uniform(&f),
            pirate,
            cfg.q,
            cfg.gamma,
            rng,
        )
    })?;
    Ok(summarize(
        cfg,
        pirate.name(),
        &trials,
        pirate.expected_win(cfg),
    ))
}

pub(crate) fn summarize(
    cfg: &CdConfig,
    name: &str,
    trials: &[CdTrial],
    derived: Option<f64>,
) -> GameReport {
    let wins = trials.iter().filter(|t| t.win).count() as u64;
    let count = |f: &dyn Fn(&CdTrial) -> bool| trials.iter().filter(|t| f(t)).count();
    let passes = count(&|t| t.checks_passed);
    let violations = count(&|t| t.checks_passed && t.event.is_none());
    let recheck_min = trials
        .iter()
        .filter_map(|t| t.recheck_min)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
    let mean_exact = trials.iter().map(|t| t.exact_win).sum::<f64>() / trials.len().max(1) as f64;
    let mut r = GameReport::new(wins, trials.len() as u64, derived)
        .with_diagnostic("pirate", name)
        .with_diagnostic("q", cfg.q)
        .with_diagnostic("check_passes", passes)
        .with_diagnostic(
            "events_on_pass",
            json!({
                "E": count(&|t| t.checks_passed && t.event == Some(CdEvent::E)),
                "E_prime": count(&|t| t.checks_passed && t.event == Some(CdEvent::EPrime)),
            }),
        )
        .with_diagnostic(
            "claimed_events",
            json!({
                "E": count(&|t| t.claimed_event == Some(CdEvent::E)),
                "E_prime": count(&|t| t.claimed_event == Some(CdEvent::EPrime)),
                "none": count(&|t| t.claimed_event.is_none()),
            }),
        )
        .with_diagnostic("dichotomy_violations", violations)
        .with_diagnostic("recheck_min", recheck_min)
        .with_diagnostic("mean_exact_win_probability", mean_exact);
    if cfg.record_trials {
        r = r.with_diagnostic("per_trial", trials);
    }
    r
}
