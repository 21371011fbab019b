//! Copy detection built from a publicly extractable watermarking scheme and a
//! quantum money mini-scheme, with toy instantiations of both.

mod game;

pub use game::{
    cd_issue, cd_judge, cd_pirate, cd_trial, note_register, run_copy_detection_game, CdChallenge,
    CdConfig, CdEvent, CdPirate, CdPirateOutput, CdTrial, DuplicateEverything, HonestPlusDummy,
    MarkEraser, ToyPublicKey, ToySecretKey, CD_PIRATES,
};

use std::fmt::Debug;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::f2::{rand_subspace, F2Subspace};
use crate::games::table_evaluator;
use crate::linalg::{c, C64, ZERO};
use crate::measure::{Evaluator, Predicate};
use crate::oracles::ClassicalFunction;
use crate::qsim::{QuantumState, RegisterLayout};

/// Register holding a program's banknote.
pub const NOTE_REGISTER: &str = "note";
/// Size of the toy watermark's secret input set `H`.
pub const MARK_POSITIONS: usize = 4;

pub trait WatermarkScheme: Clone + Debug + Send + Sync {
    type ExtractionKey: Clone + Debug + Send + Sync;
    type MarkingKey: Clone + Debug + Send + Sync;
    type Aux: Clone + Debug + Send + Sync;

    fn setup(&self, rng: &mut dyn RngCore) -> Result<(Self::ExtractionKey, Self::MarkingKey)>;
    fn samp(&self, rng: &mut dyn RngCore) -> Result<(ClassicalFunction, Self::Aux)>;
    fn mark(
        &self,
        mk: &Self::MarkingKey,
        f: &ClassicalFunction,
        tau: u64,
    ) -> Result<ClassicalFunction>;
    fn extract(
        &self,
        xk: &Self::ExtractionKey,
        aux: &Self::Aux,
        f: &ClassicalFunction,
    ) -> Option<u64>;
    /// Number of markable messages `|M|`; messages are `0..|M|`.
    fn message_space(&self) -> u64;
    /// Declared failure tolerance of the correctness properties.
    fn tolerance(&self) -> f64;
}

pub trait MoneyMiniScheme: Clone + Debug + Send + Sync {
    type Bank: Clone + Debug + Send + Sync;
    type Verifier: Clone + Debug + Send + Sync;

    fn setup(&self, rng: &mut dyn RngCore) -> Result<(Self::Bank, Self::Verifier)>;
    /// A note with serial `s` on [`NOTE_REGISTER`].
    fn gen_serial(&self, bank: &Self::Bank, s: u64) -> Result<QuantumState>;
    /// The unnormalized accepting branch `P_s ρ P_s` of verifying register
    /// `reg` against serial `s`, or `None` when the input is malformed.
    fn ver_branch(
        &self,
        ver: &Self::Verifier,
        s: u64,
        state: &QuantumState,
        reg: &str,
    ) -> Result<Option<QuantumState>>;
    /// The unnormalized rejecting branch.
    fn reject_branch(
        &self,
        ver: &Self::Verifier,
        s: u64,
        state: &QuantumState,
        reg: &str,
    ) -> Result<QuantumState>;
    /// Number of serials; serials are `0..|S|`.
    fn serial_space(&self) -> u64;
    fn note_qubits(&self) -> usize;

    fn gen<R: Rng + ?Sized>(&self, bank: &Self::Bank, rng: &mut R) -> Result<(u64, QuantumState)>
    where
        Self: Sized,
    {
        let s = rng.gen_range(0..self.serial_space());
        Ok((s, self.gen_serial(bank, s)?))
    }
}

/// Watermarking over explicit tables: `Mark` writes `τ` on the secret set
/// `H`, `Extract` returns the value held by at least three of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyWatermark {
    pub domain: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyExtractionKey {
    pub positions: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyMarkingKey {
    positions: Vec<u64>,
}

impl ToyMarkingKey {
    pub fn extraction_key(&self) -> ToyExtractionKey {
        ToyExtractionKey {
            positions: self.positions.clone(),
        }
    }
}

/// Public sampling information: the shape of the sampled table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyAux {
    pub domain: usize,
    pub width: usize,
}

impl ToyWatermark {
    pub fn new(domain: usize, width: usize) -> Result<Self> {
        if domain < 2 * MARK_POSITIONS {
            return Err(Error::InvalidParameter(format!(
                "watermark domain {domain} below {}",
                2 * MARK_POSITIONS
            )));
        }
        if width == 0 || width > 16 {
            return Err(Error::InvalidParameter(format!(
                "output width {width} outside 1..=16"
            )));
        }
        Ok(Self { domain, width })
    }

    /// Probability that an unmarked uniform table extracts to some message.
    pub fn spurious_extract_probability(&self) -> f64 {
        let p = 0.5f64.powi(self.width as i32);
        let k = MARK_POSITIONS as i32;
        let one = k as f64 * p.powi(k - 1) * (1.0 - p) + p.powi(k);
        (self.message_space() as f64 * one).min(1.0)
    }

    fn majority(&self, f: &ClassicalFunction, positions: &[u64]) -> Option<u64> {
        positions.iter().map(|&h| f.eval(h)).find(|&v| {
            positions.iter().filter(|&&h| f.eval(h) == v).count() * 4 >= MARK_POSITIONS * 3
        })
    }
}

impl WatermarkScheme for ToyWatermark {
    type ExtractionKey = ToyExtractionKey;
    type MarkingKey = ToyMarkingKey;
    type Aux = ToyAux;

    fn setup(&self, rng: &mut dyn RngCore) -> Result<(ToyExtractionKey, ToyMarkingKey)> {
        let mut positions: Vec<u64> = sample(rng, self.domain, MARK_POSITIONS)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        positions.sort_unstable();
        let mk = ToyMarkingKey { positions };
        Ok((mk.extraction_key(), mk))
    }

    fn samp(&self, rng: &mut dyn RngCore) -> Result<(ClassicalFunction, ToyAux)> {
        let f = ClassicalFunction::random(self.domain, self.width, rng)?;
        Ok((
            f,
            ToyAux {
                domain: self.domain,
                width: self.width,
            },
        ))
    }

    fn mark(
        &self,
        mk: &ToyMarkingKey,
        f: &ClassicalFunction,
        tau: u64,
    ) -> Result<ClassicalFunction> {
        if tau >= self.message_space() {
            return Err(Error::InvalidParameter(format!(
                "mark {tau} outside the message space"
            )));
        }
        if f.domain() != self.domain || f.width() != self.width {
            return Err(Error::InvalidParameter(
                "table shape does not match the watermark".into(),
            ));
        }
        let mut table = f.table().to_vec();
        for &h in &mk.positions {
            table[h as usize] = tau;
        }
        ClassicalFunction::new(self.width, table)
    }

    fn extract(&self, xk: &ToyExtractionKey, aux: &ToyAux, f: &ClassicalFunction) -> Option<u64> {
        if f.domain() != aux.domain || f.width() != aux.width || aux.domain != self.domain {
            return None;
        }
        self.majority(f, &xk.positions)
    }

    fn message_space(&self) -> u64 {
        1 << self.width
    }

    fn tolerance(&self) -> f64 {
        (MARK_POSITIONS as f64 / self.domain as f64).max(self.spurious_extract_probability())
    }
}

/// Subspace money: the note for serial `s` is `|A_s⟩` with `dim A_s = λ/2`,
/// and `A_s` is derived from a bank seed. Verification projects onto `A_s`,
/// applies `H^{⊗λ}`, projects onto `A_s⊥` and applies `H^{⊗λ}` again.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToySubspaceMoney {
    pub lambda: usize,
    pub serial_bits: usize,
}

#[derive(Clone, Debug)]
pub struct SubspaceBank {
    verifier: SubspaceVerifier,
}

/// Public verification access. Holds the subspace registry but only exposes
/// the verification projection.
#[derive(Clone, Debug)]
pub struct SubspaceVerifier {
    lambda: usize,
    seed: u64,
}

impl SubspaceVerifier {
    pub(crate) fn subspace(&self, s: u64) -> Result<F2Subspace> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(s);
        rand_subspace(self.lambda, self.lambda / 2, &mut rng)
    }
}

/// `P ρ P` with `P = |A⟩⟨A|` on `reg` when `accept`, else with `I − P`.
/// Projecting onto `A`, applying `H^{⊗λ}`, projecting onto `A⊥` and applying
/// `H^{⊗λ}` again is exactly `|A⟩⟨A|`.
fn rank_one_branch(
    state: &QuantumState,
    reg: &str,
    a: &F2Subspace,
    accept: bool,
) -> Result<QuantumState> {
    let span = state.layout().span(reg)?;
    let members: Vec<usize> = a
        .enumerate()?
        .iter()
        .map(|v| (v.bits() as usize) << span.shift)
        .collect();
    let w = c((members.len() as f64).recip());
    let reg_mask = ((1usize << span.width) - 1) << span.shift;
    Ok(state.map_linear(|data| {
        for base in 0..data.len() {
            if base & reg_mask != 0 {
                continue;
            }
            let along = members.iter().map(|&m| data[base | m]).sum::<C64>() * w;
            if accept {
                for u in 0..1usize << span.width {
                    data[base | (u << span.shift)] = ZERO;
                }
                for &m in &members {
                    data[base | m] = along;
                }
            } else {
                for &m in &members {
                    data[base | m] -= along;
                }
            }
        }
    }))
}

impl ToySubspaceMoney {
    pub fn new(lambda: usize, serial_bits: usize) -> Result<Self> {
        if lambda == 0 || lambda % 2 == 1 {
            return Err(Error::OddLambda(lambda));
        }
        if serial_bits == 0 || serial_bits > 16 {
            return Err(Error::InvalidParameter(format!(
                "serial bits {serial_bits} outside 1..=16"
            )));
        }
        Ok(Self {
            lambda,
            serial_bits,
        })
    }

    fn well_formed(&self, s: u64, state: &QuantumState, reg: &str) -> bool {
        s < self.serial_space() && state.layout().width(reg).ok() == Some(self.lambda)
    }
}

impl MoneyMiniScheme for ToySubspaceMoney {
    type Bank = SubspaceBank;
    type Verifier = SubspaceVerifier;

    fn setup(&self, rng: &mut dyn RngCore) -> Result<(SubspaceBank, SubspaceVerifier)> {
        let verifier = SubspaceVerifier {
            lambda: self.lambda,
            seed: rng.next_u64(),
        };
        Ok((
            SubspaceBank {
                verifier: verifier.clone(),
            },
            verifier,
        ))
    }

    fn gen_serial(&self, bank: &SubspaceBank, s: u64) -> Result<QuantumState> {
        if s >= self.serial_space() {
            return Err(Error::InvalidParameter(format!(
                "serial {s} outside the serial space"
            )));
        }
        QuantumState::subspace_state(NOTE_REGISTER, &bank.verifier.subspace(s)?)
    }

    fn ver_branch(
        &self,
        ver: &SubspaceVerifier,
        s: u64,
        state: &QuantumState,
        reg: &str,
    ) -> Result<Option<QuantumState>> {
        if !self.well_formed(s, state, reg) {
            return Ok(None);
        }
        Ok(Some(rank_one_branch(state, reg, &ver.subspace(s)?, true)?))
    }

    fn reject_branch(
        &self,
        ver: &SubspaceVerifier,
        s: u64,
        state: &QuantumState,
        reg: &str,
    ) -> Result<QuantumState> {
        if !self.well_formed(s, state, reg) {
            return Ok(state.clone());
        }
        rank_one_branch(state, reg, &ver.subspace(s)?, false)
    }

    fn serial_space(&self) -> u64 {
        1 << self.serial_bits
    }

    fn note_qubits(&self) -> usize {
        self.lambda
    }
}

/// A copy-detection scheme over a watermarking scheme and a money mini-scheme.
#[derive(Clone, Debug)]
pub struct CopyDetection<W, Q> {
    pub wm: W,
    pub qm: Q,
}

pub type ToyCd = CopyDetection<ToyWatermark, ToySubspaceMoney>;

impl ToyCd {
    /// Toy scheme over tables `[domain] → {0,1}^width` with `λ`-qubit notes;
    /// the serial space equals the message space.
    pub fn toy(lambda: usize, domain: usize, width: usize) -> Result<Self> {
        Ok(Self {
            wm: ToyWatermark::new(domain, width)?,
            qm: ToySubspaceMoney::new(lambda, width)?,
        })
    }

    pub fn lambda(&self) -> usize {
        self.qm.lambda
    }
}

#[derive(Clone, Debug)]
pub struct CdPublicKey<W: WatermarkScheme, Q: MoneyMiniScheme> {
    pub xk: W::ExtractionKey,
    pub verifier: Q::Verifier,
}

#[derive(Clone, Debug)]
pub struct CdSecretKey<W: WatermarkScheme, Q: MoneyMiniScheme> {
    pub mk: W::MarkingKey,
    pub bank: Q::Bank,
}

/// A marked classical table together with its banknote.
#[derive(Clone, Debug)]
pub struct CdProgram {
    pub table: ClassicalFunction,
    pub serial: u64,
    /// The note, on [`NOTE_REGISTER`].
    pub state: QuantumState,
}

impl CdProgram {
    pub fn compute(&self, x: u64) -> u64 {
        self.table.eval(x)
    }

    /// One-qubit evaluator applying the table.
    pub fn evaluator(&self) -> Evaluator {
        table_evaluator("prog", self.table.table().to_vec(), self.table.width())
    }
}

pub fn cd_setup<W: WatermarkScheme, Q: MoneyMiniScheme>(
    scheme: &CopyDetection<W, Q>,
    rng: &mut dyn RngCore,
) -> Result<(CdPublicKey<W, Q>, CdSecretKey<W, Q>)> {
    if scheme.qm.serial_space() > scheme.wm.message_space() {
        return Err(Error::InvalidParameter(format!(
            "serial space {} exceeds the message space {}",
            scheme.qm.serial_space(),
            scheme.wm.message_space()
        )));
    }
    let (xk, mk) = scheme.wm.setup(rng)?;
    let (bank, verifier) = scheme.qm.setup(rng)?;
    Ok((CdPublicKey { xk, verifier }, CdSecretKey { mk, bank }))
}

/// Mints a note with serial `s` and marks `f` with `s`.
pub fn cd_generate_with_serial<W: WatermarkScheme, Q: MoneyMiniScheme>(
    scheme: &CopyDetection<W, Q>,
    sk: &CdSecretKey<W, Q>,
    f: &ClassicalFunction,
    s: u64,
) -> Result<CdProgram> {
    Ok(CdProgram {
        table: scheme.wm.mark(&sk.mk, f, s)?,
        serial: s,
        state: scheme.qm.gen_serial(&sk.bank, s)?,
    })
}

pub fn cd_generate<W: WatermarkScheme, Q: MoneyMiniScheme, R: Rng + ?Sized>(
    scheme: &CopyDetection<W, Q>,
    sk: &CdSecretKey<W, Q>,
    f: &ClassicalFunction,
    rng: &mut R,
) -> Result<CdProgram> {
    let s = rng.gen_range(0..scheme.qm.serial_space());
    cd_generate_with_serial(scheme, sk, f, s)
}

/// Result of checking one program register.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    /// Probability that verification accepts, given the extracted mark
    /// matches the claimed serial; zero otherwise.
    pub accept_prob: f64,
    pub extracted: Option<u64>,
    /// The state conditioned on acceptance, when acceptance is possible.
    pub accepted: Option<QuantumState>,
}

/// Check of the program `(table, serial, reg)` inside `state`: the mark
/// extracted from the table must equal the serial, and the note must verify
/// to it. Does not sample; see [`CheckOutcome::accept_prob`].
pub fn check_branch<W: WatermarkScheme, Q: MoneyMiniScheme>(
    scheme: &CopyDetection<W, Q>,
    pk: &CdPublicKey<W, Q>,
    aux: &W::Aux,
    table: &ClassicalFunction,
    serial: u64,
    state: &QuantumState,
    reg: &str,
) -> Result<CheckOutcome> {
    let extracted = scheme.wm.extract(&pk.xk, aux, table);
    let none = CheckOutcome {
        accept_prob: 0.0,
        extracted,
        accepted: None,
    };
    if extracted != Some(serial) {
        return Ok(none);
    }
    let Some(branch) = scheme.qm.ver_branch(&pk.verifier, serial, state, reg)? else {
        return Ok(none);
    };
    let p = branch.trace().clamp(0.0, 1.0);
    Ok(CheckOutcome {
        accept_prob: p,
        extracted,
        accepted: if p > 1e-15 {
            Some(branch.renormalized()?)
        } else {
            None
        },
    })
}

/// Outputs `0` and the collapsed program iff the note verifies to a serial
/// equal to the mark extracted from the table.
pub fn cd_check<W: WatermarkScheme, Q: MoneyMiniScheme, R: Rng + ?Sized>(
    scheme: &CopyDetection<W, Q>,
    pk: &CdPublicKey<W, Q>,
    aux: &W::Aux,
    program: &CdProgram,
    rng: &mut R,
) -> Result<(u8, CdProgram)> {
    let out = check_branch(
        scheme,
        pk,
        aux,
        &program.table,
        program.serial,
        &program.state,
        NOTE_REGISTER,
    )?;
    let with = |state: QuantumState| CdProgram {
        state,
        ..program.clone()
    };
    if rng.gen::<f64>() < out.accept_prob {
        if let Some(post) = out.accepted {
            return Ok((0, with(post)));
        }
    }
    if out.extracted != Some(program.serial) || out.accept_prob == 0.0 {
        return Ok((1, program.clone()));
    }
    let rej =
        scheme
            .qm
            .reject_branch(&pk.verifier, program.serial, &program.state, NOTE_REGISTER)?;
    Ok((1, with(rej.renormalized()?)))
}

/// Challenge distribution for a classical table: input `x` with
/// probability `prob`, expected output `want`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableTest {
    coins: Vec<(u64, f64, u64)>,
}

impl TableTest {
    pub fn new(coins: Vec<(u64, f64, u64)>) -> Result<Self> {
        let total: f64 = coins.iter().map(|c| c.1).sum();
        if coins.is_empty() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "challenge weights sum to {total}"
            )));
        }
        Ok(Self { coins })
    }

    /// Agreement with `f` on a uniform input.
    pub fn uniform(f: &ClassicalFunction) -> Self {
        let n = f.domain();
        Self {
            coins: (0..n as u64)
                .map(|x| (x, 1.0 / n as f64, f.eval(x)))
                .collect(),
        }
    }

    pub fn coins(&self) -> &[(u64, f64, u64)] {
        &self.coins
    }

    /// `Pr[table(x) = want]`; out-of-domain challenges count as failures.
    pub fn success(&self, table: &ClassicalFunction) -> f64 {
        self.coins
            .iter()
            .filter(|&&(x, _, want)| (x as usize) < table.domain() && table.eval(x) == want)
            .map(|c| c.1)
            .sum()
    }

    /// The same challenge distribution as a goodness predicate.
    pub fn predicate(&self) -> Predicate {
        self.coins
            .iter()
            .fold(Predicate::new(), |p, &(x, prob, want)| {
                p.coin(prob, x, move |y| y == Some(want))
            })
    }
}

/// Layout of `count` note registers named by [`note_register`].
pub(crate) fn notes_layout(count: usize, lambda: usize) -> Result<RegisterLayout> {
    RegisterLayout::new((0..count).map(|i| (note_register(i), lambda)))
}

#[cfg(test)]
mod tests;
