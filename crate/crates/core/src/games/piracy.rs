use std::f64::consts::FRAC_1_SQRT_2;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::extract::CpHandles;
use super::{
    aggregate, test_goodness, GameConfig, GameReport, GoodnessMode, TrialOutcome, EXACT_DIM_CAP,
};
use crate::circuit::{self, Circuit, OracleSet};
use crate::cp::{self, setup};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, CVector};
use crate::measure::{
    goodness_povm_predicate, joint_threshold_with, proj_impl, threshold_impl, uniform_inputs,
    Evaluator, PirateOutput, Predicate, QuantumProgram,
};
use crate::oracles::{ClassicalFunction, Transcript};
use crate::qsim::{measure_register, QuantumState, RegisterLayout};
use crate::seed::run_trials;

/// Which program the pirate is handed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// The subspace-state copy-protection scheme.
    #[default]
    Cp,
    /// A one-qubit classical toy: `|0⟩` computes `f`, `|1⟩` computes `f ⊕ 1`.
    Toy,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp" => Ok(Scheme::Cp),
            "toy" => Ok(Scheme::Toy),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme `{s}`; expected cp or toy"
            ))),
        }
    }
}

/// One-qubit toy program on `reg`: writes `f(x) ⊕ b` into `reg.out`.
pub fn toy_evaluator(reg: &str, f: &ClassicalFunction) -> Evaluator {
    let out = format!("{reg}.out");
    let (table, o, r) = (f.clone(), out.clone(), reg.to_string());
    Evaluator::new(
        reg,
        1,
        move |x| {
            let fx = table.eval(x);
            Circuit::new().classical(&[r.as_str()], &o, move |b| fx ^ b)
        },
        OracleSet::new(),
    )
    .with_ancilla(&out, f.width())
    .with_output(&[out.as_str()], Some)
}

/// A program on `reg` that makes no queries and always answers `⊥`.
pub fn dummy_evaluator(reg: &str, qubits: usize) -> Evaluator {
    Evaluator::new(reg, qubits, |_| Circuit::new(), OracleSet::new()).with_output(&[], |_| None)
}

/// The program handed to the pirate.
pub struct Issued {
    pub program: QuantumProgram,
    scheme: Scheme,
    handles: Option<CpHandles>,
    toy_f: Option<ClassicalFunction>,
}

impl Issued {
    pub fn cp(prog: &cp::CpProgram) -> Result<Self> {
        Ok(Self {
            program: QuantumProgram::new(prog.state.clone(), prog.evaluator())?,
            scheme: Scheme::Cp,
            handles: Some(CpHandles::from_program(prog)),
            toy_f: None,
        })
    }

    pub fn toy(f: &ClassicalFunction) -> Result<Self> {
        Ok(Self {
            program: QuantumProgram::new(
                QuantumState::zero(RegisterLayout::single("prog", 1))?,
                toy_evaluator("prog", f),
            )?,
            scheme: Scheme::Toy,
            handles: None,
            toy_f: Some(f.clone()),
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn program_qubits(&self) -> usize {
        self.program.evaluator.program_qubits()
    }

    pub fn handles(&self) -> Option<&CpHandles> {
        self.handles.as_ref()
    }

    /// The honest evaluation circuits, moved onto register `reg`.
    pub fn evaluator_on(&self, reg: &str) -> Evaluator {
        match (&self.handles, &self.toy_f) {
            (Some(h), _) => cp::cp_evaluator(reg, &h.o1, &h.o2),
            (None, Some(f)) => toy_evaluator(reg, f),
            (None, None) => unreachable!("issued programs carry handles or a table"),
        }
    }

    pub fn dummy_on(&self, reg: &str) -> Evaluator {
        dummy_evaluator(reg, self.program_qubits())
    }

    /// The issued state with its register renamed.
    pub fn state_on(&self, reg: &str) -> Result<QuantumState> {
        self.program
            .state
            .clone()
            .relabel(RegisterLayout::single(reg, self.program_qubits()))
    }
}

pub trait AntiPiracyPirate: Sync {
    fn name(&self) -> &'static str;

    /// Splits the issued program into two registers `R1`, `R2`.
    fn split(&self, issued: &Issued, rng: &mut dyn RngCore) -> Result<PirateOutput>;
}

fn pair(
    issued: &Issued,
    state: QuantumState,
    first_real: bool,
    second_real: bool,
) -> Result<PirateOutput> {
    let e = |reg: &str, real: bool| {
        if real {
            issued.evaluator_on(reg)
        } else {
            issued.dummy_on(reg)
        }
    };
    PirateOutput::new(state, e("R1", first_real), e("R2", second_real))
}

fn zero_register(issued: &Issued, reg: &str) -> Result<QuantumState> {
    QuantumState::zero(RegisterLayout::single(reg, issued.program_qubits()))
}

/// Keeps the program in `R1` and puts a dummy in `R2`.
pub struct HonestForward;

impl AntiPiracyPirate for HonestForward {
    fn name(&self) -> &'static str {
        "honest-forward"
    }

    fn split(&self, issued: &Issued, _: &mut dyn RngCore) -> Result<PirateOutput> {
        let s = issued
            .state_on("R1")?
            .tensor(&zero_register(issued, "R2")?)?;
        pair(issued, s, true, false)
    }
}

fn toy_superposition(issued: &Issued, amps: [f64; 4]) -> Result<PirateOutput> {
    if issued.scheme() != Scheme::Toy {
        return Err(Error::InvalidParameter(
            "this pirate prepares fresh toy programs and needs the toy scheme".into(),
        ));
    }
    let l = RegisterLayout::new([("R1", 1), ("R2", 1)])?;
    let s = QuantumState::pure(l, CVector::from_iterator(4, amps.iter().map(|&a| c(a))))?;
    pair(issued, s, true, true)
}

/// `(|P⟩|D⟩ + |D⟩|P⟩)/√2` over toy programs.
pub struct Swap;

impl AntiPiracyPirate for Swap {
    fn name(&self) -> &'static str {
        "swap"
    }

    fn split(&self, issued: &Issued, _: &mut dyn RngCore) -> Result<PirateOutput> {
        toy_superposition(issued, [0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])
    }
}

/// `√(1/3)|P⟩|P⟩ + √(2/3)|D⟩|D⟩` over toy programs.
pub struct Correlated;

impl AntiPiracyPirate for Correlated {
    fn name(&self) -> &'static str {
        "correlated"
    }

    fn split(&self, issued: &Issued, _: &mut dyn RngCore) -> Result<PirateOutput> {
        toy_superposition(
            issued,
            [(1.0f64 / 3.0).sqrt(), 0.0, 0.0, (2.0f64 / 3.0).sqrt()],
        )
    }
}

/// Copies the computational basis of the program coherently into `R2`.
pub struct Split;

impl AntiPiracyPirate for Split {
    fn name(&self) -> &'static str {
        "split"
    }

    fn split(&self, issued: &Issued, _: &mut dyn RngCore) -> Result<PirateOutput> {
        let s = issued
            .state_on("R1")?
            .tensor(&zero_register(issued, "R2")?)?;
        let fan_out = Circuit::new().classical(&["R1"], "R2", |w| w);
        let s = circuit::run(&fan_out, &s, &OracleSet::new(), &mut Transcript::new(0))?;
        pair(issued, s, true, true)
    }
}

/// Measures the program in the computational basis and hands the outcome
/// to both registers.
pub struct MeasureCopy;

impl AntiPiracyPirate for MeasureCopy {
    fn name(&self) -> &'static str {
        "measure-copy"
    }

    fn split(&self, issued: &Issued, rng: &mut dyn RngCore) -> Result<PirateOutput> {
        let w = measure_register(
            &issued.program.state,
            issued.program.evaluator.program_register(),
            rng,
        )?
        .outcome;
        let n = issued.program_qubits();
        let l = RegisterLayout::new([("R1", n), ("R2", n)])?;
        let s = QuantumState::basis(l, &[("R1", w), ("R2", w)])?;
        pair(issued, s, true, true)
    }
}

/// Outputs two dummies.
pub struct Dummy;

impl AntiPiracyPirate for Dummy {
    fn name(&self) -> &'static str {
        "dummy"
    }

    fn split(&self, issued: &Issued, _: &mut dyn RngCore) -> Result<PirateOutput> {
        let s = zero_register(issued, "R1")?.tensor(&zero_register(issued, "R2")?)?;
        pair(issued, s, false, false)
    }
}

pub const ANTI_PIRACY_PIRATES: &[&str] = &[
    "honest-forward",
    "swap",
    "correlated",
    "split",
    "measure-copy",
    "dummy",
];

pub fn anti_piracy_pirate(name: &str) -> Result<Box<dyn AntiPiracyPirate>> {
    Ok(match name {
        "honest-forward" => Box::new(HonestForward),
        "swap" => Box::new(Swap),
        "correlated" => Box::new(Correlated),
        "split" => Box::new(Split),
        "measure-copy" => Box::new(MeasureCopy),
        "dummy" => Box::new(Dummy),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown pirate `{name}`; expected one of {ANTI_PIRACY_PIRATES:?}"
            )))
        }
    })
}

/// Threshold projectors `TI_γ` for both registers of a pirate output.
pub(crate) fn threshold_pair(
    pirate: &PirateOutput,
    predicate: &Predicate,
    gamma: f64,
) -> Result<(CMatrix, CMatrix)> {
    let t = |e: &Evaluator| -> Result<CMatrix> {
        threshold_impl(&proj_impl(&goodness_povm_predicate(e, predicate)?)?, gamma)
    };
    Ok((t(&pirate.first)?, t(&pirate.second)?))
}

/// Issues a fresh program for a random `f`.
pub(crate) fn issue(
    cfg: &GameConfig,
    rng: &mut dyn RngCore,
) -> Result<(ClassicalFunction, Issued)> {
    let f = ClassicalFunction::random(cfg.domain, cfg.width, rng)?;
    let issued = match cfg.scheme {
        Scheme::Cp => {
            let sk = setup(cfg.lambda, rng)?;
            Issued::cp(&cp::generate(&sk, &f, rng)?)?
        }
        Scheme::Toy => Issued::toy(&f)?,
    };
    Ok((f, issued))
}

/// One program in, two registers out; the pirate wins iff both registers
/// test `γ`-good under the uniform input distribution.
pub fn run_anti_piracy_game(cfg: &GameConfig, pirate: &dyn AntiPiracyPirate) -> Result<GameReport> {
    cfg.validate()?;
    let outcomes = run_trials(cfg.seed, cfg.trials, |_, rng| {
        let (f, issued) = issue(cfg, rng)?;
        let out = pirate.split(&issued, rng)?;
        let predicate = Predicate::equality(&f, &uniform_inputs(cfg.domain));
        if out.state.dim() <= EXACT_DIM_CAP {
            let (t1, t2) = threshold_pair(&out, &predicate, cfg.gamma)?;
            let j = joint_threshold_with(&out.state, out.registers(), &t1, &t2, rng)?;
            return Ok(TrialOutcome {
                win: (j.b1, j.b2) == (0, 0),
                exact: Some(j.both_good),
                detail: json!({"b1": j.b1, "b2": j.b2, "both_good": j.both_good, "mode": GoodnessMode::Exact}),
            });
        }
        let g1 = test_goodness(&out.state, &out.first, &predicate, cfg, rng)?;
        let g2 = test_goodness(&g1.post, &out.second, &predicate, cfg, rng)?;
        Ok(TrialOutcome {
            win: g1.good && g2.good,
            exact: None,
            detail: json!({"b1": !g1.good as u8, "b2": !g2.good as u8, "mode": GoodnessMode::Sampled}),
        })
    })?;
    let exact: Option<Vec<f64>> = outcomes.iter().map(|o| o.exact).collect();
    let derived = exact.map(|e| e.iter().sum::<f64>() / e.len() as f64);
    let mut cfg = cfg.clone();
    cfg.adversary = pirate.name().to_string();
    Ok(aggregate(&cfg, &outcomes, derived).with_diagnostic("scheme", cfg.scheme))
}
