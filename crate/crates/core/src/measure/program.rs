use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::circuit::{self, Circuit, OracleSet};
use crate::error::{Error, Result};
use crate::oracles::{InstrumentedOracle, Transcript};
use crate::qsim::{register_distribution, sample_index, QuantumState, RegisterLayout};

type Decoder = Arc<dyn Fn(u64) -> Option<u64> + Send + Sync>;
type CircuitFamily = Arc<dyn Fn(u64) -> Circuit + Send + Sync>;

/// The unitary family `{U_x}` of a quantum program: for each classical input
/// a circuit over the program register and zero-initialized ancillas, with a
/// designated output. Output registers are read jointly (first listed most
/// significant) and decoded to a value or `⊥`.
#[derive(Clone)]
pub struct Evaluator {
    program: String,
    program_qubits: usize,
    ancillas: Vec<(String, usize)>,
    outputs: Vec<String>,
    decoder: Decoder,
    circuits: CircuitFamily,
    oracles: OracleSet,
}

impl std::fmt::Debug for Evaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evaluator")
            .field("program", &self.program)
            .field("program_qubits", &self.program_qubits)
            .field("ancillas", &self.ancillas)
            .field("outputs", &self.outputs)
            .field("oracles", &self.oracles.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Evaluator {
    pub fn new(
        program: &str,
        program_qubits: usize,
        circuits: impl Fn(u64) -> Circuit + Send + Sync + 'static,
        oracles: OracleSet,
    ) -> Self {
        Self {
            program: program.to_string(),
            program_qubits,
            ancillas: Vec::new(),
            outputs: Vec::new(),
            decoder: Arc::new(Some),
            circuits: Arc::new(circuits),
            oracles,
        }
    }

    pub fn with_ancilla(mut self, name: &str, qubits: usize) -> Self {
        self.ancillas.push((name.to_string(), qubits));
        self
    }

    pub fn with_output(
        mut self,
        regs: &[&str],
        decoder: impl Fn(u64) -> Option<u64> + Send + Sync + 'static,
    ) -> Self {
        self.outputs = regs.iter().map(|s| s.to_string()).collect();
        self.decoder = Arc::new(decoder);
        self
    }

    /// Same circuits with different oracles bound to the slots.
    pub fn with_oracles(&self, oracles: OracleSet) -> Self {
        let mut e = self.clone();
        e.oracles = oracles;
        e
    }

    pub fn with_oracle(&self, slot: &str, oracle: InstrumentedOracle) -> Self {
        let mut e = self.clone();
        e.oracles.insert(slot.to_string(), Arc::new(oracle));
        e
    }

    pub fn program_register(&self) -> &str {
        &self.program
    }

    pub fn program_qubits(&self) -> usize {
        self.program_qubits
    }

    pub fn program_dim(&self) -> usize {
        1 << self.program_qubits
    }

    pub fn ancillas(&self) -> &[(String, usize)] {
        &self.ancillas
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn oracles(&self) -> &OracleSet {
        &self.oracles
    }

    pub fn circuit_for(&self, x: u64) -> Circuit {
        (self.circuits)(x)
    }

    pub fn decode(&self, joint: u64) -> Option<u64> {
        (self.decoder)(joint)
    }

    pub fn ancilla_layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(self.ancillas.iter().cloned())
    }

    /// Layout of the program register followed by the ancillas.
    pub fn local_layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::single(&self.program, self.program_qubits).concat(&self.ancilla_layout()?)
    }

    /// Appends zero-initialized ancillas to a state holding the program register.
    pub fn attach_ancillas(&self, state: &QuantumState) -> Result<QuantumState> {
        if self.ancillas.is_empty() {
            return Ok(state.clone());
        }
        state.tensor(&QuantumState::zero(self.ancilla_layout()?)?)
    }

    /// Runs `U_x` on a state that already carries the ancillas.
    pub fn run(
        &self,
        state: &QuantumState,
        x: u64,
        transcript: &mut Transcript,
    ) -> Result<QuantumState> {
        circuit::run(&self.circuit_for(x), state, &self.oracles, transcript)
    }

    /// Decoded output of a basis index of `layout`.
    pub fn decode_index(&self, layout: &RegisterLayout, index: usize) -> Result<Option<u64>> {
        let mut joint = 0u64;
        for r in &self.outputs {
            let s = layout.span(r)?;
            joint = (joint << s.width) | s.get(index);
        }
        Ok(self.decode(joint))
    }

    /// Output distribution of `U_x` applied to a state holding the program
    /// register (and possibly other registers), ancillas freshly attached.
    pub fn output_distribution(
        &self,
        state: &QuantumState,
        x: u64,
    ) -> Result<BTreeMap<Option<u64>, f64>> {
        let ext = self.attach_ancillas(state)?;
        let out = self.run(&ext, x, &mut Transcript::new(0))?;
        let layout = out.layout().clone();
        let mut dist = BTreeMap::new();
        if self.outputs.len() == 1 {
            for (v, p) in register_distribution(&out, &self.outputs[0])?
                .into_iter()
                .enumerate()
            {
                if p > 0.0 {
                    *dist.entry(self.decode(v as u64)).or_insert(0.0) += p;
                }
            }
            return Ok(dist);
        }
        for (i, p) in out.probabilities().into_iter().enumerate() {
            if p > 0.0 {
                *dist.entry(self.decode_index(&layout, i)?).or_insert(0.0) += p;
            }
        }
        Ok(dist)
    }
}

/// A quantum program `(ρ, {U_x})`.
#[derive(Clone, Debug)]
pub struct QuantumProgram {
    pub state: QuantumState,
    pub evaluator: Evaluator,
}

impl QuantumProgram {
    pub fn new(state: QuantumState, evaluator: Evaluator) -> Result<Self> {
        let w = state.layout().width(evaluator.program_register())?;
        if w != evaluator.program_qubits() {
            return Err(Error::LayoutMismatch(format!(
                "program register has {w} qubits, evaluator expects {}",
                evaluator.program_qubits()
            )));
        }
        Ok(Self { state, evaluator })
    }

    /// Samples the decoded output on input `x` without touching `self`.
    pub fn sample_output<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> Result<Option<u64>> {
        let dist: Vec<(Option<u64>, f64)> = self
            .evaluator
            .output_distribution(&self.state, x)?
            .into_iter()
            .collect();
        let probs: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
        Ok(dist[sample_index(&probs, rng)].0)
    }
}

/// A pirate's output: a joint state over two program registers (and any
/// purifying registers) with one evaluator per register.
#[derive(Clone, Debug)]
pub struct PirateOutput {
    pub state: QuantumState,
    pub first: Evaluator,
    pub second: Evaluator,
}

impl PirateOutput {
    pub fn new(state: QuantumState, first: Evaluator, second: Evaluator) -> Result<Self> {
        let layout = state.layout();
        if first.program_register() == second.program_register() {
            return Err(Error::LayoutMismatch(
                "both evaluators use the same program register".into(),
            ));
        }
        for e in [&first, &second] {
            let w = layout.width(e.program_register())?;
            if w != e.program_qubits() {
                return Err(Error::LayoutMismatch(format!(
                    "register `{}` has {w} qubits, evaluator expects {}",
                    e.program_register(),
                    e.program_qubits()
                )));
            }
            for (a, _) in e.ancillas() {
                if layout.contains(a) {
                    return Err(Error::DuplicateRegister(a.clone()));
                }
            }
        }
        Ok(Self {
            state,
            first,
            second,
        })
    }

    pub fn registers(&self) -> (&str, &str) {
        (
            self.first.program_register(),
            self.second.program_register(),
        )
    }
}
