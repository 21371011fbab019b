//! Gate sequences over named registers, with oracle gates bound by slot name.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::oracles::{InstrumentedOracle, QueryRecord, Transcript};
use crate::qsim::QuantumState;

/// Where an oracle gate reads its `x` input from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum XInput {
    Register(String),
    Const(u64),
}

type ClassicalMap = Arc<dyn Fn(u64) -> u64 + Send + Sync>;

#[derive(Clone)]
pub enum Gate {
    Hadamard(String),
    Unitary {
        regs: Vec<String>,
        matrix: Arc<CMatrix>,
    },
    /// Oracle call; `v` is the subspace wire, `out` receives the encoded answer.
    Query {
        slot: String,
        x: XInput,
        v: Option<String>,
        out: String,
    },
    /// `|in, o⟩ ↦ |in, o ⊕ f(in)⟩`, not instrumented.
    Classical {
        inputs: Vec<String>,
        output: String,
        f: ClassicalMap,
    },
}

impl std::fmt::Debug for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gate::Hadamard(r) => write!(f, "H({r})"),
            Gate::Unitary { regs, matrix } => write!(f, "U{regs:?}[{}]", matrix.nrows()),
            Gate::Query { slot, x, v, out } => write!(f, "{slot}({x:?}, {v:?} -> {out})"),
            Gate::Classical { inputs, output, .. } => write!(f, "C({inputs:?} -> {output})"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Circuit {
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, gate: Gate) -> Self {
        self.gates.push(gate);
        self
    }

    pub fn hadamard(self, reg: &str) -> Self {
        self.push(Gate::Hadamard(reg.to_string()))
    }

    pub fn unitary(self, regs: &[&str], matrix: CMatrix) -> Self {
        self.push(Gate::Unitary {
            regs: regs.iter().map(|s| s.to_string()).collect(),
            matrix: Arc::new(matrix),
        })
    }

    pub fn query(self, slot: &str, x: XInput, v: Option<&str>, out: &str) -> Self {
        self.push(Gate::Query {
            slot: slot.to_string(),
            x,
            v: v.map(str::to_string),
            out: out.to_string(),
        })
    }

    pub fn classical(
        self,
        inputs: &[&str],
        output: &str,
        f: impl Fn(u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        self.push(Gate::Classical {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.to_string(),
            f: Arc::new(f),
        })
    }

    pub fn then(mut self, other: Circuit) -> Self {
        self.gates.extend(other.gates);
        self
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn query_count(&self, slot: &str) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::Query { slot: s, .. } if s == slot))
            .count()
    }
}

/// Oracles bound to slot names.
pub type OracleSet = BTreeMap<String, Arc<InstrumentedOracle>>;

pub fn oracle_set<'a>(
    entries: impl IntoIterator<Item = (&'a str, InstrumentedOracle)>,
) -> OracleSet {
    entries
        .into_iter()
        .map(|(k, o)| (k.to_string(), Arc::new(o)))
        .collect()
}

/// Runs the whole circuit.
pub fn run(
    circuit: &Circuit,
    state: &QuantumState,
    oracles: &OracleSet,
    transcript: &mut Transcript,
) -> Result<QuantumState> {
    match run_until(circuit, state, oracles, transcript, None)? {
        RunOutcome::Completed(s) => Ok(s),
        RunOutcome::Stopped { .. } => unreachable!("no stop requested"),
    }
}

#[derive(Clone, Debug)]
pub enum RunOutcome {
    Completed(QuantumState),
    /// Halted just before the requested query; `gate` is its position.
    Stopped {
        state: QuantumState,
        gate: usize,
    },
}

/// Runs the circuit, optionally halting right before the `k`-th query
/// (counted within this circuit from 0) to `slot`.
pub fn run_until(
    circuit: &Circuit,
    state: &QuantumState,
    oracles: &OracleSet,
    transcript: &mut Transcript,
    stop: Option<(&str, usize)>,
) -> Result<RunOutcome> {
    for (slot, o) in oracles {
        transcript.register(slot, o);
    }
    let mut cur = state.clone();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (gi, gate) in circuit.gates.iter().enumerate() {
        if let (Some((want, k)), Gate::Query { slot, .. }) = (stop, gate) {
            if slot == want {
                let c = seen.entry(slot.as_str()).or_insert(0);
                if *c == k {
                    return Ok(RunOutcome::Stopped {
                        state: cur,
                        gate: gi,
                    });
                }
                *c += 1;
            }
        }
        cur = apply_gate(gate, &cur, oracles, transcript)?;
    }
    Ok(RunOutcome::Completed(cur))
}

pub fn apply_gate(
    gate: &Gate,
    state: &QuantumState,
    oracles: &OracleSet,
    transcript: &mut Transcript,
) -> Result<QuantumState> {
    match gate {
        Gate::Hadamard(r) => state.hadamard_all(r),
        Gate::Unitary { regs, matrix } => {
            let names: Vec<&str> = regs.iter().map(String::as_str).collect();
            state.apply_local(&names, matrix)
        }
        Gate::Query { slot, x, v, out } => {
            let oracle = oracles
                .get(slot)
                .ok_or_else(|| Error::UnknownOracle(slot.clone()))?;
            apply_query(oracle, slot, x, v.as_deref(), out, state, transcript)
        }
        Gate::Classical { inputs, output, f } => {
            let layout = state.layout();
            let spans = inputs
                .iter()
                .map(|r| layout.span(r))
                .collect::<Result<Vec<_>>>()?;
            let out = layout.span(output)?;
            let omask = (1u64 << out.width) - 1;
            Ok(state.apply_permutation(|i| {
                let word = spans
                    .iter()
                    .fold(0u64, |acc, s| (acc << s.width) | s.get(i));
                i ^ (((f(word) & omask) as usize) << out.shift)
            }))
        }
    }
}

fn check_width(what: &str, reg: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::WidthOverflow(format!(
            "{what} register `{reg}` has {got} qubits, oracle expects {want}"
        )));
    }
    Ok(())
}

fn apply_query(
    oracle: &InstrumentedOracle,
    slot: &str,
    x: &XInput,
    v: Option<&str>,
    out: &str,
    state: &QuantumState,
    transcript: &mut Transcript,
) -> Result<QuantumState> {
    let layout = state.layout();
    let x_span = match x {
        XInput::Register(r) => {
            let s = layout.span(r)?;
            check_width("x", r, s.width, oracle.x_bits())?;
            Some(s)
        }
        XInput::Const(c) => {
            if oracle.x_bits() < 64 && *c >> oracle.x_bits() != 0 {
                return Err(Error::WidthOverflow(format!(
                    "input {c} does not fit in {} bits",
                    oracle.x_bits()
                )));
            }
            None
        }
    };
    let x_const = match x {
        XInput::Const(c) => *c,
        XInput::Register(_) => 0,
    };
    let v_span = match v {
        Some(r) => {
            let s = layout.span(r)?;
            check_width("v", r, s.width, oracle.v_bits())?;
            Some(s)
        }
        None => {
            if oracle.v_bits() != 0 {
                return Err(Error::WidthOverflow(format!(
                    "oracle `{slot}` needs a {}-qubit v wire",
                    oracle.v_bits()
                )));
            }
            None
        }
    };
    let out_span = layout.span(out)?;
    check_width("output", out, out_span.width, oracle.output_bits())?;

    let input_of = |i: usize| -> (u64, u64) {
        let xv = x_span.map_or(x_const, |s| s.get(i));
        let vv = v_span.map_or(0, |s| s.get(i));
        (xv, vv)
    };

    let qi = transcript.next_index(slot);
    let probs = state.probabilities();
    let flags = oracle.flag_sets();
    let mut weights = vec![0.0; flags.len()];
    let mut inputs = transcript
        .captures_inputs()
        .then(|| vec![0.0; 1usize << (oracle.x_bits() + oracle.v_bits())]);
    for (i, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let (xv, vv) = input_of(i);
        for (w, f) in weights.iter_mut().zip(flags) {
            if f.contains(qi, xv, vv) {
                *w += p;
            }
        }
        if let Some(d) = inputs.as_mut() {
            d[oracle.pack_input(xv, vv) as usize] += p;
        }
    }
    transcript.push(QueryRecord {
        oracle: slot.to_string(),
        query_index: qi,
        weights: flags.iter().map(|f| f.name.clone()).zip(weights).collect(),
        inputs,
    });

    let table = oracle.encoded_table(qi);
    Ok(state.apply_permutation(|i| {
        let (xv, vv) = input_of(i);
        let e = table[oracle.pack_input(xv, vv) as usize] as usize;
        i ^ (e << out_span.shift)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, c, CVector, ZERO};
    use crate::oracles::{classical_gate, query_weight, ClassicalFunction, FlagSet};
    use crate::qsim::{register_distribution, RegisterLayout};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn flagged_gate(flagged: u64) -> InstrumentedOracle {
        let f = ClassicalFunction::new(1, vec![0, 1, 1, 0]).unwrap();
        classical_gate(&f)
            .unwrap()
            .with_flag_set(FlagSet::new("F", move |_, x, _| x == flagged))
    }

    fn layout() -> RegisterLayout {
        RegisterLayout::new([("x", 2), ("y", 1)]).unwrap()
    }

    #[test]
    fn query_weight_examples() {
        let oracles = oracle_set([("U", flagged_gate(3))]);
        let c1 = Circuit::new().query("U", XInput::Register("x".into()), None, "y");

        let mut t = Transcript::new(0);
        let s = QuantumState::basis(layout(), &[("x", 1)]).unwrap();
        run(&c1, &s, &oracles, &mut t).unwrap();
        assert_eq!(query_weight(&t, None, "F").unwrap(), 0.0);

        let mut t = Transcript::new(0);
        let s = QuantumState::basis(layout(), &[("x", 3)]).unwrap();
        run(&c1, &s, &oracles, &mut t).unwrap();
        assert_eq!(query_weight(&t, None, "F").unwrap(), 1.0);
        assert_eq!(t.len(), 1);

        let mut amps = CVector::zeros(8);
        amps[3 << 1] = c(FRAC_1_SQRT_2);
        amps[1 << 1] = c(FRAC_1_SQRT_2);
        let s = QuantumState::pure(layout(), amps).unwrap();
        let mut t = Transcript::new(0);
        run(&c1, &s, &oracles, &mut t).unwrap();
        assert!((query_weight(&t, Some("U"), "F").unwrap() - 0.5).abs() < 1e-12);

        // A slot that was bound but never queried has zero weight.
        let mut t = Transcript::new(0);
        run(&Circuit::new(), &s, &oracles, &mut t).unwrap();
        assert_eq!(query_weight(&t, Some("U"), "F").unwrap(), 0.0);
    }

    #[test]
    fn weights_are_additive_over_a_partition() {
        let f = ClassicalFunction::new(1, vec![0, 1, 1, 0]).unwrap();
        let o = classical_gate(&f)
            .unwrap()
            .with_flag_set(FlagSet::new("low", |_, x, _| x < 2))
            .with_flag_set(FlagSet::new("high", |_, x, _| x >= 2))
            .with_flag_set(FlagSet::new("all", |_, _, _| true));
        let oracles = oracle_set([("U", o)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = linalg::random_unitary(8, &mut rng);
        let c1 = Circuit::new()
            .unitary(&["x", "y"], u.clone())
            .query("U", XInput::Register("x".into()), None, "y")
            .unitary(&["x", "y"], u)
            .query("U", XInput::Register("x".into()), None, "y");
        let mut t = Transcript::new(0);
        run(
            &c1,
            &QuantumState::zero(layout()).unwrap(),
            &oracles,
            &mut t,
        )
        .unwrap();
        let low = query_weight(&t, None, "low").unwrap();
        let high = query_weight(&t, None, "high").unwrap();
        let all = query_weight(&t, None, "all").unwrap();
        assert!((low + high - all).abs() < 1e-12);
        assert!((all - 2.0).abs() < 1e-12);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn uniform_query_reproduces_the_table_histogram() {
        let f = ClassicalFunction::new(2, vec![0, 3, 3, 1]).unwrap();
        let oracles = oracle_set([("U", classical_gate(&f).unwrap())]);
        let l = RegisterLayout::new([("x", 2), ("y", 2)]).unwrap();
        let c1 = Circuit::new()
            .hadamard("x")
            .query("U", XInput::Register("x".into()), None, "y");
        let out = run(
            &c1,
            &QuantumState::zero(l).unwrap(),
            &oracles,
            &mut Transcript::new(0),
        )
        .unwrap();
        let hist = register_distribution(&out, "y").unwrap();
        let mut want = [0.0; 4];
        for &y in f.table() {
            want[y as usize] += 0.25;
        }
        for (h, w) in hist.iter().zip(want) {
            assert!((h - w).abs() < 1e-12);
        }
    }

    #[test]
    fn query_gate_twice_is_identity_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ClassicalFunction::random(4, 2, &mut rng).unwrap();
        let oracles = oracle_set([("U", classical_gate(&f).unwrap())]);
        let l = RegisterLayout::new([("x", 2), ("y", 2), ("w", 1)]).unwrap();
        let v = linalg::random_unit_vector(32, &mut rng);
        let s = QuantumState::pure(l, v).unwrap();
        let q = Circuit::new().query("U", XInput::Register("x".into()), None, "y");
        let twice = q.clone().then(q);
        let out = run(&twice, &s, &oracles, &mut Transcript::new(0)).unwrap();
        assert!(out.fidelity(&s).unwrap() > 1.0 - 1e-10);
        let m = s.to_mixed().unwrap();
        let out = run(&twice, &m, &oracles, &mut Transcript::new(0)).unwrap();
        assert!(linalg::max_abs_diff(&out.density(), &m.density()) < 1e-10);
    }

    #[test]
    fn constant_inputs_and_classical_gates() {
        let f = ClassicalFunction::new(2, vec![1, 2, 3, 0]).unwrap();
        let oracles = oracle_set([("U", classical_gate(&f).unwrap())]);
        let l = RegisterLayout::new([("y", 2), ("z", 2)]).unwrap();
        let c1 = Circuit::new()
            .query("U", XInput::Const(2), None, "y")
            .classical(&["y"], "z", |w| w ^ 1);
        let out = run(
            &c1,
            &QuantumState::zero(l).unwrap(),
            &oracles,
            &mut Transcript::new(0),
        )
        .unwrap();
        let amps = out.amplitudes().unwrap();
        assert!((amps[(3 << 2) | 2].norm() - 1.0).abs() < 1e-12);
        assert_eq!(amps[0], ZERO);
    }

    #[test]
    fn stops_before_the_requested_query() {
        let oracles = oracle_set([("U", flagged_gate(0))]);
        let c1 = Circuit::new()
            .hadamard("x")
            .query("U", XInput::Register("x".into()), None, "y")
            .hadamard("x")
            .query("U", XInput::Register("x".into()), None, "y");
        assert_eq!(c1.query_count("U"), 2);
        let mut t = Transcript::new(0);
        let s = QuantumState::zero(layout()).unwrap();
        match run_until(&c1, &s, &oracles, &mut t, Some(("U", 1))).unwrap() {
            RunOutcome::Stopped { gate, .. } => assert_eq!(gate, 3),
            RunOutcome::Completed(_) => panic!("should stop"),
        }
        assert_eq!(t.len(), 1);
        assert!(matches!(
            run_until(&c1, &s, &oracles, &mut Transcript::new(0), Some(("U", 2))).unwrap(),
            RunOutcome::Completed(_)
        ));
    }

    #[test]
    fn wiring_errors() {
        let oracles = oracle_set([("U", flagged_gate(0))]);
        let s = QuantumState::zero(layout()).unwrap();
        let bad_slot = Circuit::new().query("V", XInput::Const(0), None, "y");
        assert!(matches!(
            run(&bad_slot, &s, &oracles, &mut Transcript::new(0)),
            Err(Error::UnknownOracle(_))
        ));
        let bad_out = Circuit::new().query("U", XInput::Const(0), None, "x");
        assert!(matches!(
            run(&bad_out, &s, &oracles, &mut Transcript::new(0)),
            Err(Error::WidthOverflow(_))
        ));
    }
}
