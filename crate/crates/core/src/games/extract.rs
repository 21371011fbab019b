//! Vector extraction from a pirate and the oracle-substitution case split.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::piracy::threshold_pair;
use super::{test_goodness, GameConfig, EXACT_DIM_CAP};
use crate::circuit::{run_until, Gate, RunOutcome};
use crate::cp::{CpProgram, CpSecretKey};
use crate::error::{Error, Result};
use crate::f2::F2Vector;
use crate::measure::{
    goodness_povm_predicate, joint_outcome_probabilities, Evaluator, PirateOutput, Predicate,
};
use crate::oracles::{bot_like, query_weight, InstrumentedOracle, Transcript, FLAG_A, FLAG_A_PERP};
use crate::qsim::{measure_register, sample_index, QuantumState};

/// Rates above this count as non-negligible when classifying branches.
pub const NON_NEGLIGIBLE: f64 = 0.01;

/// The two copy-protection oracles, as seen by a reduction.
#[derive(Clone, Debug)]
pub struct CpHandles {
    pub o1: InstrumentedOracle,
    pub o2: InstrumentedOracle,
}

impl CpHandles {
    pub fn from_program(prog: &CpProgram) -> Self {
        Self {
            o1: prog.o1().clone(),
            o2: prog.o2().clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionFailure {
    /// The threshold test did not find both registers good.
    NotGood,
    /// A register's circuits never query the oracle the extractor needs.
    NoQueries { register: String, slot: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Extraction {
    /// `u` comes from an `O1` query of `R2`, `v` from an `O2` query of `R1`.
    Vectors {
        u: F2Vector,
        v: F2Vector,
        success: bool,
    },
    Failed(ExtractionFailure),
}

impl Extraction {
    pub fn succeeded(&self) -> bool {
        matches!(self, Extraction::Vectors { success: true, .. })
    }
}

fn support(predicate: &Predicate) -> Vec<(u64, f64)> {
    let mut d: BTreeMap<u64, f64> = BTreeMap::new();
    for coin in predicate.coins() {
        *d.entry(coin.x).or_default() += coin.prob;
    }
    d.into_iter().collect()
}

fn check_queries(eval: &Evaluator, slot: &str, d: &[(u64, f64)]) -> Result<()> {
    if d.iter()
        .all(|&(x, _)| eval.circuit_for(x).query_count(slot) == 0)
    {
        return Err(Error::InvalidState(format!(
            "register `{}` never queries `{slot}`",
            eval.program_register()
        )));
    }
    Ok(())
}

/// Runs `eval`'s circuit for a random input up to a uniformly chosen query
/// to `slot` and returns the name of that query's `v` wire.
fn stop_at_random_query<R: Rng + ?Sized>(
    state: &QuantumState,
    eval: &Evaluator,
    slot: &str,
    d: &[(u64, f64)],
    rng: &mut R,
) -> Result<Option<(QuantumState, String)>> {
    let weights: Vec<f64> = d.iter().map(|(_, w)| *w).collect();
    let x = d[sample_index(&weights, rng)].0;
    let circuit = eval.circuit_for(x);
    let q = circuit.query_count(slot);
    if q == 0 {
        return Ok(None);
    }
    let k = rng.gen_range(0..q);
    match run_until(
        &circuit,
        state,
        eval.oracles(),
        &mut Transcript::new(0),
        Some((slot, k)),
    )? {
        RunOutcome::Stopped { state, gate } => match &circuit.gates()[gate] {
            Gate::Query { v: Some(wire), .. } => Ok(Some((state, wire.clone()))),
            _ => Err(Error::InvalidState(format!(
                "query to `{slot}` has no v wire"
            ))),
        },
        RunOutcome::Completed(_) => unreachable!("query {k} of {q} exists"),
    }
}

/// Tests both registers for `γ`-goodness, then halts `R1` at a random `O2`
/// query and `R2` at a random `O1` query and measures the two `v` wires.
pub fn extract_vectors_from_pirate<R: Rng + ?Sized>(
    pirate: &PirateOutput,
    sk: &CpSecretKey,
    predicate: &Predicate,
    cfg: &GameConfig,
    rng: &mut R,
) -> Result<Extraction> {
    let d = support(predicate);
    for (eval, slot) in [(&pirate.first, "O2"), (&pirate.second, "O1")] {
        if check_queries(eval, slot, &d).is_err() {
            return Ok(Extraction::Failed(ExtractionFailure::NoQueries {
                register: eval.program_register().to_string(),
                slot: slot.to_string(),
            }));
        }
    }
    let g1 = test_goodness(&pirate.state, &pirate.first, predicate, cfg, rng)?;
    if !g1.good {
        return Ok(Extraction::Failed(ExtractionFailure::NotGood));
    }
    let g2 = test_goodness(&g1.post, &pirate.second, predicate, cfg, rng)?;
    if !g2.good {
        return Ok(Extraction::Failed(ExtractionFailure::NotGood));
    }
    let s = pirate
        .second
        .attach_ancillas(&pirate.first.attach_ancillas(&g2.post)?)?;
    let Some((s, wire_v)) = stop_at_random_query(&s, &pirate.first, "O2", &d, rng)? else {
        return Ok(Extraction::Failed(ExtractionFailure::NoQueries {
            register: pirate.first.program_register().to_string(),
            slot: "O2".into(),
        }));
    };
    let Some((s, wire_u)) = stop_at_random_query(&s, &pirate.second, "O1", &d, rng)? else {
        return Ok(Extraction::Failed(ExtractionFailure::NoQueries {
            register: pirate.second.program_register().to_string(),
            slot: "O1".into(),
        }));
    };
    let mv = measure_register(&s, &wire_v, rng)?;
    let mu = measure_register(&mv.post, &wire_u, rng)?;
    let u = F2Vector::new(s.layout().width(&wire_u)?, mu.outcome)?;
    let v = F2Vector::new(s.layout().width(&wire_v)?, mv.outcome)?;
    let success =
        !u.is_zero() && sk.subspace().member(&u)? && !v.is_zero() && sk.dual().member(&v)?;
    Ok(Extraction::Vectors { u, v, success })
}

/// Which branch of the security argument a pirate falls into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `R1` stays good with `O2` replaced by `O⊥`.
    E1,
    /// `R2` stays good with `O1` replaced by `O⊥`.
    E2,
    #[serde(rename = "extraction")]
    Extraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSplitReport {
    pub branch: Branch,
    /// `Tr[(TI_γ ⊗ TI_γ) σ]` with the real oracles.
    pub trace: f64,
    /// The same with `R1` evaluated on `(O1, O⊥)`.
    pub trace_r1_substituted: f64,
    /// The same with `R2` evaluated on `(O⊥, O2)`.
    pub trace_r2_substituted: f64,
    /// Expected weight of `R1`'s `O2` queries on `A⊥ \ {0}`.
    pub weight_r1: f64,
    /// Expected weight of `R2`'s `O1` queries on `A \ {0}`.
    pub weight_r2: f64,
    /// Most queries either register makes to the substituted oracle.
    pub queries_r1: usize,
    pub queries_r2: usize,
    /// `|Tr[P ρ] − Tr[P′ ρ]|` for the goodness POVMs before and after substitution.
    pub povm_gap_r1: f64,
    pub povm_gap_r2: f64,
}

impl CaseSplitReport {
    /// `|Tr[Pρ] − Tr[P′ρ]| ≤ 2√(T·W)` on both registers.
    pub fn bbbv_consistent(&self) -> bool {
        let bound = |t: usize, w: f64| 2.0 * (t as f64 * w).sqrt() + 1e-9;
        self.povm_gap_r1 <= bound(self.queries_r1, self.weight_r1)
            && self.povm_gap_r2 <= bound(self.queries_r2, self.weight_r2)
    }
}

fn expected_weight(
    state: &QuantumState,
    eval: &Evaluator,
    slot: &str,
    flag: &str,
    d: &[(u64, f64)],
) -> Result<f64> {
    let ext = eval.attach_ancillas(state)?;
    let mut total = 0.0;
    for &(x, w) in d {
        let mut t = Transcript::new(0);
        eval.run(&ext, x, &mut t)?;
        total += w * query_weight(&t, Some(slot), flag)?;
    }
    Ok(total)
}

fn joint_trace(
    state: &QuantumState,
    pirate: &PirateOutput,
    predicate: &Predicate,
    gamma: f64,
) -> Result<f64> {
    let (t1, t2) = threshold_pair(pirate, predicate, gamma)?;
    Ok(joint_outcome_probabilities(state, pirate.registers(), &t1, &t2)?[0][0])
}

/// Evaluates the pirate with `O2` removed from `R1` and with `O1` removed
/// from `R2`, and records the flagged query weights.
pub fn case_split_probe(
    pirate: &PirateOutput,
    predicate: &Predicate,
    gamma: f64,
) -> Result<CaseSplitReport> {
    if pirate.state.dim() > EXACT_DIM_CAP {
        return Err(Error::Resource {
            what: "case-split probe state dimension",
            requested: pirate.state.dim(),
            cap: EXACT_DIM_CAP,
        });
    }
    let d = support(predicate);
    let sub = |e: &Evaluator, slot: &str| -> Result<Evaluator> {
        Ok(match e.oracles().get(slot) {
            Some(o) => e.with_oracle(slot, bot_like(o)?),
            None => e.clone(),
        })
    };
    let r1 = sub(&pirate.first, "O2")?;
    let r2 = sub(&pirate.second, "O1")?;
    let trace = joint_trace(&pirate.state, pirate, predicate, gamma)?;
    let p1 = PirateOutput::new(pirate.state.clone(), r1.clone(), pirate.second.clone())?;
    let p2 = PirateOutput::new(pirate.state.clone(), pirate.first.clone(), r2.clone())?;
    let trace_r1_substituted = joint_trace(&pirate.state, &p1, predicate, gamma)?;
    let trace_r2_substituted = joint_trace(&pirate.state, &p2, predicate, gamma)?;

    let weight = |e: &Evaluator, slot: &str, flag: &str| -> Result<f64> {
        if e.oracles().contains_key(slot) {
            expected_weight(&pirate.state, e, slot, flag, &d)
        } else {
            Ok(0.0)
        }
    };
    let max_queries = |e: &Evaluator, slot: &str| {
        d.iter()
            .map(|&(x, _)| e.circuit_for(x).query_count(slot))
            .max()
            .unwrap_or(0)
    };
    let gap = |orig: &Evaluator, subst: &Evaluator| -> Result<f64> {
        let reg = [orig.program_register()];
        let a =
            goodness_povm_predicate(orig, predicate)?.accept_probability(&pirate.state, &reg)?;
        let b =
            goodness_povm_predicate(subst, predicate)?.accept_probability(&pirate.state, &reg)?;
        Ok((a - b).abs())
    };

    let branch = if trace_r1_substituted > NON_NEGLIGIBLE {
        Branch::E1
    } else if trace_r2_substituted > NON_NEGLIGIBLE {
        Branch::E2
    } else {
        Branch::Extraction
    };
    Ok(CaseSplitReport {
        branch,
        trace,
        trace_r1_substituted,
        trace_r2_substituted,
        weight_r1: weight(&pirate.first, "O2", FLAG_A_PERP)?,
        weight_r2: weight(&pirate.second, "O1", FLAG_A)?,
        queries_r1: max_queries(&pirate.first, "O2"),
        queries_r2: max_queries(&pirate.second, "O1"),
        povm_gap_r1: gap(&pirate.first, &r1)?,
        povm_gap_r2: gap(&pirate.second, &r2)?,
    })
}
