//! Copy-protection from subspace states: the program is `|A⟩`, and an input
//! is evaluated by querying `O₁` with the program register, Hadamard-ing it,
//! querying `O₂`, and XOR-ing the two answers.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{self, oracle_set, Circuit, OracleSet, XInput};
use crate::error::{Error, Result};
use crate::f2::{rand_subspace, F2Subspace, F2Vector};
use crate::games::GameReport;
use crate::measure::Evaluator;
use crate::oracles::{
    cp_oracles, membership_oracle, ClassicalFunction, InstrumentedOracle, QueryWeightRecord,
    Transcript,
};
use crate::qsim::{
    check_gentle_bound, collapse_and_drop, measure_register, register_distribution, sample_index,
    trace_distance, QuantumState,
};
use crate::seed::trial_rng;

/// Name of the program register.
pub const PROGRAM_REGISTER: &str = "prog";
/// Largest supported security parameter.
pub const CP_LAMBDA_CAP: usize = 16;

/// `sk = A`, a `λ/2`-dimensional subspace of `GF(2)^λ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CpSecretKey {
    a: F2Subspace,
    dual: F2Subspace,
}

impl CpSecretKey {
    pub fn from_subspace(a: F2Subspace) -> Result<Self> {
        let n = a.ambient_dim();
        if n % 2 == 1 {
            return Err(Error::OddLambda(n));
        }
        if a.dim() != n / 2 {
            return Err(Error::InvalidDimension(format!(
                "key subspace has dimension {}, expected {}",
                a.dim(),
                n / 2
            )));
        }
        let dual = a.dual();
        Ok(Self { a, dual })
    }

    pub fn lambda(&self) -> usize {
        self.a.ambient_dim()
    }

    pub fn subspace(&self) -> &F2Subspace {
        &self.a
    }

    pub fn dual(&self) -> &F2Subspace {
        &self.dual
    }
}

pub fn setup<R: Rng + ?Sized>(lambda: usize, rng: &mut R) -> Result<CpSecretKey> {
    if lambda % 2 == 1 {
        return Err(Error::OddLambda(lambda));
    }
    if lambda == 0 || lambda > CP_LAMBDA_CAP {
        return Err(Error::Resource {
            what: "security parameter",
            requested: lambda,
            cap: CP_LAMBDA_CAP,
        });
    }
    CpSecretKey::from_subspace(rand_subspace(lambda, lambda / 2, rng)?)
}

/// A copy-protected program: the state on [`PROGRAM_REGISTER`] and the
/// oracles it is evaluated with.
#[derive(Clone, Debug)]
pub struct CpProgram {
    pub state: QuantumState,
    lambda: usize,
    o1: Arc<InstrumentedOracle>,
    o2: Arc<InstrumentedOracle>,
    u_a: Arc<InstrumentedOracle>,
    u_a_perp: Arc<InstrumentedOracle>,
}

impl CpProgram {
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn o1(&self) -> &InstrumentedOracle {
        &self.o1
    }

    pub fn o2(&self) -> &InstrumentedOracle {
        &self.o2
    }

    /// Membership oracles for `A` and `A⊥`.
    pub fn membership(&self) -> (&InstrumentedOracle, &InstrumentedOracle) {
        (&self.u_a, &self.u_a_perp)
    }

    /// Output width `m` of the function.
    pub fn width(&self) -> usize {
        self.o1.data_bits()
    }

    /// Slots `O1`, `O2`, `U_A`, `U_A_perp`.
    pub fn oracles(&self) -> OracleSet {
        oracle_set([
            ("O1", (*self.o1).clone()),
            ("O2", (*self.o2).clone()),
            ("U_A", (*self.u_a).clone()),
            ("U_A_perp", (*self.u_a_perp).clone()),
        ])
    }

    /// The evaluation circuit family over [`PROGRAM_REGISTER`].
    pub fn evaluator(&self) -> Evaluator {
        cp_evaluator(PROGRAM_REGISTER, &self.o1, &self.o2)
    }

    /// The same oracles with another state on the program register.
    pub fn with_state(&self, state: QuantumState) -> Self {
        Self {
            state,
            ..self.clone()
        }
    }
}

/// Samples `g` and builds `(|A⟩, O₁, O₂)` for `f`.
pub fn generate<R: Rng + ?Sized>(
    sk: &CpSecretKey,
    f: &ClassicalFunction,
    rng: &mut R,
) -> Result<CpProgram> {
    let g = ClassicalFunction::random(f.domain(), f.width(), rng)?;
    generate_with_mask(sk, f, &g)
}

/// [`generate`] with a caller-chosen `g`.
pub fn generate_with_mask(
    sk: &CpSecretKey,
    f: &ClassicalFunction,
    g: &ClassicalFunction,
) -> Result<CpProgram> {
    let (o1, o2) = cp_oracles(&sk.a, f, g)?;
    let u_a = rename(membership_oracle(&sk.a)?, "U_A")?;
    let u_a_perp = rename(membership_oracle(&sk.dual)?, "U_A_perp")?;
    Ok(CpProgram {
        state: QuantumState::subspace_state(PROGRAM_REGISTER, &sk.a)?,
        lambda: sk.lambda(),
        o1: Arc::new(o1),
        o2: Arc::new(o2),
        u_a: Arc::new(u_a),
        u_a_perp: Arc::new(u_a_perp),
    })
}

fn rename(o: InstrumentedOracle, id: &str) -> Result<InstrumentedOracle> {
    let inner = o.clone();
    let mut r = InstrumentedOracle::new(
        id,
        o.x_bits(),
        o.v_bits(),
        o.data_bits(),
        o.has_validity(),
        move |x, v| inner.semantic(x, v),
    )?;
    for s in o.flag_sets() {
        r = r.with_flag_set(s.clone());
    }
    Ok(r)
}

/// Evaluation circuits for a program held on `reg`: query `O₁` into
/// `reg.y1`, Hadamard, query `O₂` into `reg.y2`, Hadamard back. The output
/// is `y₁ ⊕ y₂` when both answers are valid and `⊥` otherwise.
pub fn cp_evaluator(reg: &str, o1: &InstrumentedOracle, o2: &InstrumentedOracle) -> Evaluator {
    let m = o1.data_bits();
    let (y1, y2) = (format!("{reg}.y1"), format!("{reg}.y2"));
    let r = reg.to_string();
    let (a, b) = (y1.clone(), y2.clone());
    Evaluator::new(
        reg,
        o1.v_bits(),
        move |x| {
            Circuit::new()
                .query("O1", XInput::Const(x), Some(&r), &a)
                .hadamard(&r)
                .query("O2", XInput::Const(x), Some(&r), &b)
                .hadamard(&r)
        },
        oracle_set([("O1", o1.clone()), ("O2", o2.clone())]),
    )
    .with_ancilla(&y1, m + 1)
    .with_ancilla(&y2, m + 1)
    .with_output(&[y1.as_str(), y2.as_str()], move |joint| {
        decode_pair(joint, m)
    })
}

/// Decodes `y₁ ∥ y₂`, each `validity ∥ m data bits`.
pub fn decode_pair(joint: u64, m: usize) -> Option<u64> {
    let mask = (1u64 << m) - 1;
    let y2 = joint & ((mask << 1) | 1);
    let y1 = joint >> (m + 1);
    let valid = |y: u64| y >> m & 1 == 1;
    (valid(y1) && valid(y2)).then_some((y1 ^ y2) & mask)
}

/// Diagnostics of one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CallRecord {
    pub output: Option<u64>,
    /// Probability that the first answer is valid.
    pub first_valid: f64,
    /// Probability that the second answer is valid, given the first was.
    pub second_valid: Option<f64>,
    /// Trace distance between the program before and after the call.
    pub drift: f64,
}

impl CallRecord {
    /// Probability that the call returns a value.
    pub fn success_probability(&self) -> f64 {
        self.first_valid * self.second_valid.unwrap_or(0.0)
    }
}

enum Pick<'a, R: ?Sized> {
    Sample(&'a mut R),
    Valid,
}

/// Queries `slot` on the program register into a fresh register, measures
/// it, and drops it. Returns the decoded answer, the validity probability,
/// and the collapsed state.
fn stage<R: Rng + ?Sized>(
    state: &QuantumState,
    oracles: &OracleSet,
    slot: &str,
    x: u64,
    pick: &mut Pick<'_, R>,
    transcript: &mut Transcript,
) -> Result<(Option<u64>, f64, QuantumState)> {
    let oracle = oracles
        .get(slot)
        .ok_or_else(|| Error::UnknownOracle(slot.into()))?;
    let out = state.layout().fresh_name("y");
    let ext = state.with_register(&out, oracle.output_bits())?;
    let c = Circuit::new().query(slot, XInput::Const(x), Some(PROGRAM_REGISTER), &out);
    let after = circuit::run(&c, &ext, oracles, transcript)?;
    let probs = register_distribution(&after, &out)?;
    let valid_prob: f64 = probs
        .iter()
        .enumerate()
        .filter(|(y, _)| oracle.decode(*y as u64).is_some())
        .map(|(_, p)| p)
        .sum();
    let y = match pick {
        Pick::Sample(rng) => sample_index(&probs, *rng) as u64,
        Pick::Valid => {
            let best = probs
                .iter()
                .enumerate()
                .filter(|(y, _)| oracle.decode(*y as u64).is_some())
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(y, _)| y as u64);
            match best {
                Some(y) if probs[y as usize] > 0.0 => y,
                _ => {
                    return Err(Error::InvalidState(format!(
                        "oracle `{slot}` has no valid answer on this program"
                    )))
                }
            }
        }
    };
    let (prob, post) = collapse_and_drop(&after, &out, y)?;
    check_gentle_bound(state, &post, prob)?;
    Ok((oracle.decode(y), valid_prob, post))
}

fn evaluate<R: Rng + ?Sized>(
    prog: &CpProgram,
    x: u64,
    mut pick: Pick<'_, R>,
    transcript: &mut Transcript,
) -> Result<(CallRecord, CpProgram)> {
    let domain = 1u64 << prog.o1.x_bits();
    if x >= domain {
        return Err(Error::InvalidParameter(format!(
            "input {x} outside [{domain}]"
        )));
    }
    let oracles = prog.oracles();
    let before = &prog.state;
    let (y1, first_valid, s1) = stage(before, &oracles, "O1", x, &mut pick, transcript)?;
    let Some(y1) = y1 else {
        let drift = trace_distance(&s1, before)?;
        let rec = CallRecord {
            output: None,
            first_valid,
            second_valid: None,
            drift,
        };
        return Ok((rec, prog.with_state(s1)));
    };
    let h = s1.hadamard_all(PROGRAM_REGISTER)?;
    let (y2, second_valid, s2) = stage(&h, &oracles, "O2", x, &mut pick, transcript)?;
    let after = s2.hadamard_all(PROGRAM_REGISTER)?;
    let rec = CallRecord {
        output: y2.map(|y2| y1 ^ y2),
        first_valid,
        second_valid: Some(second_valid),
        drift: trace_distance(&after, before)?,
    };
    Ok((rec, prog.with_state(after)))
}

/// Evaluates the program on `x`, returning the output (`None` for `⊥`) and
/// the program left behind for reuse. A `⊥` is not retried.
pub fn compute<R: Rng + ?Sized>(
    prog: &CpProgram,
    x: u64,
    rng: &mut R,
) -> Result<(Option<u64>, CpProgram)> {
    let (rec, p) = compute_traced(prog, x, rng, &mut Transcript::new(0))?;
    Ok((rec.output, p))
}

/// [`compute`] with full diagnostics and a query transcript.
pub fn compute_traced<R: Rng + ?Sized>(
    prog: &CpProgram,
    x: u64,
    rng: &mut R,
    transcript: &mut Transcript,
) -> Result<(CallRecord, CpProgram)> {
    evaluate(prog, x, Pick::Sample(rng), transcript)
}

/// Evaluation conditioned on both answers being valid.
pub fn compute_postselected(prog: &CpProgram, x: u64) -> Result<(CallRecord, CpProgram)> {
    evaluate::<rand_chacha::ChaCha8Rng>(prog, x, Pick::Valid, &mut Transcript::new(0))
}

/// Measures `|A⟩` (bit 0) or `H^{⊗n}|A⟩` (bit 1) held on `reg` in the
/// computational basis: a vector of `A` or of `A⊥`.
pub fn sign_token_bit<R: Rng + ?Sized>(
    state: &QuantumState,
    reg: &str,
    bit: u8,
    rng: &mut R,
) -> Result<F2Vector> {
    let s = match bit {
        0 => state.clone(),
        1 => state.hadamard_all(reg)?,
        _ => return Err(Error::InvalidParameter(format!("bit {bit}"))),
    };
    let n = s.layout().width(reg)?;
    F2Vector::new(n, measure_register(&s, reg, rng)?.outcome)
}

/// Success probability `p₁·p₂` of each honest call along the success branch,
/// by alternating projections onto `A∖{0}` and `A⊥∖{0}` on a plain real
/// vector. The values decrease to the reuse fixed point.
pub fn success_trajectory(a: &F2Subspace, calls: usize) -> Vec<f64> {
    let dim = 1usize << a.ambient_dim();
    let dual = a.dual();
    let in_a: Vec<bool> = (0..dim as u64)
        .map(|v| v != 0 && a.contains_bits(v))
        .collect();
    let in_d: Vec<bool> = (0..dim as u64)
        .map(|v| v != 0 && dual.contains_bits(v))
        .collect();
    let wht = |v: &mut [f64]| {
        let mut h = 1;
        while h < dim {
            for i in (0..dim).step_by(2 * h) {
                for j in i..i + h {
                    let (x, y) = (v[j], v[j + h]);
                    v[j] = x + y;
                    v[j + h] = x - y;
                }
            }
            h *= 2;
        }
        let s = (dim as f64).sqrt();
        v.iter_mut().for_each(|x| *x /= s);
    };
    let project = |v: &mut [f64], keep: &[bool]| -> f64 {
        for (x, &k) in v.iter_mut().zip(keep) {
            if !k {
                *x = 0.0;
            }
        }
        let p: f64 = v.iter().map(|x| x * x).sum();
        if p > 0.0 {
            v.iter_mut().for_each(|x| *x /= p.sqrt());
        }
        p
    };
    let amp = (a.cardinality() as f64).sqrt().recip();
    let mut v: Vec<f64> = (0..dim as u64)
        .map(|x| if a.contains_bits(x) { amp } else { 0.0 })
        .collect();
    (0..calls)
        .map(|_| {
            let p1 = project(&mut v, &in_a);
            wht(&mut v);
            let p2 = project(&mut v, &in_d);
            wht(&mut v);
            p1 * p2
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpDemoConfig {
    pub lambda: usize,
    pub domain: usize,
    pub width: usize,
    pub evals: usize,
    pub seed: u64,
}

impl Default for CpDemoConfig {
    fn default() -> Self {
        Self {
            lambda: 8,
            domain: 16,
            width: 2,
            evals: 20,
            seed: 0,
        }
    }
}

/// Evaluates one honest program `evals` times on inputs `0, 1, …` along the
/// success branch. A call counts as a win when its success probability is at
/// least the reuse fixed point. Also returns the query transcript of a
/// sampled evaluation of each call, the trial column holding the call index.
pub fn run_cp_demo(cfg: &CpDemoConfig) -> Result<(GameReport, Vec<QueryWeightRecord>)> {
    if cfg.evals == 0 {
        return Err(Error::InvalidParameter("evals must be at least 1".into()));
    }
    let mut rng = trial_rng(cfg.seed, 0);
    let sk = setup(cfg.lambda, &mut rng)?;
    let f = ClassicalFunction::random(cfg.domain, cfg.width, &mut rng)?;
    let mut prog = generate(&sk, &f, &mut rng)?;
    let initial = prog.state.clone();
    let fixed = *success_trajectory(sk.subspace(), 64 + cfg.evals)
        .last()
        .expect("nonempty");
    let mut per_call = Vec::with_capacity(cfg.evals);
    let mut records = Vec::new();
    let mut wrong = 0;
    for k in 0..cfg.evals {
        let x = (k % cfg.domain) as u64;
        let mut t = Transcript::new(k as u64);
        let mut sample_rng = trial_rng(cfg.seed, k as u64 + 1);
        compute_traced(&prog, x, &mut sample_rng, &mut t)?;
        records.extend(t.records());
        let (rec, next) = compute_postselected(&prog, x)?;
        wrong += usize::from(rec.output != Some(f.eval(x)));
        per_call.push(rec.success_probability());
        prog = next;
    }
    let wins = per_call.iter().filter(|&&p| p >= fixed - 1e-9).count() as u64;
    let report = GameReport::new(wins, cfg.evals as u64, None)
        .with_diagnostic("lambda", cfg.lambda)
        .with_diagnostic("evals", cfg.evals)
        .with_diagnostic("per_call_success", &per_call)
        .with_diagnostic("fixed_point", fixed)
        .with_diagnostic("wrong_outputs", wrong)
        .with_diagnostic("final_fidelity", prog.state.fidelity(&initial)?);
    Ok((report, records))
}
