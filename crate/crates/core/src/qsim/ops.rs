use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::layout::{LocalMap, RegisterLayout, MIXED_QUBIT_CAP};
use super::state::{QuantumState, StateForm};
use crate::error::{Error, Result};
use crate::f2::F2Subspace;
use crate::linalg::{self, c, CMatrix, CVector, OPERATOR_TOL};

/// `|S⟩` on a register named `"q"`.
pub fn prepare_subspace_state(s: &F2Subspace) -> Result<QuantumState> {
    QuantumState::subspace_state("q", s)
}

pub fn hadamard_all(state: &QuantumState, register: &str) -> Result<QuantumState> {
    state.hadamard_all(register)
}

/// Reduced state on `keep` (in layout order).
pub fn partial_trace(state: &QuantumState, keep: &[&str]) -> Result<QuantumState> {
    let layout = state.layout();
    let kept = layout.restrict(keep)?;
    if kept.total_qubits() > MIXED_QUBIT_CAP {
        return Err(Error::Resource {
            what: "reduced density matrix (qubits)",
            requested: kept.total_qubits(),
            cap: MIXED_QUBIT_CAP,
        });
    }
    let traced_names: Vec<&str> = layout
        .names()
        .into_iter()
        .filter(|n| !keep.contains(n))
        .collect();
    let keep_names = kept.names();
    let keep_map = LocalMap::new(layout, &keep_names)?;
    let trace_map = LocalMap::new(layout, &traced_names)?;
    let dk = keep_map.local_dim();
    let dt = trace_map.local_dim();
    let rho = match state.form() {
        StateForm::Pure(v) => {
            let mut m = CMatrix::zeros(dk, dt);
            for a in 0..dk {
                for t in 0..dt {
                    m[(a, t)] = v[keep_map.offsets[a] | trace_map.offsets[t]];
                }
            }
            &m * m.adjoint()
        }
        StateForm::Mixed(full) => {
            let mut out = CMatrix::zeros(dk, dk);
            for a in 0..dk {
                for b in 0..dk {
                    let mut s = linalg::ZERO;
                    for t in 0..dt {
                        let off = trace_map.offsets[t];
                        s += full[(keep_map.offsets[a] | off, keep_map.offsets[b] | off)];
                    }
                    out[(a, b)] = s;
                }
            }
            out
        }
    };
    Ok(QuantumState::mixed_unchecked(kept, rho))
}

/// A purification on the original registers plus a fresh last register.
///
/// The purifying register has `max(1, ceil(log2 rank))` qubits.
pub fn purify(state: &QuantumState) -> Result<QuantumState> {
    let rho = match state.form() {
        StateForm::Mixed(m) => m,
        StateForm::Pure(_) => {
            return Err(Error::InvalidState("purify expects a mixed state".into()));
        }
    };
    let (vals, vecs) = linalg::hermitian_eigen(rho)?;
    let weights: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 1e-14).collect();
    let rank = support.len().max(1);
    let b_qubits = (usize::BITS - (rank - 1).leading_zeros()).max(1) as usize;
    let name = state.layout().fresh_name("purifier");
    let layout = state
        .layout()
        .concat(&RegisterLayout::single(&name, b_qubits))?;
    let db = 1usize << b_qubits;
    let mut psi = CVector::zeros(layout.dim());
    for (k, &i) in support.iter().enumerate() {
        let amp = (weights[i] / total).sqrt();
        for s in 0..state.dim() {
            psi[s * db + k] += vecs[(s, i)] * c(amp);
        }
    }
    QuantumState::pure_normalized(layout, psi)
}

/// `½‖ρ − σ‖₁`, the trace distance.
pub fn trace_distance(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    a.check_same_layout(b)?;
    match (a.form(), b.form()) {
        (StateForm::Pure(x), StateForm::Pure(y)) => {
            let f = x.dotc(y).norm_sqr();
            Ok((1.0 - f).max(0.0).sqrt())
        }
        _ => {
            let diff = a.density() - b.density();
            Ok(0.5 * linalg::hermitian_trace_norm(&diff)?)
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub outcome: u64,
    pub post: QuantumState,
    pub prob: f64,
}

/// Born-rule distribution of a register's computational-basis outcome.
pub fn register_distribution(state: &QuantumState, register: &str) -> Result<Vec<f64>> {
    let span = state.layout().span(register)?;
    let mut probs = vec![0.0; 1usize << span.width];
    for (i, p) in state.probabilities().into_iter().enumerate() {
        probs[span.get(i) as usize] += p;
    }
    Ok(probs)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
            if u < p {
                return i;
            }
            u -= p;
        }
    }
    last
}

/// Measures a register in the computational basis.
pub fn measure_register<R: Rng + ?Sized>(
    state: &QuantumState,
    register: &str,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let span = state.layout().span(register)?;
    let probs = register_distribution(state, register)?;
    let outcome = sample_index(&probs, rng) as u64;
    let post = state
        .project_basis(|i| span.get(i) == outcome)
        .renormalized()?;
    Ok(MeasurementOutcome {
        outcome,
        post,
        prob: probs[outcome as usize],
    })
}

/// Projects a register onto `value`, renormalizes, and removes the register.
pub fn collapse_and_drop(
    state: &QuantumState,
    register: &str,
    value: u64,
) -> Result<(f64, QuantumState)> {
    let layout = state.layout();
    let span = layout.span(register)?;
    let rest = layout.without(&[register])?;
    let rest_names = rest.names();
    let rest_map = LocalMap::new(layout, &rest_names)?;
    let fixed = span.set(0, value);
    let d = rest_map.local_dim();
    match state.form() {
        StateForm::Pure(v) => {
            let w = CVector::from_iterator(d, rest_map.offsets.iter().map(|off| v[off | fixed]));
            let p = w.norm_squared();
            if p < 1e-300 {
                return Err(Error::InvalidState(format!(
                    "register `{register}` has no weight on {value}"
                )));
            }
            Ok((p, QuantumState::pure_unchecked(rest, w / c(p.sqrt()))))
        }
        StateForm::Mixed(m) => {
            let sub = CMatrix::from_fn(d, d, |a, b| {
                m[(rest_map.offsets[a] | fixed, rest_map.offsets[b] | fixed)]
            });
            let p = linalg::trace(&sub).re;
            if p < 1e-300 {
                return Err(Error::InvalidState(format!(
                    "register `{register}` has no weight on {value}"
                )));
            }
            Ok((p, QuantumState::mixed_unchecked(rest, sub / c(p))))
        }
    }
}

static GENTLE_CHECKS: AtomicU64 = AtomicU64::new(0);
static GENTLE_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Process-wide `(checks, violations)` of the gentle-measurement bound.
pub fn gentle_check_counts() -> (u64, u64) {
    (
        GENTLE_CHECKS.load(Ordering::Relaxed),
        GENTLE_VIOLATIONS.load(Ordering::Relaxed),
    )
}

fn record_gentle(distance: f64, epsilon: f64) -> Result<()> {
    GENTLE_CHECKS.fetch_add(1, Ordering::Relaxed);
    if distance > epsilon.sqrt() + OPERATOR_TOL {
        GENTLE_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        return Err(Error::GentleBoundViolated { distance, epsilon });
    }
    Ok(())
}

/// Result of a binary projective measurement with the gentle-measurement
/// bound checked.
#[derive(Clone, Debug)]
pub struct GentleOutcome {
    /// 0 when the projector accepted.
    pub outcome: u8,
    pub post: QuantumState,
    /// Probability of the observed outcome, `1 − ε`.
    pub prob: f64,
    /// Trace distance between the post-measurement state and the input.
    pub recovered_distance: f64,
}

impl GentleOutcome {
    pub fn epsilon(&self) -> f64 {
        (1.0 - self.prob).max(0.0)
    }
}

/// Binary measurement `{Π, I − Π}` with `Π` acting on `regs`.
///
/// Fails with [`Error::GentleBoundViolated`] if the post-state is farther
/// than `√ε` from the input, `ε` being one minus the probability of the
/// observed outcome.
pub fn gentle_measure_on<R: Rng + ?Sized>(
    state: &QuantumState,
    regs: &[&str],
    projector: &CMatrix,
    rng: &mut R,
) -> Result<GentleOutcome> {
    linalg::check_projector(projector)?;
    let accepted = state.apply_local(regs, projector)?;
    let p0 = accepted.trace().clamp(0.0, 1.0);
    let outcome = if rng.gen::<f64>() < p0 { 0u8 } else { 1u8 };
    let (prob, post) = if outcome == 0 {
        (p0, accepted.renormalized()?)
    } else {
        let complement = linalg::identity(projector.nrows()) - projector;
        (
            1.0 - p0,
            state.apply_local(regs, &complement)?.renormalized()?,
        )
    };
    let recovered_distance = trace_distance(&post, state)?;
    record_gentle(recovered_distance, (1.0 - prob).max(0.0))?;
    Ok(GentleOutcome {
        outcome,
        post,
        prob,
        recovered_distance,
    })
}

/// [`gentle_measure_on`] with a projector over the whole layout.
pub fn gentle_measure<R: Rng + ?Sized>(
    state: &QuantumState,
    projector: &CMatrix,
    rng: &mut R,
) -> Result<GentleOutcome> {
    let names = state.layout().names();
    gentle_measure_on(state, &names, projector, rng)
}

/// Checks the gentle-measurement bound for an already-computed collapse.
pub fn check_gentle_bound(before: &QuantumState, after: &QuantumState, prob: f64) -> Result<f64> {
    let d = trace_distance(after, before)?;
    record_gentle(d, (1.0 - prob).max(0.0))?;
    Ok(d)
}
