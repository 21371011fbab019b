use rand::Rng;

use super::povm::BinaryPovm;
use super::program::PirateOutput;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::qsim::{sample_index, QuantumState};

/// Default tolerance for merging eigenvalues into one projector.
pub const MERGE_TOL: f64 = 1e-9;
/// Slack applied to the threshold: eigenvalues `≥ γ − THRESHOLD_SLACK` pass.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Spectral form `{(p_i, Π_i)}` of a binary POVM, `p_i` descending.
#[derive(Clone, Debug)]
pub struct ProjectiveImplementation {
    pairs: Vec<(f64, CMatrix)>,
    merge_tol: f64,
}

impl ProjectiveImplementation {
    pub fn pairs(&self) -> &[(f64, CMatrix)] {
        &self.pairs
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].1.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.pairs.iter().map(|(p, _)| *p).collect()
    }

    /// `Σ p_i Π_i`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        self.pairs
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, (p, pi)| {
                acc + pi * linalg::c(*p)
            })
    }

    /// Outcome distribution `{(p_i, Tr[Π_i ρ])}` for `Π_i` on `regs`.
    pub fn distribution(&self, state: &QuantumState, regs: &[&str]) -> Result<Vec<(f64, f64)>> {
        self.pairs
            .iter()
            .map(|(p, pi)| Ok((*p, state.expectation_local(regs, pi)?.re.max(0.0))))
            .collect()
    }
}

pub fn proj_impl(povm: &BinaryPovm) -> Result<ProjectiveImplementation> {
    proj_impl_with_tol(povm, MERGE_TOL)
}

pub fn proj_impl_with_tol(povm: &BinaryPovm, merge_tol: f64) -> Result<ProjectiveImplementation> {
    let (vals, vecs) = linalg::hermitian_eigen(povm.operator())?;
    let d = vals.len();
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (i, &v) in vals.iter().enumerate() {
        match groups.last_mut() {
            Some((vs, idx)) if (vs[vs.len() - 1] - v).abs() <= merge_tol => {
                vs.push(v);
                idx.push(i);
            }
            _ => groups.push((vec![v], vec![i])),
        }
    }
    let pairs = groups
        .into_iter()
        .map(|(vs, idx)| {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let cols: Vec<CVector> = idx.iter().map(|&i| vecs.column(i).clone_owned()).collect();
            (
                mean.clamp(0.0, 1.0),
                linalg::projector_from_columns(&cols, d),
            )
        })
        .collect();
    Ok(ProjectiveImplementation { pairs, merge_tol })
}

/// Measures `{Π_i}` on `regs`; returns the eigenvalue and the collapsed state.
pub fn apply_proj_impl_on<R: Rng + ?Sized>(
    pi: &ProjectiveImplementation,
    state: &QuantumState,
    regs: &[&str],
    rng: &mut R,
) -> Result<(f64, QuantumState)> {
    let dist = pi.distribution(state, regs)?;
    let probs: Vec<f64> = dist.iter().map(|(_, w)| *w).collect();
    let i = sample_index(&probs, rng);
    let post = state.apply_local(regs, &pi.pairs[i].1)?.renormalized()?;
    Ok((pi.pairs[i].0, post))
}

/// [`apply_proj_impl_on`] with the operator covering the whole layout.
pub fn apply_proj_impl<R: Rng + ?Sized>(
    pi: &ProjectiveImplementation,
    state: &QuantumState,
    rng: &mut R,
) -> Result<(f64, QuantumState)> {
    let names = state.layout().names();
    apply_proj_impl_on(pi, state, &names, rng)
}

/// `TI_γ = Σ_{p_i ≥ γ − slack} Π_i`.
pub fn threshold_impl(pi: &ProjectiveImplementation, gamma: f64) -> Result<CMatrix> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold {gamma} must be ≥ 0"
        )));
    }
    let d = pi.dim();
    Ok(pi
        .pairs
        .iter()
        .filter(|(p, _)| *p >= gamma - THRESHOLD_SLACK)
        .fold(CMatrix::zeros(d, d), |acc, (_, proj)| acc + proj))
}

/// Result of measuring `TI_γ ⊗ TI_γ` on a pirate's two registers.
#[derive(Clone, Debug)]
pub struct JointThreshold {
    /// 0 when the first register tested good.
    pub b1: u8,
    pub b2: u8,
    pub post: QuantumState,
    /// `Tr[(TI_γ ⊗ TI_γ) σ]`.
    pub both_good: f64,
    /// Largest discrepancy between joint and sequential outcome probabilities.
    pub order_defect: f64,
}

/// Outcome probabilities `(b1, b2) ↦ Pr` for projectors on two registers,
/// computed jointly.
pub fn joint_outcome_probabilities(
    state: &QuantumState,
    regs: (&str, &str),
    t1: &CMatrix,
    t2: &CMatrix,
) -> Result<[[f64; 2]; 2]> {
    let c1 = linalg::identity(t1.nrows()) - t1;
    let c2 = linalg::identity(t2.nrows()) - t2;
    let mut out = [[0.0; 2]; 2];
    for (b1, a) in [t1, &c1].into_iter().enumerate() {
        for (b2, b) in [t2, &c2].into_iter().enumerate() {
            let op = linalg::kron(a, b);
            out[b1][b2] = state.expectation_local(&[regs.0, regs.1], &op)?.re.max(0.0);
        }
    }
    Ok(out)
}

/// `Pr[b1, b2]` when the first projector is measured before the second
/// (or after, with `first_then_second = false`).
pub fn sequential_outcome_probabilities(
    state: &QuantumState,
    regs: (&str, &str),
    t1: &CMatrix,
    t2: &CMatrix,
    first_then_second: bool,
) -> Result<[[f64; 2]; 2]> {
    let c1 = linalg::identity(t1.nrows()) - t1;
    let c2 = linalg::identity(t2.nrows()) - t2;
    let mut out = [[0.0; 2]; 2];
    for (b1, a) in [t1, &c1].into_iter().enumerate() {
        for (b2, b) in [t2, &c2].into_iter().enumerate() {
            out[b1][b2] = if first_then_second {
                state
                    .apply_local(&[regs.0], a)?
                    .apply_local(&[regs.1], b)?
                    .trace()
            } else {
                state
                    .apply_local(&[regs.1], b)?
                    .apply_local(&[regs.0], a)?
                    .trace()
            };
        }
    }
    Ok(out)
}

/// Applies `TI_γ(P₁) ⊗ TI_γ(P₂)` to the pirate's registers.
pub fn joint_threshold_measure<R: Rng + ?Sized>(
    pirate: &PirateOutput,
    povm1: &BinaryPovm,
    povm2: &BinaryPovm,
    gamma: f64,
    rng: &mut R,
) -> Result<JointThreshold> {
    let t1 = threshold_impl(&proj_impl(povm1)?, gamma)?;
    let t2 = threshold_impl(&proj_impl(povm2)?, gamma)?;
    joint_threshold_with(&pirate.state, pirate.registers(), &t1, &t2, rng)
}

/// Joint threshold measurement with precomputed projectors.
pub fn joint_threshold_with<R: Rng + ?Sized>(
    state: &QuantumState,
    regs: (&str, &str),
    t1: &CMatrix,
    t2: &CMatrix,
    rng: &mut R,
) -> Result<JointThreshold> {
    let layout = state.layout();
    for (r, t) in [(regs.0, t1), (regs.1, t2)] {
        let d = 1usize << layout.width(r)?;
        if t.nrows() != d {
            return Err(Error::LayoutMismatch(format!(
                "operator of dimension {} on register `{r}` of dimension {d}",
                t.nrows()
            )));
        }
    }
    let joint = joint_outcome_probabilities(state, regs, t1, t2)?;
    let mut defect = 0.0f64;
    for order in [true, false] {
        let seq = sequential_outcome_probabilities(state, regs, t1, t2, order)?;
        for b1 in 0..2 {
            for b2 in 0..2 {
                defect = defect.max((seq[b1][b2] - joint[b1][b2]).abs());
            }
        }
    }
    if defect > 1e-9 {
        return Err(Error::InvalidState(format!(
            "joint and sequential threshold measurements disagree by {defect:e}"
        )));
    }
    let flat = [joint[0][0], joint[0][1], joint[1][0], joint[1][1]];
    let k = sample_index(&flat, rng);
    let (b1, b2) = ((k / 2) as u8, (k % 2) as u8);
    let a = if b1 == 0 {
        t1.clone()
    } else {
        linalg::identity(t1.nrows()) - t1
    };
    let b = if b2 == 0 {
        t2.clone()
    } else {
        linalg::identity(t2.nrows()) - t2
    };
    let post = state
        .apply_local(&[regs.0, regs.1], &linalg::kron(&a, &b))?
        .renormalized()?;
    Ok(JointThreshold {
        b1,
        b2,
        post,
        both_good: joint[0][0],
        order_defect: defect,
    })
}
