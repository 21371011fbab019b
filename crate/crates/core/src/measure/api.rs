//! Approximate projective implementation by alternating measurements.
//!
//! The coin register starts in `|u⟩ = Σ_r √Pr[r] |r⟩` and a work register in
//! `|0⟩`. Two projective measurements are alternated: the controlled
//! projection `Σ_r |r⟩⟨r| ⊗ E_r` and the start projector `|u,0⟩⟨u,0| ⊗ I`.
//! Inside every two-dimensional invariant block the outcome of one
//! measurement agrees with the previous one with probability equal to the
//! block's eigenvalue of `P_D`, so the fraction of agreeing consecutive
//! outcomes estimates that eigenvalue. After the estimate the alternation
//! continues until the start projector accepts, which returns the coin and
//! work registers to `|u,0⟩` so they can be dropped.

use rand::Rng;

use super::povm::{BinaryPovm, ControlledProjection};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, OPERATOR_TOL, ZERO};
use crate::qsim::{LocalMap, QuantumState};

/// Constant `c` in `t = ⌈c · ln(2/δ) / ε²⌉`.
pub const API_CONSTANT: f64 = 2.0;
/// Cap on the measurements spent returning to the start subspace.
pub const MAX_RETURN_STEPS: usize = 100_000;

/// Coin-indexed projectors `E_r` on `target ⊗ work` (target most
/// significant) with `⟨0_work| E_r |0_work⟩ = P_r`.
#[derive(Clone, Debug)]
pub struct ProjectiveFamily {
    coins: Vec<(f64, CMatrix)>,
    target_dim: usize,
    work_dim: usize,
}

impl ProjectiveFamily {
    /// Family whose members are already projectors.
    pub fn from_projectors(coins: Vec<(f64, CMatrix)>) -> Result<Self> {
        for (_, p) in &coins {
            linalg::check_projector(p)?;
        }
        let cp = ControlledProjection::new(coins)?;
        Ok(Self {
            target_dim: cp.dim(),
            work_dim: 1,
            coins: cp.coins().to_vec(),
        })
    }

    /// Naimark dilation with one work qubit of an arbitrary POVM family:
    /// `E = W† (I ⊗ |0⟩⟨0|) W` with `W = [[√P, −√(I−P)], [√(I−P), √P]]`.
    pub fn dilate(family: &ControlledProjection) -> Result<Self> {
        let d = family.dim();
        let coins = family
            .coins()
            .iter()
            .map(|(w, p)| {
                let s = psd_sqrt(p)?;
                let comp = psd_sqrt(&(linalg::identity(d) - p))?;
                let sc = &s * &comp;
                // Work qubit is the least significant index bit.
                let mut e = CMatrix::zeros(2 * d, 2 * d);
                for i in 0..d {
                    for j in 0..d {
                        e[(2 * i, 2 * j)] = p[(i, j)];
                        e[(2 * i, 2 * j + 1)] = -sc[(i, j)];
                        e[(2 * i + 1, 2 * j)] = -sc[(i, j)];
                        e[(2 * i + 1, 2 * j + 1)] =
                            if i == j { linalg::ONE } else { ZERO } - p[(i, j)];
                    }
                }
                Ok((*w, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            coins,
            target_dim: d,
            work_dim: 2,
        })
    }

    /// Uses the family directly when every member is a projector, else dilates.
    pub fn from_family(family: &ControlledProjection) -> Result<Self> {
        if family
            .coins()
            .iter()
            .all(|(_, p)| linalg::check_projector(p).is_ok())
        {
            Self::from_projectors(family.coins().to_vec())
        } else {
            Self::dilate(family)
        }
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn work_dim(&self) -> usize {
        self.work_dim
    }

    pub fn coins(&self) -> &[(f64, CMatrix)] {
        &self.coins
    }

    /// `P_D` on the target, read off the dilation.
    pub fn mixture(&self) -> BinaryPovm {
        let d = self.target_dim;
        let w = self.work_dim;
        let mut p = CMatrix::zeros(d, d);
        for (pr, e) in &self.coins {
            for i in 0..d {
                for j in 0..d {
                    p[(i, j)] += e[(i * w, j * w)] * c(*pr);
                }
            }
        }
        BinaryPovm::new_unchecked(p)
    }
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = linalg::hermitian_eigen(m)?;
    let d = CVector::from_iterator(vals.len(), vals.iter().map(|v| c(v.max(0.0).sqrt())));
    Ok(&vecs * CMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// Number of alternating measurements for accuracy `ε` and confidence `δ`.
pub fn api_rounds(epsilon: f64, delta: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < ε, δ < 1, got ({epsilon}, {delta})"
        )));
    }
    Ok((API_CONSTANT * (2.0 / delta).ln() / (epsilon * epsilon)).ceil() as usize)
}

#[derive(Clone, Debug)]
pub struct ApiOutcome {
    pub estimate: f64,
    pub post: QuantumState,
    /// Alternating measurements used for the estimate.
    pub rounds: usize,
    /// Extra measurements spent returning to the start subspace.
    pub return_steps: usize,
}

/// Blocks `B_r` of shape `(target·work) × spectator`.
struct Jordan<'a> {
    family: &'a ProjectiveFamily,
    blocks: Vec<CMatrix>,
    sqrt_w: Vec<f64>,
}

impl Jordan<'_> {
    fn norm_sqr(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    fn scale(&mut self, by: f64) {
        for b in &mut self.blocks {
            *b *= c(by);
        }
    }

    /// Controlled projection; returns true on accept.
    fn measure_controlled<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let accepted: Vec<CMatrix> = self
            .family
            .coins
            .iter()
            .zip(&self.blocks)
            .map(|((_, e), b)| e * b)
            .collect();
        let p: f64 = accepted
            .iter()
            .map(|a| a.norm_squared())
            .sum::<f64>()
            .clamp(0.0, 1.0);
        let accept = rng.gen::<f64>() < p;
        if accept {
            self.blocks = accepted;
            self.scale(1.0 / p.sqrt());
        } else {
            for (b, a) in self.blocks.iter_mut().zip(&accepted) {
                *b -= a;
            }
            self.scale(1.0 / (1.0 - p).sqrt());
        }
        accept
    }

    /// Component along `|u, 0_work⟩`, shape `target × spectator`.
    fn start_component(&self) -> CMatrix {
        let w = self.family.work_dim;
        let d = self.family.target_dim;
        let s = self.blocks[0].ncols();
        let mut phi = CMatrix::zeros(d, s);
        for (b, &sw) in self.blocks.iter().zip(&self.sqrt_w) {
            for t in 0..d {
                for col in 0..s {
                    phi[(t, col)] += b[(t * w, col)] * c(sw);
                }
            }
        }
        phi
    }

    fn set_start(&mut self, phi: &CMatrix, sign: f64) {
        let w = self.family.work_dim;
        for (b, &sw) in self.blocks.iter_mut().zip(&self.sqrt_w) {
            for t in 0..phi.nrows() {
                for col in 0..phi.ncols() {
                    let v = phi[(t, col)] * c(sw);
                    if sign > 0.0 {
                        b[(t * w, col)] = v;
                    } else {
                        b[(t * w, col)] -= v;
                    }
                }
            }
        }
    }

    /// Start projector; returns true on accept.
    fn measure_start<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let phi = self.start_component();
        let p = phi.norm_squared().clamp(0.0, 1.0);
        let accept = rng.gen::<f64>() < p;
        if accept {
            for b in &mut self.blocks {
                b.fill(ZERO);
            }
            self.set_start(&phi, 1.0);
            self.scale(1.0 / p.sqrt());
        } else {
            self.set_start(&phi, -1.0);
            self.scale(1.0 / (1.0 - p).sqrt());
        }
        accept
    }
}

/// Approximate projective implementation of `P_D` on `regs`.
///
/// Mixed inputs are handled by sampling a pure component of the input
/// ensemble first; the returned state is then a sample of the output ensemble.
pub fn sampled_api<R: Rng + ?Sized>(
    state: &QuantumState,
    regs: &[&str],
    family: &ProjectiveFamily,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<ApiOutcome> {
    let rounds = api_rounds(epsilon, delta)?;
    let layout = state.layout().clone();
    let target = LocalMap::new(&layout, regs)?;
    if target.local_dim() != family.target_dim {
        return Err(Error::LengthMismatch {
            expected: family.target_dim,
            got: target.local_dim(),
        });
    }
    let rest_names: Vec<&str> = layout
        .names()
        .into_iter()
        .filter(|n| !regs.contains(n))
        .collect();
    let rest = LocalMap::new(&layout, &rest_names)?;
    let pure = state.sample_pure_component(rng)?;
    let amps = pure.amplitudes().expect("pure component");
    let (d, s, w) = (target.local_dim(), rest.local_dim(), family.work_dim);

    let sqrt_w: Vec<f64> = family.coins.iter().map(|(p, _)| p.sqrt()).collect();
    let mut blocks = Vec::with_capacity(family.coins.len());
    for &sw in &sqrt_w {
        let mut b = CMatrix::zeros(d * w, s);
        for t in 0..d {
            for col in 0..s {
                b[(t * w, col)] = amps[target.offsets[t] | rest.offsets[col]] * c(sw);
            }
        }
        blocks.push(b);
    }
    let mut j = Jordan {
        family,
        blocks,
        sqrt_w,
    };
    let total = j.norm_sqr();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!("input norm {total}")));
    }

    // The start subspace has just accepted (outcome 1 by convention).
    let mut prev = true;
    let mut agree = 0usize;
    let mut last_was_start = true;
    for k in 0..rounds {
        let outcome = if k % 2 == 0 {
            j.measure_controlled(rng)
        } else {
            j.measure_start(rng)
        };
        if outcome == prev {
            agree += 1;
        }
        prev = outcome;
        last_was_start = k % 2 == 1;
    }
    let mut in_start = last_was_start && prev;
    let mut return_steps = 0;
    let mut next_is_controlled = last_was_start;
    while !in_start {
        if return_steps >= MAX_RETURN_STEPS {
            return Err(Error::InvalidState(
                "alternating measurements did not return to the start subspace".into(),
            ));
        }
        if next_is_controlled {
            j.measure_controlled(rng);
        } else {
            in_start = j.measure_start(rng);
        }
        next_is_controlled = !next_is_controlled;
        return_steps += 1;
    }

    let phi = j.start_component();
    let norm = phi.norm();
    let mut out = CVector::zeros(layout.dim());
    for t in 0..d {
        for col in 0..s {
            out[target.offsets[t] | rest.offsets[col]] = phi[(t, col)] / C64::new(norm, 0.0);
        }
    }
    Ok(ApiOutcome {
        estimate: agree as f64 / rounds as f64,
        post: QuantumState::pure(layout, out)?,
        rounds,
        return_steps,
    })
}

/// Approximate threshold implementation: 0 when the estimate is `≥ γ`.
pub fn approx_threshold<R: Rng + ?Sized>(
    state: &QuantumState,
    regs: &[&str],
    family: &ProjectiveFamily,
    gamma: f64,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<(u8, ApiOutcome)> {
    let out = sampled_api(state, regs, family, epsilon, delta, rng)?;
    let bit = if out.estimate >= gamma - OPERATOR_TOL {
        0
    } else {
        1
    };
    Ok((bit, out))
}
