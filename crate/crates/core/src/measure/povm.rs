use std::sync::Arc;

use rand::Rng;

use super::program::Evaluator;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, OPERATOR_TOL, ZERO};
use crate::oracles::{ClassicalFunction, Transcript};
use crate::qsim::{sample_index, QuantumState};

/// Largest coin space accepted by [`ControlledProjection`].
pub const MAX_COINS: usize = 1 << 12;

/// Binary POVM `(P, I − P)`.
#[derive(Clone, Debug)]
pub struct BinaryPovm {
    p: CMatrix,
}

impl BinaryPovm {
    /// Checks Hermiticity and `0 ⪯ P ⪯ I` within tolerance.
    pub fn new(p: CMatrix) -> Result<Self> {
        linalg::check_hermitian(&p)?;
        let (vals, _) = linalg::hermitian_eigen(&p)?;
        if let Some(bad) = vals
            .iter()
            .find(|&&v| !(-OPERATOR_TOL..=1.0 + OPERATOR_TOL).contains(&v))
        {
            return Err(Error::InvalidPovm(format!(
                "eigenvalue {bad} outside [0, 1]"
            )));
        }
        Ok(Self { p })
    }

    pub(crate) fn new_unchecked(p: CMatrix) -> Self {
        Self { p }
    }

    pub fn operator(&self) -> &CMatrix {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// `Q = I − P`.
    pub fn complement(&self) -> CMatrix {
        linalg::identity(self.dim()) - &self.p
    }

    /// `Tr[(P ⊗ I) ρ]` with `P` on `regs`.
    pub fn accept_probability(&self, state: &QuantumState, regs: &[&str]) -> Result<f64> {
        Ok(state.expectation_local(regs, &self.p)?.re)
    }
}

type Checker = Arc<dyn Fn(Option<u64>) -> bool + Send + Sync>;

/// One coin of a predicate: the challenge input and the accepted outputs.
#[derive(Clone)]
pub struct PredicateCoin {
    pub prob: f64,
    pub x: u64,
    accept: Checker,
}

impl PredicateCoin {
    pub fn accepts(&self, output: Option<u64>) -> bool {
        (self.accept)(output)
    }
}

/// A randomized check on program outputs: with probability `prob` the input
/// `x` is asked and the decoded output must satisfy `accept`.
#[derive(Clone, Default)]
pub struct Predicate {
    coins: Vec<PredicateCoin>,
}

impl Predicate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn coin(
        mut self,
        prob: f64,
        x: u64,
        accept: impl Fn(Option<u64>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.coins.push(PredicateCoin {
            prob,
            x,
            accept: Arc::new(accept),
        });
        self
    }

    /// The output must equal `f(x)` for `x ~ D`.
    pub fn equality(f: &ClassicalFunction, d: &[(u64, f64)]) -> Self {
        d.iter().fold(Self::new(), |p, &(x, prob)| {
            let want = f.eval(x);
            p.coin(prob, x, move |y| y == Some(want))
        })
    }

    pub fn accept_all(d: &[(u64, f64)]) -> Self {
        d.iter()
            .fold(Self::new(), |p, &(x, prob)| p.coin(prob, x, |_| true))
    }

    pub fn coins(&self) -> &[PredicateCoin] {
        &self.coins
    }

    fn check(&self) -> Result<()> {
        if self.coins.is_empty() {
            return Err(Error::InvalidParameter("predicate has no coins".into()));
        }
        if self.coins.len() > MAX_COINS {
            return Err(Error::Resource {
                what: "predicate coins",
                requested: self.coins.len(),
                cap: MAX_COINS,
            });
        }
        let total: f64 = self.coins.iter().map(|c| c.prob).sum();
        if self.coins.iter().any(|c| c.prob < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "coin probabilities sum to {total}"
            )));
        }
        Ok(())
    }
}

/// Uniform distribution over `[N]`.
pub fn uniform_inputs(n: usize) -> Vec<(u64, f64)> {
    (0..n as u64).map(|x| (x, 1.0 / n as f64)).collect()
}

/// `⟨0_anc| U_x† V U_x |0_anc⟩` on the program register for one coin.
pub fn coin_operator(eval: &Evaluator, coin: &PredicateCoin) -> Result<CMatrix> {
    let layout = eval.local_layout()?;
    let dp = eval.program_dim();
    let anc_dim = layout.dim() / dp;
    let circuit = eval.circuit_for(coin.x);
    let mut accepted_rows: Option<Vec<usize>> = None;
    let mut columns: Vec<CVector> = Vec::with_capacity(dp);
    for j in 0..dp {
        let s = QuantumState::basis_index(layout.clone(), j * anc_dim)?;
        let out = crate::circuit::run(&circuit, &s, eval.oracles(), &mut Transcript::new(0))?;
        if accepted_rows.is_none() {
            let mut rows = Vec::new();
            for k in 0..layout.dim() {
                if coin.accepts(eval.decode_index(&layout, k)?) {
                    rows.push(k);
                }
            }
            accepted_rows = Some(rows);
        }
        let amps = out
            .amplitudes()
            .ok_or_else(|| Error::InvalidState("expected a pure column".into()))?;
        let rows = accepted_rows.as_ref().expect("set above");
        columns.push(CVector::from_iterator(
            rows.len(),
            rows.iter().map(|&k| amps[k]),
        ));
    }
    let rows = accepted_rows.map_or(0, |r| r.len());
    let mut m = CMatrix::zeros(rows, dp);
    for (j, col) in columns.iter().enumerate() {
        m.set_column(j, col);
    }
    let p = m.adjoint() * m;
    Ok((&p + p.adjoint()) * c(0.5))
}

/// `P = Σ_r Pr[r] · U_{x(r)}† V_r U_{x(r)}` on the program register.
pub fn goodness_povm_predicate(eval: &Evaluator, predicate: &Predicate) -> Result<BinaryPovm> {
    Ok(goodness_family(eval, predicate)?.mixture())
}

/// Goodness POVM for "output equals `f(x)`" with `x ~ D`.
pub fn goodness_povm(
    eval: &Evaluator,
    f: &ClassicalFunction,
    d: &[(u64, f64)],
) -> Result<BinaryPovm> {
    goodness_povm_predicate(eval, &Predicate::equality(f, d))
}

/// The per-coin operators behind a goodness POVM.
pub fn goodness_family(eval: &Evaluator, predicate: &Predicate) -> Result<ControlledProjection> {
    predicate.check()?;
    let coins = predicate
        .coins()
        .iter()
        .map(|coin| Ok((coin.prob, coin_operator(eval, coin)?)))
        .collect::<Result<Vec<_>>>()?;
    ControlledProjection::new(coins)
}

/// A coin-indexed family `{(Pr[r], P_r)}` of binary POVM elements.
#[derive(Clone, Debug)]
pub struct ControlledProjection {
    coins: Vec<(f64, CMatrix)>,
}

impl ControlledProjection {
    pub fn new(coins: Vec<(f64, CMatrix)>) -> Result<Self> {
        if coins.is_empty() {
            return Err(Error::InvalidParameter("empty coin space".into()));
        }
        if coins.len() > MAX_COINS {
            return Err(Error::Resource {
                what: "coin space",
                requested: coins.len(),
                cap: MAX_COINS,
            });
        }
        let d = coins[0].1.nrows();
        for (_, p) in &coins {
            linalg::check_hermitian(p)?;
            if p.nrows() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    got: p.nrows(),
                });
            }
        }
        let total: f64 = coins.iter().map(|(w, _)| w).sum();
        if coins.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "coin probabilities sum to {total}"
            )));
        }
        Ok(Self { coins })
    }

    pub fn coins(&self) -> &[(f64, CMatrix)] {
        &self.coins
    }

    pub fn dim(&self) -> usize {
        self.coins[0].1.nrows()
    }

    /// `P_D = Σ_r Pr[r] P_r`.
    pub fn mixture(&self) -> BinaryPovm {
        let mut p = CMatrix::zeros(self.dim(), self.dim());
        for (w, pr) in &self.coins {
            p += pr * c(*w);
        }
        BinaryPovm::new_unchecked(p)
    }

    /// Qubits of the control register (coins padded to a power of two).
    pub fn coin_qubits(&self) -> usize {
        crate::oracles::bits_for(self.coins.len())
    }

    /// `Σ_r |r⟩⟨r| ⊗ P_r`, control register most significant.
    pub fn control_operator(&self) -> CMatrix {
        let d = self.dim();
        let k = 1usize << self.coin_qubits();
        let mut out = CMatrix::zeros(k * d, k * d);
        for (r, (_, p)) in self.coins.iter().enumerate() {
            out.view_mut((r * d, r * d), (d, d)).copy_from(p);
        }
        out
    }

    /// `Σ_r √Pr[r] |r⟩`.
    pub fn coin_state(&self) -> CVector {
        let k = 1usize << self.coin_qubits();
        CVector::from_fn(k, |r, _| {
            self.coins
                .get(r)
                .map_or(ZERO, |(w, _)| C64::new(w.sqrt(), 0.0))
        })
    }

    /// One shot of the control-register form: the control is measured (and
    /// discarded) to pick `r`, then `P_r` is measured. Returns 0 on accept.
    pub fn sample_with_control<R: Rng + ?Sized>(
        &self,
        state: &QuantumState,
        regs: &[&str],
        rng: &mut R,
    ) -> Result<u8> {
        let weights: Vec<f64> = self.coin_state().iter().map(|a| a.norm_sqr()).collect();
        let r = sample_index(&weights, rng);
        let p = state.expectation_local(regs, &self.coins[r].1)?.re;
        Ok(if rng.gen::<f64>() < p { 0 } else { 1 })
    }

    /// One shot of the mixture POVM. Returns 0 on accept.
    pub fn sample_mixture<R: Rng + ?Sized>(
        &self,
        state: &QuantumState,
        regs: &[&str],
        rng: &mut R,
    ) -> Result<u8> {
        let p = self.mixture().accept_probability(state, regs)?;
        Ok(if rng.gen::<f64>() < p { 0 } else { 1 })
    }
}
