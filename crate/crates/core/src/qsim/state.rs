use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{LocalMap, RegisterLayout, MIXED_QUBIT_CAP, PURE_QUBIT_CAP};
use crate::error::{Error, Result};
use crate::f2::F2Subspace;
use crate::linalg::{self, c, CMatrix, CVector, C64, NORM_TOL, ZERO};

/// Density matrices at or below this dimension get a full PSD check on construction.
const PSD_CHECK_MAX_DIM: usize = 256;
const PSD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum StateForm {
    Pure(CVector),
    Mixed(CMatrix),
}

/// A pure or mixed state over a [`RegisterLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    layout: RegisterLayout,
    form: StateForm,
}

fn check_cap(layout: &RegisterLayout, cap: usize, what: &'static str) -> Result<()> {
    let q = layout.total_qubits();
    if q > cap {
        return Err(Error::Resource {
            what,
            requested: q,
            cap,
        });
    }
    Ok(())
}

impl QuantumState {
    pub fn pure(layout: RegisterLayout, amplitudes: CVector) -> Result<Self> {
        check_cap(&layout, PURE_QUBIT_CAP, "state vector (qubits)")?;
        if amplitudes.len() != layout.dim() {
            return Err(Error::LengthMismatch {
                expected: layout.dim(),
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state vector has norm {norm}")));
        }
        Ok(Self {
            layout,
            form: StateForm::Pure(amplitudes),
        })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn pure_normalized(layout: RegisterLayout, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidState(
                "zero vector cannot be normalized".into(),
            ));
        }
        Self::pure(layout, amplitudes / c(norm))
    }

    pub fn mixed(layout: RegisterLayout, rho: CMatrix) -> Result<Self> {
        check_cap(&layout, MIXED_QUBIT_CAP, "density matrix (qubits)")?;
        let d = layout.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: rho.nrows(),
            });
        }
        linalg::check_hermitian(&rho)?;
        let tr = linalg::trace(&rho);
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has trace {tr}"
            )));
        }
        if d <= PSD_CHECK_MAX_DIM {
            let (vals, _) = linalg::hermitian_eigen(&rho)?;
            if let Some(&min) = vals.last() {
                if min < -PSD_TOL {
                    return Err(Error::InvalidState(format!(
                        "density matrix has eigenvalue {min}"
                    )));
                }
            }
        }
        Ok(Self {
            layout,
            form: StateForm::Mixed(rho),
        })
    }

    /// Wraps a matrix produced by a validity-preserving operation.
    pub(crate) fn mixed_unchecked(layout: RegisterLayout, rho: CMatrix) -> Self {
        Self {
            layout,
            form: StateForm::Mixed(rho),
        }
    }

    pub(crate) fn pure_unchecked(layout: RegisterLayout, amps: CVector) -> Self {
        Self {
            layout,
            form: StateForm::Pure(amps),
        }
    }

    /// Computational-basis state with the given global index.
    pub fn basis_index(layout: RegisterLayout, index: usize) -> Result<Self> {
        check_cap(&layout, PURE_QUBIT_CAP, "state vector (qubits)")?;
        if index >= layout.dim() {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range"
            )));
        }
        let mut v = CVector::zeros(layout.dim());
        v[index] = linalg::ONE;
        Ok(Self::pure_unchecked(layout, v))
    }

    /// Computational-basis state with the named register values (others zero).
    pub fn basis(layout: RegisterLayout, values: &[(&str, u64)]) -> Result<Self> {
        let mut index = 0usize;
        for (name, value) in values {
            let span = layout.span(name)?;
            if span.width < 64 && *value >> span.width != 0 {
                return Err(Error::InvalidParameter(format!(
                    "value {value} does not fit register `{name}`"
                )));
            }
            index = span.set(index, *value);
        }
        Self::basis_index(layout, index)
    }

    /// The all-zero state on a layout.
    pub fn zero(layout: RegisterLayout) -> Result<Self> {
        Self::basis_index(layout, 0)
    }

    /// `|S⟩`: the uniform superposition over the members of `S`, on one register.
    pub fn subspace_state(name: &str, s: &F2Subspace) -> Result<Self> {
        let layout = RegisterLayout::single(name, s.ambient_dim());
        check_cap(&layout, PURE_QUBIT_CAP, "state vector (qubits)")?;
        let mut v = CVector::zeros(layout.dim());
        let amp = c((s.cardinality() as f64).sqrt().recip());
        for m in s.enumerate_with_cap(PURE_QUBIT_CAP)? {
            v[m.bits() as usize] = amp;
        }
        Ok(Self::pure_unchecked(layout, v))
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn form(&self) -> &StateForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.form, StateForm::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.form {
            StateForm::Pure(v) => Some(v),
            StateForm::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> CMatrix {
        match &self.form {
            StateForm::Pure(v) => linalg::outer(v, v),
            StateForm::Mixed(m) => m.clone(),
        }
    }

    /// The same state in density-matrix form.
    pub fn to_mixed(&self) -> Result<Self> {
        check_cap(&self.layout, MIXED_QUBIT_CAP, "density matrix (qubits)")?;
        Ok(Self::mixed_unchecked(self.layout.clone(), self.density()))
    }

    pub fn relabel(mut self, layout: RegisterLayout) -> Result<Self> {
        if layout.dim() != self.layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "cannot relabel {} qubits as {}",
                self.layout.total_qubits(),
                layout.total_qubits()
            )));
        }
        self.layout = layout;
        Ok(self)
    }

    /// Probability of each computational basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        match &self.form {
            StateForm::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            StateForm::Mixed(m) => m.diagonal().iter().map(|z| z.re.max(0.0)).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.form {
            StateForm::Pure(v) => v.norm_squared(),
            StateForm::Mixed(m) => linalg::trace(m).re,
        }
    }

    /// `self ⊗ other` with concatenated layout.
    pub fn tensor(&self, other: &QuantumState) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        match (&self.form, &other.form) {
            (StateForm::Pure(a), StateForm::Pure(b)) => {
                check_cap(&layout, PURE_QUBIT_CAP, "state vector (qubits)")?;
                Ok(Self::pure_unchecked(layout, a.kronecker(b)))
            }
            _ => {
                check_cap(&layout, MIXED_QUBIT_CAP, "density matrix (qubits)")?;
                Ok(Self::mixed_unchecked(
                    layout,
                    self.density().kronecker(&other.density()),
                ))
            }
        }
    }

    /// Appends a fresh register in `|0⟩`.
    pub fn with_register(&self, name: &str, qubits: usize) -> Result<Self> {
        let zero = QuantumState::zero(RegisterLayout::single(name, qubits))?;
        self.tensor(&zero)
    }

    /// Applies a linear map given as an in-place vector transform. For mixed
    /// states `ρ ↦ T ρ T†`, computed as `T (T ρ)†` using `ρ = ρ†`.
    pub(crate) fn map_linear(&self, f: impl Fn(&mut [C64])) -> Self {
        match &self.form {
            StateForm::Pure(v) => {
                let mut out = v.clone();
                f(out.as_mut_slice());
                Self::pure_unchecked(self.layout.clone(), out)
            }
            StateForm::Mixed(m) => {
                let d = m.nrows();
                let mut a = m.clone();
                for col in a.as_mut_slice().chunks_mut(d) {
                    f(col);
                }
                let mut b = a.adjoint();
                for col in b.as_mut_slice().chunks_mut(d) {
                    f(col);
                }
                Self::mixed_unchecked(self.layout.clone(), b)
            }
        }
    }

    /// Applies `op` to the concatenation of `regs` (first listed register is
    /// most significant). The result is not renormalized.
    pub fn apply_local(&self, regs: &[&str], op: &CMatrix) -> Result<Self> {
        let map = LocalMap::new(&self.layout, regs)?;
        if op.nrows() != map.local_dim() || op.ncols() != map.local_dim() {
            return Err(Error::LengthMismatch {
                expected: map.local_dim(),
                got: op.nrows(),
            });
        }
        let dl = map.local_dim();
        Ok(self.map_linear(|data| {
            let mut buf = CVector::zeros(dl);
            for base in 0..data.len() {
                if base & map.mask != 0 {
                    continue;
                }
                for (l, off) in map.offsets.iter().enumerate() {
                    buf[l] = data[base | off];
                }
                let out = op * &buf;
                for (l, off) in map.offsets.iter().enumerate() {
                    data[base | off] = out[l];
                }
            }
        }))
    }

    /// Applies the basis permutation `|i⟩ ↦ |perm(i)⟩`; `perm` must be a bijection.
    pub fn apply_permutation(&self, perm: impl Fn(usize) -> usize) -> Self {
        self.map_linear(|data| {
            let old = data.to_vec();
            for (i, a) in old.into_iter().enumerate() {
                data[perm(i)] = a;
            }
        })
    }

    /// `H^{⊗w}` on a register.
    pub fn hadamard_all(&self, register: &str) -> Result<Self> {
        let span = self.layout.span(register)?;
        let h = c(FRAC_1_SQRT_2);
        Ok(self.map_linear(|data| {
            for q in 0..span.width {
                let bit = 1usize << (span.shift + q);
                for i in 0..data.len() {
                    if i & bit == 0 {
                        let a = data[i];
                        let b = data[i | bit];
                        data[i] = (a + b) * h;
                        data[i | bit] = (a - b) * h;
                    }
                }
            }
        }))
    }

    /// Zeroes every basis component rejected by `keep`. Not renormalized.
    pub fn project_basis(&self, keep: impl Fn(usize) -> bool) -> Self {
        self.map_linear(|data| {
            for (i, a) in data.iter_mut().enumerate() {
                if !keep(i) {
                    *a = ZERO;
                }
            }
        })
    }

    /// Divides by the trace so the state is normalized again.
    pub fn renormalized(&self) -> Result<Self> {
        let t = self.trace();
        if t < 1e-300 {
            return Err(Error::InvalidState(
                "cannot renormalize a zero state".into(),
            ));
        }
        Ok(match &self.form {
            StateForm::Pure(v) => Self::pure_unchecked(self.layout.clone(), v / c(t.sqrt())),
            StateForm::Mixed(m) => Self::mixed_unchecked(self.layout.clone(), m / c(t)),
        })
    }

    /// `Tr[(op ⊗ I) ρ]` for an operator on `regs`.
    pub fn expectation_local(&self, regs: &[&str], op: &CMatrix) -> Result<C64> {
        let map = LocalMap::new(&self.layout, regs)?;
        if op.nrows() != map.local_dim() {
            return Err(Error::LengthMismatch {
                expected: map.local_dim(),
                got: op.nrows(),
            });
        }
        let dl = map.local_dim();
        let apply = |data: &[C64]| -> Vec<C64> {
            let mut out = vec![ZERO; data.len()];
            let mut buf = CVector::zeros(dl);
            for base in 0..data.len() {
                if base & map.mask != 0 {
                    continue;
                }
                for (l, off) in map.offsets.iter().enumerate() {
                    buf[l] = data[base | off];
                }
                let r = op * &buf;
                for (l, off) in map.offsets.iter().enumerate() {
                    out[base | off] = r[l];
                }
            }
            out
        };
        Ok(match &self.form {
            StateForm::Pure(v) => {
                let w = apply(v.as_slice());
                v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum()
            }
            StateForm::Mixed(m) => {
                let d = m.nrows();
                let mut tr = ZERO;
                for (j, col) in m.as_slice().chunks(d).enumerate() {
                    tr += apply(col)[j];
                }
                tr
            }
        })
    }

    /// Squared overlap with another state on the same layout.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        self.check_same_layout(other)?;
        Ok(match (&self.form, &other.form) {
            (StateForm::Pure(a), StateForm::Pure(b)) => a.dotc(b).norm_sqr(),
            (StateForm::Pure(a), StateForm::Mixed(m))
            | (StateForm::Mixed(m), StateForm::Pure(a)) => a.dotc(&(m * a)).re,
            (StateForm::Mixed(r), StateForm::Mixed(s)) => {
                let sqrt_r = psd_sqrt(r)?;
                let inner = &sqrt_r * s * &sqrt_r;
                let (vals, _) = linalg::hermitian_eigen(&inner)?;
                let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
                root * root
            }
        })
    }

    pub(crate) fn check_same_layout(&self, other: &QuantumState) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch(format!(
                "{:?} vs {:?}",
                self.layout.names(),
                other.layout.names()
            )));
        }
        Ok(())
    }

    /// Samples a pure component of the state's eigen-ensemble.
    pub(crate) fn sample_pure_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        match &self.form {
            StateForm::Pure(_) => Ok(self.clone()),
            StateForm::Mixed(m) => {
                let (vals, vecs) = linalg::hermitian_eigen(m)?;
                let weights: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                let v = vecs.column(pick).clone_owned();
                Self::pure_normalized(self.layout.clone(), v)
            }
        }
    }
}

fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = linalg::hermitian_eigen(m)?;
    let d = CVector::from_iterator(vals.len(), vals.iter().map(|v| c(v.max(0.0).sqrt())));
    Ok(&vecs * CMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// Interchange form: `{"layout": [...], "form": "pure"|"mixed", "data": [re, im, ...]}`
/// with matrix data in row-major order.
#[derive(Serialize, Deserialize)]
pub struct StateDump {
    pub layout: RegisterLayout,
    pub form: String,
    pub data: Vec<f64>,
}

impl QuantumState {
    pub fn to_dump(&self) -> StateDump {
        let (form, data) = match &self.form {
            StateForm::Pure(v) => ("pure", v.iter().flat_map(|z| [z.re, z.im]).collect()),
            StateForm::Mixed(m) => {
                let d = m.nrows();
                let mut out = Vec::with_capacity(2 * d * d);
                for i in 0..d {
                    for j in 0..d {
                        out.push(m[(i, j)].re);
                        out.push(m[(i, j)].im);
                    }
                }
                ("mixed", out)
            }
        };
        StateDump {
            layout: self.layout.clone(),
            form: form.to_string(),
            data,
        }
    }

    pub fn from_dump(dump: StateDump) -> Result<Self> {
        let pairs: Vec<C64> = dump
            .data
            .chunks(2)
            .map(|p| C64::new(p[0], *p.get(1).unwrap_or(&0.0)))
            .collect();
        match dump.form.as_str() {
            "pure" => Self::pure(dump.layout, CVector::from_vec(pairs)),
            "mixed" => {
                let d = dump.layout.dim();
                if pairs.len() != d * d {
                    return Err(Error::LengthMismatch {
                        expected: d * d,
                        got: pairs.len(),
                    });
                }
                Self::mixed(dump.layout, CMatrix::from_row_slice(d, d, &pairs))
            }
            other => Err(Error::Serialization(format!(
                "unknown state form `{other}`"
            ))),
        }
    }
}
