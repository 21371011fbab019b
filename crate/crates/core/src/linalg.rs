//! Dense complex matrix helpers shared by the simulator and the measurement code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance for Hermiticity and idempotence checks.
pub const OPERATOR_TOL: f64 = 1e-9;
/// Tolerance on state normalization.
pub const NORM_TOL: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "operator is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn check_hermitian(m: &CMatrix) -> Result<()> {
    check_square(m)?;
    let defect = hermitian_defect(m);
    if defect > OPERATOR_TOL {
        return Err(Error::NonHermitian { defect });
    }
    Ok(())
}

/// Checks `m = m†` and `m² = m` within [`OPERATOR_TOL`].
pub fn check_projector(m: &CMatrix) -> Result<()> {
    check_square(m)?;
    let herm = hermitian_defect(m);
    let idem = (m * m - m).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let defect = herm.max(idem);
    if defect > OPERATOR_TOL {
        return Err(Error::NotProjector { defect });
    }
    Ok(())
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues in descending order
/// and eigenvectors as the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_hermitian(m)?;
    // Symmetrize exactly before handing to the solver.
    let sym = (m + m.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Trace norm of a Hermitian matrix: the sum of absolute eigenvalues.
pub fn hermitian_trace_norm(m: &CMatrix) -> Result<f64> {
    let (vals, _) = hermitian_eigen(m)?;
    Ok(vals.iter().map(|v| v.abs()).sum())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Projector onto the span of the given orthonormal columns.
pub fn projector_from_columns(cols: &[CVector], dim: usize) -> CMatrix {
    let mut p = CMatrix::zeros(dim, dim);
    for v in cols {
        p += outer(v, v);
    }
    p
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Re-orthonormalizes a square matrix's columns (modified Gram-Schmidt).
pub(crate) fn gram_schmidt(m: &mut CMatrix) {
    let n = m.ncols();
    for j in 0..n {
        for k in 0..j {
            let proj = m.column(k).dotc(&m.column(j));
            let ck = m.column(k).clone_owned();
            let mut cj = m.column_mut(j);
            cj -= ck * proj;
        }
        let norm = m.column(j).norm();
        if norm > 1e-300 {
            let mut cj = m.column_mut(j);
            cj /= c(norm);
        }
    }
}

/// Haar-distributed random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::from_fn(dim, dim, |_, _| C64::new(gauss(rng), gauss(rng)));
    gram_schmidt(&mut m);
    m
}

/// Standard normal deviate (Box-Muller).
pub(crate) fn gauss<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-random unit vector.
pub fn random_unit_vector<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector {
    let v = CVector::from_fn(dim, |_, _| C64::new(gauss(rng), gauss(rng)));
    let n = v.norm();
    v / c(n)
}
