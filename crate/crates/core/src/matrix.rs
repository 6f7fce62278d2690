//! Dense complex matrix primitives: Hermitian eigendecomposition,
//! commutators, and validated density matrices.
//!
//! All tolerances in this crate are expressed in the entrywise max-norm,
//! which is basis-stable and cheap to evaluate for the small dense
//! matrices handled here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

/// Dense square complex matrix; the carrier for states, Hamiltonians and
/// jump operators.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative Hermiticity tolerance accepted by [`hermitian_eig`].
pub const HERMITICITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimMismatch { left: usize, right: usize },
    #[error("matrix is not Hermitian: max |M - M^dag| = {deviation:.3e} exceeds {tol:.3e}")]
    NonHermitianInput { deviation: f64, tol: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("not Hermitian: max |M - M^dag| = {deviation:.3e} exceeds tol {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("trace is not one: |Tr M - 1| = {deviation:.3e} exceeds tol {tol:.3e}")]
    TraceNotOne { deviation: f64, tol: f64 },
    #[error("not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} below -{tol:.3e}")]
    NotPSD { min_eigenvalue: f64, tol: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Entrywise max-norm, `max_ij |m_ij|`.
pub fn max_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian part `(M + M^dag) / 2`.
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Elementary matrix `|i><j|`.
pub fn basis_matrix(dim: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

fn check_same_dims(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<(), MatrixError> {
    if a.nrows() != a.ncols() {
        return Err(MatrixError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.nrows() != b.ncols() {
        return Err(MatrixError::NotSquare {
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    if a.nrows() != b.nrows() {
        return Err(MatrixError::DimMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(())
}

/// Commutator `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    check_same_dims(a, b)?;
    Ok(a * b - b * a)
}

/// Anticommutator `{A, B} = AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    check_same_dims(a, b)?;
    Ok(a * b + b * a)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are real and sorted ascending; `eigenvectors` holds the
/// matching orthonormal eigenvectors as columns, so
/// `V * diag(lambda) * V^dag` reconstructs the input. Ordering is part of
/// the contract: downstream frame tracking relies on it being
/// deterministic. For a degenerate eigenvalue the columns are some
/// orthonormal basis of the eigenspace; picking a smooth representative
/// is the caller's job.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
}

/// Diagonalize a Hermitian matrix, sorting eigenvalues ascending.
///
/// The input is accepted if `max |M - M^dag| <= HERMITICITY_TOL * max(1, |M|)`
/// and symmetrized before decomposition so the solver sees an exactly
/// Hermitian operand.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig, MatrixError> {
    if m.nrows() != m.ncols() {
        return Err(MatrixError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let deviation = max_norm(&(m - m.adjoint()));
    let tol = HERMITICITY_TOL * max_norm(m).max(1.0);
    if deviation > tol {
        return Err(MatrixError::NonHermitianInput { deviation, tol });
    }
    let eig = hermitize(m).symmetric_eigen();

    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = ComplexMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors
            .column_mut(dst)
            .copy_from(&eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// A density matrix validated to be Hermitian, unit-trace and positive
/// semidefinite within `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    matrix: ComplexMatrix,
    tol: f64,
}

/// Default validation tolerance for density matrices.
pub const DENSITY_TOL: f64 = 1e-8;

/// Check the three density-matrix invariants and wrap the matrix.
///
/// Each failure names the violated invariant together with its magnitude.
pub fn validate_density(m: &ComplexMatrix, tol: f64) -> Result<DensityState, DensityError> {
    if m.nrows() != m.ncols() {
        return Err(MatrixError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        }
        .into());
    }
    let herm_dev = max_norm(&(m - m.adjoint()));
    if herm_dev > tol {
        return Err(DensityError::NotHermitian {
            deviation: herm_dev,
            tol,
        });
    }
    let trace_dev = (m.trace() - Complex64::new(1.0, 0.0)).norm();
    if trace_dev > tol {
        return Err(DensityError::TraceNotOne {
            deviation: trace_dev,
            tol,
        });
    }
    let eig = hermitian_eig(m)?;
    let min_eigenvalue = eig.eigenvalues[0];
    if min_eigenvalue < -tol {
        return Err(DensityError::NotPSD {
            min_eigenvalue,
            tol,
        });
    }
    Ok(DensityState {
        matrix: m.clone(),
        tol,
    })
}

impl DensityState {
    /// Validate `matrix` with the default tolerance [`DENSITY_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self, DensityError> {
        validate_density(&matrix, DENSITY_TOL)
    }

    /// Validate `matrix` with an explicit tolerance.
    pub fn with_tol(matrix: ComplexMatrix, tol: f64) -> Result<Self, DensityError> {
        validate_density(&matrix, tol)
    }

    /// Wrap a matrix without re-validating the invariants.
    ///
    /// Used by the integrator, whose states are Hermitian by construction
    /// but whose trace drift and positivity are diagnostics rather than
    /// hard constraints.
    pub fn from_matrix_unchecked(matrix: ComplexMatrix, tol: f64) -> Self {
        DensityState { matrix, tol }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn pauli_y() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
        // Small deterministic LCG; good enough for test matrices.
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        let raw = ComplexMatrix::from_fn(dim, dim, |_, _| c(next(), next()));
        hermitize(&raw)
    }

    #[test]
    fn eig_identity() {
        let eye = ComplexMatrix::identity(4, 4);
        let eig = hermitian_eig(&eye).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(eig.eigenvalues[k], 1.0, epsilon = 1e-12);
        }
        let gram = eig.eigenvectors.adjoint() * &eig.eigenvectors;
        assert!(max_norm(&(gram - ComplexMatrix::identity(4, 4))) <= 1e-10);
    }

    #[test]
    fn eig_diagonal_sorted_ascending() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.75, 0.0), c(0.25, 0.0)]));
        let eig = hermitian_eig(&m).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 0.75, epsilon = 1e-14);
        // Standard basis columns, permuted: eigenvector of 0.25 is e2.
        assert_abs_diff_eq!(eig.eigenvectors[(1, 0)].norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.eigenvectors[(0, 1)].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let m = random_hermitian(5, 42);
        let eig = hermitian_eig(&m).unwrap();
        let lambda = ComplexMatrix::from_diagonal(&DVector::from_iterator(
            5,
            eig.eigenvalues.iter().map(|&x| c(x, 0.0)),
        ));
        let rebuilt = &eig.eigenvectors * lambda * eig.eigenvectors.adjoint();
        assert!(max_norm(&(rebuilt - &m)) <= 1e-10 * max_norm(&m).max(1.0));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(MatrixError::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn commutator_pauli_algebra() {
        let zero = commutator(&pauli_z(), &pauli_z()).unwrap();
        assert!(max_norm(&zero) == 0.0);

        let xy = commutator(&pauli_x(), &pauli_y()).unwrap();
        let expect = pauli_z() * c(0.0, 2.0);
        assert!(max_norm(&(xy - expect)) <= 1e-15);
    }

    #[test]
    fn commutator_trace_vanishes() {
        let a = random_hermitian(4, 7);
        let b = random_hermitian(4, 8);
        let tr = commutator(&a, &b).unwrap().trace();
        assert!(tr.norm() <= 1e-12);
    }

    #[test]
    fn commutator_dim_mismatch() {
        let a = ComplexMatrix::identity(2, 2);
        let b = ComplexMatrix::identity(3, 3);
        assert!(matches!(
            commutator(&a, &b),
            Err(MatrixError::DimMismatch { .. })
        ));
    }

    #[test]
    fn density_maximally_mixed_valid() {
        let m = ComplexMatrix::identity(2, 2) * c(0.5, 0.0);
        assert!(validate_density(&m, 1e-10).is_ok());
    }

    #[test]
    fn density_negative_eigenvalue_rejected() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.2, 0.0), c(-0.2, 0.0)]));
        match validate_density(&m, 1e-10) {
            Err(DensityError::NotPSD { min_eigenvalue, .. }) => {
                assert_abs_diff_eq!(min_eigenvalue, -0.2, epsilon = 1e-12);
            }
            other => panic!("expected NotPSD, got {other:?}"),
        }
    }

    #[test]
    fn density_trace_violation_reported() {
        let m = ComplexMatrix::identity(2, 2);
        match validate_density(&m, 1e-10) {
            Err(DensityError::TraceNotOne { deviation, .. }) => {
                assert_abs_diff_eq!(deviation, 1.0, epsilon = 1e-12);
            }
            other => panic!("expected TraceNotOne, got {other:?}"),
        }
    }

    #[test]
    fn rabi_oscillated_state_is_valid_density() {
        // Atom state after one time unit of resonant vacuum Rabi
        // oscillation from rho11 = rho12 = 0.5.
        let t: f64 = 1.0;
        let half = (t / 2.0).cos();
        let p11 = 0.5 * half * half;
        let coh = Complex64::from_polar(0.5 * half, -t);
        let m =
            ComplexMatrix::from_row_slice(2, 2, &[c(p11, 0.0), coh, coh.conj(), c(1.0 - p11, 0.0)]);
        assert!(validate_density(&m, 1e-12).is_ok());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn hermitian(d: usize) -> impl Strategy<Value = ComplexMatrix> {
            proptest::collection::vec(-1.0_f64..1.0, 2 * d * d).prop_map(move |v| {
                let raw = ComplexMatrix::from_fn(d, d, |i, j| {
                    c(v[2 * (i * d + j)], v[2 * (i * d + j) + 1])
                });
                hermitize(&raw)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn eig_reconstruction_and_unitarity(m in (2usize..=8).prop_flat_map(hermitian)) {
                let d = m.nrows();
                let eig = hermitian_eig(&m).unwrap();
                let lambda = ComplexMatrix::from_fn(d, d, |i, j| {
                    if i == j { c(eig.eigenvalues[i], 0.0) } else { c(0.0, 0.0) }
                });
                let rebuilt = &eig.eigenvectors * lambda * eig.eigenvectors.adjoint();
                prop_assert!(max_norm(&(rebuilt - &m)) <= 1e-10 * max_norm(&m).max(1.0));
                let gram = eig.eigenvectors.adjoint() * &eig.eigenvectors;
                prop_assert!(max_norm(&(gram - ComplexMatrix::identity(d, d))) <= 1e-10);
                for k in 1..d {
                    prop_assert!(eig.eigenvalues[k] >= eig.eigenvalues[k - 1]);
                }
            }

            #[test]
            fn commutator_antisymmetry_is_exact(
                a in (2usize..=5).prop_flat_map(hermitian),
                seed in 0u64..1000,
            ) {
                let d = a.nrows();
                let b = super::random_hermitian(d, seed);
                let ab = commutator(&a, &b).unwrap();
                let ba = commutator(&b, &a).unwrap();
                // Exact bitwise negation: x - y against -(y - x).
                for (x, y) in ab.iter().zip(ba.iter()) {
                    prop_assert!(x.re == -y.re && x.im == -y.im);
                }
            }
        }
    }
}
