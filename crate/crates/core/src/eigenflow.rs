//! Smooth, gauge-fixed eigendecomposition of a density-matrix trajectory.
//!
//! A raw eigensolver returns eigenvectors in an arbitrary order with
//! arbitrary phases at every time point. This module stitches those
//! decompositions into continuous frames: column k of `U(t_{n+1})` is the
//! continuation of column k of `U(t_n)`, matched by overlap and rotated so
//! the consecutive overlap is real and positive. The gauge-fixed frames
//! determine the state-dependent Hamiltonian `H(t) = i sum_k |d/dt psi_k><psi_k|`
//! and the diagonal-frame eigenvalue rates `f_i`.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::matrix::{
    commutator, hermitian_eig, hermitize, max_norm, ComplexMatrix, DensityState, MatrixError,
};

/// Overlap gap below which frame continuation is considered ambiguous.
pub const OVERLAP_GAP: f64 = 1e-6;

/// Bound accepted on `|sum_i f_i|` before declaring a trace leak.
pub const TRACE_LEAK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenflowError {
    #[error("trajectory needs at least 3 points, got {points}")]
    TooFewPoints { points: usize },
    #[error("time grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },
    #[error("trajectory dimensions disagree at index {index}")]
    DimMismatch { index: usize },
    #[error(
        "degenerate frame tracking at t = {t}: overlaps {best:.6e} and {second:.6e} \
         for column {column} are too close to continue"
    )]
    DegenerateTrackingFailure {
        t: f64,
        column: usize,
        best: f64,
        second: f64,
    },
    #[error("finite-difference stencil needs at least 3 grid points, got {points}")]
    InsufficientStencil { points: usize },
    #[error(
        "off-diagonal residual {residual:.3e} at t = {t} exceeds tolerance {tol:.3e}; \
         frame tracking or Hamiltonian construction failed"
    )]
    OffDiagonalResidualTooLarge { t: f64, residual: f64, tol: f64 },
    #[error("eigenvalue rates leak trace at t = {t}: |sum f_i| = {leak:.3e}")]
    TraceLeak { t: f64, leak: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// A time-ordered density-matrix trajectory on a strictly increasing grid,
/// optionally carrying analytic time derivatives.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityState>,
    derivatives: Option<Vec<ComplexMatrix>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DensityState>) -> Result<Self, EigenflowError> {
        Self::build(times, states, None)
    }

    /// Attach analytic derivatives; when absent, consumers fall back to
    /// finite differences of the sampled states.
    pub fn with_derivatives(
        times: Vec<f64>,
        states: Vec<DensityState>,
        derivatives: Vec<ComplexMatrix>,
    ) -> Result<Self, EigenflowError> {
        Self::build(times, states, Some(derivatives))
    }

    fn build(
        times: Vec<f64>,
        states: Vec<DensityState>,
        derivatives: Option<Vec<ComplexMatrix>>,
    ) -> Result<Self, EigenflowError> {
        if times.len() < 3 || states.len() != times.len() {
            return Err(EigenflowError::TooFewPoints {
                points: times.len().min(states.len()),
            });
        }
        if let Some(d) = &derivatives {
            if d.len() != times.len() {
                return Err(EigenflowError::TooFewPoints { points: d.len() });
            }
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(EigenflowError::NonMonotoneGrid { index: i });
            }
        }
        let dim = states[0].dim();
        for (i, s) in states.iter().enumerate() {
            if s.dim() != dim {
                return Err(EigenflowError::DimMismatch { index: i });
            }
        }
        Ok(Trajectory {
            times,
            states,
            derivatives,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityState] {
        &self.states
    }

    /// Analytic derivatives when attached, otherwise second-order finite
    /// differences of the sampled states.
    pub fn state_derivatives(&self) -> Vec<ComplexMatrix> {
        match &self.derivatives {
            Some(d) => d.clone(),
            None => {
                let mats: Vec<&ComplexMatrix> = self.states.iter().map(|s| s.matrix()).collect();
                differentiate_matrices(&self.times, &mats)
            }
        }
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.derivatives.is_some()
    }
}

/// Three-point Lagrange derivative weights at `x` for nodes `(x0, x1, x2)`.
fn stencil_weights(x: f64, x0: f64, x1: f64, x2: f64) -> [f64; 3] {
    [
        (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2)),
        (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2)),
        (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1)),
    ]
}

/// Second-order derivative stencil at grid index `n`: central in the
/// interior, one-sided at the endpoints. Returns the three node indices
/// and their weights.
pub fn derivative_stencil(
    times: &[f64],
    n: usize,
) -> Result<([usize; 3], [f64; 3]), EigenflowError> {
    if times.len() < 3 {
        return Err(EigenflowError::InsufficientStencil {
            points: times.len(),
        });
    }
    let base = if n == 0 {
        0
    } else if n == times.len() - 1 {
        times.len() - 3
    } else {
        n - 1
    };
    let idx = [base, base + 1, base + 2];
    let w = stencil_weights(times[n], times[idx[0]], times[idx[1]], times[idx[2]]);
    Ok((idx, w))
}

/// Differentiate a matrix-valued sequence along the grid.
pub fn differentiate_matrices(times: &[f64], values: &[&ComplexMatrix]) -> Vec<ComplexMatrix> {
    let n = times.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let (idx, w) = derivative_stencil(times, k).expect("grid checked by Trajectory");
        let mut d = values[idx[0]] * Complex64::new(w[0], 0.0);
        d += values[idx[1]] * Complex64::new(w[1], 0.0);
        d += values[idx[2]] * Complex64::new(w[2], 0.0);
        out.push(d);
    }
    out
}

/// Eigenvector phase convention used while tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gauge {
    /// Rotate each continued column so its overlap with the previous frame
    /// is real and positive. Yields the minimal-norm Hamiltonian.
    #[default]
    PhaseFixed,
    /// Keep the solver's phase drift after column pairing, repairing only
    /// sign flips (overlaps with negative real part). Without that repair
    /// the columns are not differentiable and no Hamiltonian transports
    /// them; with it, the resulting Hamiltonian is valid but generally
    /// not norm-optimal.
    Raw,
}

/// Gauge-fixed eigendecomposition of `rho(t)` at one grid point.
///
/// `eigenvalues` are in tracked order (the continuation of the initial
/// frame's columns), not sorted; `basis` holds the matching eigenvector
/// columns; `phases` accumulates the rotation applied to each column by
/// the discrete gauge fixing.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    pub t: f64,
    pub eigenvalues: DVector<f64>,
    pub basis: ComplexMatrix,
    pub phases: DVector<f64>,
}

impl EigenFrame {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `max_offdiag |U^dag rho U - diag(p)|`, the frame-consistency residual.
    pub fn diagonalization_residual(&self, rho: &ComplexMatrix) -> f64 {
        let d = self.basis.adjoint() * rho * &self.basis;
        let mut worst: f64 = 0.0;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let expect = if i == j {
                    Complex64::new(self.eigenvalues[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((d[(i, j)] - expect).norm());
            }
        }
        worst
    }
}

/// Pair the columns of `next` against the reference columns in `prev`,
/// maximizing overlap magnitude. Greedy on the globally largest remaining
/// overlap. When `t` is given, ambiguous pairings (two candidate overlaps
/// within [`OVERLAP_GAP`]) are rejected; a `None` time marks the initial
/// frame, whose assignment is a pure convention and where ties are broken
/// by column order instead.
fn match_columns(
    prev: &ComplexMatrix,
    next: &ComplexMatrix,
    t: Option<f64>,
) -> Result<Vec<usize>, EigenflowError> {
    let d = prev.ncols();
    let overlap: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|j| prev.column(k).dotc(&next.column(j)).norm())
                .collect()
        })
        .collect();
    let mut assignment = vec![usize::MAX; d];
    let mut row_used = vec![false; d];
    let mut col_used = vec![false; d];
    for _ in 0..d {
        let mut best = (0usize, 0usize, -1.0_f64);
        for k in 0..d {
            if row_used[k] {
                continue;
            }
            for j in 0..d {
                if col_used[j] {
                    continue;
                }
                if overlap[k][j] > best.2 {
                    best = (k, j, overlap[k][j]);
                }
            }
        }
        let (k, j, val) = best;
        if let Some(t) = t {
            // Ambiguity: another free column competes for the same row.
            let mut second = -1.0_f64;
            for jj in 0..d {
                if jj != j && !col_used[jj] {
                    second = second.max(overlap[k][jj]);
                }
            }
            if second >= 0.0 && val - second <= OVERLAP_GAP {
                return Err(EigenflowError::DegenerateTrackingFailure {
                    t,
                    column: k,
                    best: val,
                    second,
                });
            }
        }
        assignment[k] = j;
        row_used[k] = true;
        col_used[j] = true;
    }
    Ok(assignment)
}

/// Track gauge-fixed eigenframes along a trajectory with the default
/// [`Gauge::PhaseFixed`] convention.
pub fn track_frames(trajectory: &Trajectory) -> Result<Vec<EigenFrame>, EigenflowError> {
    track_frames_with(trajectory, Gauge::PhaseFixed)
}

/// Track eigenframes with an explicit gauge.
///
/// The first frame is matched against the standard basis, so a diagonal
/// initial state yields `U = I`. Each later frame is matched against its
/// predecessor and, under [`Gauge::PhaseFixed`], rotated so
/// `<psi_k(t_n) | psi_k(t_{n+1})>` is real and positive.
pub fn track_frames_with(
    trajectory: &Trajectory,
    gauge: Gauge,
) -> Result<Vec<EigenFrame>, EigenflowError> {
    let d = trajectory.dim();
    let times = trajectory.times();
    let mut frames: Vec<EigenFrame> = Vec::with_capacity(trajectory.len());
    let reference = ComplexMatrix::identity(d, d);

    for (n, state) in trajectory.states().iter().enumerate() {
        let eig = hermitian_eig(state.matrix())?;
        let first = frames.is_empty();
        let prev = match frames.last() {
            Some(f) => &f.basis,
            None => &reference,
        };
        let assignment = match_columns(prev, &eig.eigenvectors, (!first).then_some(times[n]))?;

        let mut basis = ComplexMatrix::zeros(d, d);
        let mut eigenvalues = DVector::zeros(d);
        let mut phases = DVector::zeros(d);
        for k in 0..d {
            let j = assignment[k];
            eigenvalues[k] = eig.eigenvalues[j];
            let mut col = eig.eigenvectors.column(j).clone_owned();
            let mut applied = 0.0;
            match gauge {
                Gauge::PhaseFixed => {
                    // Initial columns get a self-contained convention
                    // (largest entry real positive); later ones are
                    // rotated against their predecessor.
                    let anchor = if first {
                        let mut m = 0;
                        for i in 1..d {
                            if col[i].norm() > col[m].norm() {
                                m = i;
                            }
                        }
                        col[m]
                    } else {
                        prev.column(k).dotc(&col)
                    };
                    if anchor.norm() > 0.0 {
                        let theta = anchor.arg();
                        col *= Complex64::from_polar(1.0, -theta);
                        applied = -theta;
                    }
                }
                Gauge::Raw => {
                    if !first && prev.column(k).dotc(&col).re < 0.0 {
                        col = -col;
                        applied = std::f64::consts::PI;
                    }
                }
            }
            if let Some(f) = frames.last() {
                phases[k] = f.phases[k] + applied;
            } else {
                phases[k] = applied;
            }
            basis.column_mut(k).copy_from(&col);
        }
        frames.push(EigenFrame {
            t: times[n],
            eigenvalues,
            basis,
            phases,
        });
    }
    Ok(frames)
}

/// State-dependent Hamiltonian at grid index `n`,
/// `H = i sum_k |d/dt psi_k><psi_k| = i Udot U^dag`, from second-order
/// finite differences of the tracked columns. The residual
/// anti-Hermitian part is discretization error and is removed by
/// symmetrizing.
pub fn build_hamiltonian(frames: &[EigenFrame], n: usize) -> Result<ComplexMatrix, EigenflowError> {
    if frames.len() < 3 {
        return Err(EigenflowError::InsufficientStencil {
            points: frames.len(),
        });
    }
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let (idx, w) = derivative_stencil(&times, n)?;
    let mut udot = &frames[idx[0]].basis * Complex64::new(w[0], 0.0);
    udot += &frames[idx[1]].basis * Complex64::new(w[1], 0.0);
    udot += &frames[idx[2]].basis * Complex64::new(w[2], 0.0);
    let h = udot * frames[n].basis.adjoint() * Complex64::new(0.0, 1.0);
    Ok(hermitize(&h))
}

/// Diagonal-frame derivative data at one grid point.
#[derive(Debug, Clone)]
pub struct FrameDerivatives {
    /// Eigenvalue rates `f_i` in tracked order; they sum to zero.
    pub rates: DVector<f64>,
    /// Column velocities implied by the Hamiltonian, `Udot = -i H U`.
    pub basis_velocity: ComplexMatrix,
    /// Largest off-diagonal magnitude of the rotating-frame derivative.
    pub offdiag_residual: f64,
}

/// Rotate `rhodot` into the tracked eigenframe and split it into diagonal
/// rates and an off-diagonal residual:
/// `D = U^dag (rhodot + i [H, rho]) U`.
///
/// A successful frame/Hamiltonian construction leaves `D` diagonal up to
/// discretization error; `tol_offdiag` (default
/// `1e-6 * max(1, |rhodot|)`) bounds the accepted residual. The rates are
/// recentered to sum exactly to zero provided the raw sum is below
/// [`TRACE_LEAK_TOL`].
pub fn rotating_frame_derivative(
    rho: &ComplexMatrix,
    rhodot: &ComplexMatrix,
    frame: &EigenFrame,
    hamiltonian: &ComplexMatrix,
    tol_offdiag: Option<f64>,
) -> Result<FrameDerivatives, EigenflowError> {
    let tol = tol_offdiag.unwrap_or_else(|| 1e-6 * max_norm(rhodot).max(1.0));
    let comm = commutator(hamiltonian, rho)?;
    let rotated = frame.basis.adjoint() * (rhodot + comm * Complex64::new(0.0, 1.0)) * &frame.basis;

    let d = rotated.nrows();
    let mut offdiag: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                offdiag = offdiag.max(rotated[(i, j)].norm());
            }
        }
    }
    if offdiag > tol {
        return Err(EigenflowError::OffDiagonalResidualTooLarge {
            t: frame.t,
            residual: offdiag,
            tol,
        });
    }

    let mut rates = DVector::from_iterator(d, (0..d).map(|i| rotated[(i, i)].re));
    let leak: f64 = rates.iter().sum();
    if leak.abs() > TRACE_LEAK_TOL {
        return Err(EigenflowError::TraceLeak {
            t: frame.t,
            leak: leak.abs(),
        });
    }
    let mean = leak / d as f64;
    for r in rates.iter_mut() {
        *r -= mean;
    }

    let basis_velocity = hamiltonian * &frame.basis * Complex64::new(0.0, -1.0);
    Ok(FrameDerivatives {
        rates,
        basis_velocity,
        offdiag_residual: offdiag,
    })
}
