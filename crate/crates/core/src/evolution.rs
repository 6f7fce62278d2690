//! Evaluate and integrate time-indexed Lindblad generators, and verify a
//! generator against the trajectory it was synthesized from.

use num_complex::Complex64;
use thiserror::Error;

use crate::eigenflow::{differentiate_matrices, Trajectory};
use crate::matrix::{
    anticommutator, commutator, hermitian_eig, hermitize, max_norm, ComplexMatrix, DensityState,
};

/// Integration aborts once `max |rho_ij|` exceeds this bound; rates on
/// the interval were singular.
pub const BLOWUP_NORM: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("dimension mismatch between state ({state}) and operator ({operator})")]
    DimMismatch { state: usize, operator: usize },
    #[error("generator grid must be strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },
    #[error("generator needs at least 2 grid points, got {points}")]
    TooFewPoints { points: usize },
    #[error("Hamiltonian at grid index {index} is not Hermitian: deviation {deviation:.3e}")]
    NonHermitianHamiltonian { index: usize, deviation: f64 },
    #[error("generator grid ({generator}) does not match trajectory grid ({trajectory})")]
    GridMismatch { generator: usize, trajectory: usize },
    #[error("state norm {norm:.3e} exceeded {BLOWUP_NORM} at t = {t}; rates were singular")]
    StepBlowup { t: f64, norm: f64 },
}

/// A jump operator with its rate, already materialized in the lab frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RatedOperator {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

/// Generator data at a single grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorPoint {
    pub hamiltonian: ComplexMatrix,
    pub terms: Vec<RatedOperator>,
}

/// A Lindblad generator sampled on a strictly increasing time grid.
/// Between samples the generator is interpolated linearly, held constant
/// over each integration substep at the substep midpoint value.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    times: Vec<f64>,
    points: Vec<GeneratorPoint>,
}

impl LindbladGenerator {
    pub fn new(times: Vec<f64>, points: Vec<GeneratorPoint>) -> Result<Self, EvolutionError> {
        if times.len() < 2 || points.len() != times.len() {
            return Err(EvolutionError::TooFewPoints {
                points: times.len().min(points.len()),
            });
        }
        for i in 1..times.len() {
            if times[i] <= times[i - 1] {
                return Err(EvolutionError::NonMonotoneGrid { index: i });
            }
        }
        for (i, point) in points.iter().enumerate() {
            let h = &point.hamiltonian;
            let deviation = max_norm(&(h - h.adjoint()));
            if deviation > 1e-8 * max_norm(h).max(1.0) {
                return Err(EvolutionError::NonHermitianHamiltonian {
                    index: i,
                    deviation,
                });
            }
            let d = h.nrows();
            for term in &point.terms {
                if term.operator.nrows() != d {
                    return Err(EvolutionError::DimMismatch {
                        state: d,
                        operator: term.operator.nrows(),
                    });
                }
            }
        }
        Ok(LindbladGenerator { times, points })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[GeneratorPoint] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points[0].hamiltonian.nrows()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Right-hand side of the Lindblad master equation,
/// `-i[H, rho] + sum_k rate_k (L rho L^dag - (1/2){L^dag L, rho})`.
///
/// The result is Hermitian and traceless up to floating-point roundoff
/// for Hermitian input.
pub fn lindblad_rhs(
    rho: &ComplexMatrix,
    hamiltonian: &ComplexMatrix,
    terms: &[RatedOperator],
) -> Result<ComplexMatrix, EvolutionError> {
    let d = rho.nrows();
    if hamiltonian.nrows() != d {
        return Err(EvolutionError::DimMismatch {
            state: d,
            operator: hamiltonian.nrows(),
        });
    }
    let mut rhs = commutator(hamiltonian, rho).map_err(|_| EvolutionError::DimMismatch {
        state: d,
        operator: hamiltonian.nrows(),
    })? * Complex64::new(0.0, -1.0);
    for term in terms {
        let l = &term.operator;
        if l.nrows() != d {
            return Err(EvolutionError::DimMismatch {
                state: d,
                operator: l.nrows(),
            });
        }
        let sandwich = l * rho * l.adjoint();
        let weight = anticommutator(&(l.adjoint() * l), rho).expect("dims checked");
        rhs += (sandwich - weight * Complex64::new(0.5, 0.0)) * Complex64::new(term.rate, 0.0);
    }
    Ok(rhs)
}

/// Evaluate the generator at interpolation weight `w` between grid points
/// `n` and `n + 1`: the convex combination of the two endpoint
/// right-hand sides.
fn blended_rhs(
    gen: &LindbladGenerator,
    n: usize,
    w: f64,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix, EvolutionError> {
    let left = lindblad_rhs(rho, &gen.points[n].hamiltonian, &gen.points[n].terms)?;
    if w == 0.0 {
        return Ok(left);
    }
    let right = lindblad_rhs(
        rho,
        &gen.points[n + 1].hamiltonian,
        &gen.points[n + 1].terms,
    )?;
    Ok(left * Complex64::new(1.0 - w, 0.0) + right * Complex64::new(w, 0.0))
}

/// March `rho` across grid interval `n` with `substeps` RK4 steps.
fn step_interval(
    gen: &LindbladGenerator,
    n: usize,
    rho: &mut ComplexMatrix,
    substeps: usize,
) -> Result<(), EvolutionError> {
    let t0 = gen.times[n];
    let t1 = gen.times[n + 1];
    let width = t1 - t0;
    let h = width / substeps as f64;
    for s in 0..substeps {
        let mid = t0 + h * (s as f64 + 0.5);
        let w = (mid - t0) / width;
        let k1 = blended_rhs(gen, n, w, rho)?;
        let k2 = blended_rhs(gen, n, w, &(&*rho + &k1 * Complex64::new(h / 2.0, 0.0)))?;
        let k3 = blended_rhs(gen, n, w, &(&*rho + &k2 * Complex64::new(h / 2.0, 0.0)))?;
        let k4 = blended_rhs(gen, n, w, &(&*rho + &k3 * Complex64::new(h, 0.0)))?;
        *rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(h / 6.0, 0.0);
        *rho = hermitize(rho);
        let norm = max_norm(rho);
        if norm > BLOWUP_NORM {
            return Err(EvolutionError::StepBlowup {
                t: t0 + h * (s + 1) as f64,
                norm,
            });
        }
    }
    Ok(())
}

/// Integrate the generator from `rho0` across its whole grid with classical
/// RK4, `substeps` steps per grid interval.
///
/// States are re-symmetrized after every step; the trace is deliberately
/// not renormalized, so trace drift stays observable as a diagnostic.
pub fn integrate(
    rho0: &DensityState,
    gen: &LindbladGenerator,
    substeps: usize,
) -> Result<Vec<DensityState>, EvolutionError> {
    let substeps = substeps.max(1);
    if rho0.dim() != gen.dim() {
        return Err(EvolutionError::DimMismatch {
            state: rho0.dim(),
            operator: gen.dim(),
        });
    }
    let mut rho = rho0.matrix().clone();
    let mut out = Vec::with_capacity(gen.len());
    out.push(DensityState::from_matrix_unchecked(rho.clone(), rho0.tol()));
    for n in 0..gen.len() - 1 {
        step_interval(gen, n, &mut rho, substeps)?;
        out.push(DensityState::from_matrix_unchecked(rho.clone(), rho0.tol()));
    }
    Ok(out)
}

/// Residuals at one grid point of a verification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResidual {
    pub t: f64,
    /// `max |lindblad_rhs(rho) - d/dt rho|` with the derivative estimated
    /// by finite differences of the input trajectory.
    pub rhs_error: f64,
    /// `max |rho_reintegrated - rho_input|`.
    pub state_error: f64,
    /// Point lies inside an excluded (singular or capped) interval.
    pub excluded: bool,
}

/// Closed-loop reconstruction report. The headline numbers are maxima and
/// minima over the non-excluded grid points only; per-point residuals are
/// kept for all points.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub max_state_error: f64,
    pub max_rhs_error: f64,
    /// Largest `|Tr rho - 1|` among re-integrated states.
    pub trace_drift: f64,
    /// Smallest eigenvalue among re-integrated states.
    pub min_eigenvalue: f64,
    pub residuals: Vec<PointResidual>,
    pub excluded_intervals: Vec<(f64, f64)>,
}

/// Re-integrate the generator against the input trajectory and collect
/// residuals.
///
/// Grid points falling inside `excluded_intervals` (singular or capped
/// stretches reported by synthesis) are skipped: integration restarts
/// from the input state after each excluded stretch, so a singularity
/// does not poison downstream residuals. Failures never abort the
/// verification; a window whose integration blows up reports infinite
/// state error for its remaining points.
pub fn verify_reconstruction(
    trajectory: &Trajectory,
    gen: &LindbladGenerator,
    substeps: usize,
    excluded_intervals: &[(f64, f64)],
) -> Result<VerificationReport, EvolutionError> {
    let n = trajectory.len();
    if gen.len() != n {
        return Err(EvolutionError::GridMismatch {
            generator: gen.len(),
            trajectory: n,
        });
    }
    let times = trajectory.times();

    let excluded: Vec<bool> = times
        .iter()
        .map(|&t| excluded_intervals.iter().any(|&(a, b)| t >= a && t <= b))
        .collect();

    // Derivative of the input trajectory by finite differences; the rhs
    // residual is measured against this, not against any analytic model.
    let mats: Vec<&ComplexMatrix> = trajectory.states().iter().map(|s| s.matrix()).collect();
    let derivs = differentiate_matrices(times, &mats);

    let mut rhs_errors = vec![0.0_f64; n];
    for k in 0..n {
        let rhs = lindblad_rhs(mats[k], &gen.points[k].hamiltonian, &gen.points[k].terms)?;
        rhs_errors[k] = max_norm(&(rhs - &derivs[k]));
    }

    let mut state_errors = vec![0.0_f64; n];
    let mut trace_drift = 0.0_f64;
    let mut min_eigenvalue = f64::INFINITY;
    let mut window_start = None;
    #[allow(clippy::needless_range_loop)] // walks one past the end to flush the final window
    for k in 0..=n {
        let in_window = k < n && !excluded[k];

        if in_window && window_start.is_none() {
            window_start = Some(k);
        }
        if let Some(start) = window_start {
            if !in_window {
                // Re-integrate this window from the input state at its
                // first point.
                let mut rho = trajectory.states()[start].matrix().clone();
                let mut blown = false;
                for j in start..k {
                    if j > start
                        && !blown
                        && matches!(
                            step_interval(gen, j - 1, &mut rho, substeps.max(1)),
                            Err(EvolutionError::StepBlowup { .. })
                        )
                    {
                        blown = true;
                    }
                    if blown {
                        state_errors[j] = f64::INFINITY;
                        continue;
                    }
                    state_errors[j] = max_norm(&(&rho - mats[j]));
                    trace_drift = trace_drift.max((rho.trace() - Complex64::new(1.0, 0.0)).norm());
                    if let Ok(eig) = hermitian_eig(&rho) {
                        min_eigenvalue = min_eigenvalue.min(eig.eigenvalues[0]);
                    }
                }
                window_start = None;
            }
        }
    }

    let included = |k: &usize| !excluded[*k];
    let max_state_error = (0..n)
        .filter(included)
        .map(|k| state_errors[k])
        .fold(0.0_f64, f64::max);
    let max_rhs_error = (0..n)
        .filter(included)
        .map(|k| rhs_errors[k])
        .fold(0.0_f64, f64::max);

    let residuals = (0..n)
        .map(|k| PointResidual {
            t: times[k],
            rhs_error: rhs_errors[k],
            state_error: state_errors[k],
            excluded: excluded[k],
        })
        .collect();

    Ok(VerificationReport {
        max_state_error,
        max_rhs_error,
        trace_drift,
        min_eigenvalue,
        residuals,
        excluded_intervals: excluded_intervals.to_vec(),
    })
}
