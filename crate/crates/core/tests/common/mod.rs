//! Shared fixtures for the integration suites: a seeded corpus of random
//! physical trajectories and an independent linear-system oracle for the
//! compensation output.
//!
//! Each integration test target pulls in the subset it needs.
#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lindblad_resign::eigenflow::Trajectory;
use lindblad_resign::evolution::{integrate, GeneratorPoint, LindbladGenerator, RatedOperator};
use lindblad_resign::matrix::{hermitize, max_norm, validate_density, ComplexMatrix};
use lindblad_resign::synthesis::{channel_action, JumpSpec, RatedTerm};

pub const CORPUS_SIZE: usize = 200;
pub const CORPUS_DT_COARSE: f64 = 1e-3;
pub const CORPUS_DT_FINE: f64 = 5e-4;
pub const CORPUS_SPAN: f64 = 0.15;

pub struct CorpusTrajectory {
    pub dim: usize,
    /// Sampled at `CORPUS_DT_FINE`.
    pub fine: Trajectory,
    /// Every second fine point, i.e. `CORPUS_DT_COARSE`.
    pub coarse: Trajectory,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_complex_matrix(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn random_initial_state(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let g = random_complex_matrix(rng, d);
    let positive = &g * g.adjoint();
    let normalized = &positive * c(1.0 / positive.trace().re, 0.0);
    // Blend with the maximally mixed state to keep eigenvalues well away
    // from zero over the whole integration span.
    let mixed = ComplexMatrix::identity(d, d) * c(0.5 / d as f64, 0.0);
    normalized * c(0.5, 0.0) + mixed
}

/// A bounded constant Lindblad generator: a small random Hamiltonian plus
/// up to two elementary jump channels with modest rates.
fn random_generator(rng: &mut ChaCha8Rng, d: usize, times: &[f64]) -> LindbladGenerator {
    let raw = random_complex_matrix(rng, d);
    let h_unscaled = hermitize(&raw);
    let h = &h_unscaled * c(0.15 / max_norm(&h_unscaled).max(1e-9), 0.0);

    let channels = JumpSpec::all_channels(d);
    let n_terms = rng.random_range(1..=2usize);
    let terms: Vec<RatedOperator> = (0..n_terms)
        .map(|_| {
            let spec = channels[rng.random_range(0..channels.len())];
            RatedOperator {
                operator: spec.matrix(),
                rate: rng.random_range(0.04..0.1),
            }
        })
        .collect();

    let point = GeneratorPoint {
        hamiltonian: h,
        terms,
    };
    LindbladGenerator::new(times.to_vec(), vec![point; times.len()]).unwrap()
}

fn grid(t0: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 + dt * k as f64).collect()
}

fn build_corpus() -> Vec<CorpusTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_1B4D);
    let fine_points = (CORPUS_SPAN / CORPUS_DT_FINE).round() as usize + 1;
    let dims = [2usize, 3, 4, 5];
    (0..CORPUS_SIZE)
        .map(|k| {
            let d = dims[k % dims.len()];
            let fine_times = grid(0.0, CORPUS_DT_FINE, fine_points);
            let generator = random_generator(&mut rng, d, &fine_times);
            let rho0 = validate_density(&random_initial_state(&mut rng, d), 1e-9).unwrap();
            let states = integrate(&rho0, &generator, 1).unwrap();

            // The corpus contract: eigenvalues stay well above the
            // singularity threshold everywhere.
            for s in &states {
                let eig = lindblad_resign::matrix::hermitian_eig(s.matrix()).unwrap();
                assert!(
                    eig.eigenvalues[0] >= 1e-3,
                    "corpus trajectory {k} lost eigenvalue floor: {}",
                    eig.eigenvalues[0]
                );
            }

            let coarse_times: Vec<f64> = fine_times.iter().copied().step_by(2).collect();
            let coarse_states = states.iter().cloned().step_by(2).collect();
            let fine = Trajectory::new(fine_times, states).unwrap();
            let coarse = Trajectory::new(coarse_times, coarse_states).unwrap();
            CorpusTrajectory {
                dim: d,
                fine,
                coarse,
            }
        })
        .collect()
}

pub fn corpus() -> &'static [CorpusTrajectory] {
    static CORPUS: OnceLock<Vec<CorpusTrajectory>> = OnceLock::new();
    CORPUS.get_or_init(build_corpus)
}

/// Independent oracle for one compensation output: build the dense linear
/// system over all `d(d-1)` elementary channels, check the returned sparse
/// solution satisfies it, and confirm by least squares that the system is
/// consistent at all.
///
/// The least-squares solve goes through the normal equations and the
/// symmetric eigensolver: nalgebra's thin SVD mis-factors some wide
/// matrices, so it is not trusted here.
pub fn assert_solves_dense_system(p: &[f64], f: &[f64], terms: &[RatedTerm], context: &str) {
    let d = p.len();
    let channels = JumpSpec::all_channels(d);
    let m = DMatrix::<f64>::from_fn(d, channels.len(), |row, col| {
        channel_action(&channels[col], 1.0, p)[row]
    });
    let scale = f.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));

    let mut x = DVector::<f64>::zeros(channels.len());
    for term in terms {
        let col = channels.iter().position(|spec| *spec == term.spec).unwrap();
        x[col] += term.rate;
    }
    let sparse_residual = (&m * x - DVector::from_column_slice(f)).amax();
    assert!(
        sparse_residual <= 1e-12 * scale,
        "{context}: sparse solution misses the linear system by {sparse_residual:.3e}"
    );

    let lsq = min_norm_solution(&m, f);
    let lsq_residual = (&m * lsq - DVector::from_column_slice(f)).amax();
    assert!(
        lsq_residual <= 1e-10 * scale,
        "{context}: least-squares oracle cannot solve the system (residual {lsq_residual:.3e})"
    );
}

/// Minimum-norm least-squares solution of the wide system `M x = f` via
/// `x = M^T (M M^T)^+ f`.
pub fn min_norm_solution(m: &DMatrix<f64>, f: &[f64]) -> DVector<f64> {
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    let cutoff = 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let mut y = eig.eigenvectors.transpose() * DVector::from_column_slice(f);
    for i in 0..y.len() {
        if eig.eigenvalues[i] > cutoff {
            y[i] /= eig.eigenvalues[i];
        } else {
            y[i] = 0.0;
        }
    }
    m.transpose() * (&eig.eigenvectors * y)
}

/// A `d`-dimensional purely unitary trajectory `e^{-iHt} rho0 e^{iHt}`
/// with analytic derivatives.
pub fn unitary_trajectory(seed: u64, d: usize, dt: f64, points: usize) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = random_complex_matrix(&mut rng, d);
    let h_unscaled = hermitize(&raw);
    let h = &h_unscaled * c(1.0 / max_norm(&h_unscaled).max(1e-9), 0.0);
    let rho0 = random_initial_state(&mut rng, d);

    let eig = lindblad_resign::matrix::hermitian_eig(&h).unwrap();
    let times = grid(0.0, dt, points);
    let mut states = Vec::with_capacity(points);
    let mut derivs = Vec::with_capacity(points);
    for &t in &times {
        let u = &eig.eigenvectors
            * ComplexMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::from_polar(1.0, -eig.eigenvalues[i] * t)
                } else {
                    c(0.0, 0.0)
                }
            })
            * eig.eigenvectors.adjoint();
        let rho = &u * &rho0 * u.adjoint();
        let comm = &h * &rho - &rho * &h;
        derivs.push(comm * c(0.0, -1.0));
        states.push(validate_density(&hermitize(&rho), 1e-8).unwrap());
    }
    Trajectory::with_derivatives(times, states, derivs).unwrap()
}
