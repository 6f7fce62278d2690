//! End-to-end synthesis: from a sampled trajectory to a verified
//! state-dependent Lindblad generator.

use rayon::prelude::*;
use thiserror::Error;

use crate::eigenflow::{
    build_hamiltonian, rotating_frame_derivative, track_frames_with, EigenFrame, EigenflowError,
    FrameDerivatives, Gauge, Trajectory,
};
use crate::evolution::LindbladGenerator;
use crate::matrix::ComplexMatrix;
use crate::synthesis::{
    assemble_generator, compensate_with, RateProblem, RatedTerm, SignPolicy, SingularityMode,
    SynthesisError, EPS_P_DEFAULT,
};

/// Knobs of the synthesis pipeline. The defaults mirror the per-module
/// defaults: auto-scaled `eps_f` and off-diagonal tolerance, `eps_p` of
/// [`EPS_P_DEFAULT`], loud singularities, phase-fixed gauge.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub policy: SignPolicy,
    /// Fixed zero threshold for eigenvalue rates; `None` auto-scales per
    /// grid point.
    pub eps_f: Option<f64>,
    /// Singularity threshold for rate denominators.
    pub eps_p: f64,
    /// Bound on the rotating-frame off-diagonal residual; `None`
    /// auto-scales per grid point.
    pub tol_offdiag: Option<f64>,
    pub singularity: SingularityMode,
    pub gauge: Gauge,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            policy: SignPolicy::AllNonnegative,
            eps_f: None,
            eps_p: EPS_P_DEFAULT,
            tol_offdiag: None,
            singularity: SingularityMode::Error,
            gauge: Gauge::PhaseFixed,
        }
    }
}

impl PipelineConfig {
    pub fn with_policy(policy: SignPolicy) -> Self {
        PipelineConfig {
            policy,
            ..Default::default()
        }
    }
}

/// Where and why a rate was singular.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPoint {
    pub t: f64,
    pub target_index: usize,
    pub source_index: usize,
    pub flux: f64,
    pub denominator: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Eigenflow(#[from] EigenflowError),
    #[error("synthesis failed at t = {t}: {error}")]
    Synthesis {
        t: f64,
        #[source]
        error: SynthesisError,
    },
    #[error(
        "singular rates on {} grid interval(s); first at t = {} \
         (flux {:.3e} from state {} to state {} over eigenvalue {:.3e})",
        intervals.len(), first.t, first.flux, first.source_index, first.target_index, first.denominator
    )]
    SingularRates {
        intervals: Vec<(f64, f64)>,
        first: SingularPoint,
    },
}

/// A synthesized state-dependent generator together with the intermediate
/// frame data it was built from.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub frames: Vec<EigenFrame>,
    pub hamiltonians: Vec<ComplexMatrix>,
    pub flows: Vec<FrameDerivatives>,
    /// Jump-spec-level rated terms per grid point.
    pub terms: Vec<Vec<RatedTerm>>,
    pub generator: LindbladGenerator,
    /// Grid intervals on which rates were clamped (cap mode only), padded
    /// by one grid step on each side.
    pub capped_intervals: Vec<(f64, f64)>,
    /// Total eigenvalue flux the clamped channels failed to deliver.
    pub flux_deficit: f64,
}

impl Synthesis {
    /// Count of (nonnegative, nonpositive) rates across the grid; rates
    /// within the sign slack of zero count for both.
    pub fn sign_counts(&self) -> (usize, usize) {
        let mut nonneg = 0;
        let mut nonpos = 0;
        for terms in &self.terms {
            for term in terms {
                if term.rate >= -1e-12 {
                    nonneg += 1;
                }
                if term.rate <= 1e-12 {
                    nonpos += 1;
                }
            }
        }
        (nonneg, nonpos)
    }

    pub fn total_terms(&self) -> usize {
        self.terms.iter().map(Vec::len).sum()
    }
}

/// Group flagged grid indices into maximal runs and pad each run by one
/// grid step on both sides: the underlying singularity lives somewhere in
/// the surrounding open interval, not exactly on a sample.
fn flagged_intervals(times: &[f64], flagged: &[usize]) -> Vec<(f64, f64)> {
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let n = times.len();
    for &k in flagged {
        run = match run {
            Some((a, b)) if k == b + 1 => Some((a, k)),
            Some((a, b)) => {
                intervals.push((times[a.saturating_sub(1)], times[(b + 1).min(n - 1)]));
                Some((k, k))
            }
            None => Some((k, k)),
        };
    }
    if let Some((a, b)) = run {
        intervals.push((times[a.saturating_sub(1)], times[(b + 1).min(n - 1)]));
    }
    // Padding can make neighbors touch; merge them.
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some((_, prev_b)) if a <= *prev_b => *prev_b = b.max(*prev_b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

enum PointOutcome {
    Ok {
        hamiltonian: ComplexMatrix,
        flow: FrameDerivatives,
        terms: Vec<RatedTerm>,
        capped: bool,
        deficit: f64,
    },
    Singular(SingularPoint),
}

/// Run the full synthesis pipeline on a trajectory.
///
/// Frame tracking is sequential; per-point Hamiltonian construction,
/// frame rotation and compensation fan out across a worker pool. In
/// [`SingularityMode::Error`] every grid point is still attempted so the
/// error can report all singular intervals at once; in cap mode the
/// affected intervals are returned in the result instead.
pub fn synthesize(
    trajectory: &Trajectory,
    config: &PipelineConfig,
) -> Result<Synthesis, PipelineError> {
    let frames = track_frames_with(trajectory, config.gauge)?;
    let derivatives = trajectory.state_derivatives();
    let times = trajectory.times();

    let outcomes: Vec<Result<PointOutcome, PipelineError>> = (0..trajectory.len())
        .into_par_iter()
        .map(|n| {
            let hamiltonian = build_hamiltonian(&frames, n)?;
            let flow = rotating_frame_derivative(
                trajectory.states()[n].matrix(),
                &derivatives[n],
                &frames[n],
                &hamiltonian,
                config.tol_offdiag,
            )?;
            let mut problem = RateProblem::new(
                frames[n].eigenvalues.iter().copied().collect(),
                flow.rates.iter().copied().collect(),
            );
            problem.eps_p = config.eps_p;
            if let Some(eps_f) = config.eps_f {
                problem.eps_f = eps_f;
            }
            match compensate_with(&problem, &config.policy, config.singularity) {
                Ok(compensation) => Ok(PointOutcome::Ok {
                    hamiltonian,
                    flow,
                    terms: compensation.terms,
                    capped: compensation.capped,
                    deficit: compensation.flux_deficit,
                }),
                Err(SynthesisError::SingularRate {
                    target_index,
                    source_index,
                    flux,
                    denominator,
                }) => Ok(PointOutcome::Singular(SingularPoint {
                    t: times[n],
                    target_index,
                    source_index,
                    flux,
                    denominator,
                })),
                Err(error) => Err(PipelineError::Synthesis { t: times[n], error }),
            }
        })
        .collect();

    let mut hamiltonians = Vec::with_capacity(outcomes.len());
    let mut flows = Vec::with_capacity(outcomes.len());
    let mut terms = Vec::with_capacity(outcomes.len());
    let mut capped_points = Vec::new();
    let mut singular_points = Vec::new();
    let mut flux_deficit = 0.0;
    for (n, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            PointOutcome::Ok {
                hamiltonian,
                flow,
                terms: t,
                capped,
                deficit,
            } => {
                if capped {
                    capped_points.push(n);
                }
                flux_deficit += deficit;
                hamiltonians.push(hamiltonian);
                flows.push(flow);
                terms.push(t);
            }
            PointOutcome::Singular(point) => singular_points.push((n, point)),
        }
    }

    if let Some((_, first)) = singular_points.first() {
        let indices: Vec<usize> = singular_points.iter().map(|(n, _)| *n).collect();
        return Err(PipelineError::SingularRates {
            intervals: flagged_intervals(times, &indices),
            first: first.clone(),
        });
    }

    let generator = assemble_generator(&frames, &terms, &hamiltonians)
        .map_err(|error| PipelineError::Synthesis { t: times[0], error })?;
    let capped_intervals = flagged_intervals(times, &capped_points);

    Ok(Synthesis {
        frames,
        hamiltonians,
        flows,
        terms,
        generator,
        capped_intervals,
        flux_deficit,
    })
}
