//! Eigenvalue-flux compensation: determine jump operators and rates of
//! prescribed signs that reproduce a given diagonal-frame derivative.
//!
//! In the frame where `rho_D = diag(p_1..p_d)` and
//! `d/dt rho_D = diag(f_1..f_d)`, every elementary jump operator
//! `a = |i><j|` (or its adjoint) generates a traceless two-entry change of
//! the diagonal. The compensation loop pairs eigenvalues losing weight
//! against eigenvalues gaining weight and routes the flux through one such
//! channel per round, solving for the single rate that delivers it. For
//! each transfer both channel orientations are available and carry
//! opposite rate signs, so the sign of every synthesized rate can be
//! chosen freely. At most `d - 1` rounds, hence at most `d - 1` channels,
//! are ever needed.

use thiserror::Error;

use crate::eigenflow::EigenFrame;
use crate::evolution::{EvolutionError, GeneratorPoint, LindbladGenerator, RatedOperator};
use crate::matrix::{basis_matrix, ComplexMatrix};

/// Default denominator threshold below which a required rate is singular.
pub const EPS_P_DEFAULT: f64 = 1e-10;

/// Accepted bound on `|sum_i f_i|`.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(
        "singular rate: moving flux {flux:.3e} from state {source_index} to state {target_index} \
         requires dividing by eigenvalue {denominator:.3e}"
    )]
    SingularRate {
        target_index: usize,
        source_index: usize,
        flux: f64,
        denominator: f64,
    },
    #[error("eigenvalue rates do not balance: |sum f_i| = {sum:.3e} exceeds {tol:.3e}")]
    InfeasibleTrace { sum: f64, tol: f64 },
    #[error("per-round sign list exhausted at round {round}; it must hold at least d-1 entries")]
    PolicyExhausted { round: usize },
    #[error("eigenvalue p[{index}] = {value:.3e} is negative beyond tolerance")]
    NegativeEigenvalue { index: usize, value: f64 },
    #[error("problem vectors disagree: {p_len} eigenvalues vs {f_len} rates")]
    ShapeMismatch { p_len: usize, f_len: usize },
    #[error("grid mismatch: {frames} frames, {terms} term lists, {hamiltonians} Hamiltonians")]
    GridMismatch {
        frames: usize,
        terms: usize,
        hamiltonians: usize,
    },
    #[error("assembled generator rejected: {0}")]
    Assemble(#[from] EvolutionError),
}

/// A two-level jump operator `a = |target><source|` (or its adjoint),
/// identified by the canonically ordered index pair `source < target`
/// plus a direction flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JumpSpec {
    target: usize,
    source: usize,
    dagger: bool,
    dim: usize,
}

impl JumpSpec {
    /// Indices are zero-based and must satisfy `source < target < dim`.
    pub fn new(target: usize, source: usize, dagger: bool, dim: usize) -> Option<Self> {
        (source < target && target < dim).then_some(JumpSpec {
            target,
            source,
            dagger,
            dim,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn dagger(&self) -> bool {
        self.dagger
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The operator as a matrix: `|target><source|`, or `|source><target|`
    /// when daggered.
    pub fn matrix(&self) -> ComplexMatrix {
        if self.dagger {
            basis_matrix(self.dim, self.source, self.target)
        } else {
            basis_matrix(self.dim, self.target, self.source)
        }
    }

    /// All `d(d-1)` two-level channels in dimension `dim`, canonically
    /// ordered: pairs by (source, target), plain before daggered.
    pub fn all_channels(dim: usize) -> Vec<JumpSpec> {
        let mut out = Vec::with_capacity(dim * (dim - 1));
        for source in 0..dim {
            for target in source + 1..dim {
                out.push(JumpSpec {
                    target,
                    source,
                    dagger: false,
                    dim,
                });
                out.push(JumpSpec {
                    target,
                    source,
                    dagger: true,
                    dim,
                });
            }
        }
        out
    }
}

/// A jump operator paired with its synthesized rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatedTerm {
    pub spec: JumpSpec,
    pub rate: f64,
}

/// Required sign of one synthesized rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    NonNegative,
    NonPositive,
}

/// Prescription of the required rate signs, globally or per compensation
/// round. A per-round list must hold at least `d - 1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignPolicy {
    AllNonnegative,
    AllNonpositive,
    PerRound(Vec<Sign>),
}

impl SignPolicy {
    fn sign(&self, round: usize) -> Option<Sign> {
        match self {
            SignPolicy::AllNonnegative => Some(Sign::NonNegative),
            SignPolicy::AllNonpositive => Some(Sign::NonPositive),
            SignPolicy::PerRound(signs) => signs.get(round).copied(),
        }
    }
}

/// Behavior when a required denominator falls below `eps_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularityMode {
    /// Fail loudly with [`SynthesisError::SingularRate`].
    Error,
    /// Clamp rate magnitudes to the given bound and record the flux the
    /// clamped channel failed to deliver.
    Cap(f64),
}

/// One grid point of the rate-determination problem: eigenvalues `p`,
/// eigenvalue rates `f` with `sum f = 0`, and the zero/singularity
/// thresholds.
#[derive(Debug, Clone)]
pub struct RateProblem {
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    /// Entries with `|f_i| <= eps_f` are treated as zero.
    pub eps_f: f64,
    /// Denominators at or below `eps_p` are singular.
    pub eps_p: f64,
}

impl RateProblem {
    /// Build a problem with the default thresholds:
    /// `eps_f = 1e-12 * max(1, max |f|)` and `eps_p = 1e-10`.
    pub fn new(p: Vec<f64>, f: Vec<f64>) -> Self {
        let scale = f.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
        RateProblem {
            p,
            f,
            eps_f: 1e-12 * scale,
            eps_p: EPS_P_DEFAULT,
        }
    }

    pub fn with_eps(mut self, eps_f: f64, eps_p: f64) -> Self {
        self.eps_f = eps_f;
        self.eps_p = eps_p;
        self
    }
}

/// Diagonal change produced by one rated channel acting on `diag(p)`:
/// a two-entry traceless vector.
///
/// For `a = |t><s|` the action is `rate * p_s * (e_t - e_s)`; for the
/// adjoint it is `-rate * p_t * (e_t - e_s)`.
pub fn channel_action(spec: &JumpSpec, rate: f64, p: &[f64]) -> Vec<f64> {
    let mut delta = vec![0.0; p.len()];
    if spec.dagger {
        let x = rate * p[spec.target];
        delta[spec.source] = x;
        delta[spec.target] = -x;
    } else {
        let x = rate * p[spec.source];
        delta[spec.target] = x;
        delta[spec.source] = -x;
    }
    delta
}

/// Outcome of a compensation run, including cap-mode diagnostics.
#[derive(Debug, Clone)]
pub struct Compensation {
    pub terms: Vec<RatedTerm>,
    /// Total eigenvalue flux a capped channel failed to deliver; zero
    /// unless [`SingularityMode::Cap`] intervened.
    pub flux_deficit: f64,
    pub capped: bool,
}

/// Solve the compensation problem under [`SingularityMode::Error`].
pub fn compensate(
    problem: &RateProblem,
    policy: &SignPolicy,
) -> Result<Vec<RatedTerm>, SynthesisError> {
    compensate_with(problem, policy, SingularityMode::Error).map(|c| c.terms)
}

/// Solve the compensation problem: route negative eigenvalue flux to
/// positive flux, one channel per round, with the rate sign demanded by
/// `policy`.
///
/// Each round pairs the most negative residual against the most positive
/// one (ties to the lower index) and moves `g = min(|f_source|, f_sink)`.
/// A nonnegative rate divides by `p_source`, a nonpositive one by
/// `p_sink`; when the preferred pair would divide by an eigenvalue at or
/// below `eps_p`, partners with viable denominators are tried first. At
/// least one residual is retired per round, so at most `d - 1` terms are
/// produced.
pub fn compensate_with(
    problem: &RateProblem,
    policy: &SignPolicy,
    mode: SingularityMode,
) -> Result<Compensation, SynthesisError> {
    let d = problem.p.len();
    if problem.f.len() != d {
        return Err(SynthesisError::ShapeMismatch {
            p_len: d,
            f_len: problem.f.len(),
        });
    }
    for (i, &pi) in problem.p.iter().enumerate() {
        if pi < -TRACE_TOL {
            return Err(SynthesisError::NegativeEigenvalue {
                index: i,
                value: pi,
            });
        }
    }
    let sum: f64 = problem.f.iter().sum();
    if sum.abs() > TRACE_TOL {
        return Err(SynthesisError::InfeasibleTrace {
            sum: sum.abs(),
            tol: TRACE_TOL,
        });
    }

    let mut residual = problem.f.clone();
    let mut terms = Vec::new();
    let mut flux_deficit = 0.0;
    let mut capped = false;

    for round in 0..d {
        let mut source = None;
        let mut sink = None;
        for (i, &r) in residual.iter().enumerate() {
            if r < -problem.eps_f && source.is_none_or(|s: usize| r < residual[s]) {
                source = Some(i);
            }
            if r > problem.eps_f && sink.is_none_or(|s: usize| r > residual[s]) {
                sink = Some(i);
            }
        }
        let (Some(mut s), Some(mut r)) = (source, sink) else {
            break;
        };

        let sign = policy
            .sign(round)
            .ok_or(SynthesisError::PolicyExhausted { round })?;

        // The flux source's eigenvalue backs a nonnegative rate, the
        // sink's a nonpositive one. Prefer partners whose denominator is
        // viable before declaring the transfer singular.
        let denominator_holder = |s: usize, r: usize| match sign {
            Sign::NonNegative => s,
            Sign::NonPositive => r,
        };
        if problem.p[denominator_holder(s, r)] <= problem.eps_p {
            let mut candidates: Vec<usize> = match sign {
                Sign::NonNegative => {
                    let mut v: Vec<usize> =
                        (0..d).filter(|&i| residual[i] < -problem.eps_f).collect();
                    v.sort_by(|&a, &b| residual[a].partial_cmp(&residual[b]).unwrap());
                    v
                }
                Sign::NonPositive => {
                    let mut v: Vec<usize> =
                        (0..d).filter(|&i| residual[i] > problem.eps_f).collect();
                    v.sort_by(|&a, &b| residual[b].partial_cmp(&residual[a]).unwrap());
                    v
                }
            };
            candidates.retain(|&i| problem.p[i] > problem.eps_p);
            match (candidates.first(), mode) {
                (Some(&alt), _) => match sign {
                    Sign::NonNegative => s = alt,
                    Sign::NonPositive => r = alt,
                },
                (None, SingularityMode::Error) => {
                    return Err(SynthesisError::SingularRate {
                        target_index: r,
                        source_index: s,
                        flux: (-residual[s]).min(residual[r]),
                        denominator: problem.p[denominator_holder(s, r)],
                    });
                }
                (None, SingularityMode::Cap(_)) => {}
            }
        }

        let outflow = -residual[s];
        let inflow = residual[r];
        let g = outflow.min(inflow);
        let denominator = problem.p[denominator_holder(s, r)];

        let mut magnitude = g / denominator;
        let mut delivered = g;
        if let SingularityMode::Cap(cap) = mode {
            if denominator <= problem.eps_p || magnitude > cap {
                magnitude = cap;
                delivered = cap * denominator.max(0.0);
                flux_deficit += g - delivered;
                capped = true;
            }
        }

        let rate = match sign {
            Sign::NonNegative => magnitude,
            Sign::NonPositive => -magnitude,
        };
        let (hi, lo) = if r > s { (r, s) } else { (s, r) };
        let dagger = match sign {
            Sign::NonNegative => r < s,
            Sign::NonPositive => r > s,
        };
        let spec = JumpSpec::new(hi, lo, dagger, d).expect("hi > lo by construction");
        terms.push(RatedTerm { spec, rate });

        if delivered == g {
            residual[s] += g;
            residual[r] -= g;
        } else {
            // Retire the side that bounded the transfer; whatever it
            // could not deliver is already accounted as deficit.
            if outflow <= inflow {
                residual[s] = 0.0;
                residual[r] -= delivered;
            } else {
                residual[r] = 0.0;
                residual[s] += delivered;
            }
        }
    }

    debug_assert!(terms.len() < d.max(1), "compensation exceeded d-1 rounds");
    Ok(Compensation {
        terms,
        flux_deficit,
        capped,
    })
}

/// Conjugate the per-point jump specs into the lab frame and bundle them
/// with the Hamiltonians into a time-indexed generator:
/// `A_t = U_t a U_t^dag`.
pub fn assemble_generator(
    frames: &[EigenFrame],
    terms: &[Vec<RatedTerm>],
    hamiltonians: &[ComplexMatrix],
) -> Result<LindbladGenerator, SynthesisError> {
    if frames.len() != terms.len() || frames.len() != hamiltonians.len() {
        return Err(SynthesisError::GridMismatch {
            frames: frames.len(),
            terms: terms.len(),
            hamiltonians: hamiltonians.len(),
        });
    }
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let points: Vec<GeneratorPoint> = frames
        .iter()
        .zip(terms)
        .zip(hamiltonians)
        .map(|((frame, point_terms), h)| {
            let ops = point_terms
                .iter()
                .map(|term| RatedOperator {
                    operator: &frame.basis * term.spec.matrix() * frame.basis.adjoint(),
                    rate: term.rate,
                })
                .collect();
            GeneratorPoint {
                hamiltonian: h.clone(),
                terms: ops,
            }
        })
        .collect();
    Ok(LindbladGenerator::new(times, points)?)
}
