//! Analytic reference trajectories and closed-form rate references.
//!
//! The centerpiece is the resonant Jaynes–Cummings atom: a two-level
//! system Rabi-oscillating against an initially empty cavity, with
//! `omega_c = omega_a = omega` and `hbar = Omega = 1`. Its reduced state
//! is known in closed form, and so are the rates of the state-dependent
//! master equation that reproduces it with either all-nonnegative or
//! all-nonpositive rates. Alongside it live a handful of elementary
//! models (amplitude damping, pure dephasing, unitary precession) used as
//! test inputs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::eigenflow::Trajectory;
use crate::evolution::RatedOperator;
use crate::matrix::{basis_matrix, validate_density, ComplexMatrix, DensityState};
use crate::synthesis::Sign;

/// Half-width of the guard band around odd multiples of pi inside which
/// the nonnegative gamma_1 = tan(t/2) reference is treated as singular.
pub const JC_SINGULARITY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid initial state: {reason}")]
    InvalidInitialState { reason: String },
    #[error(
        "reference rate singular at t = {t}: eigenvalue reaches zero at an odd multiple of pi"
    )]
    SingularAt { t: f64 },
    #[error("closed-form rates require a diagonal initial state (rho12(0) = 0)")]
    NonDiagonalInitialState,
    #[error("unknown model '{name}'; available: {available}")]
    UnknownModel { name: String, available: String },
    #[error("invalid parameter '{key}' for model '{model}'")]
    InvalidParameter { model: String, key: String },
}

/// Parameters of the resonant Jaynes–Cummings atom, cavity initially in
/// vacuum. Units: `hbar = Omega = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JCParams {
    /// Common atom/cavity frequency.
    pub omega: f64,
    /// Initial excited-state population `rho_11(0)`.
    pub rho11_0: f64,
    /// Initial coherence `rho_12(0)`.
    pub rho12_0: Complex64,
}

impl Default for JCParams {
    fn default() -> Self {
        JCParams {
            omega: 1.0,
            rho11_0: 1.0,
            rho12_0: Complex64::new(0.0, 0.0),
        }
    }
}

impl JCParams {
    /// The initial matrix implied by the parameters.
    pub fn initial_matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(self.rho11_0, 0.0);
        m[(0, 1)] = self.rho12_0;
        m[(1, 0)] = self.rho12_0.conj();
        m[(1, 1)] = Complex64::new(1.0 - self.rho11_0, 0.0);
        m
    }

    fn validate(&self) -> Result<(), ModelError> {
        validate_density(&self.initial_matrix(), 1e-9).map_err(|e| {
            ModelError::InvalidInitialState {
                reason: e.to_string(),
            }
        })?;
        Ok(())
    }
}

/// Reduced atom state at time `t`:
/// populations follow `rho_11(0) cos^2(t/2)`, coherences pick up
/// `cos(t/2) e^{-i omega t}`.
pub fn jc_exact(params: &JCParams, t: f64) -> Result<DensityState, ModelError> {
    params.validate()?;
    Ok(DensityState::from_matrix_unchecked(
        jc_state_matrix(params, t),
        1e-9,
    ))
}

fn jc_state_matrix(params: &JCParams, t: f64) -> ComplexMatrix {
    let half = (t / 2.0).cos();
    let p11 = params.rho11_0 * half * half;
    let coherence = params.rho12_0 * half * Complex64::from_polar(1.0, -params.omega * t);
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(p11, 0.0);
    m[(0, 1)] = coherence;
    m[(1, 0)] = coherence.conj();
    m[(1, 1)] = Complex64::new(1.0 - p11, 0.0);
    m
}

/// Analytic time derivative of [`jc_exact`].
pub fn jc_derivative(params: &JCParams, t: f64) -> ComplexMatrix {
    let half = t / 2.0;
    let p11_dot = -params.rho11_0 * half.cos() * half.sin();
    let phase = Complex64::from_polar(1.0, -params.omega * t);
    let coherence_dot = params.rho12_0
        * phase
        * (Complex64::new(-0.5 * half.sin(), 0.0)
            + Complex64::new(half.cos(), 0.0) * Complex64::new(0.0, -params.omega));
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(p11_dot, 0.0);
    m[(0, 1)] = coherence_dot;
    m[(1, 0)] = coherence_dot.conj();
    m[(1, 1)] = Complex64::new(-p11_dot, 0.0);
    m
}

/// Closed-form rate reference for the diagonal Jaynes–Cummings case.
///
/// With `lambda_1(t) = rho_11(0) cos^2(t/2)` the two candidate rates are
/// `-lambda_1_dot / lambda_1 = tan(t/2)` (the sigma_minus channel) and
/// `lambda_1_dot / (1 - lambda_1) = alpha(t)` (the sigma_plus channel).
/// A sign prescription keeps whichever candidate carries that sign on
/// each interval between multiples of pi and zeroes the other.
#[derive(Debug, Clone, Copy)]
pub struct JCRateReference {
    params: JCParams,
}

impl JCRateReference {
    /// Closed forms hold only for diagonal initial states.
    pub fn new(params: JCParams) -> Result<Self, ModelError> {
        params.validate()?;
        if params.rho12_0.norm() != 0.0 {
            return Err(ModelError::NonDiagonalInitialState);
        }
        Ok(JCRateReference { params })
    }

    /// Tracked first eigenvalue `lambda_1(t)`.
    pub fn lambda1(&self, t: f64) -> f64 {
        self.params.rho11_0 * (t / 2.0).cos().powi(2)
    }

    /// `d/dt lambda_1`.
    pub fn lambda1_dot(&self, t: f64) -> f64 {
        -self.params.rho11_0 * (t / 2.0).cos() * (t / 2.0).sin()
    }

    /// `alpha(t) = rho_11(0) sin t / (rho_11(0) cos t + rho_11(0) - 2)`,
    /// the sigma_plus-channel rate candidate.
    pub fn alpha(&self, t: f64) -> f64 {
        let r = self.params.rho11_0;
        r * t.sin() / (r * t.cos() + r - 2.0)
    }

    /// The pair `(gamma_1, gamma_2)` for the requested sign prescription.
    ///
    /// Piecewise definitions use half-open intervals `[n pi, (n+1) pi)`:
    /// a boundary point takes the formula of the interval it opens.
    /// The nonnegative `gamma_1 = tan(t/2)` branch diverges at odd
    /// multiples of pi; within [`JC_SINGULARITY_EPS`] of one, the request
    /// is refused as singular.
    pub fn rates(&self, t: f64, sign: Sign) -> Result<(f64, f64), ModelError> {
        // max/min against 0 also turn the 0/0 of a stationary state
        // (rho11(0) = 0) into a zero rate.
        let tan_candidate = -self.lambda1_dot(t) / self.lambda1(t);
        let alpha_candidate = self.alpha(t);
        // Interval parity: [2n pi, (2n+1) pi) is "even".
        let k = (t / PI).floor();
        let even = (k as i64).rem_euclid(2) == 0;
        match sign {
            Sign::NonNegative => {
                // tan(t/2) blows up at odd multiples of pi; guard a band
                // around them on both sides.
                let odd_distance = (t.rem_euclid(2.0 * PI) - PI).abs();
                if odd_distance <= JC_SINGULARITY_EPS && self.params.rho11_0 != 0.0 {
                    return Err(ModelError::SingularAt { t });
                }
                if even {
                    Ok((tan_candidate.max(0.0), 0.0))
                } else {
                    Ok((0.0, alpha_candidate.max(0.0)))
                }
            }
            Sign::NonPositive => {
                if even {
                    Ok((0.0, alpha_candidate.min(0.0)))
                } else {
                    Ok((tan_candidate.min(0.0), 0.0))
                }
            }
        }
    }
}

/// Convenience wrapper around [`JCRateReference::rates`].
pub fn jc_reference_rates(params: &JCParams, t: f64, sign: Sign) -> Result<(f64, f64), ModelError> {
    JCRateReference::new(*params)?.rates(t, sign)
}

/// An analytic trajectory source: state and derivative at any time,
/// plus the generating `(H, terms)` pair when the model has a fixed
/// Lindblad generator.
pub trait TrajectoryModel {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn state(&self, t: f64) -> ComplexMatrix;
    fn state_derivative(&self, t: f64) -> ComplexMatrix;
    /// Constant generator reproducing the model, when one exists. The
    /// Jaynes–Cummings atom has none; constructing a state-dependent one
    /// is this crate's whole job.
    fn generator(&self) -> Option<(ComplexMatrix, Vec<RatedOperator>)> {
        None
    }
}

/// Sample a model on a grid, attaching its analytic derivatives.
pub fn sample_model(
    model: &dyn TrajectoryModel,
    times: &[f64],
) -> Result<Trajectory, crate::eigenflow::EigenflowError> {
    let states = times
        .iter()
        .map(|&t| DensityState::from_matrix_unchecked(model.state(t), 1e-9))
        .collect();
    let derivatives = times.iter().map(|&t| model.state_derivative(t)).collect();
    Trajectory::with_derivatives(times.to_vec(), states, derivatives)
}

struct JaynesCummings {
    params: JCParams,
}

impl TrajectoryModel for JaynesCummings {
    fn name(&self) -> &'static str {
        "jc"
    }

    fn dim(&self) -> usize {
        2
    }

    fn state(&self, t: f64) -> ComplexMatrix {
        jc_state_matrix(&self.params, t)
    }

    fn state_derivative(&self, t: f64) -> ComplexMatrix {
        jc_derivative(&self.params, t)
    }
}

struct AmplitudeDamping {
    gamma: f64,
    rho11_0: f64,
    rho12_0: Complex64,
}

impl TrajectoryModel for AmplitudeDamping {
    fn name(&self) -> &'static str {
        "amplitude_damping"
    }

    fn dim(&self) -> usize {
        2
    }

    fn state(&self, t: f64) -> ComplexMatrix {
        let p11 = self.rho11_0 * (-self.gamma * t).exp();
        let coh = self.rho12_0 * (-self.gamma * t / 2.0).exp();
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(p11, 0.0);
        m[(0, 1)] = coh;
        m[(1, 0)] = coh.conj();
        m[(1, 1)] = Complex64::new(1.0 - p11, 0.0);
        m
    }

    fn state_derivative(&self, t: f64) -> ComplexMatrix {
        let p11_dot = -self.gamma * self.rho11_0 * (-self.gamma * t).exp();
        let coh_dot = self.rho12_0 * (-self.gamma / 2.0) * (-self.gamma * t / 2.0).exp();
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(p11_dot, 0.0);
        m[(0, 1)] = coh_dot;
        m[(1, 0)] = coh_dot.conj();
        m[(1, 1)] = Complex64::new(-p11_dot, 0.0);
        m
    }

    fn generator(&self) -> Option<(ComplexMatrix, Vec<RatedOperator>)> {
        Some((
            ComplexMatrix::zeros(2, 2),
            vec![RatedOperator {
                operator: basis_matrix(2, 1, 0),
                rate: self.gamma,
            }],
        ))
    }
}

struct Dephasing {
    gamma: f64,
    rho11_0: f64,
    rho12_0: Complex64,
}

impl Dephasing {
    fn sigma_z() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(-1.0, 0.0);
        m
    }
}

impl TrajectoryModel for Dephasing {
    fn name(&self) -> &'static str {
        "dephasing"
    }

    fn dim(&self) -> usize {
        2
    }

    fn state(&self, t: f64) -> ComplexMatrix {
        // sigma_z rho sigma_z - rho kills coherences at rate 2 gamma.
        let coh = self.rho12_0 * (-2.0 * self.gamma * t).exp();
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(self.rho11_0, 0.0);
        m[(0, 1)] = coh;
        m[(1, 0)] = coh.conj();
        m[(1, 1)] = Complex64::new(1.0 - self.rho11_0, 0.0);
        m
    }

    fn state_derivative(&self, t: f64) -> ComplexMatrix {
        let coh_dot = self.rho12_0 * (-2.0 * self.gamma) * (-2.0 * self.gamma * t).exp();
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = coh_dot;
        m[(1, 0)] = coh_dot.conj();
        m
    }

    fn generator(&self) -> Option<(ComplexMatrix, Vec<RatedOperator>)> {
        Some((
            ComplexMatrix::zeros(2, 2),
            vec![RatedOperator {
                operator: Self::sigma_z(),
                rate: self.gamma,
            }],
        ))
    }
}

struct UnitaryPrecession {
    omega: f64,
}

impl UnitaryPrecession {
    fn hamiltonian(&self) -> ComplexMatrix {
        let mut h = ComplexMatrix::zeros(2, 2);
        h[(0, 0)] = Complex64::new(self.omega / 2.0, 0.0);
        h[(1, 1)] = Complex64::new(-self.omega / 2.0, 0.0);
        h
    }
}

impl TrajectoryModel for UnitaryPrecession {
    fn name(&self) -> &'static str {
        "unitary"
    }

    fn dim(&self) -> usize {
        2
    }

    fn state(&self, t: f64) -> ComplexMatrix {
        // |+><+| precessing about z at omega.
        let coh = Complex64::from_polar(0.5, -self.omega * t);
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = coh;
        m[(1, 0)] = coh.conj();
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m
    }

    fn state_derivative(&self, t: f64) -> ComplexMatrix {
        let coh_dot =
            Complex64::from_polar(0.5, -self.omega * t) * Complex64::new(0.0, -self.omega);
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 1)] = coh_dot;
        m[(1, 0)] = coh_dot.conj();
        m
    }

    fn generator(&self) -> Option<(ComplexMatrix, Vec<RatedOperator>)> {
        Some((self.hamiltonian(), Vec::new()))
    }
}

/// Names accepted by [`library_model`], with their parameter keys.
pub fn library_model_names() -> &'static [(&'static str, &'static str)] {
    &[
        ("amplitude_damping", "gamma, rho11_0, rho12_re, rho12_im"),
        ("dephasing", "gamma, rho11_0, rho12_re, rho12_im"),
        ("jc", "omega, rho11_0, rho12_re, rho12_im"),
        ("unitary", "omega"),
    ]
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

/// Construct a built-in model by name from a key-value parameter map.
///
/// Unknown names and leftover (misspelled) parameter keys are rejected.
pub fn library_model(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Box<dyn TrajectoryModel>, ModelError> {
    let mut params = params.clone();
    let model: Box<dyn TrajectoryModel> = match name {
        "jc" => {
            let jc = JCParams {
                omega: take(&mut params, "omega", 1.0),
                rho11_0: take(&mut params, "rho11_0", 1.0),
                rho12_0: Complex64::new(
                    take(&mut params, "rho12_re", 0.0),
                    take(&mut params, "rho12_im", 0.0),
                ),
            };
            jc.validate()?;
            Box::new(JaynesCummings { params: jc })
        }
        "amplitude_damping" => {
            let model = AmplitudeDamping {
                gamma: take(&mut params, "gamma", 0.5),
                rho11_0: take(&mut params, "rho11_0", 1.0),
                rho12_0: Complex64::new(
                    take(&mut params, "rho12_re", 0.0),
                    take(&mut params, "rho12_im", 0.0),
                ),
            };
            validate_density(&model.state(0.0), 1e-9).map_err(|e| {
                ModelError::InvalidInitialState {
                    reason: e.to_string(),
                }
            })?;
            Box::new(model)
        }
        "dephasing" => {
            let model = Dephasing {
                gamma: take(&mut params, "gamma", 0.5),
                rho11_0: take(&mut params, "rho11_0", 0.7),
                rho12_0: Complex64::new(
                    take(&mut params, "rho12_re", 0.25),
                    take(&mut params, "rho12_im", 0.0),
                ),
            };
            validate_density(&model.state(0.0), 1e-9).map_err(|e| {
                ModelError::InvalidInitialState {
                    reason: e.to_string(),
                }
            })?;
            Box::new(model)
        }
        "unitary" => Box::new(UnitaryPrecession {
            omega: take(&mut params, "omega", 1.0),
        }),
        other => {
            return Err(ModelError::UnknownModel {
                name: other.to_string(),
                available: library_model_names()
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", "),
            })
        }
    };
    if let Some((key, _)) = params.pop_first() {
        return Err(ModelError::InvalidParameter {
            model: name.to_string(),
            key,
        });
    }
    Ok(model)
}
