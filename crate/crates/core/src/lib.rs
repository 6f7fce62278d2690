//! Rewrite any finite-dimensional open-quantum-system trajectory ρ(t) as a
//! state-dependent Lindblad master equation whose rates carry signs of your
//! choosing, then verify the construction by re-integrating it.
//!
//! The pipeline has four stages:
//!
//! 1. [`eigenflow`] tracks a smooth, gauge-fixed eigendecomposition of ρ(t)
//!    along the time grid and builds the state-dependent Hamiltonian H(t).
//! 2. [`synthesis`] solves the eigenvalue-flux compensation problem at each
//!    grid point, producing at most d−1 two-level jump channels whose rates
//!    obey a prescribed [`synthesis::SignPolicy`].
//! 3. [`evolution`] evaluates and integrates the assembled generator and
//!    checks closed-loop reconstruction against the input trajectory.
//! 4. [`models`] supplies analytic reference trajectories, chiefly the
//!    Jaynes–Cummings atom, used as golden inputs.
//!
//! [`pipeline`] glues the stages together behind one call.

pub mod eigenflow;
pub mod evolution;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod synthesis;

#[cfg(doctest)]
mod book;

pub use matrix::{ComplexMatrix, DensityState};
