//! Semiclassical purity decay of a particle in a chaotic billiard coupled to
//! a high-temperature bath.
//!
//! The library is organized bottom-up:
//!
//! - [`geometry`]: billiard tables and exact collision solving;
//! - [`dynamics`]: event-driven trajectories, Benettin Lyapunov exponents,
//!   mean free times;
//! - [`initial_state`]: Gaussian packets, Wigner sampling, bath parameters,
//!   and the dimensionless parameter groups of the analytic laws;
//! - [`decoherence`]: the pairwise decoherence exponent, the Monte Carlo
//!   purity estimator, and quadrature evaluators for the analytic separation
//!   models;
//! - [`models`]: closed-form purity laws;
//! - [`analysis`]: rate fitting, bath sweeps, ergodic averages.
//!
//! All randomness is driven by counter-mode streams keyed on (seed, index),
//! so every estimator is reproducible bit-for-bit regardless of worker count.

pub mod analysis;
pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod initial_state;
pub mod models;
pub mod vec2;

pub use analysis::{
    bath_sweep, ergodic_average, fit_decoherence_rate, ErgodicAverage, ErgodicMethod, RateFit,
    SweepResult, SweepRow, SweepSettings,
};
pub use decoherence::{
    decoherence_factor, integrate_sq_separation, purity_mc, purity_quadrature, Provenance,
    PuritySeries, SeparationIntegral, SeparationModel,
};
pub use dynamics::{
    lyapunov_benettin, mean_free_time, propagate, LyapunovEstimate, LyapunovSettings,
    MeanFreeTime, Trajectory,
};
pub use error::{Error, Result};
pub use geometry::{BilliardDomain, CollisionEvent, Ray};
pub use initial_state::{
    derived_params, BathParams, GaussianPacket, PhysicalConstants,
};
pub use models::{purity_eq21, purity_eq22, purity_eq23, purity_eq24, ModelParams};
pub use vec2::Vec2;
