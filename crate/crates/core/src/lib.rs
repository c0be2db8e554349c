//! Stratified quasigeostrophic flow in a periodic channel cube driven by
//! colored stochastic and time-periodic surface flux, with tools for
//! cocycle checks, absorbing balls and pullback attractor estimates.

pub mod attractor;
pub mod config;
pub mod domain;
pub mod error;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod integrator;
pub mod io;
pub mod lift;
pub mod operators;
pub mod stats;
pub mod tridiag;
pub mod validation;

pub use domain::{build_vertical_operator, compute_lambda1, Domain, Grid, StratificationProfile, VerticalOperator};
pub use error::{QgError, Result};
pub use field::{PhysicalField, Shape, SpectralField};
pub use lift::{boundary_basis, precompute_mode_lifts, solve_lift, BoundaryFlux, BoundaryMode, LiftField, ModeKind};
pub use operators::{Norms, OperatorContext};
pub use attractor::{AttractorEstimate, InitialSampler, PullbackConfig, RadiusRule, SamplerRegistry};
pub use config::{parse_config, parse_config_with, SimConfig};
pub use forcing::{Forcing, InitMode, NoiseModel, NoisePath, OUBoundaryState, PeriodicFlux};
pub use integrator::{DiagnosticsRecord, Integrator, SimState, Terms, Trajectory};
