//! Numerical laboratory for minimum-norm interpolation under temporally
//! dependent Gaussian designs.
//!
//! The pipeline is: build a spatial spectrum ([`spectra`]) and temporal
//! covariances ([`temporal`]), draw a design and response ([`sampler`]), fit
//! the minimum-norm interpolator ([`interpolator`]), evaluate its exact risk
//! and the bias / variance terms ([`risk`]), compare against bound shapes
//! ([`bounds`]), and run Monte Carlo checks ([`verify`]) or full sweeps
//! ([`experiment`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod interpolator;
pub mod io;
pub mod numerics;
pub mod risk;
pub mod rng;
pub mod sampler;
pub mod spectra;
pub mod temporal;
pub mod verify;

pub use bounds::Constants;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ResultRecord};
pub use sampler::{BetaSpec, Problem, ProblemSpec, RegressionInstance};
pub use spectra::{KStar, ScaledPower, SpatialSpectrum, SpectrumFamily, SpectrumSpec, TruncationRule};
pub use temporal::{NoiseSpec, TemporalCov, TemporalFamily, TemporalSpec, ToeplitzCov};
pub use verify::{CheckReport, CheckSpec, Verdict};
