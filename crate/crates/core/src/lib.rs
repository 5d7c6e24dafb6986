//! Non-dimensionalized accumulated-damage models for lumber reliability.
//!
//! The crate covers the whole workflow from dimensional analysis to model
//! comparison:
//!
//! * [`dimensions`] derives the dimensionless groups of a quantity system
//!   with exact rational arithmetic.
//! * [`damage`] solves the US and Canadian damage models for ramp-load
//!   failure times, with an ODE oracle for arbitrary load histories.
//! * [`likelihood`] defines the hierarchical random-effects model and its
//!   Monte-Carlo indicator likelihood.
//! * [`sampler`] runs pseudo-marginal Metropolis–Hastings under parallel
//!   tempering and estimates marginal likelihoods by thermodynamic
//!   integration.
//! * [`predictive`] draws posterior-predictive failure times and ECDF bands.
//! * [`io`] reads and writes datasets, configuration and run directories.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiations.

pub mod damage;
pub mod dimensions;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod ode;
pub mod predictive;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

/// Exact exponent type for dimensional analysis.
pub type Rational = num_rational::Ratio<i64>;

pub type UsEffects64 = damage::UsEffects<f64>;
pub type CanadianEffects64 = damage::CanadianEffects<f64>;
pub type UsEffects32 = damage::UsEffects<f32>;
pub type CanadianEffects32 = damage::CanadianEffects<f32>;
