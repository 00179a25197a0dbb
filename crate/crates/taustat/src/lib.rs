//! Spatiotemporal clustering inference with the tau statistic.
//!
//! The tau statistic compares the odds of finding a temporally related case
//! pair within a distance annulus against the background odds at any
//! distance. This crate implements the statistic itself together with the
//! two inference steps that use it correctly:
//!
//! 1. a graphical hypothesis test of "no clustering" built from time-mark
//!    permutations and an extreme-rank global envelope ([`envelope`]), and
//! 2. clustering-range estimation with spatial-bootstrap confidence
//!    intervals ([`bootstrap`], [`interval`]), run only after the test has
//!    found evidence of clustering.
//!
//! Modules follow the pipeline: [`model`] holds the domain types, [`pairs`]
//! the pairwise distance/relatedness kernel every other computation reads,
//! [`tau`] the estimator and its bootstrap-replicate variants, and
//! [`oracle`] naive reference implementations used for validation.

pub mod bootstrap;
pub mod envelope;
pub mod error;
pub mod interval;
pub mod model;
mod normal;
pub mod oracle;
pub mod pairs;
pub mod rng;
pub mod synth;
pub mod tau;

pub use error::TauError;
pub use model::{
    CaseRecord, CaseSet, CurveProvenance, DistanceBand, DistanceBandSet, RelatednessRule, TauCurve,
};
pub use rng::RngPolicy;
