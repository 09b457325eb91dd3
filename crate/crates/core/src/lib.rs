//! Generative model of a faculty hiring market.
//!
//! The pipeline turns raw hiring records into a directed institution
//! network, infers a prestige hierarchy from it, scores candidate
//! productivity with a topic model, and fits a stochastic matching model
//! whose simulated hiring histories can be checked against the observed one.

pub mod analysis;
pub mod checking;
pub mod data;
pub mod error;
pub mod fitting;
pub mod market;
pub mod productivity;
pub mod ranking;
pub mod seeds;
pub mod synth;

pub use error::{Error, Result};
