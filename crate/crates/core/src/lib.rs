//! Robust least-squares learning over finite function classes: median-of-means
//! estimators, generic chaining, risk oracles, a home-match tournament, and a
//! benchmark harness for heavy-tailed synthetic problems.

pub mod bench_harness;
pub mod chaining;
pub mod error;
pub mod function_class;
pub mod mean_estimators;
pub mod risk_oracles;
pub mod rng;
pub mod tournament;

pub use error::{Error, Result};
