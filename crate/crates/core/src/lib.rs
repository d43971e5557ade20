//! Computational toolkit for labor-market analytics from digital traces:
//! behavioral indicators from telecom event logs, directed-network spreading
//! and reciprocity, economic/job complexity indices, and the statistical
//! machinery around them (SOM, kriging, OLS/logit with simulation,
//! cross-validation, coarsened exact matching).

pub mod error;
pub mod complexity;
pub mod geo;
pub mod indicators;
pub mod io;
pub mod learn;
pub mod matching;
pub mod model;
pub mod netdyn;
pub mod stats;

pub use error::{Error, Result};
