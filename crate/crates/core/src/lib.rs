//! Model-based outlier detection for multi-way contingency tables.
//!
//! A base log-linear (toric) model is described by a design matrix; a cell,
//! a set of cells or a pattern of cells is an outlier when adding indicator
//! columns for it fits significantly better. Significance comes from the
//! likelihood-ratio statistic, judged either against its chi-square limit or
//! exactly, by a Metropolis-Hastings walk over the tables that share the
//! base model's sufficient statistic. The walk's moves are a Markov basis,
//! computed here from the design matrix with a binomial Gröbner engine.

pub mod detect;
pub mod error;
pub mod exact;
pub mod fit;
pub mod lattice;
pub mod models;
pub mod tables;
pub mod toric;

pub use error::{Error, Result};
pub use models::{DesignMatrix, ModelSpec, ModelSpecFile};
pub use tables::{Table, TableFormat, TableShape};
