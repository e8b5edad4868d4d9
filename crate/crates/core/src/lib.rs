//! Classical, quantum and no-signaling bounds over marginal-compatibility polytopes.

#![allow(clippy::needless_range_loop)]

pub mod causal;
pub mod config;
pub mod entropic;
pub mod error;
pub mod model;
pub mod opt;
pub mod oracle;
pub mod par;
pub mod polytope;
pub mod quantum;
pub mod sample;

pub use config::Tolerances;
pub use error::{Error, ErrorClass, Result};
