//! Width estimation for embeddings of hyperbolic-cross sequence spaces.

pub mod axiom_suite;
pub mod block_estimator;
pub mod cli;
pub mod error;
pub mod exact;
pub mod finite_widths;
pub mod hyperbolic_index;
pub mod mixed_norms;
pub mod par;
pub mod rate_table;

pub use error::{Error, Result};
