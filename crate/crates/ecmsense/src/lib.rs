//! Files, synthetic data, parallel execution and the pipeline behind the
//! `ecmsense` command line. The models themselves live in `ecmsense-core`.

pub mod config;
pub mod csvio;
pub mod error;
pub mod parallel;
pub mod pipeline;
pub mod synth;
pub mod tomlio;

pub use error::{Error, Result};
