//! Perspectivist evaluation of literary texts: reference-less text features,
//! per-reader pairwise preference models and clustering of the resulting
//! evaluative profiles.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod io;
pub mod learners;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod prefs;
pub mod seed;
pub mod synth;
pub mod topic;

pub use error::{Error, Result};
