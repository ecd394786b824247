//! Motif discovery from per-base importance scores.
//!
//! The pipeline runs in three phases: seqlet extraction and metaclustering,
//! affinity computation and community detection per metacluster, and motif
//! postprocessing (spurious-split detection, merging, reassignment).

pub mod aggregate;
pub mod cluster;
pub mod coarse;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fine;
pub mod metacluster;
pub mod pipeline;
pub mod postprocess;
pub mod seqlets;
pub mod synth;
pub mod util;

pub use error::{ModiscoError, Result};
