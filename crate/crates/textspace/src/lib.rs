//! Benchmark harness for 2-D spatializations of labeled text corpora.
//!
//! The pipeline: a labeled corpus becomes a document-term matrix (optionally
//! tf-idf weighted), a topic model turns it into a document representation,
//! a dimensionality reduction projects that to the plane, and a fixed set of
//! quality metrics scores the layout against the high-dimensional reference.
//! The runner sweeps hyperparameter grids over this pipeline into a results
//! table; the analysis module aggregates, correlates and summarizes it.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod models;
pub mod projection;
pub mod quality;
pub mod runner;
pub mod seeding;
pub mod sparse;

pub use error::{Error, Result};
