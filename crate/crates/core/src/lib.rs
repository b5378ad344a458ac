//! Learning fuzzy spatial relations between labelled image segments, annotating
//! new images by solving a fuzzy constraint satisfaction problem, and
//! explaining every annotation in plain English.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline and the CLI use.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod fcsp;
pub mod fuzzy;
pub mod harness;
pub mod labels;
pub mod mining;
pub mod model;
pub mod scalar;
pub mod spatial;

pub use error::{Error, Result};
pub use fuzzy::{aggregate_min, alpha_cut, field_sum, FuzzyDegree, ScalarField};
pub use labels::Label;
pub use scalar::Scalar;

pub type Degree = fuzzy::FuzzyDegree<f64>;
pub type Field = fuzzy::ScalarField<f64>;
pub type Segments = spatial::SegmentSet<f64>;
pub type Evaluations = spatial::EvaluationTable<f64>;
