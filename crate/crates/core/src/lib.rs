//! Pre-clinical evaluation harness for symptom-checker self-triage advice.
//!
//! The pipeline runs in stages: [`ingest`] reads and validates a study,
//! [`refine`] prunes a pilot vignette set with classical item statistics,
//! [`pool`] maps and majority-votes multi-inputter advice, [`metrics`]
//! computes the comparable metric suite and [`report`] renders it.
//! [`sim`] generates synthetic studies with known ground truth.

pub mod domain;
pub mod ingest;
pub mod metrics;
pub mod pool;
pub mod refine;
pub mod report;
pub mod sim;

/// Exact rational used for every proportion until render time.
pub type Rational = num_rational::Ratio<i128>;
