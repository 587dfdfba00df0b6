//! Detection-conditioned quantum measurement toolkit.
//!
//! Observables carry an extra "no registration" outcome whose probability is
//! set by a state- and eigenvalue-dependent detection map. The crate computes
//! the resulting overall, detection and conditional probabilities, updates
//! states after measurements, distinguishes proper from improper mixtures,
//! builds local hidden-variable models by linear programming, and evaluates
//! modified Bell/CHSH inequalities and GHZ correlations.

pub mod bell;
pub mod error;
pub mod hv;
pub mod linalg;
pub mod measurement;
pub mod mixtures;
pub mod scenario;

pub use error::{EsrError, Result};
pub use linalg::{ComplexMatrix, DensityOperator, NumericPolicy, SpectralObservable};
pub use measurement::{DetectionModel, GeneralizedObservable, Outcome, ProbabilityTriple, Property};
pub use num_complex::Complex64;
