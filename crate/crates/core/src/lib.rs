//! Numerical core for quantum state tomography from incomplete measurements:
//! complex linear algebra, state sampling, the four-state projector basis,
//! linear reconstructors, iterative maximum likelihood and quality metrics.

pub mod error;
pub mod linalg;
pub mod measurement;
pub mod metrics;
pub mod mle;
pub mod reconstruct;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
pub use measurement::{tomography, MeasurementRecord, ProjectorSet, Tomography};
pub use mle::{mle_reconstruct, MleConfig};
pub use states::{DensityMatrix, Ensemble, SamplingMethod};
