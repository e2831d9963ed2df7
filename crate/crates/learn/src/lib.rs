//! Neural estimators for tomography from incomplete data: an explicit-gradient
//! network toolkit and the corrector and selector/reconstructor models.

pub mod models;
pub mod nn;
pub mod verify;
