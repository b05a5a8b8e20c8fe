//! Invariant decision problems on restricted parameter spaces: models,
//! losses, group actions, restricted-space geometry, equivariant and
//! restricted estimators, and a deterministic risk engine.

pub mod conditions;
pub mod error;
pub mod estimators;
pub mod group;
pub mod loss;
pub mod models;
pub mod projection;
pub mod quadrature;
pub mod restriction;
pub mod risk;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use estimators::EstimatorSpec;
pub use group::GroupElement;
pub use loss::{loss_value, Decision, Estimand, LossShape, LossSpec};
pub use models::{BaseDensity, DataPoint, DataSample, GroupKind, Matrix, ModelSpec, ParameterPoint};
pub use restriction::{Ambient, ConeKind, Coordinate, Restriction};
