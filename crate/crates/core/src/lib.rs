//! Sparse-sensor placement and reconstruction for reduced-order models under
//! correlated noise.
//!
//! The pipeline is:
//!
//! 1. [`pod::compute_pod`] factors a snapshot matrix into spatial modes;
//! 2. [`noise::NoiseModel`] turns the truncated modes into a prior and a
//!    (possibly rank-truncated) correlated noise covariance;
//! 3. a selector from [`selectors`] picks sensor locations;
//! 4. [`estimators`] reconstructs the state from the sensor readings.
//!
//! [`datasets`] generates and loads data, [`harness`] runs the benchmark sweeps.

pub mod datasets;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod noise;
pub mod pod;
pub mod selectors;

pub use error::{ErrorKind, Result, SensingError};
pub use estimators::{Estimator, MeasurementSetup};
pub use noise::NoiseModel;
pub use pod::{compute_pod, PodBasis, SnapshotMatrix, TruncationConfig};
pub use selectors::CandidateSet;
