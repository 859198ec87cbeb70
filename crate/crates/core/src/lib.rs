//! Slater determinant states and the determinantal point processes they
//! induce on finite weighted ground sets.
//!
//! The crate computes the distances that relate the two worlds: trace
//! distance and quantum Wasserstein-1 distance between Slater states, total
//! variation and symmetric-difference transport distance between point
//! process laws. Each bound is paired with an exact or Monte-Carlo evaluation
//! of the quantity it controls.
//!
//! All floating-point code is generic over [`scalar::Real`]; the aliases at
//! the crate root fix the scalar to `f64`.

pub mod bounds;
pub mod dpp;
pub mod error;
pub mod ground_space;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod selftest;
pub mod slater;
pub mod tensor;
pub mod transport;
pub mod w1_bounds;
pub mod w1_exact;

pub use error::{Error, Result};

/// Default floating-point scalar.
pub type Real = f64;
pub type Complex64 = num_complex::Complex<Real>;

pub type GroundSpace = ground_space::GroundSpace<Real>;
pub type GroundFunction = ground_space::GroundFunction<Real>;
pub type OrthonormalFamily = ground_space::OrthonormalFamily<Real>;
pub type ProjectionKernel = slater::ProjectionKernel<Real>;
pub type OverlapMatrix = slater::OverlapMatrix<Real>;
pub type DensityOperator = slater::DensityOperator<Real>;
pub type PureState = slater::PureState<Real>;
pub type MixedKernelSpec = dpp::MixedKernelSpec<Real>;
pub type W1Certificate = w1_exact::W1Certificate<Real>;
