//! Non-Gaussianity certification from second- and third-order photon
//! correlations.
//!
//! The moment calculus, the boundary geometry and the number-basis oracle are
//! generic over [`Scalar`] (`f32`/`f64`); the aliases below fix the common
//! double-precision choice. The Poisson test in [`stats`] works on integer
//! counts and is `f64` only.

pub mod bounds;
pub mod error;
pub mod fock_oracle;
pub mod gaussian_model;
pub mod scalar;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GaussianParams64 = gaussian_model::GaussianParams<f64>;
pub type GaussianParams32 = gaussian_model::GaussianParams<f32>;
pub type MomentTriple64 = gaussian_model::MomentTriple<f64>;
pub type MomentTriple32 = gaussian_model::MomentTriple<f32>;
pub type CorrelationPoint64 = gaussian_model::CorrelationPoint<f64>;
pub type CorrelationPoint32 = gaussian_model::CorrelationPoint<f32>;
pub type MixtureSpec64 = gaussian_model::MixtureSpec<f64>;
pub type MixtureSpec32 = gaussian_model::MixtureSpec<f32>;
pub type Verdict64 = bounds::Verdict<f64>;
pub type TangentLine64 = bounds::TangentLine<f64>;
pub type FockVector64 = fock_oracle::FockVector<f64>;
pub type FockVector32 = fock_oracle::FockVector<f32>;
pub type DensityMixture64 = fock_oracle::DensityMixture<f64>;
