//! Quotiented noisy-hypercube Unique Games instances, their Long Code
//! reduction to Balanced Edge-Separator, and numerical verification of the
//! tensored SDP vector solutions attached to both.
//!
//! The Fourier, tensor and linear-programming kernels are generic over
//! [`Scalar`]; the instance pipelines work in `f64`.

pub mod bes;
pub mod error;
pub mod fourier;
pub mod hypercube;
pub mod kv;
pub mod metric;
pub mod pcp;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod unique_games;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RealFunction = fourier::RealFunction<f64>;
pub type FourierSpectrum = fourier::FourierSpectrum<f64>;
