//! Tensor-Gaussian-process regression with Tucker-decomposed weights.

pub mod cf;
pub mod data;
pub mod error;
pub mod experiments;
pub mod features;
pub mod inference;
pub mod input;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod persist;
pub mod tensor;

pub use error::{Result, TgpError};
pub use features::{FeatureMap, FeatureVec};
pub use input::Coord;
pub use kernels::KernelSpec;
pub use linalg::Matrix;
pub use model::{GradientBundle, Observation, TgpModel};
pub use tensor::{DenseTensor, TuckerWeights};
