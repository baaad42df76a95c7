//! Operator-valued kernels, random Fourier features and approximation bounds.

pub mod bounds;
pub mod features;
pub mod fit;
pub mod kernel;

pub use bounds::{approximation_bound, required_features, BoundInputs, FeatureNormBound};
pub use features::{sample_feature, FeatureBank, FeatureSample, KernelConfig, LinearFeatures, VariantName};
pub use fit::{empirical_sup_error, grid_fit, grid_sup_error, least_squares_weights, ProductGrid};
pub use kernel::{
    canonical_symplectic, eval_operator_kernel, eval_scalar_kernel, FiniteFeatureMap, KernelVariant,
    OperatorKernelSpec, ScalarKernelSpec,
};
