//! Gaussian parameter types and mesh binding.

mod binding;
mod gaussian;
pub mod quat;

pub use binding::{
    adapt_all, default_barycentric_set, init_binding, local_backward, to_global, to_global_all,
    BindingConfig, BindingMode, LocalGrad,
};
pub use gaussian::{
    covariance, logit, sh_coeff_count, sigmoid, FreeGaussian, GlobalGaussian, GlobalGrad,
    LocalGaussian, ShCoeffs, MAX_SH_DEGREE,
};
