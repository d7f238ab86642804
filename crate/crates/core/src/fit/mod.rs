//! Losses and the two optimisation stages.

mod adam;
mod init;
mod loss;
mod scene;
mod train;

pub use adam::{Adam, OptimizerConfig};
pub use init::init_free_gaussians;
pub use loss::{
    l1_loss, l1_loss_grad, mask_entropy_loss, mask_entropy_loss_grad, normal_consistency_loss,
    normal_consistency_loss_grad, psnr, ssim, ssim_loss, ssim_loss_grad, MASK_LOG_EPS,
};
pub use scene::{ParamGroup, Scene, BOUND_STRIDE, FREE_STRIDE};
pub use train::{
    finite_diff, finite_diff_oracle, loss_and_gradient, optimize, optimize_with, scene_loss, write_trace,
    FitOptions, LossRecord, LossTerms, LossWeights, Stage, TrainView, NORMAL_COVERAGE,
};
