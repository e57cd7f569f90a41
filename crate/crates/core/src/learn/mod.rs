//! Volumetric CNN regression of shape loadings and the recurrence MLP.
//!
//! Everything runs in double precision on a small from-scratch layer set
//! (conv3d, relu, maxpool, flatten, dense, sigmoid) with exact backward
//! passes, trained by Adagrad.

mod adagrad;
mod gemm;
mod gradcheck;
mod loss;
mod network;
mod recurrence;
mod regressor;
mod train;

pub use adagrad::{adagrad_step, AdagradState};
pub use gradcheck::{
    compare_gradients, gradient_check, relative_error, GradientCheckOptions, GradientCheckReport, Objective,
    ParameterLocation, RELATIVE_FLOOR,
};
pub use loss::{bce_loss, l2_loss, P_CLAMP};
pub use network::{ForwardCache, LayerSpec, Network, Shape, Tensor};
pub use recurrence::{predict_recurrence, recurrence_layers, train_recurrence, RecurrenceModel, HIDDEN_UNITS};
pub use regressor::{
    default_regressor_layers, forward_regressor, target_scales, train_regressor, RegressorModel, WHITEN_GUARD,
};
pub use train::{format_loss_curve, write_loss_curve, TrainConfig};
