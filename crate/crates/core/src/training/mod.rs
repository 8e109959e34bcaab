//! Log loss, Adam, the mini-batch loop and the gradient checker.

mod adam;
mod gradcheck;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{
    gradcheck, gradcheck_instance, gradcheck_with, nudge_off_kinks, randomize_params, GradcheckReport,
    LogLoss, Objective,
};
pub use loss::{logloss, logloss_from_logit, logloss_grad, PROB_CLAMP};
pub use trainer::{train, train_with_state, EpochRecord, EvalRecord, TrainConfig, TrainReport};
