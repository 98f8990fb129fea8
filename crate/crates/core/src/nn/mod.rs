//! Minimal differentiable kernel: every layer has an explicit forward and a
//! matching backward that accumulates into [`Parameter::grad`].

mod adam;
mod gradcheck;
mod init;
mod layers;
mod loss;
mod lstm;
mod param;
mod real;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck, FD_STEP};
pub use init::{xavier_init, xavier_init_with, xavier_limit};
pub use layers::{dense_backward, dense_forward, embedding_backward, embedding_lookup};
pub use loss::{log_softmax, softmax, softmax_xent, softmax_xent_grad};
pub use lstm::{lstm_backward_step, lstm_forward_step, lstm_step, LstmCache, LstmCellParams, LstmState};
pub use param::{ParamSet, Parameter};
pub use real::{Precision, Real};
pub use tensor::Tensor;
