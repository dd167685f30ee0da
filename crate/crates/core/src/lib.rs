//! Numerical core for weakly supervised localization through knowledge
//! distillation.
//!
//! Everything in this crate is a deterministic function of its inputs and
//! builds without `std`; file formats, orchestration and the command-line
//! tool live in the `kdloc` companion crate.
//!
//! * [`net`]: a small convolutional network with hand-written reverse-mode
//!   gradients and an Adam optimizer.
//! * [`kd`]: tempered softmax, soft-target loss and the mixed student loss.
//! * [`localization`]: Grad-CAM heatmaps and heatmap-to-box extraction.
//! * [`metrics`]: the top-|GT| mIOU variant and classification metrics.
//! * [`hessian`]: Hessian-vector products, Lanczos, Hutchinson and ESD.
//! * [`synth`]: the synthetic shortcut benchmark and preprocessing.
//! * [`train`]: training loops with early stopping.

#![no_std]

extern crate alloc;

pub mod error;
pub mod hessian;
pub mod kd;
pub mod localization;
pub mod math;
pub mod metrics;
pub mod net;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
