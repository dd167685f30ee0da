//! File formats, orchestration and the `kdloc` command-line tool built on
//! [`kdloc_core`].
//!
//! | module | contents |
//! |---|---|
//! | [`formats`] | checkpoint (`KDL1`), heatmap (`HMAP`) and PGM codecs |
//! | [`annotations`], [`dataset`] | the annotations JSON schema and dataset directories |
//! | [`config`], [`record`] | run configuration and per-run records |
//! | [`run`] | training, evaluation, localization and Hessian reports |
//! | [`sweep`] | temperature, alpha and seed sweeps |
//! | [`cli`] | argument parsing and subcommand dispatch |

pub mod annotations;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod record;
pub mod run;
pub mod sweep;

pub use error::{Error, Result};
