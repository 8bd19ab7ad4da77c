//! Part-labeled skeleton rasters for gait recognition.
//!
//! Pipeline: COCO17 keypoints ([`pose`]) are rendered into 13-class label
//! rasters ([`render`]), fused with binary silhouettes ([`fusion`]), measured
//! ([`analysis`]) and evaluated with a small feature/loss/metric lab
//! ([`gaitlab`]) on synthetic walkers ([`synth`]). [`pipeline`] ties the steps
//! to the on-disk layout in [`dataset`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod gaitlab;
pub mod label;
pub mod pipeline;
pub mod pose;
pub mod render;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Exec;
