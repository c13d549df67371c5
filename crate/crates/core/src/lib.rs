//! Procedural stereo video scenes with dense scene-flow ground truth, a
//! 1D-correlation disparity matcher and evaluation measures.

// Comparisons are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod eval;
pub mod geometry;
pub mod groundtruth;
pub mod io;
pub mod matching;
pub mod raster;
pub mod render;
pub mod scene;
