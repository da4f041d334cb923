//! Document layout analysis: page-level ground truth, pixel classification
//! with an adversarially trained encoder-decoder, and the geometric
//! post-processing that turns label maps back into zones and baselines.

pub mod augment;
pub mod cli;
pub mod geometry;
pub mod metrics;
pub mod net;
pub mod pagexml;
pub mod raster;
pub mod synthdoc;
