//! Reconstruction-quality metrics that need no pretrained network: SSIM,
//! pixel correlation, and two-way identification / correlation distance over
//! externally extracted feature banks.

mod features;
mod image;
mod report;

pub use self::features::{correlation_distance, pearson, two_way_identification};
pub use self::image::{pixcorr, ssim, ssim_with, SsimParams, PIXCORR_SIZE};
pub use self::report::{score_directories, Direction, MetricReport, MetricSummary, PairScore};
