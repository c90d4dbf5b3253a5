//! Copy-move forgery detection with fast-Hessian keypoints and 512-bit binary
//! descriptors.
//!
//! The detection chain is: grayscale conversion, box-filter Hessian keypoints
//! over a scale pyramid ([`detector`]), rotation-normalized binary descriptors
//! sampled on a concentric-ring pattern ([`descriptor`]), and within-image
//! Hamming kNN matching with a distance-ratio test ([`matcher`]).
//! [`pipeline`] wires the stages together, scores results against synthetic
//! ground truth from [`synth`], and times the description stage against a
//! 64-dimensional SURF baseline.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod detector;
pub mod error;
pub mod imgcore;
pub mod matcher;
pub mod pipeline;
pub mod synth;

pub use descriptor::{BinaryDescriptor, DescriptorParams, SamplingPattern, SurfDescriptor};
pub use detector::{DetectorParams, Keypoint, ResponseLayer};
pub use error::{Error, Result};
pub use imgcore::{GrayImage, IntegralImage, RgbImage};
pub use matcher::{MatchPair, MatcherParams};
pub use pipeline::{DescriptorKind, DetectionReport, PipelineConfig, Verdict};
pub use synth::{ForgerySpec, GroundTruth};
