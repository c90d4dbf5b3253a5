//! End-to-end detection: grayscale, keypoints, descriptors, matching.
//!
//! [`ForgeryDetector`] runs the chain with per-stage wall-clock timings and
//! produces a [`DetectionReport`]. With ground truth available the report
//! carries the correct detection ratio as well.

mod bench;
mod eval;
pub mod metrics;

pub use bench::{benchmark, benchmark_paths, describe_totals, write_bench_csv, BenchRow, Stage};
pub use eval::{corpus_images, evaluate_corpus, write_curves_csv, write_metrics_csv, CurvePoint, EvalOutput, EvalRow, Perturbation};
pub use metrics::{correct_detection_ratio, pair_is_valid, ratio_percent, region_keypoint_ratio, relative_detection_efficiency, valid_pair_count};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::descriptor::{describe_keypoints, surf_describe_keypoints, DescribeStatus, DescriptorParams, Sampler, SamplingPattern};
use crate::detector::{build_pyramid, detect_in_pyramid, DetectorParams, Keypoint};
use crate::error::{param, Result};
use crate::imgcore::{integral, to_grayscale, GrayImage, IntegralImage, RgbImage};
use crate::matcher::{knn_match, knn_match_surf, matched_keypoint_count, MatchPair, MatcherParams};
use crate::synth::GroundTruth;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    #[default]
    Brisk,
    SurfBaseline,
}

impl DescriptorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DescriptorKind::Brisk => "brisk",
            DescriptorKind::SurfBaseline => "surf_baseline",
        }
    }
}

impl std::str::FromStr for DescriptorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "brisk" => Ok(Self::Brisk),
            "surf" | "surf_baseline" => Ok(Self::SurfBaseline),
            other => Err(format!("unknown descriptor kind `{other}` (brisk | surf_baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detector: DetectorParams,
    pub descriptor: DescriptorParams,
    pub matcher: MatcherParams,
    pub verdict_min_pairs: usize,
    pub descriptor_kind: DescriptorKind,
    /// Pixels a destination keypoint may land from its source partner, after
    /// mapping through the ground-truth correspondence, to count as valid.
    pub tol_px: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            descriptor: DescriptorParams::default(),
            matcher: MatcherParams::default(),
            verdict_min_pairs: 3,
            descriptor_kind: DescriptorKind::Brisk,
            tol_px: 4.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.descriptor.validate()?;
        self.matcher.validate()?;
        if self.verdict_min_pairs == 0 {
            return Err(param("verdict_min_pairs", "must be at least 1"));
        }
        if !(self.tol_px >= 0.0) {
            return Err(param("tol_px", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Forged,
    Clean,
    /// Some matches, but fewer than `verdict_min_pairs`.
    Inconclusive,
}

impl Verdict {
    pub fn from_pairs(pairs: usize, min_pairs: usize) -> Self {
        if pairs >= min_pairs {
            Verdict::Forged
        } else if pairs == 0 {
            Verdict::Clean
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Forged => "forged",
            Verdict::Clean => "clean",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StageTimings {
    pub detect: f64,
    pub describe: f64,
    #[serde(rename = "match")]
    pub matching: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema_version: u32,
    pub image_id: String,
    pub params: PipelineConfig,
    /// Worker threads available to the run.
    pub parallelism: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub keypoint_count: usize,
    pub described_count: usize,
    pub keypoints: Vec<Keypoint>,
    pub matched_pairs: Vec<MatchPair>,
    pub matched_pair_count: usize,
    /// Distinct keypoints taking part in at least one pair.
    pub matched_keypoint_count: usize,
    pub valid_pair_count: Option<usize>,
    /// Distinct keypoints taking part in at least one valid pair.
    pub valid_keypoint_count: Option<usize>,
    /// `100 * valid_pairs / matched_pairs`.
    pub correct_detection_ratio: Option<f64>,
    /// Share of detected keypoints inside either forged region, in percent.
    pub region_keypoint_ratio: Option<f64>,
    pub stage_timings: StageTimings,
    pub verdict: Verdict,
}

impl DetectionReport {
    /// JSON with the timing block zeroed, for run-to-run comparisons.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.stage_timings = StageTimings::default();
        Ok(serde_json::to_string_pretty(&copy)?)
    }
}

/// Keypoints and matches from one run, before reporting.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub keypoints: Vec<Keypoint>,
    pub statuses: Vec<DescribeStatus>,
    pub pairs: Vec<MatchPair>,
    pub timings: StageTimings,
}

/// Detection chain with its descriptor pattern built once.
pub struct ForgeryDetector {
    cfg: PipelineConfig,
    pattern: SamplingPattern,
}

impl ForgeryDetector {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let pattern = SamplingPattern::new(&cfg.descriptor, 1.0)?;
        Ok(Self { cfg, pattern })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn pattern(&self) -> &SamplingPattern {
        &self.pattern
    }

    /// Detection stage: integral image, pyramid and keypoints.
    pub fn detect_stage(&self, gray: &GrayImage) -> Result<(IntegralImage, Vec<Keypoint>)> {
        let ii = integral(gray);
        let pyr = build_pyramid(&ii, &self.cfg.detector)?;
        let kps = detect_in_pyramid(&pyr, gray.width(), gray.height(), &self.cfg.detector);
        Ok((ii, kps))
    }

    /// Description and matching for the configured descriptor kind, each
    /// timed separately.
    pub fn describe_and_match(
        &self,
        gray: &GrayImage,
        ii: &IntegralImage,
        keypoints: &[Keypoint],
        kind: DescriptorKind,
    ) -> Result<(Vec<DescribeStatus>, Vec<MatchPair>, f64, f64)> {
        match kind {
            DescriptorKind::Brisk => {
                let t = Instant::now();
                let sampler = Sampler::new(gray, ii, self.cfg.descriptor.smoothing);
                let (descs, statuses) = describe_keypoints(&sampler, keypoints, &self.pattern);
                let describe = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let pairs = knn_match(&descs, keypoints, &self.cfg.matcher)?;
                Ok((statuses, pairs, describe, t.elapsed().as_secs_f64()))
            }
            DescriptorKind::SurfBaseline => {
                let t = Instant::now();
                let (descs, statuses) = surf_describe_keypoints(ii, keypoints);
                let describe = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let pairs = knn_match_surf(&descs, keypoints, &self.cfg.matcher)?;
                Ok((statuses, pairs, describe, t.elapsed().as_secs_f64()))
            }
        }
    }

    pub fn run_gray(&self, gray: &GrayImage) -> Result<RunOutput> {
        let t = Instant::now();
        let (ii, keypoints) = self.detect_stage(gray)?;
        let detect = t.elapsed().as_secs_f64();
        let (statuses, pairs, describe, matching) =
            self.describe_and_match(gray, &ii, &keypoints, self.cfg.descriptor_kind)?;
        Ok(RunOutput {
            keypoints,
            statuses,
            pairs,
            timings: StageTimings {
                detect,
                describe,
                matching,
            },
        })
    }

    /// Full chain on a grayscale image.
    pub fn detect_gray(&self, gray: &GrayImage, image_id: &str, gt: Option<&GroundTruth>) -> Result<DetectionReport> {
        let out = self.run_gray(gray)?;
        self.report(image_id, gray.dimensions(), out, gt)
    }

    /// Full chain on a color image; grayscale conversion counts towards the
    /// detection stage.
    pub fn detect_rgb(&self, img: &RgbImage, image_id: &str, gt: Option<&GroundTruth>) -> Result<DetectionReport> {
        let t = Instant::now();
        let gray = to_grayscale(img);
        let convert = t.elapsed().as_secs_f64();
        let mut out = self.run_gray(&gray)?;
        out.timings.detect += convert;
        self.report(image_id, gray.dimensions(), out, gt)
    }

    pub fn report(
        &self,
        image_id: &str,
        dims: (usize, usize),
        out: RunOutput,
        gt: Option<&GroundTruth>,
    ) -> Result<DetectionReport> {
        let (valid_pair_count, valid_keypoint_count, cdr, region) = match gt {
            Some(gt) => {
                let valid: Vec<MatchPair> = out
                    .pairs
                    .iter()
                    .copied()
                    .filter(|p| pair_is_valid(p, &out.keypoints, gt, self.cfg.tol_px))
                    .collect();
                (
                    Some(valid.len()),
                    Some(matched_keypoint_count(&valid)),
                    correct_detection_ratio(&out.pairs, &out.keypoints, gt, dims, self.cfg.tol_px)?,
                    region_keypoint_ratio(&out.keypoints, gt),
                )
            }
            None => (None, None, None, None),
        };
        Ok(DetectionReport {
            schema_version: REPORT_SCHEMA_VERSION,
            image_id: image_id.to_string(),
            params: self.cfg.clone(),
            parallelism: rayon::current_num_threads(),
            image_width: dims.0,
            image_height: dims.1,
            keypoint_count: out.keypoints.len(),
            described_count: out
                .statuses
                .iter()
                .filter(|s| **s == DescribeStatus::Described)
                .count(),
            matched_pair_count: out.pairs.len(),
            matched_keypoint_count: matched_keypoint_count(&out.pairs),
            verdict: Verdict::from_pairs(out.pairs.len(), self.cfg.verdict_min_pairs),
            keypoints: out.keypoints,
            matched_pairs: out.pairs,
            valid_pair_count,
            valid_keypoint_count,
            correct_detection_ratio: cdr,
            region_keypoint_ratio: region,
            stage_timings: out.timings,
        })
    }
}

/// One-shot detection on a grayscale image.
pub fn detect_forgery(img: &GrayImage, cfg: &PipelineConfig) -> Result<DetectionReport> {
    ForgeryDetector::new(cfg.clone())?.detect_gray(img, "image", None)
}
