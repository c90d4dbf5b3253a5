//! Keypoint description.
//!
//! [`brisk`] builds 512-bit rotation-normalized binary descriptors from
//! smoothed-intensity comparisons over a concentric sampling pattern.
//! [`surf`] is the 64-float SURF descriptor kept as a speed and quality
//! baseline.
//!
//! Scale coupling: a detector keypoint of scale `s` is described with the
//! pattern magnified by `s / 1.2`, so keypoints from the 9x9 base filter use
//! the unit pattern.

pub mod brisk;
mod pattern;
pub mod surf;

pub use brisk::{
    characteristic_gradient, describe, describe_keypoints, local_gradient, local_gradient_at, orientation, BinaryDescriptor,
    DescribeStatus, DESCRIPTOR_BITS,
};
pub use pattern::{build_pattern, PatternPoint, SamplingPattern};
pub use surf::{surf_describe, surf_describe_keypoints, surf_orientation, SurfDescriptor};

use serde::{Deserialize, Serialize};

use crate::detector::{Keypoint, BASE_SIGMA};
use crate::error::{param, Result};
use crate::imgcore::{integral, smoothed_intensity, GrayImage, IntegralImage};

/// How pattern points are smoothed before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Box mean over a square whose variance matches the point's sigma,
    /// read from the integral image in constant time.
    #[default]
    Box,
    /// Explicit Gaussian window (see [`smoothed_intensity`]).
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorParams {
    /// Ring radii in pattern units (innermost first); a center point is
    /// always added.
    pub ring_radii: Vec<f64>,
    pub ring_counts: Vec<usize>,
    /// Per-point sigma is `sigma_scale * r * sin(pi / n)` for a ring of
    /// radius `r` with `n` points, and `sigma_scale / 2` at the center.
    pub sigma_scale: f64,
    /// Short pairs are closer than `delta_max_coeff` pattern units.
    pub delta_max_coeff: f64,
    /// Long pairs are farther than `delta_min_coeff` pattern units.
    pub delta_min_coeff: f64,
    /// Number of precomputed pattern orientations.
    pub rotations: usize,
    pub smoothing: Smoothing,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            ring_radii: vec![2.9, 4.9, 7.4, 10.8],
            ring_counts: vec![10, 14, 15, 20],
            sigma_scale: 1.3,
            delta_max_coeff: 9.75,
            delta_min_coeff: 13.67,
            rotations: 1024,
            smoothing: Smoothing::Box,
        }
    }
}

impl DescriptorParams {
    pub fn validate(&self) -> Result<()> {
        if self.ring_radii.len() != self.ring_counts.len() || self.ring_radii.is_empty() {
            return Err(param("ring_radii", "need one point count per ring"));
        }
        if self.ring_radii.iter().any(|r| !(*r > 0.0)) || self.ring_counts.contains(&0) {
            return Err(param("ring_radii", "radii and counts must be positive"));
        }
        if !(self.sigma_scale > 0.0) {
            return Err(param("sigma_scale", "must be positive"));
        }
        if !(self.delta_max_coeff > 0.0) || !(self.delta_min_coeff > 0.0) {
            return Err(param("delta_max_coeff", "pair thresholds must be positive"));
        }
        if self.rotations < 4 {
            return Err(param("rotations", "need at least 4 orientations"));
        }
        Ok(())
    }
}

/// Pattern magnification for a detector keypoint.
#[inline]
pub fn pattern_unit(kp: &Keypoint) -> f64 {
    kp.scale / BASE_SIGMA
}

/// Smoothed intensity lookups for one image.
pub struct Sampler<'a> {
    img: &'a GrayImage,
    ii: &'a IntegralImage,
    mode: Smoothing,
}

impl<'a> Sampler<'a> {
    pub fn new(img: &'a GrayImage, ii: &'a IntegralImage, mode: Smoothing) -> Self {
        Self { img, ii, mode }
    }

    pub fn image(&self) -> &GrayImage {
        self.img
    }

    pub fn integral(&self) -> &IntegralImage {
        self.ii
    }

    pub fn mode(&self) -> Smoothing {
        self.mode
    }

    /// Smoothed intensity at a point that lies inside the image.
    #[inline]
    pub fn intensity(&self, x: f64, y: f64, sigma: f64) -> f64 {
        match self.mode {
            Smoothing::Box => self.ii.area_mean(x, y, box_half_width(sigma)),
            Smoothing::Gaussian => smoothed_intensity(self.img, x, y, sigma.max(1e-3)).unwrap_or(0.0),
        }
    }

    /// How far a sample with this sigma reaches from its center.
    #[inline]
    pub fn reach(&self, sigma: f64) -> f64 {
        match self.mode {
            Smoothing::Box => box_half_width(sigma).max(0.5),
            Smoothing::Gaussian => (3.0 * sigma.max(1e-3)).ceil(),
        }
    }
}

/// Half-width of a square box with the same variance as a Gaussian.
#[inline]
fn box_half_width(sigma: f64) -> f64 {
    sigma * 3f64.sqrt()
}

/// Owns the integral image so one-off calls can describe straight from a
/// [`GrayImage`].
pub struct OwnedSampler {
    img: GrayImage,
    ii: IntegralImage,
    mode: Smoothing,
}

impl OwnedSampler {
    pub fn new(img: &GrayImage, mode: Smoothing) -> Self {
        Self {
            ii: integral(img),
            img: img.clone(),
            mode,
        }
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler::new(&self.img, &self.ii, self.mode)
    }
}
