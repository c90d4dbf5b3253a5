//! 512-bit binary descriptors over a concentric sampling pattern.
//!
//! The characteristic direction of a keypoint is the mean local gradient
//! over the pattern's long pairs. The pattern is then turned by that angle
//! and each bit records whether the second point of a short pair is brighter
//! than the first.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::SamplingPattern;
use super::{pattern_unit, Sampler};
use crate::detector::Keypoint;

pub const DESCRIPTOR_BITS: usize = 512;
const WORDS: usize = DESCRIPTOR_BITS / 64;

/// Intensity differences below this are summation roundoff, not signal. It is
/// far below one 8-bit quantization step.
const INTENSITY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryDescriptor {
    pub bits: [u64; WORDS],
    /// Index into the keypoint list this was computed for.
    pub keypoint_index: usize,
}

impl BinaryDescriptor {
    pub fn zeros(keypoint_index: usize) -> Self {
        Self {
            bits: [0; WORDS],
            keypoint_index,
        }
    }

    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, k: usize, value: bool) {
        let mask = 1u64 << (k % 64);
        if value {
            self.bits[k / 64] |= mask;
        } else {
            self.bits[k / 64] &= !mask;
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.map(|w| !w),
            keypoint_index: self.keypoint_index,
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }
}

impl fmt::Debug for BinaryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryDescriptor(#{}, ", self.keypoint_index)?;
        for w in &self.bits {
            write!(f, "{w:016x}")?;
        }
        write!(f, ")")
    }
}

/// Per-keypoint outcome of [`describe_keypoints`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescribeStatus {
    Described,
    /// The magnified pattern would sample outside the image.
    OutOfBounds,
}

/// `(X - Y) * (i_x - i_y) / |X - Y|^2`.
#[inline]
pub fn local_gradient(x: (f64, f64), y: (f64, f64), ix: f64, iy: f64) -> (f64, f64) {
    let (dx, dy) = (x.0 - y.0, x.1 - y.1);
    let f = (ix - iy) / (dx * dx + dy * dy);
    (dx * f, dy * f)
}

/// [`local_gradient`] with intensities smoothed at each point's sigma.
pub fn local_gradient_at(
    sampler: &Sampler<'_>,
    x: (f64, f64),
    y: (f64, f64),
    sigma_x: f64,
    sigma_y: f64,
) -> (f64, f64) {
    let ix = sampler.intensity(x.0, x.1, sigma_x);
    let iy = sampler.intensity(y.0, y.1, sigma_y);
    local_gradient(x, y, ix, iy)
}

/// Whether every pattern sample around `kp` stays inside the image.
pub fn pattern_fits(sampler: &Sampler<'_>, kp: &Keypoint, pattern: &SamplingPattern) -> bool {
    let t = pattern_unit(kp);
    let max_sigma = pattern.unit_sigmas().iter().copied().fold(0.0, f64::max);
    let margin = t * pattern.unit_radius + sampler.reach(t * max_sigma) + 1.0;
    let (w, h) = sampler.image().dimensions();
    kp.x - margin >= 0.0
        && kp.y - margin >= 0.0
        && kp.x + margin <= (w - 1) as f64
        && kp.y + margin <= (h - 1) as f64
}

/// Smoothed intensities at the pattern points for orientation index `k`.
fn sample_pattern(sampler: &Sampler<'_>, kp: &Keypoint, pattern: &SamplingPattern, k: usize, out: &mut Vec<f64>) {
    let t = pattern_unit(kp);
    out.clear();
    out.extend(
        pattern
            .rotated_unit(k)
            .iter()
            .zip(pattern.unit_sigmas())
            .map(|(&(ux, uy), &s)| sampler.intensity(kp.x + t * ux, kp.y + t * uy, t * s)),
    );
}

fn gradient_from_samples(kp: &Keypoint, pattern: &SamplingPattern, intensities: &[f64]) -> (f64, f64) {
    let t = pattern_unit(kp);
    let pos = pattern.rotated_unit(0);
    let (mut gx, mut gy) = (0.0, 0.0);
    for &(i, j) in &pattern.long_pairs {
        let (i, j) = (i as usize, j as usize);
        let (a, b) = (pos[i], pos[j]);
        let g = local_gradient(
            (kp.x + t * a.0, kp.y + t * a.1),
            (kp.x + t * b.0, kp.y + t * b.1),
            intensities[i],
            intensities[j],
        );
        gx += g.0;
        gy += g.1;
    }
    let n = pattern.long_pairs.len() as f64;
    (gx / n, gy / n)
}

fn angle_of(g: (f64, f64)) -> f64 {
    if g.0.hypot(g.1) < INTENSITY_EPS {
        return 0.0;
    }
    let a = g.1.atan2(g.0);
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Mean long-pair gradient around `kp`, or `None` if the pattern does not fit.
pub fn characteristic_gradient(sampler: &Sampler<'_>, kp: &Keypoint, pattern: &SamplingPattern) -> Option<(f64, f64)> {
    if !pattern_fits(sampler, kp, pattern) {
        return None;
    }
    let mut intensities = Vec::with_capacity(pattern.len());
    sample_pattern(sampler, kp, pattern, 0, &mut intensities);
    Some(gradient_from_samples(kp, pattern, &intensities))
}

/// Characteristic direction in `(-pi, pi]`; 0 for a vanishing gradient.
pub fn orientation(sampler: &Sampler<'_>, kp: &Keypoint, pattern: &SamplingPattern) -> Option<f64> {
    characteristic_gradient(sampler, kp, pattern).map(angle_of)
}

/// Describes one keypoint, or `None` if the pattern would leave the image.
pub fn describe(
    sampler: &Sampler<'_>,
    kp: &Keypoint,
    keypoint_index: usize,
    pattern: &SamplingPattern,
) -> Option<BinaryDescriptor> {
    if !pattern_fits(sampler, kp, pattern) {
        return None;
    }
    let mut intensities = Vec::with_capacity(pattern.len());
    sample_pattern(sampler, kp, pattern, 0, &mut intensities);
    let alpha = angle_of(gradient_from_samples(kp, pattern, &intensities));

    let k = pattern.rotation_index(alpha);
    if k != 0 {
        sample_pattern(sampler, kp, pattern, k, &mut intensities);
    }
    let mut desc = BinaryDescriptor::zeros(keypoint_index);
    for (bit, &(i, j)) in pattern.descriptor_pairs().iter().enumerate() {
        if intensities[j as usize] > intensities[i as usize] + INTENSITY_EPS {
            desc.bits[bit / 64] |= 1 << (bit % 64);
        }
    }
    Some(desc)
}

/// Describes keypoints in parallel. Descriptors keep input order and carry
/// their keypoint index; skipped keypoints are reported in the status list.
pub fn describe_keypoints(
    sampler: &Sampler<'_>,
    keypoints: &[Keypoint],
    pattern: &SamplingPattern,
) -> (Vec<BinaryDescriptor>, Vec<DescribeStatus>) {
    let results: Vec<Option<BinaryDescriptor>> = keypoints
        .par_iter()
        .enumerate()
        .map(|(i, kp)| describe(sampler, kp, i, pattern))
        .collect();
    let statuses = results
        .iter()
        .map(|r| match r {
            Some(_) => DescribeStatus::Described,
            None => DescribeStatus::OutOfBounds,
        })
        .collect();
    (results.into_iter().flatten().collect(), statuses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{build_pattern, DescriptorParams, OwnedSampler, Smoothing};
    use crate::detector::SampleIndex;
    use crate::imgcore::GrayImage;
    use crate::synth::{texture, warp, Affine};
    use std::f64::consts::PI;

    fn kp_at(x: f64, y: f64, scale: f64) -> Keypoint {
        Keypoint {
            x,
            y,
            scale,
            response: 1.0,
            octave: 0,
            layer: 1,
            laplacian_positive: false,
            origin: SampleIndex { layer: 1, col: 0, row: 0 },
        }
    }

    fn pattern() -> SamplingPattern {
        build_pattern(1.0, 9.75, 13.67).unwrap()
    }

    fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
        a.bits.iter().zip(&b.bits).map(|(x, y)| (x ^ y).count_ones()).sum()
    }

    #[test]
    fn local_gradient_examples() {
        let g = local_gradient((2.0, 0.0), (0.0, 0.0), 1.0, 0.0);
        assert_eq!(g, (0.5, 0.0));
        let swapped = local_gradient((0.0, 0.0), (2.0, 0.0), 0.0, 1.0);
        assert_eq!(swapped, g);
        let flat = OwnedSampler::new(&GrayImage::filled(40, 40, 0.3), Smoothing::Gaussian);
        let g = local_gradient_at(&flat.sampler(), (10.0, 10.0), (14.0, 17.0), 1.0, 2.0);
        assert!(g.0.abs() < 1e-12 && g.1.abs() < 1e-12);
    }

    #[test]
    fn constant_patch() {
        let s = OwnedSampler::new(&GrayImage::filled(100, 100, 0.42), Smoothing::Box);
        let kp = kp_at(50.0, 50.0, 2.4);
        assert_eq!(orientation(&s.sampler(), &kp, &pattern()), Some(0.0));
        let d = describe(&s.sampler(), &kp, 0, &pattern()).unwrap();
        assert_eq!(d.count_ones(), 0);
    }

    #[test]
    fn out_of_bounds_is_skipped() {
        let s = OwnedSampler::new(&texture(100, 100, 1), Smoothing::Box);
        let kps = [kp_at(50.0, 50.0, 1.2), kp_at(5.0, 50.0, 1.2), kp_at(50.0, 50.0, 12.0)];
        let (descs, statuses) = describe_keypoints(&s.sampler(), &kps, &pattern());
        assert_eq!(
            statuses,
            [DescribeStatus::Described, DescribeStatus::OutOfBounds, DescribeStatus::OutOfBounds]
        );
        assert_eq!(descs.len(), 1);
        assert_eq!(descs[0].keypoint_index, 0);
    }

    #[test]
    fn horizontal_ramp_orients_along_x() {
        let ramp = GrayImage::from_fn(120, 120, |x, _| x as f32 / 119.0);
        for mode in [Smoothing::Box, Smoothing::Gaussian] {
            let s = OwnedSampler::new(&ramp, mode);
            let a = orientation(&s.sampler(), &kp_at(60.0, 60.0, 2.4), &pattern()).unwrap();
            assert!(a.abs() < 0.1 || (a.abs() - PI).abs() < 0.1, "{mode:?}: {a}");
        }
    }

    #[test]
    fn gradient_matches_explicit_long_pair_sum() {
        let img = texture(140, 140, 17);
        let p = pattern();
        for mode in [Smoothing::Box, Smoothing::Gaussian] {
            let s = OwnedSampler::new(&img, mode);
            let sampler = s.sampler();
            for (x, y, scale) in [(70.0, 70.0, 1.2), (64.3, 77.8, 2.9), (72.5, 66.25, 3.1)] {
                let kp = kp_at(x, y, scale);
                let t = scale / 1.2;
                let pts: Vec<(f64, f64, f64)> = p
                    .points
                    .iter()
                    .map(|q| (x + t * q.position().0, y + t * q.position().1, t * q.sigma))
                    .collect();
                let (mut gx, mut gy, mut n) = (0.0, 0.0, 0usize);
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let (a, b) = (pts[i], pts[j]);
                        let d2 = (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
                        if d2.sqrt() <= 13.67 * t {
                            continue;
                        }
                        let diff = sampler.intensity(a.0, a.1, a.2) - sampler.intensity(b.0, b.1, b.2);
                        gx += (a.0 - b.0) * diff / d2;
                        gy += (a.1 - b.1) * diff / d2;
                        n += 1;
                    }
                }
                let (ox, oy) = (gx / n as f64, gy / n as f64);
                let (cx, cy) = characteristic_gradient(&sampler, &kp, &p).unwrap();
                assert!((cx - ox).abs() <= 1e-9 && (cy - oy).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rotation_shifts_orientation() {
        let img = texture(161, 161, 5);
        let rotated = warp(&img, &Affine::rotation_about((80.0, 80.0), 30.0), 161, 161);
        let p = pattern();
        let kp = kp_at(80.0, 80.0, 3.6);
        let a = orientation(&OwnedSampler::new(&img, Smoothing::Box).sampler(), &kp, &p).unwrap();
        let b = orientation(&OwnedSampler::new(&rotated, Smoothing::Box).sampler(), &kp, &p).unwrap();
        let diff = (b - a).rem_euclid(2.0 * PI).to_degrees();
        assert!((diff - 30.0).abs() <= 3.0, "a={a} b={b} diff={diff}");
    }

    #[test]
    fn rotated_patch_descriptor_stays_close() {
        let img = texture(161, 161, 6);
        let rotated = warp(&img, &Affine::rotation_about((80.0, 80.0), 20.0), 161, 161);
        let p = pattern();
        let kp = kp_at(80.0, 80.0, 3.6);
        let a = describe(&OwnedSampler::new(&img, Smoothing::Box).sampler(), &kp, 0, &p).unwrap();
        let b = describe(&OwnedSampler::new(&rotated, Smoothing::Box).sampler(), &kp, 0, &p).unwrap();
        assert!(hamming(&a, &b) <= 51, "hamming {}", hamming(&a, &b));
        let again = describe(&OwnedSampler::new(&img, Smoothing::Box).sampler(), &kp, 0, &p).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn brightness_offset_keeps_bits() {
        let img = texture(120, 120, 9);
        let brighter = GrayImage::from_fn(120, 120, |x, y| img.get(x, y) + 0.03125);
        let p = SamplingPattern::new(&DescriptorParams::default(), 1.0).unwrap();
        for kp in [kp_at(60.0, 60.0, 1.2), kp_at(55.5, 62.25, 3.0)] {
            let a = describe(&OwnedSampler::new(&img, Smoothing::Box).sampler(), &kp, 0, &p).unwrap();
            let b = describe(&OwnedSampler::new(&brighter, Smoothing::Box).sampler(), &kp, 0, &p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bit_helpers() {
        let mut d = BinaryDescriptor::zeros(3);
        d.set(0, true);
        d.set(511, true);
        assert!(d.bit(0) && d.bit(511) && !d.bit(100));
        assert_eq!(d.count_ones(), 2);
        assert_eq!(d.complement().count_ones(), 510);
        d.set(0, false);
        assert_eq!(d.count_ones(), 1);
    }
}
