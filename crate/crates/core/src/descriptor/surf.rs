//! 64-dimensional SURF descriptor, used only as a baseline.
//!
//! Orientation comes from Haar responses in a radius-6s disc with a sliding
//! 60 degree window. The descriptor samples a rotated 20s window on a
//! 20x20 grid, accumulating `(sum dx, sum |dx|, sum dy, sum |dy|)` per 5x5
//! subregion, Gaussian-weighted at 3.3s, then L2-normalized.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::detector::Keypoint;
use crate::imgcore::IntegralImage;

use super::DescribeStatus;

pub const SURF_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfDescriptor {
    pub values: Vec<f64>,
    pub keypoint_index: usize,
}

impl SurfDescriptor {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Horizontal Haar response (right half minus left half) of side `size`.
#[inline]
fn haar_x(ii: &IntegralImage, x: i64, y: i64, size: i64) -> f64 {
    let h = size / 2;
    ii.box_sum(x, y - h, x + h - 1, y + h - 1) - ii.box_sum(x - h, y - h, x - 1, y + h - 1)
}

#[inline]
fn haar_y(ii: &IntegralImage, x: i64, y: i64, size: i64) -> f64 {
    let h = size / 2;
    ii.box_sum(x - h, y, x + h - 1, y + h - 1) - ii.box_sum(x - h, y - h, x + h - 1, y - 1)
}

#[inline]
fn haar_size(scale: f64, mult: f64) -> i64 {
    (((mult * scale).round() as i64) & !1).max(2)
}

fn window_fits(ii: &IntegralImage, kp: &Keypoint) -> bool {
    let s = kp.scale;
    // rotated 20s square plus the wavelet half-width
    let margin = 10.0 * std::f64::consts::SQRT_2 * s + haar_size(s, 2.0) as f64 + 1.0;
    kp.x - margin >= 0.0
        && kp.y - margin >= 0.0
        && kp.x + margin <= (ii.width() - 1) as f64
        && kp.y + margin <= (ii.height() - 1) as f64
}

/// Dominant Haar-response direction around `kp`, in `[0, 2pi)`.
pub fn surf_orientation(ii: &IntegralImage, kp: &Keypoint) -> f64 {
    let s = kp.scale;
    let size = haar_size(s, 4.0);
    let (cx, cy) = (kp.x.round() as i64, kp.y.round() as i64);
    let mut responses = Vec::with_capacity(113);
    for j in -6i64..=6 {
        for i in -6i64..=6 {
            if i * i + j * j >= 36 {
                continue;
            }
            let w = (-((i * i + j * j) as f64) / (2.0 * 2.0 * 2.0)).exp();
            let x = cx + (i as f64 * s).round() as i64;
            let y = cy + (j as f64 * s).round() as i64;
            let dx = w * haar_x(ii, x, y, size);
            let dy = w * haar_y(ii, x, y, size);
            if dx != 0.0 || dy != 0.0 {
                responses.push((dy.atan2(dx).rem_euclid(2.0 * PI), dx, dy));
            }
        }
    }
    let mut best = (0.0, 0.0, 0.0);
    let mut start = 0.0;
    while start < 2.0 * PI {
        let end = start + PI / 3.0;
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(a, dx, dy) in &responses {
            let inside = if end < 2.0 * PI {
                a >= start && a < end
            } else {
                a >= start || a < end - 2.0 * PI
            };
            if inside {
                sx += dx;
                sy += dy;
            }
        }
        let mag = sx * sx + sy * sy;
        if mag > best.0 {
            best = (mag, sx, sy);
        }
        start += 0.15;
    }
    if best.0 == 0.0 {
        0.0
    } else {
        best.2.atan2(best.1).rem_euclid(2.0 * PI)
    }
}

/// Oriented 64-float descriptor, or `None` if the window leaves the image.
/// A constant patch yields the zero vector.
pub fn surf_describe(ii: &IntegralImage, kp: &Keypoint, keypoint_index: usize) -> Option<SurfDescriptor> {
    if !window_fits(ii, kp) {
        return None;
    }
    let s = kp.scale;
    let theta = surf_orientation(ii, kp);
    let (sin, cos) = theta.sin_cos();
    let size = haar_size(s, 2.0);
    let inv_two_var = 1.0 / (2.0 * (3.3 * s) * (3.3 * s));

    let mut values = vec![0.0f64; SURF_LEN];
    for sub_y in 0..4 {
        for sub_x in 0..4 {
            let mut acc = [0.0f64; 4];
            for k in 0..5 {
                for l in 0..5 {
                    let u = (-10.0 + 5.0 * sub_x as f64 + k as f64 + 0.5) * s;
                    let v = (-10.0 + 5.0 * sub_y as f64 + l as f64 + 0.5) * s;
                    let x = (kp.x + cos * u - sin * v).round() as i64;
                    let y = (kp.y + sin * u + cos * v).round() as i64;
                    let w = (-(u * u + v * v) * inv_two_var).exp();
                    let dx = haar_x(ii, x, y, size);
                    let dy = haar_y(ii, x, y, size);
                    let rx = w * (cos * dx + sin * dy);
                    let ry = w * (-sin * dx + cos * dy);
                    acc[0] += rx;
                    acc[1] += rx.abs();
                    acc[2] += ry;
                    acc[3] += ry.abs();
                }
            }
            let base = (sub_y * 4 + sub_x) * 4;
            values[base..base + 4].copy_from_slice(&acc);
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        values.iter_mut().for_each(|v| *v /= norm);
    } else {
        values.fill(0.0);
    }
    Some(SurfDescriptor {
        values,
        keypoint_index,
    })
}

pub fn surf_describe_keypoints(ii: &IntegralImage, keypoints: &[Keypoint]) -> (Vec<SurfDescriptor>, Vec<DescribeStatus>) {
    let results: Vec<Option<SurfDescriptor>> = keypoints
        .par_iter()
        .enumerate()
        .map(|(i, kp)| surf_describe(ii, kp, i))
        .collect();
    let statuses = results
        .iter()
        .map(|r| {
            if r.is_some() {
                DescribeStatus::Described
            } else {
                DescribeStatus::OutOfBounds
            }
        })
        .collect();
    (results.into_iter().flatten().collect(), statuses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::SampleIndex;
    use crate::imgcore::{integral, GrayImage};
    use crate::synth::texture;

    fn kp(x: f64, y: f64, scale: f64) -> Keypoint {
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

    #[test]
    fn constant_patch_is_zero() {
        let ii = integral(&GrayImage::filled(100, 100, 0.7));
        let d = surf_describe(&ii, &kp(50.0, 50.0, 2.0), 0).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_norm_and_deterministic() {
        let ii = integral(&texture(120, 120, 3));
        let a = surf_describe(&ii, &kp(60.0, 60.0, 2.0), 4).unwrap();
        assert_eq!(a.values.len(), 64);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a, surf_describe(&ii, &kp(60.0, 60.0, 2.0), 4).unwrap());
    }

    #[test]
    fn contrast_scaling_cancels() {
        let img = texture(120, 120, 8);
        let dim = GrayImage::from_fn(120, 120, |x, y| img.get(x, y) * 0.5);
        let k = kp(58.0, 61.0, 2.4);
        let a = surf_describe(&integral(&img), &k, 0).unwrap();
        let b = surf_describe(&integral(&dim), &k, 0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn window_outside_is_skipped() {
        let ii = integral(&texture(80, 80, 1));
        assert!(surf_describe(&ii, &kp(10.0, 40.0, 2.0), 0).is_none());
        let (descs, statuses) = surf_describe_keypoints(&ii, &[kp(40.0, 40.0, 1.2), kp(10.0, 40.0, 2.0)]);
        assert_eq!(descs.len(), 1);
        assert_eq!(statuses[1], DescribeStatus::OutOfBounds);
    }
}
