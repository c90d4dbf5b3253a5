use std::f64::consts::PI;

use super::DescriptorParams;
use crate::error::{param, Result};

/// Bits per descriptor; the shortest short-distance pairs are used.
const BITS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPoint {
    pub radius: f64,
    pub angle: f64,
    pub sigma: f64,
}

impl PatternPoint {
    pub fn position(&self) -> (f64, f64) {
        (self.radius * self.angle.cos(), self.radius * self.angle.sin())
    }
}

/// Concentric-ring sampling pattern with its short and long pair sets.
///
/// `points` are laid out at `scale` pattern units. The pair sets do not
/// depend on `scale` since both thresholds scale with it. Rotated copies of
/// the unit-scale geometry are precomputed for `params.rotations` evenly
/// spaced orientations.
#[derive(Debug, Clone)]
pub struct SamplingPattern {
    pub scale: f64,
    pub points: Vec<PatternPoint>,
    /// Absolute thresholds at `scale`.
    pub delta_max: f64,
    pub delta_min: f64,
    /// All pairs `(i, j)`, `i < j`, shorter than `delta_max`, ordered by
    /// ascending length then index.
    pub short_pairs: Vec<(u16, u16)>,
    /// All pairs longer than `delta_min`, in index order.
    pub long_pairs: Vec<(u16, u16)>,
    unit_sigmas: Vec<f64>,
    rotated: Vec<Vec<(f64, f64)>>,
    /// `max_i (r_i)` at unit scale, used for border checks.
    pub(crate) unit_radius: f64,
}

/// Pattern with the default geometry and the given pair thresholds.
pub fn build_pattern(scale: f64, delta_max_coeff: f64, delta_min_coeff: f64) -> Result<SamplingPattern> {
    SamplingPattern::new(
        &DescriptorParams {
            delta_max_coeff,
            delta_min_coeff,
            ..DescriptorParams::default()
        },
        scale,
    )
}

impl SamplingPattern {
    pub fn new(params: &DescriptorParams, scale: f64) -> Result<Self> {
        params.validate()?;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(param("scale", format!("must be positive, got {scale}")));
        }

        let mut unit = vec![PatternPoint {
            radius: 0.0,
            angle: 0.0,
            sigma: params.sigma_scale * 0.5,
        }];
        for (&r, &n) in params.ring_radii.iter().zip(&params.ring_counts) {
            let sigma = params.sigma_scale * r * (PI / n as f64).sin();
            for k in 0..n {
                unit.push(PatternPoint {
                    radius: r,
                    angle: 2.0 * PI * k as f64 / n as f64,
                    sigma,
                });
            }
        }
        if unit.len() > u16::MAX as usize {
            return Err(param("ring_counts", "too many pattern points"));
        }

        let positions: Vec<(f64, f64)> = unit.iter().map(PatternPoint::position).collect();
        let dist = |i: usize, j: usize| {
            let (dx, dy) = (positions[i].0 - positions[j].0, positions[i].1 - positions[j].1);
            (dx * dx + dy * dy).sqrt()
        };

        let mut short: Vec<(f64, u16, u16)> = Vec::new();
        let mut long_pairs = Vec::new();
        for i in 0..unit.len() {
            for j in i + 1..unit.len() {
                let d = dist(i, j);
                if d < params.delta_max_coeff {
                    short.push((d, i as u16, j as u16));
                }
                if d > params.delta_min_coeff {
                    long_pairs.push((i as u16, j as u16));
                }
            }
        }
        if short.len() < BITS {
            return Err(param(
                "delta_max_coeff",
                format!("only {} short pairs, need {BITS}", short.len()),
            ));
        }
        if long_pairs.is_empty() {
            return Err(param("delta_min_coeff", "no long pairs"));
        }
        // lengths that differ only by rounding noise compare equal
        let key = |d: f64| (d * 1e9).round() as i64;
        short.sort_by(|a, b| key(a.0).cmp(&key(b.0)).then((a.1, a.2).cmp(&(b.1, b.2))));

        let rotated = (0..params.rotations)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / params.rotations as f64;
                unit.iter()
                    .map(|p| {
                        let a = p.angle + theta;
                        (p.radius * a.cos(), p.radius * a.sin())
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            scale,
            points: unit
                .iter()
                .map(|p| PatternPoint {
                    radius: p.radius * scale,
                    angle: p.angle,
                    sigma: p.sigma * scale,
                })
                .collect(),
            delta_max: params.delta_max_coeff * scale,
            delta_min: params.delta_min_coeff * scale,
            short_pairs: short.into_iter().map(|(_, i, j)| (i, j)).collect(),
            long_pairs,
            unit_sigmas: unit.iter().map(|p| p.sigma).collect(),
            unit_radius: params.ring_radii.iter().copied().fold(0.0, f64::max),
            rotated,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The pairs that become descriptor bits, in bit order.
    pub fn descriptor_pairs(&self) -> &[(u16, u16)] {
        &self.short_pairs[..BITS]
    }

    pub fn rotation_count(&self) -> usize {
        self.rotated.len()
    }

    /// Index of the precomputed orientation nearest to `angle` (radians).
    pub fn rotation_index(&self, angle: f64) -> usize {
        let n = self.rotated.len() as f64;
        let k = (angle.rem_euclid(2.0 * PI) / (2.0 * PI) * n).round() as usize;
        k % self.rotated.len()
    }

    /// Unit-scale point offsets for orientation index `k`.
    #[inline]
    pub(crate) fn rotated_unit(&self, k: usize) -> &[(f64, f64)] {
        &self.rotated[k]
    }

    #[inline]
    pub(crate) fn unit_sigmas(&self) -> &[f64] {
        &self.unit_sigmas
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pattern_shape() {
        let p = build_pattern(1.0, 9.75, 13.67).unwrap();
        assert_eq!(p.len(), 60);
        assert!(p.short_pairs.len() >= 512);
        assert_eq!(p.descriptor_pairs().len(), 512);
        let short: std::collections::HashSet<_> = p.short_pairs.iter().collect();
        assert!(p.long_pairs.iter().all(|pair| !short.contains(pair)));
    }

    #[test]
    fn pair_sets_match_exhaustive_enumeration() {
        let p = build_pattern(1.0, 9.75, 13.67).unwrap();
        let pos: Vec<(f64, f64)> = p.points.iter().map(|q| q.position()).collect();
        let mut long = Vec::new();
        let mut short = 0;
        let mut total = 0;
        for i in 0..60 {
            for j in i + 1..60 {
                total += 1;
                let d = ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();
                if d > 13.67 {
                    long.push((i as u16, j as u16));
                }
                if d < 9.75 {
                    short += 1;
                }
            }
        }
        assert_eq!(total, 1770);
        assert_eq!(long, p.long_pairs);
        assert_eq!(short, p.short_pairs.len());
        for &(i, j) in &p.long_pairs {
            let (a, b) = (pos[i as usize], pos[j as usize]);
            assert!(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() > p.delta_min);
        }
    }

    #[test]
    fn short_pairs_are_in_canonical_order() {
        let p = build_pattern(1.0, 9.75, 13.67).unwrap();
        let len = |&(i, j): &(u16, u16)| {
            let (a, b) = (p.points[i as usize].position(), p.points[j as usize].position());
            ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
        };
        for w in p.short_pairs.windows(2) {
            assert!(len(&w[0]) <= len(&w[1]) + 1e-9);
        }
    }

    #[test]
    fn scaling_keeps_pair_sets() {
        let a = build_pattern(1.0, 9.75, 13.67).unwrap();
        let b = build_pattern(2.0, 9.75, 13.67).unwrap();
        assert_eq!(a.short_pairs, b.short_pairs);
        assert_eq!(a.long_pairs, b.long_pairs);
        assert!((b.points[59].radius - 2.0 * a.points[59].radius).abs() < 1e-12);
        assert!((b.delta_min - 2.0 * a.delta_min).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_pattern(0.0, 9.75, 13.67).is_err());
        assert!(build_pattern(-1.0, 9.75, 13.67).is_err());
        assert!(build_pattern(1.0, 3.0, 13.67).is_err(), "too few short pairs");
    }

    #[test]
    fn rotation_lookup() {
        let p = build_pattern(1.0, 9.75, 13.67).unwrap();
        assert_eq!(p.rotation_count(), 1024);
        assert_eq!(p.rotation_index(0.0), 0);
        assert_eq!(p.rotation_index(2.0 * PI - 1e-6), 0);
        assert_eq!(p.rotation_index(PI), 512);
        assert_eq!(p.rotation_index(-PI / 2.0), 768);
        let (x, y) = p.rotated_unit(256)[1];
        assert!((x - 0.0).abs() < 1e-9 && (y - 2.9).abs() < 1e-9);
    }
}
