//! Fast-Hessian keypoint detection.
//!
//! Second-order Gaussian derivatives are approximated with box filters
//! evaluated on an [`IntegralImage`]. Each octave holds `layers_per_octave`
//! response layers sampled on a common grid; local maxima of the Hessian
//! determinant in a 3x3x3 (space x scale) neighborhood are refined with a
//! quadratic fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::imgcore::{integral, GrayImage, IntegralImage};

/// Weight on the mixed derivative in the determinant approximation.
pub const DXY_WEIGHT: f64 = 0.9;

/// Gaussian sigma represented by the 9x9 base filter.
pub const BASE_SIGMA: f64 = 1.2;

const BASE_FILTER: usize = 9;
const MAX_REFINE_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub n_octaves: usize,
    pub layers_per_octave: usize,
    /// Minimum determinant response, on `[0, 1]` intensities with
    /// area-normalized filters.
    pub hessian_threshold: f64,
    pub initial_step: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            n_octaves: 4,
            layers_per_octave: 4,
            hessian_threshold: 0.0002,
            initial_step: 1,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_octaves < 1 {
            return Err(param("n_octaves", "need at least one octave"));
        }
        if self.layers_per_octave < 3 {
            return Err(param(
                "layers_per_octave",
                format!("need at least 3 layers, got {}", self.layers_per_octave),
            ));
        }
        if !(self.hessian_threshold >= 0.0) {
            return Err(param("hessian_threshold", "must be non-negative"));
        }
        if self.initial_step < 1 {
            return Err(param("initial_step", "must be at least 1"));
        }
        Ok(())
    }
}

/// Pyramid sample a keypoint was selected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleIndex {
    pub layer: usize,
    pub col: usize,
    pub row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Gaussian sigma in pixels.
    pub scale: f64,
    /// Interpolated determinant of the approximated Hessian.
    pub response: f64,
    pub octave: usize,
    pub layer: usize,
    /// `true` when the Hessian trace is non-negative (dark blob on bright).
    pub laplacian_positive: bool,
    /// Raw NMS maximum this keypoint was refined from.
    pub origin: SampleIndex,
}

/// Box filter size for `(octave, layer)`: 9, 15, 21, 27 / 15, 27, 39, 51 / ...
#[inline]
pub fn filter_size(octave: usize, layer: usize) -> usize {
    3 * ((1 << (octave + 1)) * (layer + 1) + 1)
}

#[inline]
pub fn sigma_for_filter(box_size: f64) -> f64 {
    BASE_SIGMA * box_size / BASE_FILTER as f64
}

#[derive(Debug, Clone)]
pub struct ResponseLayer {
    pub octave: usize,
    pub layer: usize,
    pub width: usize,
    pub height: usize,
    /// Image pixels per sample.
    pub step: usize,
    pub box_size: usize,
    pub sigma: f64,
    responses: Vec<f64>,
    laplacian_signs: Vec<bool>,
}

impl ResponseLayer {
    #[inline]
    pub fn response(&self, col: usize, row: usize) -> f64 {
        self.responses[row * self.width + col]
    }

    #[inline]
    pub fn laplacian_positive(&self, col: usize, row: usize) -> bool {
        self.laplacian_signs[row * self.width + col]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }
}

#[derive(Debug, Clone, Default)]
pub struct Pyramid {
    /// Octave-major, layer-minor.
    pub layers: Vec<ResponseLayer>,
    pub warning: Option<String>,
}

impl Pyramid {
    pub fn octave(&self, octave: usize) -> impl Iterator<Item = &ResponseLayer> {
        self.layers.iter().filter(move |l| l.octave == octave)
    }

    pub fn get(&self, octave: usize, layer: usize) -> Option<&ResponseLayer> {
        self.layers
            .iter()
            .find(|l| l.octave == octave && l.layer == layer)
    }
}

/// Determinant and trace sign of the box-filter Hessian at pixel `(x, y)`.
pub fn hessian_response(ii: &IntegralImage, x: usize, y: usize, box_size: usize) -> Result<(f64, bool)> {
    if box_size < BASE_FILTER || box_size.is_multiple_of(2) {
        return Err(param(
            "box_size",
            format!("must be odd and at least {BASE_FILTER}, got {box_size}"),
        ));
    }
    if x >= ii.width() || y >= ii.height() {
        return Err(param("point", format!("({x}, {y}) outside image")));
    }
    let (det, trace) = hessian_at(ii, x as i64, y as i64, box_size as i64);
    Ok((det, trace >= 0.0))
}

#[inline]
fn hessian_at(ii: &IntegralImage, x: i64, y: i64, size: i64) -> (f64, f64) {
    let border = (size - 1) / 2;
    let lobe = size / 3;
    let half_lobe = lobe / 2;
    let inv_area = 1.0 / (size * size) as f64;

    // +1 -2 +1 across x, lobes `lobe` wide and `2*lobe - 1` tall
    let dxx = ii.box_sum(x - border, y - lobe + 1, x + border, y + lobe - 1)
        - 3.0 * ii.box_sum(x - half_lobe, y - lobe + 1, x + half_lobe, y + lobe - 1);
    let dyy = ii.box_sum(x - lobe + 1, y - border, x + lobe - 1, y + border)
        - 3.0 * ii.box_sum(x - lobe + 1, y - half_lobe, x + lobe - 1, y + half_lobe);
    let dxy = ii.box_sum(x + 1, y + 1, x + lobe, y + lobe) + ii.box_sum(x - lobe, y - lobe, x - 1, y - 1)
        - ii.box_sum(x + 1, y - lobe, x + lobe, y - 1)
        - ii.box_sum(x - lobe, y + 1, x - 1, y + lobe);

    let (dxx, dyy, dxy) = (dxx * inv_area, dyy * inv_area, dxy * inv_area);
    let w = DXY_WEIGHT * dxy;
    (dxx * dyy - w * w, dxx + dyy)
}

/// Computes every response layer whose filter fits inside the image.
pub fn build_pyramid(ii: &IntegralImage, p: &DetectorParams) -> Result<Pyramid> {
    p.validate()?;
    let (w, h) = (ii.width(), ii.height());
    let fits = |size: usize| size <= w.min(h);
    if !fits(filter_size(0, 0)) {
        let msg = format!(
            "{w}x{h} image is smaller than the {BASE_FILTER}x{BASE_FILTER} base filter"
        );
        log::warn!("{msg}");
        return Ok(Pyramid {
            layers: Vec::new(),
            warning: Some(msg),
        });
    }

    let mut specs = Vec::new();
    for octave in 0..p.n_octaves {
        let step = p.initial_step << octave;
        for layer in 0..p.layers_per_octave {
            let size = filter_size(octave, layer);
            if fits(size) {
                specs.push((octave, layer, step, size));
            }
        }
    }

    let layers = specs
        .into_iter()
        .map(|(octave, layer, step, box_size)| {
            let width = (w - 1) / step + 1;
            let height = (h - 1) / step + 1;
            let mut responses = vec![0.0; width * height];
            let mut laplacian_signs = vec![false; width * height];
            responses
                .par_chunks_mut(width)
                .zip(laplacian_signs.par_chunks_mut(width))
                .enumerate()
                .for_each(|(row, (resp, signs))| {
                    let y = (row * step) as i64;
                    for col in 0..width {
                        let (det, trace) = hessian_at(ii, (col * step) as i64, y, box_size as i64);
                        resp[col] = det;
                        signs[col] = trace >= 0.0;
                    }
                });
            ResponseLayer {
                octave,
                layer,
                width,
                height,
                step,
                box_size,
                sigma: sigma_for_filter(box_size as f64),
                responses,
                laplacian_signs,
            }
        })
        .collect();

    Ok(Pyramid {
        layers,
        warning: None,
    })
}

/// Whether sample `(col, row)` of `mid` is strictly greater than its 26
/// neighbors across `below`, `mid` and `above`. Callers guarantee the 3x3
/// window is in range.
#[inline]
pub fn is_strict_maximum(below: &ResponseLayer, mid: &ResponseLayer, above: &ResponseLayer, col: usize, row: usize) -> bool {
    let v = mid.response(col, row);
    for (k, layer) in [below, mid, above].into_iter().enumerate() {
        for r in row - 1..=row + 1 {
            for c in col - 1..=col + 1 {
                if k == 1 && r == row && c == col {
                    continue;
                }
                if layer.response(c, r) >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// Whether the largest filter around pixel `(x, y)` of an NMS triple stays
/// inside the image, and the 3x3 sample window exists.
#[inline]
fn interior(top: &ResponseLayer, img_w: usize, img_h: usize, col: usize, row: usize) -> bool {
    let border = (top.box_size - 1) / 2;
    let (x, y) = (col * top.step, row * top.step);
    col >= 1
        && row >= 1
        && col + 1 < top.width
        && row + 1 < top.height
        && x >= border
        && y >= border
        && x + border < img_w
        && y + border < img_h
}

/// All raw 3x3x3 maxima at or above the threshold, as `(octave, layer, col, row)`.
pub fn nms_candidates(pyr: &Pyramid, img_w: usize, img_h: usize, threshold: f64) -> Vec<(usize, SampleIndex)> {
    let mut out = Vec::new();
    let octaves: Vec<usize> = {
        let mut o: Vec<usize> = pyr.layers.iter().map(|l| l.octave).collect();
        o.dedup();
        o
    };
    for octave in octaves {
        let layers: Vec<&ResponseLayer> = pyr.octave(octave).collect();
        for li in 1..layers.len().saturating_sub(1) {
            let (below, mid, above) = (layers[li - 1], layers[li], layers[li + 1]);
            let found: Vec<SampleIndex> = (1..mid.height.saturating_sub(1))
                .into_par_iter()
                .flat_map_iter(|row| {
                    (1..mid.width - 1).filter_map(move |col| {
                        if mid.response(col, row) < threshold
                            || !interior(above, img_w, img_h, col, row)
                            || !is_strict_maximum(below, mid, above, col, row)
                        {
                            return None;
                        }
                        Some(SampleIndex {
                            layer: mid.layer,
                            col,
                            row,
                        })
                    })
                })
                .collect();
            out.extend(found.into_iter().map(|s| (octave, s)));
        }
    }
    out
}

struct Fit {
    offset: [f64; 3],
    value: f64,
}

/// Quadratic fit of the response around `(col, row)` in `layers[li]`.
fn fit_quadratic(layers: &[&ResponseLayer], li: usize, col: usize, row: usize) -> Option<Fit> {
    let (b, m, t) = (layers[li - 1], layers[li], layers[li + 1]);
    let v = m.response(col, row);
    let mr = |c: usize, r: usize| m.response(c, r);

    let dx = (mr(col + 1, row) - mr(col - 1, row)) / 2.0;
    let dy = (mr(col, row + 1) - mr(col, row - 1)) / 2.0;
    let ds = (t.response(col, row) - b.response(col, row)) / 2.0;

    let dxx = mr(col + 1, row) + mr(col - 1, row) - 2.0 * v;
    let dyy = mr(col, row + 1) + mr(col, row - 1) - 2.0 * v;
    let dss = t.response(col, row) + b.response(col, row) - 2.0 * v;
    let dxy = (mr(col + 1, row + 1) - mr(col - 1, row + 1) - mr(col + 1, row - 1) + mr(col - 1, row - 1)) / 4.0;
    let dxs = (t.response(col + 1, row) - t.response(col - 1, row) - b.response(col + 1, row)
        + b.response(col - 1, row))
        / 4.0;
    let dys = (t.response(col, row + 1) - t.response(col, row - 1) - b.response(col, row + 1)
        + b.response(col, row - 1))
        / 4.0;

    let h = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
    let g = [dx, dy, ds];
    let offset = solve3(h, g.map(|v| -v))?;
    let value = v + 0.5 * (g[0] * offset[0] + g[1] * offset[1] + g[2] * offset[2]);
    Some(Fit { offset, value })
}

/// Cramer's rule; `None` when the system is (numerically) singular.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(a);
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || d.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        *o = det3(m) / d;
    }
    Some(out)
}

fn refine(
    layers: &[&ResponseLayer],
    start: SampleIndex,
    img_w: usize,
    img_h: usize,
    threshold: f64,
) -> Option<Keypoint> {
    let mut li = layers.iter().position(|l| l.layer == start.layer)?;
    let (mut col, mut row) = (start.col, start.row);
    for _ in 0..=MAX_REFINE_STEPS {
        let fit = fit_quadratic(layers, li, col, row)?;
        let [ox, oy, os] = fit.offset;
        if ox.abs() <= 0.5 && oy.abs() <= 0.5 && os.abs() <= 0.5 {
            if fit.value < threshold {
                return None;
            }
            let (b, m) = (layers[li - 1], layers[li]);
            let filter_step = (m.box_size - b.box_size) as f64;
            let x = (col as f64 + ox) * m.step as f64;
            let y = (row as f64 + oy) * m.step as f64;
            if !(x > 0.0 && y > 0.0 && x < (img_w - 1) as f64 && y < (img_h - 1) as f64) {
                return None;
            }
            return Some(Keypoint {
                x,
                y,
                scale: sigma_for_filter(m.box_size as f64 + os * filter_step),
                response: fit.value,
                octave: m.octave,
                layer: m.layer,
                laplacian_positive: m.laplacian_positive(col, row),
                origin: start,
            });
        }
        let next_col = col as i64 + ox.round() as i64;
        let next_row = row as i64 + oy.round() as i64;
        let next_li = li as i64 + os.round() as i64;
        if next_li < 1 || next_li as usize + 1 >= layers.len() || next_col < 1 || next_row < 1 {
            return None;
        }
        li = next_li as usize;
        col = next_col as usize;
        row = next_row as usize;
        if !interior(layers[li + 1], img_w, img_h, col, row) {
            return None;
        }
    }
    None
}

/// Runs detection against an already-built pyramid.
pub fn detect_in_pyramid(pyr: &Pyramid, img_w: usize, img_h: usize, p: &DetectorParams) -> Vec<Keypoint> {
    let candidates = nms_candidates(pyr, img_w, img_h, p.hessian_threshold);
    let mut keypoints: Vec<Keypoint> = candidates
        .par_iter()
        .filter_map(|&(octave, start)| {
            let layers: Vec<&ResponseLayer> = pyr.octave(octave).collect();
            refine(&layers, start, img_w, img_h, p.hessian_threshold)
        })
        .collect();
    keypoints.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    keypoints
}

/// Detects keypoints, strongest first.
pub fn detect(img: &GrayImage, p: &DetectorParams) -> Result<Vec<Keypoint>> {
    let ii = integral(img);
    let pyr = build_pyramid(&ii, p)?;
    Ok(detect_in_pyramid(&pyr, img.width(), img.height(), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Explicit filter masks, convolved directly with zero padding.
    fn mask_oracle(img: &GrayImage, x: i64, y: i64, size: i64) -> f64 {
        let lobe = size / 3;
        let border = (size - 1) / 2;
        let px = |i: i64, j: i64| {
            if i < 0 || j < 0 || i >= img.width() as i64 || j >= img.height() as i64 {
                0.0
            } else {
                img.get(i as usize, j as usize) as f64
            }
        };
        let (mut dxx, mut dyy, mut dxy) = (0.0, 0.0, 0.0);
        for dy in -border..=border {
            for dx in -border..=border {
                let v = px(x + dx, y + dy);
                if dy.abs() < lobe {
                    dxx += if dx.abs() <= lobe / 2 { -2.0 } else { 1.0 } * v;
                }
                if dx.abs() < lobe {
                    dyy += if dy.abs() <= lobe / 2 { -2.0 } else { 1.0 } * v;
                }
                if dx != 0 && dy != 0 && dx.abs() <= lobe && dy.abs() <= lobe {
                    dxy += (dx * dy).signum() as f64 * v;
                }
            }
        }
        let a = (size * size) as f64;
        let (dxx, dyy, dxy) = (dxx / a, dyy / a, dxy / a);
        dxx * dyy - (0.9 * dxy) * (0.9 * dxy)
    }

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random::<f32>())
    }

    fn gaussian_blob(size: usize, cx: f64, cy: f64, sigma: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            (-r2 / (2.0 * sigma * sigma)).exp() as f32
        })
    }

    #[test]
    fn filter_sizes_follow_octave_rule() {
        let sizes: Vec<usize> = (0..4).map(|l| filter_size(0, l)).collect();
        assert_eq!(sizes, [9, 15, 21, 27]);
        let sizes: Vec<usize> = (0..4).map(|l| filter_size(1, l)).collect();
        assert_eq!(sizes, [15, 27, 39, 51]);
        let sizes: Vec<usize> = (0..4).map(|l| filter_size(2, l)).collect();
        assert_eq!(sizes, [27, 51, 75, 99]);
        assert!((sigma_for_filter(9.0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn hessian_rejects_bad_sizes() {
        let ii = integral(&GrayImage::filled(32, 32, 0.5));
        assert!(hessian_response(&ii, 5, 5, 7).is_err());
        assert!(hessian_response(&ii, 5, 5, 10).is_err());
        assert!(hessian_response(&ii, 40, 5, 9).is_err());
    }

    #[test]
    fn hessian_constant_and_blob() {
        let ii = integral(&GrayImage::filled(64, 64, 0.6));
        let (det, _) = hessian_response(&ii, 32, 32, 9).unwrap();
        assert_eq!(det, 0.0);

        let square = GrayImage::from_fn(64, 64, |x, y| {
            if (29..=35).contains(&x) && (29..=35).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let (det, lap_positive) = hessian_response(&integral(&square), 32, 32, 15).unwrap();
        assert!(det > 0.0);
        assert!(!lap_positive, "bright blob has negative trace");
    }

    #[test]
    fn hessian_matches_mask_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..40 {
            let img = random_image(48, 40, case);
            let ii = integral(&img);
            for size in [9usize, 15] {
                let x = rng.random_range(0..48);
                let y = rng.random_range(0..40);
                let (det, _) = hessian_response(&ii, x, y, size).unwrap();
                let oracle = mask_oracle(&img, x as i64, y as i64, size as i64);
                assert!((det - oracle).abs() <= 1e-9, "size {size} at ({x},{y}): {det} vs {oracle}");
            }
        }
    }

    #[test]
    fn pyramid_layout() {
        let img = GrayImage::filled(128, 128, 0.5);
        let ii = integral(&img);
        let p = DetectorParams {
            n_octaves: 1,
            ..DetectorParams::default()
        };
        let pyr = build_pyramid(&ii, &p).unwrap();
        let sizes: Vec<usize> = pyr.layers.iter().map(|l| l.box_size).collect();
        assert_eq!(sizes, [9, 15, 21, 27]);
        // a flat image has zero response wherever the filter fits
        for l in &pyr.layers {
            let border = l.box_size / 2;
            for row in border..l.height - border {
                for col in border..l.width - border {
                    assert!(l.response(col, row).abs() < 1e-12);
                }
            }
        }

        let p = DetectorParams {
            n_octaves: 2,
            ..DetectorParams::default()
        };
        let pyr = build_pyramid(&ii, &p).unwrap();
        let second: Vec<(usize, usize)> = pyr.octave(1).map(|l| (l.box_size, l.step)).collect();
        assert_eq!(second, [(15, 2), (27, 2), (39, 2), (51, 2)]);
        assert_eq!(pyr.get(1, 0).unwrap().width, 64);
    }

    #[test]
    fn tiny_image_gives_empty_pyramid() {
        let ii = integral(&GrayImage::filled(8, 20, 0.5));
        let pyr = build_pyramid(&ii, &DetectorParams::default()).unwrap();
        assert!(pyr.layers.is_empty());
        assert!(pyr.warning.is_some());
        assert!(detect(&GrayImage::filled(8, 20, 0.5), &DetectorParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn params_validation() {
        let bad = DetectorParams {
            layers_per_octave: 2,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorParams {
            hessian_threshold: -1.0,
            ..DetectorParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_image_has_no_keypoints() {
        let kps = detect(&GrayImage::filled(128, 128, 0.3), &DetectorParams::default()).unwrap();
        assert!(kps.is_empty());
    }

    #[test]
    fn single_blob_single_keypoint() {
        let img = gaussian_blob(128, 64.0, 64.0, 3.0);
        let kps = detect(&img, &DetectorParams::default()).unwrap();
        assert_eq!(kps.len(), 1, "{kps:?}");
        let kp = kps[0];
        assert!(((kp.x - 64.0).powi(2) + (kp.y - 64.0).powi(2)).sqrt() <= 2.0, "{kp:?}");
        assert!(kp.scale >= 1.2);
    }

    #[test]
    fn every_keypoint_is_a_strict_maximum() {
        let img = texture(160, 140, 4);
        let p = DetectorParams::default();
        let pyr = build_pyramid(&integral(&img), &p).unwrap();
        let kps = detect_in_pyramid(&pyr, 160, 140, &p);
        assert!(!kps.is_empty());
        for kp in &kps {
            let o = kp.origin;
            let below = pyr.get(kp.octave, o.layer - 1).unwrap();
            let mid = pyr.get(kp.octave, o.layer).unwrap();
            let above = pyr.get(kp.octave, o.layer + 1).unwrap();
            assert!(is_strict_maximum(below, mid, above, o.col, o.row));
            assert!(mid.response(o.col, o.row) >= p.hessian_threshold);
            assert!(kp.response > p.hessian_threshold);
            assert!(kp.x > 0.0 && kp.y > 0.0 && kp.x < 159.0 && kp.y < 139.0);
        }
        for pair in kps.windows(2) {
            assert!(pair[0].response >= pair[1].response);
        }
    }

    #[test]
    fn mirror_symmetry() {
        // (width - 1) divisible by the coarsest step keeps sample grids mirrored
        let img = texture(161, 120, 8);
        let p = DetectorParams::default();
        let a = detect(&img, &p).unwrap();
        let b = detect(&img.flip_horizontal(), &p).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a.len(), b.len());
        for kp in &a {
            let mx = 160.0 - kp.x;
            let hit = b.iter().any(|q| {
                (q.x - mx).abs() <= 0.5 && (q.y - kp.y).abs() <= 0.5 && (q.scale - kp.scale).abs() < 1e-6
            });
            assert!(hit, "no mirrored partner for {kp:?}");
        }
    }

    #[test]
    fn shift_equivariance() {
        let base = texture(200, 200, 12);
        let (dx, dy) = (8usize, 16usize);
        let pad = 0.5f32;
        let shifted = GrayImage::from_fn(200, 200, |x, y| {
            if x >= dx && y >= dy {
                base.get(x - dx, y - dy)
            } else {
                pad
            }
        });
        let p = DetectorParams::default();
        let a = detect(&base, &p).unwrap();
        let b = detect(&shifted, &p).unwrap();
        let mut checked = 0;
        for kp in a.iter().filter(|k| {
            let margin = 12.0 * k.scale;
            k.x > margin + dx as f64
                && k.y > margin + dy as f64
                && k.x + margin < 200.0 - dx as f64
                && k.y + margin < 200.0 - dy as f64
        }) {
            checked += 1;
            let hit = b.iter().any(|q| {
                (q.x - kp.x - dx as f64).abs() <= 0.5 && (q.y - kp.y - dy as f64).abs() <= 0.5
            });
            assert!(hit, "no shifted partner for {kp:?}");
        }
        assert!(checked > 5);
    }

    #[test]
    fn raising_threshold_never_adds_keypoints() {
        let img = texture(150, 150, 31);
        let mut previous: Option<Vec<Keypoint>> = None;
        for thr in [0.0001, 0.0004, 0.001, 0.003, 0.01] {
            let p = DetectorParams {
                hessian_threshold: thr,
                ..DetectorParams::default()
            };
            let kps = detect(&img, &p).unwrap();
            if let Some(prev) = &previous {
                assert!(kps.len() <= prev.len());
                for kp in &kps {
                    assert!(prev.iter().any(|q| q.x == kp.x && q.y == kp.y && q.scale == kp.scale));
                }
            }
            previous = Some(kps);
        }
    }
}
