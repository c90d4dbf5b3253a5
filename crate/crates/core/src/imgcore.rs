//! Image containers, grayscale conversion, integral images and smoothing.
//!
//! Intensities are stored as `f32` in `[0, 1]`. Anything that accumulates
//! (integral tables, smoothing weights) works in `f64`.

use std::path::Path;

use crate::error::{param, Error, Result};

/// Side length limit for either image dimension.
pub const MAX_DIMENSION: usize = 1 << 16;

const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Image(format!("empty image {width}x{height}")));
    }
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::Image(format!(
            "{width}x{height} exceeds the {MAX_DIMENSION} px limit"
        )));
    }
    Ok(())
}

/// Single-channel image with row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "buffer holds {} samples, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Image(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image from a per-pixel function; results are clamped to
    /// `[0, 1]` (NaN maps to 0).
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(
            width >= 1 && height >= 1 && width <= MAX_DIMENSION && height <= MAX_DIMENSION,
            "invalid dimensions {width}x{height}"
        );
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Writes a pixel, clamping the value into `[0, 1]`.
    #[inline]
    pub fn put(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = clamp_unit(value);
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear sample with edge clamping; pixel `(i, j)` sits at integer
    /// coordinates.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, fx) = bilinear_taps(x, self.width);
        let (y0, y1, fy) = bilinear_taps(y, self.height);
        let p = |xx: usize, yy: usize| self.data[yy * self.width + xx] as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Horizontally mirrored copy.
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn to_rgb(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([to_u8(self.get(x as usize, y as usize))])
        })
    }

    pub fn from_luma8(img: &image::GrayImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            width: w as usize,
            height: h as usize,
            data: img.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }
}

/// Three-channel image with row-major `(r, g, b)` triples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "buffer holds {} pixels, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        if data.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Image("channel value outside [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "invalid dimensions {width}x{height}");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).map(clamp_unit));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, px: [f32; 3]) {
        self.data[y * self.width + x] = px.map(clamp_unit);
    }

    pub fn as_slice(&self) -> &[[f32; 3]] {
        &self.data
    }

    /// Bilinear sample per channel with edge clamping.
    pub fn bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let (x0, x1, fx) = bilinear_taps(x, self.width);
        let (y0, y1, fy) = bilinear_taps(y, self.height);
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let p = |xx: usize, yy: usize| self.data[yy * self.width + xx][c] as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
        out
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Rgb(self.get(x as usize, y as usize).map(to_u8))
        })
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        Self {
            width: w as usize,
            height: h as usize,
            data: img
                .pixels()
                .map(|p| p.0.map(|v| v as f32 / 255.0))
                .collect(),
        }
    }
}

#[inline]
fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (clamp_unit(v) * 255.0).round() as u8
}

#[inline]
fn bilinear_taps(v: f64, len: usize) -> (usize, usize, f64) {
    let max = (len - 1) as f64;
    let v = v.clamp(0.0, max);
    let i0 = v.floor();
    let frac = v - i0;
    let i0 = i0 as usize;
    (i0, (i0 + 1).min(len - 1), frac)
}

/// BT.601 luma, clamped to `[0, 1]`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|px| clamp_unit(px.iter().zip(LUMA_WEIGHTS).map(|(v, w)| v * w).sum()))
            .collect(),
    }
}

/// Summed-area table over a [`GrayImage`].
///
/// `at(x, y)` is the sum of all pixels `(i, j)` with `i <= x` and `j <= y`.
/// Internally the table carries a leading row and column of zeros so every
/// lookup is branch-free.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    stride: usize,
    table: Vec<f64>,
}

/// Builds the summed-area table in one pass.
pub fn integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = img.dimensions();
    let stride = w + 1;
    let mut table = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0.0f64;
        let src = &img.data[y * w..(y + 1) * w];
        let (above, current) = table.split_at_mut((y + 1) * stride);
        let above = &above[y * stride..];
        for x in 0..w {
            row_sum += src[x] as f64;
            current[x + 1] = row_sum + above[x + 1];
        }
    }
    IntegralImage {
        width: w,
        height: h,
        stride,
        table,
    }
}

impl IntegralImage {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Cumulative sum over `[0, x] x [0, y]`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[(y + 1) * self.stride + x + 1]
    }

    #[inline]
    fn padded(&self, x: usize, y: usize) -> f64 {
        self.table[y * self.stride + x]
    }

    /// Sum over the inclusive rectangle `[x0, x1] x [y0, y1]` intersected with
    /// the image. Area outside the image contributes zero.
    #[inline]
    pub fn box_sum(&self, x0: i64, y0: i64, x1: i64, y1: i64) -> f64 {
        let cx0 = x0.clamp(0, self.width as i64) as usize;
        let cy0 = y0.clamp(0, self.height as i64) as usize;
        let cx1 = (x1 + 1).clamp(0, self.width as i64) as usize;
        let cy1 = (y1 + 1).clamp(0, self.height as i64) as usize;
        if cx1 <= cx0 || cy1 <= cy0 {
            return 0.0;
        }
        self.padded(cx1, cy1) - self.padded(cx0, cy1) - self.padded(cx1, cy0) + self.padded(cx0, cy0)
    }

    /// Continuous summed area: integral of the piecewise-constant image over
    /// `[0, u) x [0, v)` where pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
    #[inline]
    fn area_to(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, self.width as f64);
        let v = v.clamp(0.0, self.height as f64);
        let ui = (u.floor() as usize).min(self.width - 1);
        let vi = (v.floor() as usize).min(self.height - 1);
        let fu = u - ui as f64;
        let fv = v - vi as f64;
        let a = self.padded(ui, vi);
        let b = self.padded(ui + 1, vi);
        let c = self.padded(ui, vi + 1);
        let d = self.padded(ui + 1, vi + 1);
        a + (b - a) * fu + (c - a) * fv + (a + d - b - c) * fu * fv
    }

    /// Mean intensity over the axis-aligned square of half-width `half`
    /// centered on the pixel-coordinate point `(x, y)`. The part of the square
    /// outside the image is ignored. Sub-pixel positions and widths are
    /// handled exactly under the piecewise-constant pixel model.
    pub fn area_mean(&self, x: f64, y: f64, half: f64) -> f64 {
        let half = half.max(0.5);
        let (u0, u1) = ((x + 0.5 - half).max(0.0), (x + 0.5 + half).min(self.width as f64));
        let (v0, v1) = ((y + 0.5 - half).max(0.0), (y + 0.5 + half).min(self.height as f64));
        let area = (u1 - u0) * (v1 - v0);
        if area <= 0.0 {
            return 0.0;
        }
        let sum = self.area_to(u1, v1) - self.area_to(u0, v1) - self.area_to(u1, v0)
            + self.area_to(u0, v0);
        sum / area
    }
}

/// Gaussian-weighted mean of bilinear samples on the integer offsets of a
/// `ceil(3 sigma)` window around `(x, y)`. Weights are renormalized over the
/// samples that fall inside the image.
pub fn smoothed_intensity(img: &GrayImage, x: f64, y: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(param("sigma", format!("must be positive, got {sigma}")));
    }
    if !img.contains(x, y) {
        return Err(param("point", format!("({x}, {y}) lies outside the image")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let (mut acc, mut norm) = (0.0, 0.0);
    for dy in -radius..=radius {
        let py = y + dy as f64;
        if py < 0.0 || py > (img.height - 1) as f64 {
            continue;
        }
        for dx in -radius..=radius {
            let px = x + dx as f64;
            if px < 0.0 || px > (img.width - 1) as f64 {
                continue;
            }
            let w = (-((dx * dx + dy * dy) as f64) / denom).exp();
            acc += w * img.bilinear(px, py);
            norm += w;
        }
    }
    Ok(acc / norm)
}

/// Decodes PNG, JPEG or BMP into linear `[0, 1]` RGB.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    check_dims(w as usize, h as usize)?;
    Ok(RgbImage::from_rgb8(&rgb))
}

pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    load_rgb(path).map(|rgb| to_grayscale(&rgb))
}

/// Writes an 8-bit image; the format follows the file extension.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.to_luma8().save(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.to_rgb8().save(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.random::<f32>())
    }

    fn naive_integral(img: &GrayImage, x: usize, y: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..=y {
            for i in 0..=x {
                s += img.get(i, j) as f64;
            }
        }
        s
    }

    #[test]
    fn grayscale_examples() {
        let gray = |px: [f32; 3]| to_grayscale(&RgbImage::new(1, 1, vec![px]).unwrap()).get(0, 0);
        assert!((gray([1.0, 1.0, 1.0]) - 1.0).abs() < 1e-6);
        assert_eq!(gray([0.0, 0.0, 0.0]), 0.0);
        assert!((gray([1.0, 0.0, 0.0]) - 0.299).abs() < 1e-7);
    }

    #[test]
    fn rejects_out_of_range_and_bad_lengths() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 1, vec![1.5]).is_err());
        assert!(GrayImage::new(0, 4, vec![]).is_err());
        assert!(RgbImage::new(1, 1, vec![[0.0, -0.1, 0.0]]).is_err());
    }

    #[test]
    fn integral_small_cases() {
        let ii = integral(&GrayImage::filled(2, 2, 1.0));
        assert_eq!([ii.at(0, 0), ii.at(1, 0), ii.at(0, 1), ii.at(1, 1)], [1.0, 2.0, 2.0, 4.0]);
        let ii = integral(&GrayImage::filled(1, 1, 0.25));
        assert_eq!(ii.at(0, 0), 0.25);
    }

    #[test]
    fn integral_matches_double_sum() {
        let img = random_image(64, 64, 7);
        let ii = integral(&img);
        let mut worst = 0.0f64;
        for y in 0..64 {
            for x in 0..64 {
                worst = worst.max((ii.at(x, y) - naive_integral(&img, x, y)).abs());
            }
        }
        assert!(worst <= 1e-9, "max diff {worst}");
    }

    #[test]
    fn integral_monotone() {
        let img = random_image(20, 13, 3);
        let ii = integral(&img);
        for y in 0..13 {
            for x in 0..20 {
                if x > 0 {
                    assert!(ii.at(x, y) >= ii.at(x - 1, y));
                }
                if y > 0 {
                    assert!(ii.at(x, y) >= ii.at(x, y - 1));
                }
            }
        }
    }

    #[test]
    fn box_sum_examples() {
        let ii = integral(&GrayImage::filled(2, 2, 1.0));
        assert_eq!(ii.box_sum(0, 0, 1, 1), 4.0);
        assert_eq!(ii.box_sum(5, 5, 9, 9), 0.0);
        assert_eq!(ii.box_sum(-4, -4, -1, -1), 0.0);
        assert_eq!(ii.box_sum(-3, -3, 0, 0), 1.0);
        assert_eq!(ii.box_sum(1, 1, 0, 0), 0.0);
    }

    #[test]
    fn box_sum_matches_pixel_loop() {
        let img = random_image(32, 32, 11);
        let ii = integral(&img);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let x0 = rng.random_range(-8i64..40);
            let y0 = rng.random_range(-8i64..40);
            let x1 = x0 + rng.random_range(0i64..30);
            let y1 = y0 + rng.random_range(0i64..30);
            let mut direct = 0.0;
            for y in y0.max(0)..=y1.min(31) {
                for x in x0.max(0)..=x1.min(31) {
                    direct += img.get(x as usize, y as usize) as f64;
                }
            }
            assert!((ii.box_sum(x0, y0, x1, y1) - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn area_mean_agrees_with_box_sum_on_pixel_grid() {
        let img = random_image(16, 16, 5);
        let ii = integral(&img);
        // half = 1.5 around a pixel center covers exactly the 3x3 block
        let m = ii.area_mean(7.0, 9.0, 1.5);
        assert!((m - ii.box_sum(6, 8, 8, 10) / 9.0).abs() < 1e-12);
        let flat = integral(&GrayImage::filled(9, 9, 0.4));
        assert!((flat.area_mean(0.3, 8.7, 3.2) - 0.4f32 as f64).abs() < 1e-9);
    }

    fn smoothing_oracle(img: &GrayImage, x: f64, y: f64, sigma: f64) -> f64 {
        let r = (3.0 * sigma).ceil() as i64;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in -r..=r {
            for i in -r..=r {
                let (px, py) = (x + i as f64, y + j as f64);
                if px < 0.0 || py < 0.0 || px > (img.width() - 1) as f64 || py > (img.height() - 1) as f64 {
                    continue;
                }
                let (x0, y0) = (px.floor() as usize, py.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
                let (fx, fy) = (px - x0 as f64, py - y0 as f64);
                let v = img.get(x0, y0) as f64 * (1.0 - fx) * (1.0 - fy)
                    + img.get(x1, y0) as f64 * fx * (1.0 - fy)
                    + img.get(x0, y1) as f64 * (1.0 - fx) * fy
                    + img.get(x1, y1) as f64 * fx * fy;
                let w = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
                num += w * v;
                den += w;
            }
        }
        num / den
    }

    #[test]
    fn smoothing_examples() {
        let flat = GrayImage::filled(20, 20, 0.37);
        let v = smoothed_intensity(&flat, 3.3, 17.9, 2.2).unwrap();
        assert!((v - 0.37).abs() < 1e-6);

        let dot = GrayImage::from_fn(21, 21, |x, y| if x == 10 && y == 10 { 1.0 } else { 0.0 });
        let v = smoothed_intensity(&dot, 10.0, 10.0, 1.0).unwrap();
        assert!(v > 0.0 && v < 1.0);

        assert!(smoothed_intensity(&flat, 1.0, 1.0, 0.0).is_err());
        assert!(smoothed_intensity(&flat, 1.0, 1.0, -1.0).is_err());
        assert!(smoothed_intensity(&flat, 25.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smoothing_matches_explicit_window() {
        let img = random_image(30, 30, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let x = rng.random_range(0.0..29.0);
            let y = rng.random_range(0.0..29.0);
            let got = smoothed_intensity(&img, x, y, 1.5).unwrap();
            assert!((got - smoothing_oracle(&img, x, y, 1.5)).abs() <= 1e-9);
        }
    }

    proptest! {
        #[test]
        fn grayscale_bounded(r in 0.0f32..=1.0, g in 0.0f32..=1.0, b in 0.0f32..=1.0) {
            let v = to_grayscale(&RgbImage::new(1, 1, vec![[r, g, b]]).unwrap()).get(0, 0);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn box_sum_additive(seed in 0u64..1000, x0 in -4i64..20, y0 in -4i64..20,
                            w in 1i64..20, h in 1i64..20, split in 0.0f64..1.0) {
            let ii = integral(&random_image(24, 24, seed));
            let (x1, y1) = (x0 + w, y0 + h);
            let xm = x0 + (split * w as f64) as i64;
            let whole = ii.box_sum(x0, y0, x1, y1);
            let halves = ii.box_sum(x0, y0, xm, y1) + ii.box_sum(xm + 1, y0, x1, y1);
            prop_assert!((whole - halves).abs() <= 1e-9);
        }

        #[test]
        fn smoothing_bounded_by_window(seed in 0u64..500, x in 0.0f64..15.0, y in 0.0f64..15.0,
                                       sigma in 0.3f64..3.0) {
            let img = random_image(16, 16, seed);
            let v = smoothed_intensity(&img, x, y, sigma).unwrap();
            let r = (3.0 * sigma).ceil() as i64 + 1;
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for j in (y.floor() as i64 - r).max(0)..=(y.floor() as i64 + r).min(15) {
                for i in (x.floor() as i64 - r).max(0)..=(x.floor() as i64 + r).min(15) {
                    let p = img.get(i as usize, j as usize) as f64;
                    lo = lo.min(p);
                    hi = hi.max(p);
                }
            }
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}
