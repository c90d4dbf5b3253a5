//! Synthetic copy-move forgeries and post-processing perturbations.
//!
//! [`apply_copy_move`] rotates and scales a rectangular source region about
//! its center, pastes it (hard-edged) around a destination center and returns
//! pixel-exact [`GroundTruth`]. Gaussian noise and JPEG recompression model
//! the post-processing attacks. Everything is seed-deterministic.

mod manifest;

pub use manifest::{generate_corpus, parse_manifest, read_index, write_item, CorpusItem, INDEX_FILE};

use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::DynamicImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::imgcore::{GrayImage, RgbImage};

pub const MAX_ROTATION_DEG: f64 = 50.0;
pub const SCALE_RANGE: (f64, f64) = (1.1, 2.0);

const SNAP_EPS: f64 = 1e-9;

/// Inclusive-origin pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.w && y < self.y + self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgerySpec {
    pub src_rect: Rect,
    /// Where the source center lands.
    pub dst_center: (f64, f64),
    /// Degrees, counter-clockwise on screen.
    pub rotation: f64,
    pub scale: f64,
    pub seed: u64,
}

impl ForgerySpec {
    pub fn plain(src_rect: Rect, dst_center: (f64, f64)) -> Self {
        Self {
            src_rect,
            dst_center,
            rotation: 0.0,
            scale: 1.0,
            seed: 0,
        }
    }

    /// Checks the operating ranges: rotation in `[0, 50]` degrees, scale
    /// either 1 or within `[1.1, 2.0]`.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_ROTATION_DEG).contains(&self.rotation) {
            return Err(param(
                "rotation",
                format!("{} deg outside [0, {MAX_ROTATION_DEG}]", self.rotation),
            ));
        }
        let (lo, hi) = SCALE_RANGE;
        if self.scale != 1.0 && !(lo..=hi).contains(&self.scale) {
            return Err(param(
                "scale",
                format!("{} is neither 1.0 nor within [{lo}, {hi}]", self.scale),
            ));
        }
        self.validate_geometry()
    }

    fn validate_geometry(&self) -> Result<()> {
        if self.src_rect.w == 0 || self.src_rect.h == 0 {
            return Err(param("src_rect", "empty rectangle"));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() || !self.rotation.is_finite() {
            return Err(param("scale", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Affine map `p -> (a x + b y + tx, c x + d y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.tx,
            self.c * x + self.d * y + self.ty,
        )
    }

    /// Destination-to-source map that turns image content by `degrees` about
    /// `center`, measured in pixel coordinates (x right, y down), so
    /// positive angles appear clockwise on screen.
    pub fn rotation_about(center: (f64, f64), degrees: f64) -> Self {
        let t = degrees.to_radians();
        let (sin, cos) = (snap(t.sin()), snap(t.cos()));
        Self::about(center, cos, sin, -sin, cos)
    }

    /// Destination-to-source map that magnifies content by `factor` about
    /// `center`.
    pub fn scaling_about(center: (f64, f64), factor: f64) -> Self {
        let inv = 1.0 / factor;
        Self::about(center, inv, 0.0, 0.0, inv)
    }

    fn about(center: (f64, f64), a: f64, b: f64, c: f64, d: f64) -> Self {
        let (cx, cy) = center;
        Self {
            a,
            b,
            c,
            d,
            tx: cx - a * cx - b * cy,
            ty: cy - c * cx - d * cy,
        }
    }
}

/// Resamples `img` onto a `width x height` grid through a
/// destination-to-source map, with bilinear interpolation and edge clamping.
pub fn warp<I>(img: &I, dst_to_src: &Affine, width: usize, height: usize) -> I
where
    I: Raster + WarpTarget,
{
    I::build(width, height, |x, y| {
        let (u, v) = dst_to_src.apply(x as f64, y as f64);
        img.sample(snap(u), snap(v))
    })
}

/// Rasters that can be built pixel by pixel.
pub trait WarpTarget: Raster {
    fn build(width: usize, height: usize, f: impl FnMut(usize, usize) -> Self::Pixel) -> Self;
}

impl WarpTarget for GrayImage {
    fn build(width: usize, height: usize, f: impl FnMut(usize, usize) -> f32) -> Self {
        GrayImage::from_fn(width, height, f)
    }
}

impl WarpTarget for RgbImage {
    fn build(width: usize, height: usize, f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        RgbImage::from_fn(width, height, f)
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Forward (source to destination) and inverse maps for a spec.
fn transforms(spec: &ForgerySpec) -> (Affine, Affine) {
    let theta = spec.rotation.to_radians();
    let (sin, cos) = (snap(theta.sin()), snap(theta.cos()));
    let (scx, scy) = spec.src_rect.center();
    let (dcx, dcy) = spec.dst_center;
    let s = spec.scale;
    // y points down, so this turns the region counter-clockwise on screen
    let (a, b, c, d) = (s * cos, s * sin, -s * sin, s * cos);
    let forward = Affine {
        a,
        b,
        c,
        d,
        tx: dcx - a * scx - b * scy,
        ty: dcy - c * scx - d * scy,
    };
    let inv_s = 1.0 / s;
    let (ia, ib, ic, id) = (inv_s * cos, -inv_s * sin, inv_s * sin, inv_s * cos);
    let inverse = Affine {
        a: ia,
        b: ib,
        c: ic,
        d: id,
        tx: scx - ia * dcx - ib * dcy,
        ty: scy - ic * dcx - id * dcy,
    };
    (forward, inverse)
}

/// Pixel-level ground truth for one forgery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "manifest::GroundTruthFile", try_from = "manifest::GroundTruthFile")]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub src_mask: Vec<bool>,
    pub dst_mask: Vec<bool>,
    /// Maps destination pixels back onto source pixels.
    pub correspondence: Affine,
}

impl GroundTruth {
    #[inline]
    fn index(&self, x: f64, y: f64) -> Option<usize> {
        let (xi, yi) = (x.round(), y.round());
        if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
            return None;
        }
        Some(yi as usize * self.width + xi as usize)
    }

    pub fn in_src(&self, x: f64, y: f64) -> bool {
        self.index(x, y).is_some_and(|i| self.src_mask[i])
    }

    pub fn in_dst(&self, x: f64, y: f64) -> bool {
        self.index(x, y).is_some_and(|i| self.dst_mask[i])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Pixel containers the synthesizer can operate on.
pub trait Raster: Clone {
    type Pixel: Copy;

    fn dims(&self) -> (usize, usize);
    fn pixel(&self, x: usize, y: usize) -> Self::Pixel;
    fn set_pixel(&mut self, x: usize, y: usize, px: Self::Pixel);
    fn sample(&self, x: f64, y: f64) -> Self::Pixel;
    /// Applies `f(channel_value, channel_index_in_stream)` to every channel.
    fn map_channels(&mut self, f: impl FnMut(f32) -> f32);
    fn to_dynamic(&self) -> DynamicImage;
    fn from_dynamic(img: &DynamicImage) -> Self;
}

impl Raster for GrayImage {
    type Pixel = f32;

    fn dims(&self) -> (usize, usize) {
        self.dimensions()
    }
    fn pixel(&self, x: usize, y: usize) -> f32 {
        self.get(x, y)
    }
    fn set_pixel(&mut self, x: usize, y: usize, px: f32) {
        self.put(x, y, px)
    }
    fn sample(&self, x: f64, y: f64) -> f32 {
        self.bilinear(x, y) as f32
    }
    fn map_channels(&mut self, mut f: impl FnMut(f32) -> f32) {
        let (w, h) = self.dimensions();
        for y in 0..h {
            for x in 0..w {
                let v = f(self.get(x, y));
                self.put(x, y, v);
            }
        }
    }
    fn to_dynamic(&self) -> DynamicImage {
        DynamicImage::ImageLuma8(self.to_luma8())
    }
    fn from_dynamic(img: &DynamicImage) -> Self {
        GrayImage::from_luma8(&img.to_luma8())
    }
}

impl Raster for RgbImage {
    type Pixel = [f32; 3];

    fn dims(&self) -> (usize, usize) {
        self.dimensions()
    }
    fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        self.get(x, y)
    }
    fn set_pixel(&mut self, x: usize, y: usize, px: [f32; 3]) {
        self.put(x, y, px)
    }
    fn sample(&self, x: f64, y: f64) -> [f32; 3] {
        self.bilinear(x, y).map(|v| v as f32)
    }
    fn map_channels(&mut self, mut f: impl FnMut(f32) -> f32) {
        let (w, h) = self.dimensions();
        for y in 0..h {
            for x in 0..w {
                let px = self.get(x, y).map(&mut f);
                self.put(x, y, px);
            }
        }
    }
    fn to_dynamic(&self) -> DynamicImage {
        DynamicImage::ImageRgb8(self.to_rgb8())
    }
    fn from_dynamic(img: &DynamicImage) -> Self {
        RgbImage::from_rgb8(&img.to_rgb8())
    }
}

/// Copies `spec.src_rect`, rotated and scaled about its center, onto the
/// destination. Operating ranges are enforced (see [`ForgerySpec::validate`]).
pub fn apply_copy_move<I: Raster>(img: &I, spec: &ForgerySpec) -> Result<(I, GroundTruth)> {
    spec.validate()?;
    copy_move_unchecked(img, spec)
}

/// Same as [`apply_copy_move`] but accepts any rotation and positive scale.
pub fn apply_copy_move_any<I: Raster>(img: &I, spec: &ForgerySpec) -> Result<(I, GroundTruth)> {
    spec.validate_geometry()?;
    copy_move_unchecked(img, spec)
}

fn copy_move_unchecked<I: Raster>(img: &I, spec: &ForgerySpec) -> Result<(I, GroundTruth)> {
    let (w, h) = img.dims();
    let r = spec.src_rect;
    if r.x + r.w > w || r.y + r.h > h {
        return Err(Error::Region(format!(
            "source rect {r:?} exceeds the {w}x{h} image"
        )));
    }
    let (forward, inverse) = transforms(spec);

    let corners = [
        (r.x as f64, r.y as f64),
        ((r.x + r.w - 1) as f64, r.y as f64),
        (r.x as f64, (r.y + r.h - 1) as f64),
        ((r.x + r.w - 1) as f64, (r.y + r.h - 1) as f64),
    ]
    .map(|(x, y)| {
        let (u, v) = forward.apply(x, y);
        (snap(u), snap(v))
    });
    let min_x = corners.iter().map(|c| c.0).fold(f64::MAX, f64::min).floor();
    let max_x = corners.iter().map(|c| c.0).fold(f64::MIN, f64::max).ceil();
    let min_y = corners.iter().map(|c| c.1).fold(f64::MAX, f64::min).floor();
    let max_y = corners.iter().map(|c| c.1).fold(f64::MIN, f64::max).ceil();
    if min_x < 0.0 || min_y < 0.0 || max_x > (w - 1) as f64 || max_y > (h - 1) as f64 {
        return Err(Error::Region(format!(
            "transformed region [{min_x}, {max_x}] x [{min_y}, {max_y}] leaves the {w}x{h} image"
        )));
    }

    let (sx0, sy0) = (r.x as f64, r.y as f64);
    let (sx1, sy1) = ((r.x + r.w - 1) as f64, (r.y + r.h - 1) as f64);
    let mut src_mask = vec![false; w * h];
    for y in r.y..r.y + r.h {
        src_mask[y * w + r.x..y * w + r.x + r.w].fill(true);
    }

    let mut out = img.clone();
    let mut dst_mask = vec![false; w * h];
    for y in min_y as usize..=max_y as usize {
        for x in min_x as usize..=max_x as usize {
            let (u, v) = inverse.apply(x as f64, y as f64);
            let (u, v) = (snap(u), snap(v));
            if u < sx0 || v < sy0 || u > sx1 || v > sy1 {
                continue;
            }
            if src_mask[y * w + x] {
                return Err(Error::Region(format!(
                    "destination overlaps the source region at ({x}, {y})"
                )));
            }
            out.set_pixel(x, y, img.sample(u, v));
            dst_mask[y * w + x] = true;
        }
    }

    Ok((
        out,
        GroundTruth {
            width: w,
            height: h,
            src_mask,
            dst_mask,
            correspondence: inverse,
        },
    ))
}

/// Adds i.i.d. zero-mean Gaussian noise to every channel, then clamps.
pub fn add_gaussian_noise<I: Raster>(img: &I, sigma: f64, seed: u64) -> Result<I> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(param("sigma", format!("must be non-negative, got {sigma}")));
    }
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.map_channels(|v| (v as f64 + normal.sample(&mut rng)) as f32);
    Ok(out)
}

/// Encodes as baseline JPEG at `quality` and decodes the result.
pub fn jpeg_recompress<I: Raster>(img: &I, quality: u8) -> Result<I> {
    if !(1..=100).contains(&quality) {
        return Err(param("quality", format!("{quality} outside [1, 100]")));
    }
    let mut buf = Vec::new();
    let encoder = JpegEncoder::new_with_quality(&mut buf, quality);
    img.to_dynamic().write_with_encoder(encoder)?;
    let decoded = image::load(Cursor::new(&buf), image::ImageFormat::Jpeg)?;
    Ok(I::from_dynamic(&decoded))
}

/// Non-repeating blob texture in `[0.05, 0.95]`: one Gaussian blob of random
/// sign, width (1.5 to 6 px) and position per 100 pixels.
pub fn texture(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; width * height];
    let blobs = (width * height / 100).max(8);
    for _ in 0..blobs {
        let cx = rng.random_range(-10.0..width as f64 + 10.0);
        let cy = rng.random_range(-10.0..height as f64 + 10.0);
        let sigma = rng.random_range(1.5f64.ln()..6f64.ln()).exp();
        let amp = rng.random_range(-1.0..1.0);
        let r = (3.0 * sigma).ceil();
        let x0 = (cx - r).max(0.0) as usize;
        let x1 = ((cx + r).min(width as f64 - 1.0)).max(0.0) as usize;
        let y0 = (cy - r).max(0.0) as usize;
        let y1 = ((cy + r).min(height as f64 - 1.0)).max(0.0) as usize;
        let inv = 1.0 / (2.0 * sigma * sigma);
        for y in y0..=y1 {
            let dy2 = (y as f64 - cy).powi(2);
            for x in x0..=x1 {
                let d2 = (x as f64 - cx).powi(2) + dy2;
                acc[y * width + x] += amp * (-d2 * inv).exp();
            }
        }
    }
    let lo = acc.iter().copied().fold(f64::MAX, f64::min);
    let hi = acc.iter().copied().fold(f64::MIN, f64::max);
    let span = (hi - lo).max(1e-12);
    GrayImage::from_fn(width, height, |x, y| {
        (0.05 + 0.9 * (acc[y * width + x] - lo) / span) as f32
    })
}
