//! Corpus manifests.
//!
//! A manifest is JSON Lines: one forgery record per line, blank lines and
//! lines starting with `#` ignored. The perturbation fields (`rotation`,
//! `scale`, `noise_sigma`, `jpeg_quality`) take either a single value or a
//! list; a record expands to the Cartesian product of its lists, and its
//! `output`/`ground_truth` templates must then contain `{idx}`.
//!
//! ```text
//! {"source":"texture:7:512x512","src_rect":[40,60,101,101],"dst_center":[350.0,300.0],
//!  "rotation":[0,30],"noise_sigma":[0,0.05],"seed":7,
//!  "output":"t7_{idx}.png","ground_truth":"t7_{idx}.gt.json"}
//! ```
//!
//! `source` is an image path (relative to the manifest) or
//! `texture:SEED:WxH` for a generated texture.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_gaussian_noise, apply_copy_move, jpeg_recompress, texture, Affine, ForgerySpec, GroundTruth, Rect};
use crate::error::{Error, Result};
use crate::imgcore::{load_rgb, save_rgb, RgbImage};

/// Name of the expanded record list written next to a generated corpus.
pub const INDEX_FILE: &str = "index.jsonl";

const GT_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn zero_f64() -> OneOrMany<f64> {
    OneOrMany::One(0.0)
}

fn one_f64() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

fn no_jpeg() -> OneOrMany<Option<u8>> {
    OneOrMany::One(None)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    source: String,
    src_rect: [usize; 4],
    dst_center: [f64; 2],
    #[serde(default = "zero_f64")]
    rotation: OneOrMany<f64>,
    #[serde(default = "one_f64")]
    scale: OneOrMany<f64>,
    #[serde(default = "zero_f64")]
    noise_sigma: OneOrMany<f64>,
    #[serde(default = "no_jpeg")]
    jpeg_quality: OneOrMany<Option<u8>>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    group: Option<String>,
    output: String,
    ground_truth: String,
}

/// One fully expanded corpus entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub source: String,
    pub forgery: ForgerySpec,
    pub noise_sigma: f64,
    pub jpeg_quality: Option<u8>,
    /// Paths relative to the corpus directory.
    pub image: PathBuf,
    pub ground_truth: PathBuf,
    /// Items sharing a group and geometry share ground truth; the member
    /// without noise or JPEG is the clean reference.
    pub group: String,
}

impl CorpusItem {
    pub fn is_clean(&self) -> bool {
        self.noise_sigma == 0.0 && self.jpeg_quality.is_none()
    }

    /// Key identifying items that share the same forgery geometry.
    pub fn geometry_key(&self) -> String {
        format!(
            "{}|{}|{}",
            self.group, self.forgery.rotation, self.forgery.scale
        )
    }
}

/// Parses and expands a manifest. Errors carry the 1-based line number.
pub fn parse_manifest(text: &str) -> Result<Vec<CorpusItem>> {
    let mut items = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Manifest {
            line: line_no,
            reason,
        };
        let rec: Record = serde_json::from_str(trimmed).map_err(|e| err(e.to_string()))?;
        let rotations = rec.rotation.values();
        let scales = rec.scale.values();
        let noises = rec.noise_sigma.values();
        let qualities = rec.jpeg_quality.values();
        let count = rotations.len() * scales.len() * noises.len() * qualities.len();
        if count == 0 {
            return Err(err("empty value list".into()));
        }
        if count > 1 && !(rec.output.contains("{idx}") && rec.ground_truth.contains("{idx}")) {
            return Err(err(format!(
                "record expands to {count} items; output and ground_truth need an {{idx}} placeholder"
            )));
        }
        let [x, y, w, h] = rec.src_rect;
        let group = rec.group.clone().unwrap_or_else(|| format!("line{line_no}"));
        let mut idx = 0usize;
        for &rotation in &rotations {
            for &scale in &scales {
                for &noise_sigma in &noises {
                    for &jpeg_quality in &qualities {
                        let forgery = ForgerySpec {
                            src_rect: Rect::new(x, y, w, h),
                            dst_center: (rec.dst_center[0], rec.dst_center[1]),
                            rotation,
                            scale,
                            seed: rec.seed,
                        };
                        forgery.validate().map_err(|e| err(e.to_string()))?;
                        if noise_sigma < 0.0 || !noise_sigma.is_finite() {
                            return Err(err(format!("noise_sigma {noise_sigma} is negative")));
                        }
                        if let Some(q) = jpeg_quality {
                            if !(1..=100).contains(&q) {
                                return Err(err(format!("jpeg_quality {q} outside [1, 100]")));
                            }
                        }
                        let fill = |t: &str| t.replace("{idx}", &idx.to_string());
                        let image = PathBuf::from(fill(&rec.output));
                        items.push(CorpusItem {
                            id: image
                                .file_stem()
                                .map(|s| s.to_string_lossy().into_owned())
                                .unwrap_or_else(|| format!("line{line_no}_{idx}")),
                            source: rec.source.clone(),
                            forgery,
                            noise_sigma,
                            jpeg_quality,
                            image,
                            ground_truth: PathBuf::from(fill(&rec.ground_truth)),
                            group: group.clone(),
                        });
                        idx += 1;
                    }
                }
            }
        }
    }
    Ok(items)
}

fn load_source(source: &str, base_dir: &Path) -> Result<RgbImage> {
    if let Some(spec) = source.strip_prefix("texture:") {
        let bad = || Error::Image(format!("bad texture source `{source}`, expected texture:SEED:WxH"));
        let (seed, dims) = spec.split_once(':').ok_or_else(bad)?;
        let (w, h) = dims.split_once('x').ok_or_else(bad)?;
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        let w: usize = w.parse().map_err(|_| bad())?;
        let h: usize = h.parse().map_err(|_| bad())?;
        if w == 0 || h == 0 {
            return Err(bad());
        }
        return Ok(texture(w, h, seed).to_rgb());
    }
    load_rgb(base_dir.join(source))
}

/// Renders a single item into `out_dir`.
pub fn write_item(item: &CorpusItem, base_dir: &Path, out_dir: &Path) -> Result<()> {
    let src = load_source(&item.source, base_dir)?;
    let (mut forged, gt) = apply_copy_move(&src, &item.forgery)?;
    if item.noise_sigma > 0.0 {
        let seed = item.forgery.seed ^ item.noise_sigma.to_bits();
        forged = add_gaussian_noise(&forged, item.noise_sigma, seed)?;
    }
    if let Some(q) = item.jpeg_quality {
        forged = jpeg_recompress(&forged, q)?;
    }
    let image_path = out_dir.join(&item.image);
    let gt_path = out_dir.join(&item.ground_truth);
    for p in [&image_path, &gt_path] {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_rgb(&forged, &image_path)?;
    gt.save(&gt_path)
}

/// Expands `manifest` and renders every item into `out_dir`, then writes
/// the expanded [`INDEX_FILE`].
pub fn generate_corpus(manifest: &Path, out_dir: &Path) -> Result<Vec<CorpusItem>> {
    let text = std::fs::read_to_string(manifest)?;
    let items = parse_manifest(&text)?;
    let base_dir = manifest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    items
        .par_iter()
        .map(|item| write_item(item, base_dir, out_dir))
        .collect::<Result<Vec<()>>>()?;
    let mut index = String::new();
    for item in &items {
        index.push_str(&serde_json::to_string(item)?);
        index.push('\n');
    }
    std::fs::write(out_dir.join(INDEX_FILE), index)?;
    Ok(items)
}

pub fn read_index(dir: &Path) -> Result<Vec<CorpusItem>> {
    let text = std::fs::read_to_string(dir.join(INDEX_FILE))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Manifest {
                line: n + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// On-disk ground truth: masks as row runs `[y, x_start, x_end]` (inclusive).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) struct GroundTruthFile {
    version: u32,
    width: usize,
    height: usize,
    correspondence: Affine,
    src_runs: Vec<[usize; 3]>,
    dst_runs: Vec<[usize; 3]>,
}

fn encode_runs(mask: &[bool], width: usize) -> Vec<[usize; 3]> {
    let mut runs = Vec::new();
    for (y, row) in mask.chunks(width).enumerate() {
        let mut x = 0;
        while x < width {
            if row[x] {
                let start = x;
                while x + 1 < width && row[x + 1] {
                    x += 1;
                }
                runs.push([y, start, x]);
            }
            x += 1;
        }
    }
    runs
}

fn decode_runs(runs: &[[usize; 3]], width: usize, height: usize) -> std::result::Result<Vec<bool>, String> {
    let mut mask = vec![false; width * height];
    for &[y, x0, x1] in runs {
        if y >= height || x0 > x1 || x1 >= width {
            return Err(format!("run [{y}, {x0}, {x1}] outside {width}x{height}"));
        }
        mask[y * width + x0..=y * width + x1].fill(true);
    }
    Ok(mask)
}

impl From<GroundTruth> for GroundTruthFile {
    fn from(gt: GroundTruth) -> Self {
        Self {
            version: GT_VERSION,
            width: gt.width,
            height: gt.height,
            correspondence: gt.correspondence,
            src_runs: encode_runs(&gt.src_mask, gt.width),
            dst_runs: encode_runs(&gt.dst_mask, gt.width),
        }
    }
}

impl TryFrom<GroundTruthFile> for GroundTruth {
    type Error = String;

    fn try_from(f: GroundTruthFile) -> std::result::Result<Self, String> {
        if f.version != GT_VERSION {
            return Err(format!("unsupported ground truth version {}", f.version));
        }
        Ok(Self {
            width: f.width,
            height: f.height,
            src_mask: decode_runs(&f.src_runs, f.width, f.height)?,
            dst_mask: decode_runs(&f.dst_runs, f.width, f.height)?,
            correspondence: f.correspondence,
        })
    }
}
