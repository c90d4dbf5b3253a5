//! Corpus evaluation: per-image detection ratios and perturbation curves.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::{csv_err, image_id};
use super::{metrics, ForgeryDetector, PipelineConfig, Verdict};
use crate::error::Result;
use crate::imgcore::load_rgb;
use crate::synth::{read_index, CorpusItem, GroundTruth, INDEX_FILE};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    Jpeg,
    Noise,
}

impl Perturbation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Perturbation::Jpeg => "jpeg",
            Perturbation::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image_id: String,
    pub group: Option<String>,
    pub rotation: Option<f64>,
    pub scale: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub jpeg_quality: Option<u8>,
    pub keypoint_count: usize,
    pub matched_pairs: usize,
    pub valid_pairs: usize,
    pub correct_detection_ratio: Option<f64>,
    pub verdict: Verdict,
}

/// Relative detection efficiency at one perturbation level, pooled over all
/// items having a clean reference with the same geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub perturbation: Perturbation,
    pub level: f64,
    pub items: usize,
    pub valid_perturbed: usize,
    pub valid_clean: usize,
    pub rde: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub rows: Vec<EvalRow>,
    pub curves: Vec<CurvePoint>,
}

impl EvalOutput {
    pub fn mean_cdr(&self) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter_map(|r| r.correct_detection_ratio).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn curve(&self, p: Perturbation) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|c| c.perturbation == p).collect()
    }
}

struct Entry {
    id: String,
    image: PathBuf,
    ground_truth: PathBuf,
    item: Option<CorpusItem>,
}

fn entries(dir: &Path) -> Result<Vec<Entry>> {
    if dir.join(INDEX_FILE).is_file() {
        return Ok(read_index(dir)?
            .into_iter()
            .map(|item| Entry {
                id: item.id.clone(),
                image: dir.join(&item.image),
                ground_truth: dir.join(&item.ground_truth),
                item: Some(item),
            })
            .collect());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|p| {
            let id = image_id(&p);
            Entry {
                ground_truth: p.with_file_name(format!("{id}.gt.json")),
                image: p,
                id,
                item: None,
            }
        })
        .collect())
}

/// Image paths of a corpus directory, from its index when present.
pub fn corpus_images(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(entries(dir)?.into_iter().map(|e| e.image).collect())
}

fn evaluate_entry(det: &ForgeryDetector, e: &Entry) -> Option<EvalRow> {
    if !e.ground_truth.is_file() {
        log::warn!("skipping {}: no ground truth at {}", e.id, e.ground_truth.display());
        return None;
    }
    let run = || -> Result<EvalRow> {
        let gt = GroundTruth::load(&e.ground_truth)?;
        let img = load_rgb(&e.image)?;
        let report = det.detect_rgb(&img, &e.id, Some(&gt))?;
        let item = e.item.as_ref();
        Ok(EvalRow {
            image_id: e.id.clone(),
            group: item.map(|i| i.group.clone()),
            rotation: item.map(|i| i.forgery.rotation),
            scale: item.map(|i| i.forgery.scale),
            noise_sigma: item.map(|i| i.noise_sigma),
            jpeg_quality: item.and_then(|i| i.jpeg_quality),
            keypoint_count: report.keypoint_count,
            matched_pairs: report.matched_pair_count,
            valid_pairs: report.valid_pair_count.unwrap_or(0),
            correct_detection_ratio: report.correct_detection_ratio,
            verdict: report.verdict,
        })
    };
    match run() {
        Ok(row) => Some(row),
        Err(err) => {
            log::warn!("skipping {}: {err}", e.id);
            None
        }
    }
}

fn single_perturbation(item: &CorpusItem) -> Option<(Perturbation, f64)> {
    match (item.noise_sigma > 0.0, item.jpeg_quality) {
        (true, None) => Some((Perturbation::Noise, item.noise_sigma)),
        (false, Some(q)) => Some((Perturbation::Jpeg, q as f64)),
        _ => None,
    }
}

fn curves(items: &[(&CorpusItem, &EvalRow)]) -> Vec<CurvePoint> {
    let clean: HashMap<String, usize> = items
        .iter()
        .filter(|(i, _)| i.is_clean())
        .map(|(i, r)| (i.geometry_key(), r.valid_pairs))
        .collect();
    // level keyed by bit pattern so the map orders and compares exactly
    let mut acc: BTreeMap<(Perturbation, u64), (usize, usize, usize)> = BTreeMap::new();
    for (item, row) in items {
        let Some((p, level)) = single_perturbation(item) else { continue };
        let Some(&reference) = clean.get(&item.geometry_key()) else {
            log::warn!("{}: no clean reference for its geometry", item.id);
            continue;
        };
        let e = acc.entry((p, level.to_bits())).or_default();
        e.0 += 1;
        e.1 += row.valid_pairs;
        e.2 += reference;
    }
    let mut out: Vec<CurvePoint> = acc
        .into_iter()
        .map(|((perturbation, bits), (n, vp, vc))| CurvePoint {
            perturbation,
            level: f64::from_bits(bits),
            items: n,
            valid_perturbed: vp,
            valid_clean: vc,
            rde: metrics::relative_detection_efficiency(vp, vc),
        })
        .collect();
    out.sort_by(|a, b| a.perturbation.cmp(&b.perturbation).then(a.level.total_cmp(&b.level)));
    out
}

/// Runs detection on every corpus image with ground truth. Uses the corpus
/// index when present; otherwise scans for images with a sibling
/// `<stem>.gt.json`. Entries without ground truth are skipped with a warning.
pub fn evaluate_corpus(dir: &Path, cfg: &PipelineConfig) -> Result<EvalOutput> {
    let det = ForgeryDetector::new(cfg.clone())?;
    let entries = entries(dir)?;
    let results: Vec<Option<EvalRow>> = entries.par_iter().map(|e| evaluate_entry(&det, e)).collect();
    let paired: Vec<(&CorpusItem, &EvalRow)> = entries
        .iter()
        .zip(&results)
        .filter_map(|(e, r)| Some((e.item.as_ref()?, r.as_ref()?)))
        .collect();
    let curves = curves(&paired);
    Ok(EvalOutput {
        rows: results.into_iter().flatten().collect(),
        curves,
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "image_id",
        "group",
        "rotation",
        "scale",
        "noise_sigma",
        "jpeg_quality",
        "keypoint_count",
        "matched_pairs",
        "valid_pairs",
        "correct_detection_ratio",
        "verdict",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.image_id.clone(),
            opt(r.group.as_ref()),
            opt(r.rotation),
            opt(r.scale),
            opt(r.noise_sigma),
            opt(r.jpeg_quality),
            r.keypoint_count.to_string(),
            r.matched_pairs.to_string(),
            r.valid_pairs.to_string(),
            opt(r.correct_detection_ratio.map(|v| format!("{v:.4}"))),
            r.verdict.as_str().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves_csv<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["perturbation", "level", "items", "valid_perturbed", "valid_clean", "rde"])
        .map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.perturbation.as_str().to_string(),
            p.level.to_string(),
            p.items.to_string(),
            p.valid_perturbed.to_string(),
            p.valid_clean.to_string(),
            opt(p.rde.map(|v| format!("{v:.6}"))),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
