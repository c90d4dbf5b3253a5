//! Stage timings for both descriptor kinds on shared keypoints.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{DescriptorKind, ForgeryDetector, PipelineConfig};
use crate::error::Result;
use crate::imgcore::{load_rgb, to_grayscale, GrayImage};

const REPEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Describe,
    Match,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Detect => "detect",
            Stage::Describe => "describe",
            Stage::Match => "match",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub image_id: String,
    pub stage: Stage,
    pub kind: DescriptorKind,
    /// Median over the timed repetitions.
    pub seconds: f64,
    /// SURF-baseline describe time over binary describe time for the image.
    pub speedup: f64,
    pub keypoints: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Times detect, describe and match for both kinds on each image. Only the
/// describe stage differs between kinds; detection runs once per repetition
/// and its keypoints feed both descriptors. The first run is a discarded
/// warm-up.
pub fn benchmark(images: &[(String, GrayImage)], cfg: &PipelineConfig) -> Result<Vec<BenchRow>> {
    let det = ForgeryDetector::new(cfg.clone())?;
    let kinds = [DescriptorKind::Brisk, DescriptorKind::SurfBaseline];
    let mut rows = Vec::with_capacity(images.len() * 6);
    for (id, gray) in images {
        let mut detect_t = Vec::with_capacity(REPEATS);
        let mut describe_t = [Vec::with_capacity(REPEATS), Vec::with_capacity(REPEATS)];
        let mut match_t = [Vec::with_capacity(REPEATS), Vec::with_capacity(REPEATS)];
        let mut keypoints = 0;
        for rep in 0..=REPEATS {
            let t = Instant::now();
            let (ii, kps) = det.detect_stage(gray)?;
            let detect = t.elapsed().as_secs_f64();
            keypoints = kps.len();
            for (k, kind) in kinds.iter().enumerate() {
                let (_, _, describe, matching) = det.describe_and_match(gray, &ii, &kps, *kind)?;
                if rep > 0 {
                    describe_t[k].push(describe);
                    match_t[k].push(matching);
                }
            }
            if rep > 0 {
                detect_t.push(detect);
            }
        }
        let detect = median(detect_t);
        let describe = describe_t.map(median);
        let matching = match_t.map(median);
        let speedup = if describe[0] > 0.0 { describe[1] / describe[0] } else { f64::NAN };
        for (k, kind) in kinds.iter().enumerate() {
            for (stage, seconds) in [
                (Stage::Detect, detect),
                (Stage::Describe, describe[k]),
                (Stage::Match, matching[k]),
            ] {
                rows.push(BenchRow {
                    image_id: id.clone(),
                    stage,
                    kind: *kind,
                    seconds,
                    speedup,
                    keypoints,
                });
            }
        }
    }
    Ok(rows)
}

/// Loads each path and benchmarks the readable ones; unreadable entries are
/// skipped with a warning.
pub fn benchmark_paths(paths: &[PathBuf], cfg: &PipelineConfig) -> Result<Vec<BenchRow>> {
    let mut images = Vec::with_capacity(paths.len());
    for path in paths {
        match load_rgb(path) {
            Ok(img) => images.push((image_id(path), to_grayscale(&img))),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    benchmark(&images, cfg)
}

pub(crate) fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Summed describe seconds for (binary, baseline).
pub fn describe_totals(rows: &[BenchRow]) -> (f64, f64) {
    rows.iter()
        .filter(|r| r.stage == Stage::Describe)
        .fold((0.0, 0.0), |(b, s), r| match r.kind {
            DescriptorKind::Brisk => (b + r.seconds, s),
            DescriptorKind::SurfBaseline => (b, s + r.seconds),
        })
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["image_id", "stage", "kind", "seconds", "speedup"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.image_id.as_str(),
            r.stage.as_str(),
            r.kind.as_str(),
            &format!("{:.6}", r.seconds),
            &format!("{:.4}", r.speedup),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture;

    #[test]
    fn empty_corpus_gives_header_only() {
        let rows = benchmark(&[], &PipelineConfig::default()).unwrap();
        assert!(rows.is_empty());
        let mut buf = Vec::new();
        write_bench_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "image_id,stage,kind,seconds,speedup\n");
    }

    #[test]
    fn row_shape() {
        let imgs = vec![
            ("a".to_string(), texture(160, 160, 1)),
            ("b".to_string(), texture(160, 160, 2)),
        ];
        let rows = benchmark(&imgs, &PipelineConfig::default()).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
        assert!(rows.iter().all(|r| r.seconds >= 0.0));
        let (b, s) = describe_totals(&rows);
        assert!(b > 0.0 && s > 0.0);
    }

    #[test]
    fn unreadable_entries_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("broken.png");
        std::fs::write(&bad, b"not an image").unwrap();
        let rows = benchmark_paths(&[bad, dir.path().join("missing.png")], &PipelineConfig::default()).unwrap();
        assert!(rows.is_empty());
    }
}
