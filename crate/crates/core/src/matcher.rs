//! Within-image Hamming kNN matching with a distance-ratio test.
//!
//! Every described keypoint queries all others that lie at least
//! `min_pair_distance` pixels away (which also excludes the query itself).
//! A candidate is kept when its nearest-to-second-nearest Hamming distance
//! ratio is at most `rho`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{BinaryDescriptor, SurfDescriptor};
use crate::detector::Keypoint;
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherParams {
    pub rho: f64,
    /// Pixels; neighbors closer than this to the query are ignored.
    pub min_pair_distance: f64,
    pub k: usize,
}

impl Default for MatcherParams {
    fn default() -> Self {
        Self {
            rho: 0.4,
            min_pair_distance: 10.0,
            k: 2,
        }
    }
}

impl MatcherParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(param("rho", format!("{} outside (0, 1]", self.rho)));
        }
        if !(self.min_pair_distance >= 0.0) || !self.min_pair_distance.is_finite() {
            return Err(param("min_pair_distance", "must be non-negative"));
        }
        if self.k < 2 {
            return Err(param("k", format!("need at least 2 neighbors, got {}", self.k)));
        }
        Ok(())
    }
}

/// Accepted match between keypoints `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub i: usize,
    pub j: usize,
    /// Hamming distance in bits.
    pub distance: u32,
    /// Nearest over second-nearest distance for the query that produced it.
    pub ratio: f64,
}

#[inline]
pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
    a.bits
        .iter()
        .zip(&b.bits)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

/// Nearest over second-nearest; two zero distances count as fully ambiguous.
#[inline]
pub fn distance_ratio(nearest: f64, second: f64) -> f64 {
    if second == 0.0 {
        1.0
    } else {
        nearest / second
    }
}

/// Matches descriptors against each other. Each descriptor's
/// `keypoint_index` must address `keypoints`; pair indices refer to
/// keypoints. Output is sorted by distance, then `(i, j)`.
pub fn knn_match(descs: &[BinaryDescriptor], keypoints: &[Keypoint], p: &MatcherParams) -> Result<Vec<MatchPair>> {
    let index: Vec<usize> = descs.iter().map(|d| d.keypoint_index).collect();
    let found = knn_core(descs, &index, keypoints, p, |a, b| hamming(a, b) as f64)?;
    Ok(canonicalize(
        found
            .into_iter()
            .map(|c| MatchPair {
                i: c.i,
                j: c.j,
                distance: c.distance as u32,
                ratio: c.ratio,
            })
            .collect(),
    ))
}

/// Euclidean counterpart of [`knn_match`] for the SURF baseline. Unit
/// vectors are at most 2 apart; `MatchPair::distance` holds the distance
/// times 256, rounded, so both descriptor kinds share the 0..=512 range.
pub fn knn_match_surf(descs: &[SurfDescriptor], keypoints: &[Keypoint], p: &MatcherParams) -> Result<Vec<MatchPair>> {
    let index: Vec<usize> = descs.iter().map(|d| d.keypoint_index).collect();
    let found = knn_core(descs, &index, keypoints, p, |a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    })?;
    Ok(canonicalize(
        found
            .into_iter()
            .map(|c| MatchPair {
                i: c.i,
                j: c.j,
                distance: (c.distance * 256.0).round() as u32,
                ratio: c.ratio,
            })
            .collect(),
    ))
}

struct Candidate {
    i: usize,
    j: usize,
    distance: f64,
    ratio: f64,
}

fn knn_core<D: Sync>(
    descs: &[D],
    index: &[usize],
    keypoints: &[Keypoint],
    p: &MatcherParams,
    dist: impl Fn(&D, &D) -> f64 + Sync,
) -> Result<Vec<Candidate>> {
    p.validate()?;
    if let Some(&bad) = index.iter().find(|&&k| k >= keypoints.len()) {
        return Err(Error::Param {
            name: "descs",
            reason: format!("descriptor refers to keypoint {bad} of {}", keypoints.len()),
        });
    }
    let min_d2 = p.min_pair_distance * p.min_pair_distance;
    let k = p.k;
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));

    Ok(descs
        .par_iter()
        .enumerate()
        .filter_map(|(qi, q)| {
            let q_kp = index[qi];
            let qk = &keypoints[q_kp];
            // (distance, keypoint index), ascending
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (ri, r) in descs.iter().enumerate() {
                if ri == qi {
                    continue;
                }
                let rk = &keypoints[index[ri]];
                let (dx, dy) = (rk.x - qk.x, rk.y - qk.y);
                if dx * dx + dy * dy < min_d2 {
                    continue;
                }
                let entry = (dist(q, r), index[ri]);
                if best.len() == k && cmp(&entry, &best[k - 1]).is_ge() {
                    continue;
                }
                let pos = best.partition_point(|e| cmp(e, &entry).is_lt());
                best.insert(pos, entry);
                best.truncate(k);
            }
            if best.len() < k {
                return None;
            }
            let (d1, nearest) = best[0];
            let ratio = distance_ratio(d1, best[1].0);
            if ratio > p.rho {
                return None;
            }
            Some(Candidate {
                i: q_kp.min(nearest),
                j: q_kp.max(nearest),
                distance: d1,
                ratio,
            })
        })
        .collect())
}

/// Collapses symmetric duplicates (keeping the smaller ratio) and sorts.
fn canonicalize(candidates: Vec<MatchPair>) -> Vec<MatchPair> {
    let mut unique: HashMap<(usize, usize), MatchPair> = HashMap::new();
    for c in candidates {
        unique
            .entry((c.i, c.j))
            .and_modify(|e| {
                if c.ratio < e.ratio {
                    *e = c;
                }
            })
            .or_insert(c);
    }
    let mut out: Vec<MatchPair> = unique.into_values().collect();
    out.sort_by(|a, b| a.distance.cmp(&b.distance).then((a.i, a.j).cmp(&(b.i, b.j))));
    out
}

/// Number of distinct keypoints that appear in `pairs`.
pub fn matched_keypoint_count(pairs: &[MatchPair]) -> usize {
    let mut ids: Vec<usize> = pairs.iter().flat_map(|p| [p.i, p.j]).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}
