//! Ground-truth scoring of matched pairs.

use crate::detector::Keypoint;
use crate::error::{Error, Result};
use crate::matcher::MatchPair;
use crate::synth::GroundTruth;

fn maps_onto(dst: &Keypoint, src: &Keypoint, gt: &GroundTruth, tol_px: f64) -> bool {
    if !(gt.in_dst(dst.x, dst.y) && gt.in_src(src.x, src.y)) {
        return false;
    }
    let (mx, my) = gt.correspondence.apply(dst.x, dst.y);
    (mx - src.x).hypot(my - src.y) <= tol_px
}

/// One endpoint in the source region, the other in the destination region,
/// and the destination endpoint maps back to within `tol_px` of its partner.
pub fn pair_is_valid(pair: &MatchPair, keypoints: &[Keypoint], gt: &GroundTruth, tol_px: f64) -> bool {
    let (a, b) = (&keypoints[pair.i], &keypoints[pair.j]);
    maps_onto(b, a, gt, tol_px) || maps_onto(a, b, gt, tol_px)
}

pub fn valid_pair_count(pairs: &[MatchPair], keypoints: &[Keypoint], gt: &GroundTruth, tol_px: f64) -> usize {
    pairs
        .iter()
        .filter(|p| pair_is_valid(p, keypoints, gt, tol_px))
        .count()
}

/// Percentage from raw counts; `None` when nothing was matched.
pub fn ratio_percent(valid: usize, matched: usize) -> Option<f64> {
    (matched > 0).then(|| 100.0 * valid as f64 / matched as f64)
}

/// `100 * valid / matched` over `pairs`, or `None` without pairs. The ground
/// truth must have the image's dimensions.
pub fn correct_detection_ratio(
    pairs: &[MatchPair],
    keypoints: &[Keypoint],
    gt: &GroundTruth,
    image_dims: (usize, usize),
    tol_px: f64,
) -> Result<Option<f64>> {
    if (gt.width, gt.height) != image_dims {
        return Err(Error::Dimensions {
            expected: (gt.width, gt.height),
            actual: image_dims,
        });
    }
    Ok(ratio_percent(valid_pair_count(pairs, keypoints, gt, tol_px), pairs.len()))
}

/// Share of keypoints lying in either forged region, in percent. This is the
/// alternative region-based reading of the detection ratio.
pub fn region_keypoint_ratio(keypoints: &[Keypoint], gt: &GroundTruth) -> Option<f64> {
    let inside = keypoints
        .iter()
        .filter(|k| gt.in_src(k.x, k.y) || gt.in_dst(k.x, k.y))
        .count();
    ratio_percent(inside, keypoints.len())
}

/// Valid pairs after a perturbation relative to the clean run; `None` when
/// the clean run has no valid pair.
pub fn relative_detection_efficiency(valid_perturbed: usize, valid_clean: usize) -> Option<f64> {
    (valid_clean > 0).then(|| valid_perturbed as f64 / valid_clean as f64)
}
