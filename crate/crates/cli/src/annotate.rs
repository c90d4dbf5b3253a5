//! Match visualization: a red line per matched pair, green circles at the
//! matched keypoints.

use std::collections::BTreeSet;

use cmfd::{DetectionReport, RgbImage};
use image::Rgb;
use imageproc::drawing::{draw_hollow_circle_mut, draw_line_segment_mut};

pub const LINE: Rgb<u8> = Rgb([255, 0, 0]);
pub const CIRCLE: Rgb<u8> = Rgb([0, 255, 0]);

pub fn annotate(img: &RgbImage, report: &DetectionReport) -> image::RgbImage {
    let mut canvas = img.to_rgb8();
    let kps = &report.keypoints;
    for p in &report.matched_pairs {
        let (a, b) = (&kps[p.i], &kps[p.j]);
        draw_line_segment_mut(&mut canvas, (a.x as f32, a.y as f32), (b.x as f32, b.y as f32), LINE);
    }
    let matched: BTreeSet<usize> = report.matched_pairs.iter().flat_map(|p| [p.i, p.j]).collect();
    for k in matched {
        let kp = &kps[k];
        let radius = (2.0 * kp.scale).round().max(3.0) as i32;
        draw_hollow_circle_mut(&mut canvas, (kp.x.round() as i32, kp.y.round() as i32), radius, CIRCLE);
    }
    canvas
}
