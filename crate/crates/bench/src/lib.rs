//! Shared fixtures for the stage benchmarks.

use cmfd::synth::{apply_copy_move, texture, ForgerySpec, Rect};
use cmfd::GrayImage;

/// Textured square image with a plain copy-move, the benchmark workload.
pub fn forged_texture(size: usize, seed: u64) -> GrayImage {
    let img = texture(size, size, seed);
    let side = size / 5;
    let spec = ForgerySpec::plain(Rect::new(size / 10, size / 10, side, side), (size as f64 * 0.7, size as f64 * 0.65));
    apply_copy_move(&img, &spec).expect("fixture geometry fits").0
}
