use std::hint::black_box;

use cmfd::descriptor::{describe_keypoints, surf_describe_keypoints, Sampler};
use cmfd::detector::{build_pyramid, detect_in_pyramid};
use cmfd::imgcore::integral;
use cmfd::matcher::knn_match;
use cmfd::pipeline::ForgeryDetector;
use cmfd::{DetectorParams, PipelineConfig};
use cmfd_bench::forged_texture;
use criterion::{criterion_group, criterion_main, Criterion};

fn stages(c: &mut Criterion) {
    let img = forged_texture(512, 7);
    let cfg = PipelineConfig::default();
    let det = ForgeryDetector::new(cfg.clone()).unwrap();
    let ii = integral(&img);
    let params = DetectorParams::default();
    let pyr = build_pyramid(&ii, &params).unwrap();
    let kps = detect_in_pyramid(&pyr, img.width(), img.height(), &params);
    let sampler = Sampler::new(&img, &ii, cfg.descriptor.smoothing);
    let (descs, _) = describe_keypoints(&sampler, &kps, det.pattern());

    c.bench_function("integral_512", |b| b.iter(|| integral(black_box(&img))));
    c.bench_function("pyramid_512", |b| b.iter(|| build_pyramid(black_box(&ii), &params).unwrap()));
    c.bench_function("detect_512", |b| {
        b.iter(|| detect_in_pyramid(black_box(&pyr), img.width(), img.height(), &params))
    });

    let mut group = c.benchmark_group("describe");
    group.bench_function("binary", |b| b.iter(|| describe_keypoints(&sampler, black_box(&kps), det.pattern())));
    group.bench_function("surf_baseline", |b| b.iter(|| surf_describe_keypoints(&ii, black_box(&kps))));
    group.finish();

    c.bench_function("match", |b| b.iter(|| knn_match(black_box(&descs), &kps, &cfg.matcher).unwrap()));
    c.bench_function("end_to_end_512", |b| b.iter(|| det.detect_gray(black_box(&img), "bench", None).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = stages
}
criterion_main!(benches);
