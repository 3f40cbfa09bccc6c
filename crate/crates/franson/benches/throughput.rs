//! Sequential versus parallel throughput of the two hot paths: fringe
//! field evaluation (per-pixel map) and frame simulation (per-pair loop).
//!
//! Run with `cargo bench -p franson`. The parallel variants only exist
//! with the default `parallel` feature.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use franson::imaging::{simulate_frame_sequential, Basis};
use franson::scene::{fringe_field_sequential, Footprint, GlassObject, GridSpec, SceneConfig};

fn demo_scene(edge: u32) -> SceneConfig {
    let grid = GridSpec::new(edge, edge, 1e-5).unwrap();
    let mut scene = SceneConfig::with_defaults(grid);
    scene.noise.dark_rate = 0.0;
    scene.noise.heralding_efficiency = 0.85;
    scene.signal_cw_objects = vec![GlassObject {
        footprint: Footprint::Rectangle {
            x0: 0,
            y0: 0,
            x1: edge / 2,
            y1: edge - 1,
        },
        thickness: 1e-3,
        refractive_index: 1.52,
        tilt_opd_offset: 0.0,
    }];
    scene
}

fn bench_fringe_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("fringe_field");
    for edge in [128u32, 256, 512] {
        let scene = demo_scene(edge);
        group.bench_with_input(BenchmarkId::new("sequential", edge), &scene, |b, scene| {
            b.iter(|| fringe_field_sequential(black_box(scene)).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", edge), &scene, |b, scene| {
            b.iter(|| franson::scene::fringe_field_parallel(black_box(scene)).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate_frame(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_frame");
    group.sample_size(10);
    let scene = demo_scene(128);
    for pairs in [100_000u64, 400_000] {
        group.bench_with_input(BenchmarkId::new("sequential", pairs), &pairs, |b, &pairs| {
            b.iter(|| {
                simulate_frame_sequential(black_box(&scene), Basis::Constructive, pairs, 7).unwrap()
            })
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", pairs), &pairs, |b, &pairs| {
            b.iter(|| {
                franson::imaging::simulate_frame_parallel(
                    black_box(&scene),
                    Basis::Constructive,
                    pairs,
                    7,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fringe_field, bench_simulate_frame);
criterion_main!(benches);
