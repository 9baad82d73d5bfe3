use std::hint::black_box;

use aui_core::exec::Exec;
use aui_core::indices::{ndbi_batch, ndbi_with};
use aui_core::raster::tiff::{decode_tiff_with, encode_tiff, Layout, TiffWriteOptions};
use aui_core::raster::{compose_rgb_with, harmonize_with, Band, StretchSpec};
use aui_core::synth::{generate, SynthSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const SIZES: [usize; 2] = [256, 1024];

fn modes() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn scene(size: usize, seed: u64) -> aui_core::raster::SceneRaster {
    let spec = SynthSpec {
        size,
        landscape_seed: seed,
        scene_seed: seed,
        built_fraction: 0.4,
        bare_fraction: 0.1,
        cloud_fraction: 0.1,
        nodata_fraction: 0.01,
    };
    generate(&spec, &"tdr70".parse().unwrap(), "bench").unwrap().raster
}

fn bench_ndbi(c: &mut Criterion) {
    let mut g = c.benchmark_group("ndbi");
    for size in SIZES {
        let s = scene(size, 1);
        for (name, exec) in modes() {
            g.bench_with_input(BenchmarkId::new(name, size), &s, |b, s| {
                b.iter(|| ndbi_with(black_box(s), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_ndbi_batch(c: &mut Criterion) {
    let mut g = c.benchmark_group("ndbi_batch_16x256");
    let scenes: Vec<_> = (0..16).map(|i| scene(256, i)).collect();
    for (name, exec) in modes() {
        g.bench_function(name, |b| b.iter(|| ndbi_batch(black_box(&scenes), exec)));
    }
    g.finish();
}

fn bench_harmonize(c: &mut Criterion) {
    let mut g = c.benchmark_group("harmonize");
    for size in SIZES {
        let s = scene(size, 2);
        let (nir, swir) = (s.band(Band::B8).unwrap(), s.band(Band::B11).unwrap());
        for (name, exec) in modes() {
            g.bench_with_input(BenchmarkId::new(name, size), &size, |b, _| {
                b.iter(|| harmonize_with(black_box(nir), black_box(swir), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_compose(c: &mut Criterion) {
    let mut g = c.benchmark_group("compose_rgb");
    let stretch = StretchSpec::default();
    for size in SIZES {
        let s = scene(size, 3);
        for (name, exec) in modes() {
            g.bench_with_input(BenchmarkId::new(name, size), &s, |b, s| {
                b.iter(|| compose_rgb_with(black_box(s), &stretch, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_tiff_decode(c: &mut Criterion) {
    let mut g = c.benchmark_group("tiff_decode_deflate_tiled");
    let s = scene(1024, 4);
    let planes: Vec<&[u16]> = [Band::B2, Band::B3, Band::B4, Band::B8]
        .iter()
        .map(|b| s.band(*b).unwrap().values.as_slice())
        .collect();
    let opts = TiffWriteOptions {
        layout: Layout::Tiles { width: 256, height: 256 },
        predictor: true,
        ..Default::default()
    };
    let bytes = encode_tiff(1024, 1024, &planes, &opts).unwrap();
    for (name, exec) in modes() {
        g.bench_function(name, |b| b.iter(|| decode_tiff_with(black_box(&bytes), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_ndbi,
    bench_ndbi_batch,
    bench_harmonize,
    bench_compose,
    bench_tiff_decode
);
criterion_main!(benches);
