use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nystrom_filter::{
    brute_force_filter, build_guide, extract_range_list, fast_filter, jacobi_eig, load_image, select_landmarks,
    FilterMode, FilterParams, Image, LandmarkStrategy, RangeKernel, SpatialKernel, SymMatrix,
};

fn fixture(name: &str) -> Image {
    load_image(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)).unwrap()
}

fn spatial(c: &mut Criterion) {
    let (w, h) = (512, 512);
    let plane: Vec<f64> = (0..w * h).map(|k| ((k * 7919) % 256) as f64).collect();
    let mut group = c.benchmark_group("spatial_512");
    for sigma in [2.0, 8.0, 16.0] {
        let kernels = [
            ("recursive", SpatialKernel::gaussian_recursive(sigma).unwrap()),
            ("fir", SpatialKernel::gaussian_fir_3sigma(sigma).unwrap()),
            ("box", SpatialKernel::box_kernel((3.0 * sigma) as usize)),
        ];
        for (name, k) in kernels {
            group.bench_with_input(BenchmarkId::new(name, sigma), &k, |b, k| {
                b.iter(|| k.apply(black_box(&plane), w, h))
            });
        }
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobi");
    for n in [15, 64, 147] {
        let points: Vec<f64> = (0..n).map(|i| (i as f64 * 37.0) % 255.0).collect();
        let kernel = RangeKernel::gaussian(50.0).unwrap();
        let a = SymMatrix::from_fn(n, |i, j| kernel.eval(&[points[i]], &[points[j]]));
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| b.iter(|| jacobi_eig(black_box(a))));
    }
    group.finish();
}

fn landmarks(c: &mut Criterion) {
    let img = fixture("astronaut_256.png");
    let list = extract_range_list(&img);
    let mut group = c.benchmark_group("landmarks_256");
    group.sample_size(10);
    for strategy in [LandmarkStrategy::KMeans, LandmarkStrategy::Uniform] {
        for m0 in [15, 64] {
            group.bench_function(BenchmarkId::new(strategy.to_string(), m0), |b| {
                b.iter(|| select_landmarks(black_box(list.vectors()), m0, strategy, 0, 50))
            });
        }
    }
    group.finish();
}

fn bilateral(c: &mut Criterion) {
    let img = fixture("astronaut_256.png");
    let mut group = c.benchmark_group("bilateral_256");
    group.sample_size(10);
    for m0 in [8, 15, 32] {
        let params = FilterParams::bilateral(5.0, 50.0, m0).unwrap();
        group.bench_function(BenchmarkId::new("fast", m0), |b| b.iter(|| fast_filter(black_box(&img), &img, &params)));
    }
    let small = fixture("astronaut_128.png");
    let oracle = FilterParams::new(
        SpatialKernel::gaussian_fir_3sigma(5.0).unwrap(),
        RangeKernel::gaussian(50.0).unwrap(),
        15,
    );
    group.bench_function("brute_force_128", |b| b.iter(|| brute_force_filter(black_box(&small), &small, &oracle)));
    group.finish();
}

fn nlm(c: &mut Criterion) {
    let img = fixture("rocket_128.png");
    let params = FilterParams::nlm_defaults(25.0).unwrap();
    let mode = FilterMode::Nlm {
        patch_radius: 3,
        pca_dim: 25,
    };
    let guide = build_guide(&img, mode, None).unwrap();
    let mut group = c.benchmark_group("nlm_128");
    group.sample_size(10);
    group.bench_function("pca_guide", |b| b.iter(|| build_guide(black_box(&img), mode, None)));
    group.bench_function("fast_filter", |b| b.iter(|| fast_filter(black_box(&img), &guide, &params)));
    group.finish();
}

criterion_group!(benches, spatial, eigen, landmarks, bilateral, nlm);
criterion_main!(benches);
