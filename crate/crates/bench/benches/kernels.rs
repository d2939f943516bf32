use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::rngs::StdRng;
use rand::SeedableRng;

use ltew_core::data::synthetic_image;
use ltew_core::geometry::{sample_homography, shape_vector, NormalizedCoord, Regime};
use ltew_core::nn::{conv3x3, conv3x3_backward, Tensor};
use ltew_core::{LtewConfig, LtewNet, Size, WarpOptions};

fn conv(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(0);
    let x = Tensor::<f32>::uniform(&[1, 64, 48, 48], 1.0, &mut rng);
    let w = Tensor::<f32>::uniform(&[64, 64, 3, 3], 0.1, &mut rng);
    let b = Tensor::<f32>::uniform(&[64], 0.1, &mut rng);
    let up = Tensor::<f32>::uniform(&[1, 64, 48, 48], 1.0, &mut rng);
    c.bench_function("conv3x3 64->64 48x48", |bch| bch.iter(|| conv3x3(black_box(&x), &w, &b).unwrap()));
    c.bench_function("conv3x3_backward 64->64 48x48", |bch| {
        bch.iter(|| conv3x3_backward(black_box(&x), &w, &up).unwrap())
    });
}

fn warp(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(1);
    let t = sample_homography(&mut rng, Regime::InScale, Size::new(64, 64));
    let img = synthetic_image(0, t.in_size());
    let mut group = c.benchmark_group("warp_image 64x64");
    group.sample_size(10);
    for (name, cfg) in [("tiny", LtewConfig::tiny()), ("desk", LtewConfig::desk())] {
        let net = LtewNet::<f32>::init(cfg, &mut rng).unwrap();
        let opts = WarpOptions::default();
        group.bench_function(name, |bch| bch.iter(|| net.warp_image(black_box(&img), &t, &opts).unwrap()));
    }
    group.finish();
}

fn shape(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(2);
    let t = sample_homography(&mut rng, Regime::InScale, Size::new(128, 128));
    let y = NormalizedCoord::new(0.1, -0.2);
    c.bench_function("shape_vector homography", |bch| bch.iter(|| shape_vector(&t, black_box(y)).unwrap()));
}

criterion_group!(benches, conv, warp, shape);
criterion_main!(benches);
