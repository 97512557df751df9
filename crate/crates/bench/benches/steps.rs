use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use growthsgd::numerics::spectral_norm_gram;
use growthsgd::{AccelMode, AccelSchedule, AccelState, FiniteSum, Rng, Sgd, SgdConfig, Vector};
use growthsgd_bench::margin_objective;

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for d in [20, 100, 500] {
        let obj = margin_objective(2000, d, 0.1, 1);
        let l_max = obj.smoothness().unwrap().l_max;
        group.bench_with_input(BenchmarkId::new("sgd", d), &d, |b, &d| {
            let mut sgd = Sgd::new(Vector::zeros(d), &SgdConfig::new(1.0 / l_max)).unwrap();
            let mut rng = Rng::new(2);
            b.iter(|| black_box(sgd.step(&obj, &mut rng).unwrap()));
        });
        group.bench_with_input(BenchmarkId::new("accel", d), &d, |b, &d| {
            let schedule = AccelSchedule::new(AccelMode::Convex, 10.0, 1e-3).unwrap();
            let mut st = AccelState::new(Vector::zeros(d), schedule);
            let mut rng = Rng::new(3);
            b.iter(|| black_box(st.step(&obj, 0.0, &mut rng).unwrap()));
        });
    }
    group.finish();
}

fn full_pass(c: &mut Criterion) {
    let mut group = c.benchmark_group("full");
    let obj = margin_objective(8000, 100, 0.1, 4);
    let w = vec![0.01; 100];
    group.bench_function("gradient_8000x100", |b| {
        b.iter(|| black_box(obj.full_grad(black_box(&w))))
    });
    group.bench_function("loss_8000x100", |b| b.iter(|| black_box(obj.full_loss(black_box(&w)))));
    group.sample_size(10);
    group.bench_function("spectral_norm_8000x100", |b| {
        b.iter(|| black_box(spectral_norm_gram(obj.data().features(), 1e-10, 100_000).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, steps, full_pass);
criterion_main!(benches);
