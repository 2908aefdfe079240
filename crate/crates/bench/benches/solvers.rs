use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lbse_bench::Fixture;
use lbse_core::measurement::{eval_h, eval_jacobian, StateVector};
use lbse_core::{fit_linear, knn_predict, un, wls, SolverOptions, WlsProblem};

fn measurement_model(c: &mut Criterion) {
    let fx = Fixture::new(10);
    let x = &fx.dataset.instances[0].x_true;
    c.bench_function("eval_h/79", |b| {
        b.iter(|| eval_h(black_box(x), &fx.plan, &fx.adm))
    });
    c.bench_function("eval_jacobian/79x65", |b| {
        b.iter(|| eval_jacobian(black_box(x), &fx.plan, &fx.adm))
    });
}

fn estimators(c: &mut Criterion) {
    let fx = Fixture::new(10);
    let opts = SolverOptions::default();
    let flat = StateVector::flat(fx.net.n_buses(), fx.net.slack_index());
    let weights = fx.plan.weights();
    let z = fx.full_z(0);
    c.bench_function("wls/full_plan", |b| {
        b.iter_batched(
            || WlsProblem {
                plan: &fx.plan,
                adm: &fx.adm,
                z: z.clone(),
                weights: weights.clone(),
                init: flat.clone(),
            },
            |problem| wls(&problem, &opts).expect("observable"),
            BatchSize::SmallInput,
        )
    });

    let realtime = fx.plan.realtime();
    let w_a = realtime.weights();
    let z_a = &fx.dataset.instances[0].z_a;
    c.bench_function("un/realtime_plan", |b| {
        b.iter(|| un(black_box(z_a), &realtime, &w_a, &flat, &fx.adm, &opts).expect("solves"))
    });
}

fn learners(c: &mut Criterion) {
    let fx = Fixture::new(1000);
    let (x, y) = fx.training_matrices();
    c.bench_function("fit_linear/800x43", |b| {
        b.iter(|| fit_linear(black_box(&x), &y).expect("fits"))
    });
    let query = fx.dataset.instances[fx.dataset.test[0]].z_a.clone();
    c.bench_function("knn_predict/k20", |b| {
        b.iter(|| knn_predict(&x, &y, black_box(&query), 20).expect("predicts"))
    });
}

criterion_group!(benches, measurement_model, estimators, learners);
criterion_main!(benches);
