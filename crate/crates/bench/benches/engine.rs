use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use ottoforge_core::lindblad::{evolve, DEFAULT_DT};
use ottoforge_core::{Engine, EngineSpec, LindbladGenerator, Propagator, Variant};

fn spec() -> EngineSpec {
    EngineSpec::new(8.0, 6.0, 1.0, 0.25).with_stroke_time(1.0)
}

fn bench_evolve(c: &mut Criterion) {
    let engine = Engine::new(&spec()).unwrap();
    let rho = engine.initial_state().unwrap();
    c.bench_function("evolve_qubit_t1", |b| {
        b.iter(|| evolve(black_box(&rho), engine.hot_generator(), 1.0, DEFAULT_DT).unwrap())
    });
}

fn bench_propagator(c: &mut Criterion) {
    let engine = Engine::new(&spec()).unwrap();
    let generator: &LindbladGenerator = engine.hot_generator();
    c.bench_function("propagator_qubit_t1", |b| {
        b.iter(|| Propagator::new(black_box(generator), 1.0, DEFAULT_DT).unwrap())
    });
    let aux = Engine::new(&spec().with_variant(Variant::Auxiliary { n: 1.0 })).unwrap();
    c.bench_function("propagator_aux_t1", |b| {
        b.iter(|| Propagator::new(black_box(aux.hot_generator()), 1.0, DEFAULT_DT).unwrap())
    });
}

fn bench_cycle(c: &mut Criterion) {
    for (name, variant) in [
        ("cycle_baseline", Variant::Baseline),
        ("cycle_transverse", Variant::Transverse { big_lambda: 4.0 }),
        ("cycle_aux", Variant::Auxiliary { n: 1.0 }),
    ] {
        let engine = Engine::new(&spec().with_variant(variant)).unwrap();
        let rho = engine.initial_state().unwrap();
        c.bench_function(name, |b| b.iter(|| engine.cycle(black_box(&rho), 1).unwrap()));
    }
}

criterion_group!(benches, bench_evolve, bench_propagator, bench_cycle);
criterion_main!(benches);
