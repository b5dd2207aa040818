use criterion::{black_box, criterion_group, criterion_main, Criterion};
use inferno_core::inference::{infer_states, variational_free_energy};
use inferno_core::planning::{evaluate_policies_point, JointBelief, DEFAULT_MAX_POLICIES};
use inferno_core::sandbox::{tmaze, two_chain_spec, two_chains, PomdpWorld};
use inferno_core::structure::{bmr_log_evidence_ratio, bmr_monte_carlo, score_structure};
use inferno_core::{DataBatch, DirichletCounts, Environment, HyperParams, InferenceConfig, StructureConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain_data(steps: usize) -> DataBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut world = PomdpWorld::new(two_chains(0.9, 0.05).unwrap());
    let mut obs = vec![world.reset(&mut rng)];
    for _ in 1..steps {
        obs.push(world.step(0, &mut rng).unwrap());
    }
    DataBatch::new(obs, vec![0; steps - 1]).unwrap()
}

fn perception(c: &mut Criterion) {
    let data = chain_data(100);
    let h = HyperParams::flat(&two_chain_spec(), 1.0).unwrap();
    let cfg = InferenceConfig::default();
    c.bench_function("infer_states two chains, 100 steps", |b| {
        b.iter(|| infer_states(black_box(&h), black_box(&data), &cfg).unwrap())
    });
    let q = infer_states(&h, &data, &cfg).unwrap();
    c.bench_function("variational_free_energy two chains, 100 steps", |b| {
        b.iter(|| variational_free_energy(black_box(&q), &h, &data).unwrap())
    });
}

fn planning(c: &mut Criterion) {
    let model = tmaze(0.95, 0.8).unwrap();
    let start = JointBelief::initial(&model).unwrap();
    for horizon in [1, 2, 3] {
        c.bench_function(&format!("t-maze policies, horizon {horizon}"), |b| {
            b.iter(|| evaluate_policies_point(&model, black_box(&start), &model.c, horizon, DEFAULT_MAX_POLICIES).unwrap())
        });
    }
}

fn learning(c: &mut Criterion) {
    let data = chain_data(50);
    let cfg = StructureConfig::default();
    let mut group = c.benchmark_group("structure");
    group.sample_size(10);
    group.bench_function("score_structure two chains, 50 steps", |b| {
        b.iter(|| score_structure(black_box(&two_chain_spec()), &data, &cfg))
    });
    group.finish();

    let prior = DirichletCounts::new(vec![1.0, 2.0, 0.5, 1.5]).unwrap();
    let posterior = prior.add(&[4.0, 0.0, 7.0, 2.0]).unwrap();
    let reduced = DirichletCounts::new(vec![0.8, 1.6, 0.4, 1.2]).unwrap();
    c.bench_function("bmr closed form", |b| {
        b.iter(|| bmr_log_evidence_ratio(black_box(&posterior), &prior, &reduced).unwrap())
    });
    c.bench_function("bmr monte carlo, 10^4 samples", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        b.iter(|| bmr_monte_carlo(&posterior, &prior, &reduced, 10_000, &mut rng).unwrap())
    });
}

criterion_group!(benches, perception, planning, learning);
criterion_main!(benches);
