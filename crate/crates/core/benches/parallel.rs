//! Rollout-heavy workloads on one worker versus the default rayon pool.
//!
//! Built without the `parallel` feature only the sequential variants run.

use criterion::{criterion_group, criterion_main, Criterion};
use flowswap::bench::{generate_instances, GeneratorConfig};
use flowswap::inference::{multirun, InferenceConfig};
use flowswap::operators::PairAction;
use flowswap::policy::{NetConfig, PolicyParams};
use flowswap::ppo::{minibatch_loss, LossConfig, Sample};
use flowswap::sched::{network_features, Instance, ObjectiveConfig, Permutation};

fn pool() -> Vec<Instance> {
    generate_instances(&GeneratorConfig {
        n_jobs: 20,
        n_stations: 12,
        count: 4,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

fn params() -> PolicyParams<f32> {
    let full = NetConfig::for_stations(12);
    PolicyParams::init(
        NetConfig {
            d_h: 64,
            d_ff: 128,
            ..full
        },
        1,
    )
    .unwrap()
}

fn run_variants(c: &mut Criterion, name: &str, work: impl Fn() + Sync + Send) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("one_thread", |b| b.iter(|| single.install(&work)));
        group.bench_function("default_pool", |b| b.iter(&work));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&work));
    group.finish();
}

fn bench_multirun(c: &mut Criterion) {
    let insts = pool();
    let p = params();
    let obj = ObjectiveConfig::default();
    let cfg = InferenceConfig {
        runs_per_policy: 16,
        ..InferenceConfig::default()
    };
    run_variants(c, "multirun", || {
        for inst in &insts {
            std::hint::black_box(multirun(inst, &p, &obj, &cfg).unwrap());
        }
    });
}

fn bench_minibatch(c: &mut Criterion) {
    let insts = pool();
    let p = params();
    let obj = ObjectiveConfig::default();
    let feats: Vec<_> = (0..64)
        .map(|i| {
            let inst = &insts[i % insts.len()];
            network_features(
                inst,
                &Permutation::identity(inst.n_jobs()),
                &obj,
                i % 10,
                10,
            )
            .unwrap()
        })
        .collect();
    let samples: Vec<Sample> = feats
        .iter()
        .enumerate()
        .map(|(i, f)| Sample {
            features: f,
            action: PairAction::new(i % 20, (i + 7) % 20),
            old_log_prob: -6.0,
            advantage: if i % 2 == 0 { 0.5 } else { -0.5 },
            target: 0.1,
        })
        .collect();
    let cfg = LossConfig {
        clip_param: 0.2,
        value_coeff: 1.0,
        entropy_coeff: 0.0,
    };
    run_variants(c, "minibatch_gradient", || {
        std::hint::black_box(minibatch_loss(&p, &samples, &cfg).unwrap());
    });
}

criterion_group!(benches, bench_multirun, bench_minibatch);
criterion_main!(benches);
