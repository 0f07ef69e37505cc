//! Compares `par::map_indexed` against a plain iterator on the two workloads that
//! dominate run time: funnel rollouts and dressing trials.
//!
//! The `par` backend is chosen at compile time, so run the suite twice to see both:
//! `cargo bench -p hapnav-core` and `cargo bench -p hapnav-core --no-default-features`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hapnav_core::dressing::{make_baseline1, run_trial, trial_seed, TaskSpec};
use hapnav_core::funnel_env::{EnvConfig, FunnelEnv};
use hapnav_core::policy::PolicyParams;
use hapnav_core::seed::{self, stream};
use hapnav_core::trpo::{run_episode, Stochastic};
use hapnav_core::par;

fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "rayon"
    } else {
        "sequential-build"
    }
}

fn rollouts(c: &mut Criterion) {
    let env = FunnelEnv::new(EnvConfig { max_steps: 200, ..EnvConfig::default() }).unwrap();
    let policy = PolicyParams::init(&[32, 32], &mut seed::rng(7));
    let actor = Stochastic(&policy);
    let episode = |i: usize| run_episode(&env, &actor, seed::derive(7, stream::EPISODE, i as u64)).unwrap().len();
    let mut g = c.benchmark_group("funnel_rollouts");
    g.sample_size(10);
    for n in [8usize, 32] {
        g.bench_with_input(BenchmarkId::new(format!("par/{}", backend()), n), &n, |b, &n| b.iter(|| black_box(par::map_indexed(n, episode))));
        g.bench_with_input(BenchmarkId::new("iter", n), &n, |b, &n| b.iter(|| black_box((0..n).map(episode).collect::<Vec<_>>())));
    }
    g.finish();
}

fn trials(c: &mut Criterion) {
    let mut task = TaskSpec::tube();
    task.time_limit = 1.0;
    task.settle_duration = 0.2;
    task.interpolation_duration = 0.2;
    let ctl = make_baseline1(0.25).unwrap();
    let trial = |i: usize| run_trial(&task, &ctl, trial_seed(task.seed, i), false).unwrap().outcome;
    let mut g = c.benchmark_group("dressing_trials");
    g.sample_size(10);
    let n = 4;
    g.bench_function(BenchmarkId::new(format!("par/{}", backend()), n), |b| b.iter(|| black_box(par::map_indexed(n, trial))));
    g.bench_function(BenchmarkId::new("iter", n), |b| b.iter(|| black_box((0..n).map(trial).collect::<Vec<_>>())));
    g.finish();
}

criterion_group!(benches, rollouts, trials);
criterion_main!(benches);
