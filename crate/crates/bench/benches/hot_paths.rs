use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use simcal_core::density::{ConditionalDensityModel, MdnnConfig, ModelConfig};
use simcal_core::simulators::{rollout, rollout_batch, Policy, TaskKind, TaskSpec};
use simcal_core::summarizers::SummarizerSpec;
use simcal_core::{Prior, RandomStream};

fn rollouts(c: &mut Criterion) {
    let task = TaskSpec::default_for(TaskKind::Cartpole);
    let prior = Prior::uniform(task.param_space().clone());
    let thetas = prior.sample(&RandomStream::new(1, "bench"), 1000).unwrap();
    let base = RandomStream::new(1, "sim");
    c.bench_function("rollout_batch cartpole 1000x100", |b| {
        b.iter(|| rollout_batch(&task, black_box(&thetas), &Policy::Random, &base, 100).unwrap())
    });
}

fn summarizers(c: &mut Criterion) {
    let task = TaskSpec::default_for(TaskKind::Cartpole);
    let theta = TaskKind::Cartpole.default_real_params();
    let traj = rollout(&task, theta, &Policy::Random, &RandomStream::new(2, "traj"), 200).unwrap();
    for spec in ["signature:depth=4,time_augment=true", "cross_corr_diff", "waypoints"] {
        let spec: SummarizerSpec = spec.parse().unwrap();
        c.bench_function(&format!("summarize {}", spec.kind_name()), |b| {
            b.iter(|| spec.summarize(black_box(&traj)).unwrap())
        });
    }
}

fn density(c: &mut Criterion) {
    let task = TaskSpec::default_for(TaskKind::Pendulum);
    let prior = Prior::uniform(task.param_space().clone());
    let thetas = prior.sample(&RandomStream::new(3, "bench"), 256).unwrap();
    let summaries = Array2::from_shape_fn((256, 24), |(i, j)| (thetas[[i, j % 2]] * (j + 1) as f64).sin());
    let cfg = ModelConfig::Mdnn(MdnnConfig::default());
    let model =
        ConditionalDensityModel::init(cfg, &summaries, task.param_space(), "bench", &RandomStream::new(3, "m")).unwrap();
    c.bench_function("mdnn loss+grad batch 256", |b| {
        b.iter(|| model.nll_loss_and_grad(black_box(&summaries), &thetas).unwrap())
    });
    let mix = model.forward_values(summaries.row(0)).unwrap();
    let point = [1.0, 0.8];
    c.bench_function("mixture logpdf K=10 D=2", |b| b.iter(|| mix.logpdf(black_box(&point)).unwrap()));
}

criterion_group!(benches, rollouts, summarizers, density);
criterion_main!(benches);
