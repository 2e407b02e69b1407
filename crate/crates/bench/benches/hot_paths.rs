//! Microbenchmarks of the paths that dominate a sweep: the forward
//! pass, the per-sample gradient, one epoch of each trainer, and the
//! corpus generators.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use opident_core::servo::default_servo_corpus;
use opident_core::train::{compute_deltas, error_gradient};
use opident_core::{
    assemble_reactor_dataset, fit_normalization, generate_stepback_corpus,
    integrate_point_kinetics, normalize, train_levenberg_marquardt, train_momentum, Activation,
    LayerSpec, LmHyperParams, MisoDataset, MomentumHyperParams, Network, NetworkConfig,
    PointKineticsParams, StepBackScenario,
};

fn reactor_network_config() -> NetworkConfig {
    NetworkConfig::single_output(
        4,
        vec![LayerSpec::new(15, Activation::Tansig)],
        Activation::Linear,
    )
}

/// The normalized 1128-row reactor corpus the sweep trains on.
fn reactor_dataset() -> MisoDataset {
    let series = generate_stepback_corpus(&PointKineticsParams::default(), -30.0, 2.0).unwrap();
    let raw = assemble_reactor_dataset(&series).unwrap();
    let spec = fit_normalization(&raw).unwrap();
    normalize(&raw, &spec).unwrap()
}

fn bench_forward_pass(c: &mut Criterion) {
    let net = Network::init(reactor_network_config(), 1).unwrap();
    let input = [0.3, 0.36, 0.9, 0.6];
    c.bench_function("forward_1x15", |b| {
        b.iter(|| net.predict(black_box(&input)).unwrap())
    });
}

fn bench_sample_gradient(c: &mut Criterion) {
    let net = Network::init(reactor_network_config(), 1).unwrap();
    let input = [0.3, 0.36, 0.9, 0.6];
    let target = [0.42];
    c.bench_function("gradient_1x15", |b| {
        b.iter(|| {
            let trace = net.forward(black_box(&input)).unwrap();
            let deltas = compute_deltas(&net, &trace, black_box(&target)).unwrap();
            error_gradient(&net, &trace, &deltas)
        })
    });
}

fn bench_momentum_epoch(c: &mut Criterion) {
    let ds = reactor_dataset();
    let config = reactor_network_config();
    let params = MomentumHyperParams {
        max_epochs: 1,
        loss_tolerance: 0.0,
        ..MomentumHyperParams::default()
    };
    c.bench_function("momentum_epoch_reactor", |b| {
        b.iter(|| train_momentum(&config, black_box(&ds), &params, 7).unwrap())
    });
}

fn bench_lm_epoch(c: &mut Criterion) {
    let ds = reactor_dataset();
    let config = reactor_network_config();
    let params = LmHyperParams {
        max_epochs: 1,
        loss_tolerance: 0.0,
        ..LmHyperParams::default()
    };
    c.bench_function("lm_epoch_reactor", |b| {
        b.iter(|| train_levenberg_marquardt(&config, black_box(&ds), &params, 7).unwrap())
    });
}

fn bench_point_kinetics(c: &mut Criterion) {
    let params = PointKineticsParams::default();
    let scenario = StepBackScenario::new(100.0, 50.0);
    c.bench_function("point_kinetics_14s", |b| {
        b.iter(|| integrate_point_kinetics(black_box(&params), black_box(&scenario)).unwrap())
    });
}

fn bench_servo_corpus(c: &mut Criterion) {
    c.bench_function("servo_corpus_18x5000", |b| {
        b.iter(|| default_servo_corpus().unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_forward_pass, bench_sample_gradient, bench_momentum_epoch,
        bench_lm_epoch, bench_point_kinetics, bench_servo_corpus
}
criterion_main!(benches);
