use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use harcascade::cascade::{evaluate_cascade, CascadeModel};
use harcascade::cnn::{CnnModel, CnnSpec, InputNorm, Network, TrainConfig};
use harcascade::cost::McuProfile;
use harcascade::data::{extract_all, make_cnn_dataset, make_dt_dataset, synth_dataset, SynthSpec};
use harcascade::exec::Execution;
use harcascade::trees::{depth_grid_search, train_forest, train_tree, ForestOptions};
use harcascade::FALLBACK_ID;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench(c: &mut Criterion) {
    let spec = SynthSpec::default();
    let (train, test) = synth_dataset(&spec, 1).expect("synthetic data");
    let features = extract_all(&train.windows, Execution::Sequential);
    let easy: BTreeSet<u16> = spec.static_ids().into_iter().collect();

    let mut g = c.benchmark_group("feature_extraction");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| extract_all(&train.windows, exec)));
    }
    g.finish();

    let mut g = c.benchmark_group("depth_grid_search");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| depth_grid_search(&features, 2..=10, None, exec).expect("search"))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("forest_15x10");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_forest(&features, 15, 10, 3, ForestOptions::default(), exec).expect("forest"))
        });
    }
    g.finish();

    let dt_ds = make_dt_dataset(&train, &easy, FALLBACK_ID).expect("dt data");
    let dt = train_tree(&extract_all(&dt_ds.windows, Execution::Sequential), 6, 0).expect("tree");
    let (_, class_map) = make_cnn_dataset(&train, &easy).expect("cnn data");
    let cnn_spec = CnnSpec::new([8, 8, 8], [7, 7, 7], class_map.len()).expect("spec");
    let cnn = CnnModel {
        network: Network::init(&cnn_spec, 2),
        norm: InputNorm::identity(),
        class_map,
        train_config: TrainConfig::default(),
        best_epoch: 0,
        valid_accuracy: 0.0,
    };
    let cascade = CascadeModel::new(dt, cnn, easy, FALLBACK_ID).expect("cascade");
    let profile = McuProfile::default();
    let mut g = c.benchmark_group("cascade_evaluation");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_cascade(&cascade, &test, &profile, exec).expect("evaluate"))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
