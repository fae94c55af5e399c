//! Acceptance suite. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 4 5`. Criterion 9 needs `HAPT_DIR`
//! pointing at an extracted HAPT download.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harcascade::cascade::{evaluate_cascade, evaluate_cascade_traced, exact_average_energy, exact_cascade_energy, CascadeModel};
use harcascade::cnn::kernels::{batchnorm_forward_train, conv1d_forward, fc_forward, maxpool1d};
use harcascade::cnn::{CnnSpec, Network, Tensor, BN_EPS};
use harcascade::cost::{cnn_cost, cost_report, tree_cost, McuProfile, Workload};
use harcascade::data::{
    extract_all, load_hapt, load_hapt_split, make_dt_dataset, oversample_classes, synth_dataset, FeatureVector,
    LabeledDataset, SynthSpec, HAPT_STATIC_IDS,
};
use harcascade::exec::Execution;
use harcascade::search::{
    best_by_accuracy, pareto_indices, run_pipeline, ParetoPoint, PipelineOutput, PointKind, SweepConfig,
};
use harcascade::trees::{train_tree, TreeModel, TreeNode};
use harcascade::FALLBACK_ID;

const SYNTH_SEED: u64 = 7;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn main() {
    let wanted: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "kernel oracle equivalence", kernel_oracles),
        (2, "gradient checks", gradient_checks),
        (3, "CART brute-force oracle", cart_oracle),
        (4, "Pareto dominance oracle", pareto_oracle),
        (5, "cost-model identities", cost_identities),
        (6, "cascade energy identity", cascade_energy_identity),
        (7, "oversampling identity", oversampling_identity),
        (8, "synthetic end-to-end", synthetic_end_to_end),
        (9, "HAPT gate", hapt_gate),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("acceptance {id} [{tag}] {name} ({secs:.1}s): {detail}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- 1

fn oracle_conv(x: &[f64], b: usize, ci: usize, len: usize, w: &[f64], bias: &[f64], co: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let mut y = vec![0.0; b * co * len];
    for n in 0..b {
        for o in 0..co {
            for t in 0..len {
                let mut acc = bias[o];
                for c in 0..ci {
                    for j in 0..k {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < len {
                            acc += w[(o * ci + c) * k + j] * x[(n * ci + c) * len + src as usize];
                        }
                    }
                }
                y[(n * co + o) * len + t] = acc;
            }
        }
    }
    y
}

fn oracle_pool(x: &[f64], rows: usize, len: usize) -> Vec<f64> {
    let out = len / 2;
    let mut y = Vec::new();
    for r in 0..rows {
        for t in 0..out {
            y.push(x[r * len + 2 * t].max(x[r * len + 2 * t + 1]));
        }
    }
    y
}

fn oracle_bn(x: &[f64], b: usize, c: usize, len: usize, gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    let count = (b * len) as f64;
    for ch in 0..c {
        let vals: Vec<f64> = (0..b).flat_map(|n| (0..len).map(move |t| (n, t))).map(|(n, t)| x[(n * c + ch) * len + t]).collect();
        let mean = vals.iter().sum::<f64>() / count;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        for n in 0..b {
            for t in 0..len {
                let i = (n * c + ch) * len + t;
                y[i] = gamma[ch] * (x[i] - mean) / (var + BN_EPS).sqrt() + beta[ch];
            }
        }
    }
    y
}

fn oracle_fc(x: &[f64], batch: usize, w: &[f64], bias: &[f64], n_out: usize) -> Vec<f64> {
    let n_in = x.len() / batch;
    let mut y = Vec::new();
    for n in 0..batch {
        for o in 0..n_out {
            y.push(bias[o] + (0..n_in).map(|i| w[o * n_in + i] * x[n * n_in + i]).sum::<f64>());
        }
    }
    y
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kernel_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut shapes = 0;
    for _ in 0..500 {
        let b = rng.gen_range(1..=4);
        let ci = rng.gen_range(1..=6);
        let co = rng.gen_range(1..=6);
        let len = rng.gen_range(2..=40);
        let k = [1, 3, 5, 7, 15][rng.gen_range(0..5)];
        let x: Vec<f64> = (0..b * ci * len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..co * ci * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..co).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xt = Tensor::new(vec![b, ci, len], x.clone());

        let conv = conv1d_forward(&xt, &w, &bias, co, k).expect("conv");
        worst = worst.max(max_abs_diff(&conv.data, &oracle_conv(&x, b, ci, len, &w, &bias, co, k)));

        let (pooled, _) = maxpool1d(&xt).expect("pool");
        worst = worst.max(max_abs_diff(&pooled.data, &oracle_pool(&x, b * ci, len)));

        let gamma: Vec<f64> = (0..ci).map(|_| rng.gen_range(0.5..2.0)).collect();
        let beta: Vec<f64> = (0..ci).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (bn, _) = batchnorm_forward_train(&xt, &gamma, &beta, BN_EPS).expect("bn");
        worst = worst.max(max_abs_diff(&bn.data, &oracle_bn(&x, b, ci, len, &gamma, &beta)));

        let n_out = co;
        let wf: Vec<f64> = (0..n_out * ci * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fc = fc_forward(&x, b, &wf, &bias, n_out).expect("fc");
        worst = worst.max(max_abs_diff(&fc, &oracle_fc(&x, b, &wf, &bias, n_out)));
        shapes += 1;
    }
    verdict(worst <= 1e-6, format!("{shapes} shapes, max |diff| = {worst:.3e} (tol 1e-6)"))
}

// ---------------------------------------------------------------- 2

fn gradient_checks() -> Outcome {
    let spec = CnnSpec::with_input([2, 2, 2], [7, 7, 7], 3, 6, 32).expect("spec");
    let mut net: Network<f64> = Network::init(&spec, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    let batch = 5;
    let x = Tensor::new(vec![batch, 6, 32], (0..batch * 6 * 32).map(|_| rng.gen_range(-1.5..1.5)).collect());
    let targets: Vec<usize> = (0..batch).map(|i| i % 3).collect();
    let (_, grads) = net.clone().loss_and_grads(&x, &targets, 1.0, false).expect("grads");
    let names = net.param_names();
    let pattern = |n: &Network<f64>| n.clone().forward_train(&x, false).expect("forward").1.activation_pattern();
    let numeric = |ti: usize, j: usize, h: f64| {
        let mut plus = net.clone();
        plus.params_mut()[ti][j] += h;
        let mut minus = net.clone();
        minus.params_mut()[ti][j] -= h;
        let smooth = pattern(&plus) == pattern(&minus);
        let d = (plus.train_loss(&x, &targets).unwrap() - minus.train_loss(&x, &targets).unwrap()) / (2.0 * h);
        (d, smooth)
    };
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let mut worst = (0.0f64, String::new());
    let mut worst_kink = 0.0f64;
    let mut checked = 0;
    let mut kinked = 0;
    let mut per_tensor_smooth = vec![0usize; names.len()];
    for (ti, name) in names.iter().enumerate() {
        for j in 0..grads[ti].len() {
            let analytic = grads[ti][j];
            let (d, smooth) = numeric(ti, j, 1e-3);
            checked += 1;
            if smooth {
                per_tensor_smooth[ti] += 1;
                let r = rel(analytic, d);
                if r > worst.0 {
                    worst = (r, format!("{name}[{j}]"));
                }
            } else {
                // the +-h interval contains a ReLU or max-pool switch; shrink the step
                kinked += 1;
                let (d, smooth) = numeric(ti, j, 1e-7);
                worst_kink = worst_kink.max(if smooth { rel(analytic, d) } else { f64::INFINITY });
            }
        }
    }
    let every_tensor = per_tensor_smooth.iter().all(|&c| c > 0);
    verdict(
        worst.0 <= 1e-4 && worst_kink <= 1e-4 && every_tensor,
        format!(
            "{checked} scalars over {} tensors; h=1e-3 worst relative error {:.2e} at {} (tol 1e-4); \
             {kinked} scalars straddle a ReLU/pool switch at h=1e-3, re-checked at h=1e-7: worst {:.2e}",
            names.len(),
            worst.0,
            worst.1,
            worst_kink
        ),
    )
}

// ---------------------------------------------------------------- 3

#[derive(Debug, PartialEq)]
enum Shape {
    Leaf(u16),
    Split(usize, Box<Shape>, Box<Shape>),
}

fn shape_of(t: &TreeModel, node: usize) -> Shape {
    match t.nodes[node] {
        TreeNode::Leaf { class_id } => Shape::Leaf(class_id),
        TreeNode::Split { feature, threshold, left, right } => {
            assert_eq!(threshold, 0.5, "binary features split at the midpoint");
            Shape::Split(feature, Box::new(shape_of(t, left)), Box::new(shape_of(t, right)))
        }
    }
}

fn rational_gini(rows: &[(Vec<u8>, u16)]) -> BigRational {
    let n = BigInt::from(rows.len());
    let mut classes: Vec<u16> = rows.iter().map(|r| r.1).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut g = BigRational::from_integer(BigInt::from(1));
    for c in classes {
        let k = rows.iter().filter(|r| r.1 == c).count();
        let p = BigRational::new(BigInt::from(k), n.clone());
        g -= &p * &p;
    }
    g
}

/// Greedy CART by direct enumeration of every (feature, side) partition.
fn brute_force_tree(rows: &[(Vec<u8>, u16)], depth: usize, max_depth: usize) -> Shape {
    let mut classes: Vec<u16> = rows.iter().map(|r| r.1).collect();
    classes.sort_unstable();
    let majority = {
        let mut best = (0usize, u16::MAX);
        let mut uniq = classes.clone();
        uniq.dedup();
        for c in uniq {
            let k = classes.iter().filter(|&&x| x == c).count();
            if k > best.0 {
                best = (k, c);
            }
        }
        best.1
    };
    let pure = classes.first() == classes.last();
    if pure || depth >= max_depth || rows.len() < 2 {
        return Shape::Leaf(majority);
    }
    let n = BigInt::from(rows.len());
    let parent = rational_gini(rows);
    let mut best: Option<(BigRational, usize)> = None;
    for f in 0..rows[0].0.len() {
        let left: Vec<_> = rows.iter().filter(|r| r.0[f] == 0).cloned().collect();
        let right: Vec<_> = rows.iter().filter(|r| r.0[f] == 1).cloned().collect();
        if left.is_empty() || right.is_empty() {
            continue;
        }
        let weighted = BigRational::new(BigInt::from(left.len()), n.clone()) * rational_gini(&left)
            + BigRational::new(BigInt::from(right.len()), n.clone()) * rational_gini(&right);
        let better_than_best = best.as_ref().is_none_or(|(b, _)| weighted < *b);
        if weighted < parent && better_than_best {
            best = Some((weighted, f));
        }
    }
    match best {
        None => Shape::Leaf(majority),
        Some((_, f)) => {
            let left: Vec<_> = rows.iter().filter(|r| r.0[f] == 0).cloned().collect();
            let right: Vec<_> = rows.iter().filter(|r| r.0[f] == 1).cloned().collect();
            Shape::Split(
                f,
                Box::new(brute_force_tree(&left, depth + 1, max_depth)),
                Box::new(brute_force_tree(&right, depth + 1, max_depth)),
            )
        }
    }
}

fn cart_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut total = 0;
    for _ in 0..200 {
        let n_features = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=32);
        let n_classes = rng.gen_range(1..=3u16);
        let rows: Vec<(Vec<u8>, u16)> =
            (0..n).map(|_| ((0..n_features).map(|_| rng.gen_range(0..=1u8)).collect(), rng.gen_range(1..=n_classes))).collect();
        let fvs: Vec<FeatureVector> =
            rows.iter().map(|(x, y)| FeatureVector::new(x.iter().map(|&v| v as f64).collect(), *y)).collect();
        for max_depth in 1..=4 {
            let tree = train_tree(&fvs, max_depth, 0).expect("tree");
            total += 1;
            if shape_of(&tree, 0) != brute_force_tree(&rows, 0, max_depth) {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} mismatching trees out of {total} (200 datasets x depths 1..=4)"))
}

// ---------------------------------------------------------------- 4

fn pareto_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for set in 0..1000 {
        let n = rng.gen_range(1..=200);
        // coarse grids in half the sets to exercise ties
        let coarse = set % 2 == 0;
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                if coarse {
                    (rng.gen_range(0..10) as f64 / 10.0, rng.gen_range(0..10) as f64)
                } else {
                    (rng.gen::<f64>(), rng.gen::<f64>() * 100.0)
                }
            })
            .collect();
        let mut got = pareto_indices(&pts).expect("finite");
        let sorted = got.windows(2).all(|w| pts[w[0]].1 <= pts[w[1]].1);
        got.sort_unstable();
        let oracle: Vec<usize> = (0..n)
            .filter(|&i| {
                !(0..n).any(|j| {
                    j != i && pts[j].0 >= pts[i].0 && pts[j].1 <= pts[i].1 && (pts[j].0 > pts[i].0 || pts[j].1 < pts[i].1)
                })
            })
            .collect();
        if got != oracle || !sorted {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("{bad} of 1000 random point sets disagree with the O(n^2) oracle"))
}

// ---------------------------------------------------------------- 5

fn cost_identities() -> Outcome {
    let profile = McuProfile::default();
    let cfg = SweepConfig { channel_policy: harcascade::search::ChannelPolicy::Free, ..SweepConfig::default() };
    let mut reports = Vec::new();
    for n_classes in [2, 4, 12] {
        for spec in cfg.specs(n_classes, 250).expect("specs") {
            reports.push(cnn_cost(&spec, &profile));
        }
    }
    for visits in [0.0, 1.0, 7.25, 31.0, 1e4] {
        reports.push(cost_report(Workload { macs: 0, node_visits: visits, overhead_cycles: 0.0 }, &profile, 0));
    }
    let broken = reports
        .iter()
        .filter(|r| r.energy_j != profile.active_power_w * r.latency_s || r.latency_s != r.cycles / profile.clock_hz)
        .count();

    // Table I static row: 6.9 ms at 3.8 mW against the printed 26.2 uJ
    let table_cycles = 6.9e-3 * profile.clock_hz;
    let row = cost_report(Workload { macs: 0, node_visits: 0.0, overhead_cycles: table_cycles }, &profile, 0);
    let rel = (row.energy_j - 26.2e-6).abs() / 26.2e-6;
    verdict(
        broken == 0 && rel <= 1e-3,
        format!(
            "{} reports, {broken} violate E = P*t or t = cycles/f; Table I row: {:.3} uJ vs 26.2 uJ ({:.3}% off, tol 0.1%)",
            reports.len(),
            row.energy_j * 1e6,
            rel * 100.0
        ),
    )
}

// ---------------------------------------------------------------- shared synthetic run

struct SynthRun {
    train: LabeledDataset,
    test: LabeledDataset,
    out: PipelineOutput,
    elapsed: Duration,
}

fn synth_run() -> &'static SynthRun {
    static RUN: OnceLock<SynthRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = SynthSpec::default();
        let (train, test) = synth_dataset(&spec, SYNTH_SEED).expect("synthetic data");
        let start = Instant::now();
        let out = run_pipeline(
            &train,
            &test,
            &spec.static_ids(),
            &SweepConfig::synthetic(),
            &McuProfile::default(),
            Execution::Parallel,
        )
        .expect("pipeline");
        SynthRun { train, test, out, elapsed: start.elapsed() }
    })
}

/// Cheapest adaptive point within one point of the best static accuracy.
fn iso_accuracy_pick(points: &[ParetoPoint]) -> Option<(&ParetoPoint, &ParetoPoint)> {
    let best_static = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Static))?;
    let adaptive = points
        .iter()
        .filter(|p| p.kind == PointKind::Adaptive && p.accuracy >= best_static.accuracy - 0.01)
        .min_by(|a, b| a.energy_j.total_cmp(&b.energy_j))?;
    Some((adaptive, best_static))
}

fn frozen_cascade(run: &SynthRun) -> &CascadeModel {
    let points = &run.out.assembly.points;
    let pick = iso_accuracy_pick(points)
        .map(|(a, _)| a)
        .or_else(|| best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Adaptive)))
        .expect("adaptive point");
    let i = points.iter().position(|p| std::ptr::eq(p, pick)).expect("present");
    &run.out.assembly.cascades[i]
}

// ---------------------------------------------------------------- 6

fn cascade_energy_identity() -> Outcome {
    let run = synth_run();
    let profile = McuProfile::default();
    let mut sets = vec![("test", run.test.clone()), ("train", run.train.clone())];
    let easy = &run.out.decomposition.easy_ids;
    sets.push(("test x10 easy", oversample_classes(&run.test, easy, 10).expect("oversample")));
    let mut checked = 0;
    let mut bad = Vec::new();
    for cascade in &run.out.assembly.cascades {
        for (name, ds) in &sets {
            let (metrics, trace) = evaluate_cascade_traced(cascade, ds, &profile, Execution::Parallel).expect("eval");
            let measured = exact_average_energy(cascade, &trace, &profile);
            let closed = exact_cascade_energy(cascade, &trace, &profile);
            let p = Ratio::new(metrics.n_routed_cnn as u64, metrics.n as u64);
            let p_trace = Ratio::new(trace.routed_to_cnn.iter().filter(|r| **r).count() as u64, trace.routed_to_cnn.len() as u64);
            checked += 1;
            if measured != closed || p != p_trace {
                bad.push(format!("{} on {name}", cascade.cnn.spec().config_id()));
            }
        }
    }
    verdict(bad.is_empty(), format!("{checked} cascade/dataset pairs compared in exact rationals; mismatches: {bad:?}"))
}

// ---------------------------------------------------------------- 7

fn oversampling_identity() -> Outcome {
    let run = synth_run();
    let cascade = frozen_cascade(run);
    let profile = McuProfile::default();
    let easy = &cascade.easy_ids;
    let (base, trace) = evaluate_cascade_traced(cascade, &run.test, &profile, Execution::Parallel).expect("eval");

    let (mut n_e, mut n_h, mut r_e, mut r_h, mut ok_e, mut ok_h) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    for (i, w) in run.test.windows.iter().enumerate() {
        let correct = (trace.predictions[i] == w.label) as u64;
        let routed = trace.routed_to_cnn[i] as u64;
        if easy.contains(&w.label) {
            n_e += 1;
            r_e += routed;
            ok_e += correct;
        } else {
            n_h += 1;
            r_h += routed;
            ok_h += correct;
        }
    }
    let f_e = Ratio::new(r_e, n_e);
    let f_h = Ratio::new(r_h, n_h);

    let mut identity_ok = true;
    let mut acc = vec![base.accuracy];
    let mut energy = vec![base.avg_energy_j];
    let mut ps = vec![Ratio::new(base.n_routed_cnn as u64, base.n as u64)];
    for k in [10u64, 20] {
        let ds = oversample_classes(&run.test, easy, k as usize).expect("oversample");
        let m = evaluate_cascade(cascade, &ds, &profile, Execution::Parallel).expect("eval");
        let measured = Ratio::new(m.n_routed_cnn as u64, m.n as u64);
        let closed = (f_e * Ratio::from_integer(k * n_e) + f_h * Ratio::from_integer(n_h)) / Ratio::from_integer(k * n_e + n_h);
        identity_ok &= measured == closed;
        acc.push(m.accuracy);
        energy.push(m.avg_energy_j);
        ps.push(measured);
    }

    // Oversampling the easy group pulls every metric toward that group's value.
    let easy_better = Ratio::new(ok_e, n_e) >= Ratio::new(ok_h, n_h);
    let routes_less = f_e < f_h;
    let acc_ok = !easy_better || acc.windows(2).all(|w| w[1] >= w[0]);
    let energy_ok = !routes_less || energy.windows(2).all(|w| w[1] < w[0]);
    verdict(
        identity_ok && acc_ok && energy_ok && easy_better && routes_less,
        format!(
            "p_fallback k=1,10,20: {} {} {}; accuracy {:.4} -> {:.4} -> {:.4}; energy {:.3} -> {:.3} -> {:.3} uJ; \
             closed form exact: {identity_ok}; easy acc {}/{} vs hard {}/{}; F_e = {f_e}, F_h = {f_h}",
            ps[0], ps[1], ps[2], acc[0], acc[1], acc[2], energy[0] * 1e6, energy[1] * 1e6, energy[2] * 1e6, ok_e, n_e, ok_h, n_h
        ),
    )
}

// ---------------------------------------------------------------- 8

fn synthetic_end_to_end() -> Outcome {
    let run = synth_run();
    let points = &run.out.assembly.points;
    let easy: Vec<u16> = run.out.decomposition.easy_ids.iter().copied().collect();
    let statics = SynthSpec::default().static_ids();
    let Some(best_static) = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Static)) else {
        return Outcome::Fail("no static points".into());
    };
    let best_adaptive_acc = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Adaptive));
    let pick = iso_accuracy_pick(points);
    let ratio = pick.map(|(a, s)| a.energy_j / s.energy_j);
    let ok = easy == statics && pick.is_some() && ratio.unwrap() <= 0.6 && run.elapsed.as_secs() < 600;
    let detail = match pick {
        Some((a, s)) => format!(
            "easy {easy:?}; best static {} acc {:.4} at {:.3} uJ; adaptive {} acc {:.4} at {:.3} uJ \
             (p_fallback {:.3}); energy ratio {:.3} (need <= 0.600); pipeline {:.0}s",
            s.config_id,
            s.accuracy,
            s.energy_j * 1e6,
            a.config_id,
            a.accuracy,
            a.energy_j * 1e6,
            a.p_fallback.unwrap_or(f64::NAN),
            ratio.unwrap(),
            run.elapsed.as_secs_f64()
        ),
        None => format!(
            "easy {easy:?}; no adaptive point within 1 pp of static {} ({:.4}); best adaptive {:?}",
            best_static.config_id,
            best_static.accuracy,
            best_adaptive_acc.map(|p| (&p.config_id, p.accuracy))
        ),
    };
    verdict(ok, detail)
}

// ---------------------------------------------------------------- 9

fn hapt_gate() -> Outcome {
    let Some(root) = std::env::var_os("HAPT_DIR").map(PathBuf::from) else {
        let spec = SynthSpec::default();
        let (train, _) = synth_dataset(&spec, SYNTH_SEED).expect("synthetic data");
        let easy: BTreeSet<u16> = spec.static_ids().into_iter().collect();
        let dt_ds = make_dt_dataset(&train, &easy, FALLBACK_ID).expect("dt data");
        let feats = extract_all(&dt_ds.windows, Execution::Parallel);
        let dt = train_tree(&feats, 10, 0).expect("tree");
        let smallest = CnnSpec::new([2, 2, 2], [7, 7, 7], 2).expect("spec");
        let profile = McuProfile::default();
        let ratio = cnn_cost(&smallest, &profile).energy_j / tree_cost(&dt, &feats, &profile).expect("cost").energy_j;
        return Outcome::Skip(format!(
            "HAPT_DIR not set; cost ratio smallest CNN / synthetic DT = {ratio:.0} (need >= 100, {})",
            if ratio >= 100.0 { "ok" } else { "violated" }
        ));
    };
    let recs = match load_hapt(&root) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("cannot load HAPT from {}: {e}", root.display())),
    };
    let (train, test) = load_hapt_split(&recs, harcascade::data::WINDOW_LEN, None).expect("split");
    let profile = McuProfile::default();
    let out = run_pipeline(&train, &test, &HAPT_STATIC_IDS, &SweepConfig::default(), &profile, Execution::Parallel)
        .expect("pipeline");
    let easy = &out.decomposition.easy_ids;
    let expected: BTreeSet<u16> = [4, 6].into_iter().collect();
    let share = |ds: &LabeledDataset| ds.windows.iter().filter(|w| easy.contains(&w.label)).count() as f64 / ds.len() as f64;
    let (s_train, s_test) = (share(&train), share(&test));
    let cascade = &out.assembly.cascades[0];
    let dt_acc = evaluate_cascade(cascade, &test, &profile, Execution::Parallel).expect("eval").dt_stage_accuracy_on_easy;
    let points = &out.assembly.points;
    let best_adaptive = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Adaptive)).expect("adaptive");
    let best_static = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Static)).expect("static");
    let savings = points
        .iter()
        .filter(|p| p.kind == PointKind::Adaptive && p.accuracy >= best_static.accuracy)
        .map(|p| 1.0 - p.energy_j / best_static.energy_j)
        .fold(f64::NEG_INFINITY, f64::max);
    let smallest = CnnSpec::new([2, 2, 2], [7, 7, 7], 2).expect("spec");
    let test_feats = extract_all(&test.windows, Execution::Parallel);
    let ratio = cnn_cost(&smallest, &profile).energy_j / tree_cost(&cascade.dt, &test_feats, &profile).expect("cost").energy_j;
    let ok = *easy == expected
        && (s_train - 0.30).abs() <= 0.05
        && (s_test - 0.30).abs() <= 0.05
        && dt_acc >= 0.85
        && best_adaptive.accuracy >= 0.80
        && savings >= 0.30
        && ratio >= 100.0;
    verdict(
        ok,
        format!(
            "easy {easy:?}; easy share train {s_train:.3} test {s_test:.3}; DT easy-task acc {dt_acc:.3}; \
             best adaptive acc {:.3}; best static acc {:.3}; iso-accuracy savings {:.1}%; DT/CNN ratio {ratio:.0}",
            best_adaptive.accuracy,
            best_static.accuracy,
            savings * 100.0
        ),
    )
}
