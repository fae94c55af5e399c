use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use harcascade::cascade::{evaluate_cascade, evaluate_static, write_metrics_csv, CascadeModel, CascadeMetrics};
use harcascade::cnn::{CnnModel, CnnSpec, TrainLog};
use harcascade::cost::{cnn_cost, count_macs_cnn, cnn_memory_bytes, tree_cost, write_reports_csv};
use harcascade::data::{
    extract_all, load_hapt, load_hapt_split, oversample_classes, read_split_file, synth_dataset, LabeledDataset,
    WINDOW_LEN, HAPT_STATIC_IDS,
};
use harcascade::exec::Execution;
use harcascade::search::{
    self, assemble, best_by_accuracy, pareto_front, run_forest_baseline, split_validation, sweep_cnns, write_plot_csv,
    write_sweep_csv, CostAxis, ParetoPoint, PointKind, SweepEntry, SweepTarget,
};
use harcascade::trees::TreeModel;

use crate::artifacts::{read_artifact, read_dataset, write_artifact, write_bytes, write_dataset, write_text, DatasetMeta, Layout};
use crate::config::{DataSource, RunConfig, CONFIG_FILE};

pub struct Ctx {
    pub cfg: RunConfig,
    pub hash: String,
    pub layout: Layout,
    pub exec: Execution,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: &Path, exec: Execution) -> Result<Self> {
        cfg.validate()?;
        Ok(Ctx { hash: cfg.hash(), cfg, layout: Layout::new(out), exec })
    }

    fn seed(&self) -> u64 {
        self.cfg.seed()
    }

    fn write<T: Serialize>(&self, name: &Path, body: T) -> Result<()> {
        write_artifact(name, &self.hash, self.seed(), body)
    }

    fn read<T: for<'de> Deserialize<'de>>(&self, name: &Path) -> Result<T> {
        read_artifact(name, &self.hash)
    }

    fn train(&self) -> Result<(LabeledDataset, DatasetMeta)> {
        read_dataset(&self.layout.train_cache(), &self.hash)
    }

    fn test(&self) -> Result<LabeledDataset> {
        Ok(read_dataset(&self.layout.test_cache(), &self.hash)?.0)
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> harcascade::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

// ------------------------------------------------------------------ prepare

pub fn prepare(ctx: &Ctx) -> Result<()> {
    let seed = ctx.seed();
    let (train, test, meta) = match &ctx.cfg.data {
        DataSource::Synth { preset, train_count, test_count } => {
            let spec = DataSource::synth_spec(preset, *train_count, *test_count)?;
            let (train, test) = synth_dataset(&spec, seed)?;
            (train, test, DatasetMeta { source: format!("synth:{preset}"), static_ids: spec.static_ids() })
        }
        DataSource::Hapt { root, split } => {
            let recs = load_hapt(root)?;
            let subjects = split.as_deref().map(read_split_file).transpose()?;
            let (train, test) = load_hapt_split(&recs, WINDOW_LEN, subjects.as_ref())?;
            (train, test, DatasetMeta { source: format!("hapt:{}", root.display()), static_ids: HAPT_STATIC_IDS.to_vec() })
        }
    };
    write_text(&ctx.layout.path(CONFIG_FILE), &ctx.cfg.to_toml()?)?;
    write_dataset(&ctx.layout.train_cache(), &train, &ctx.hash, seed, &meta)?;
    write_dataset(&ctx.layout.test_cache(), &test, &ctx.hash, seed, &meta)?;

    let (tr, te) = (train.class_counts(), test.class_counts());
    let mut table = String::from("class_id,name,train_windows,test_windows\n");
    println!("{:>5}  {:<20} {:>7} {:>7}", "id", "class", "train", "test");
    for (id, name) in &train.class_names {
        let (a, b) = (tr.get(id).copied().unwrap_or(0), te.get(id).copied().unwrap_or(0));
        table.push_str(&format!("{id},{name},{a},{b}\n"));
        println!("{id:>5}  {name:<20} {a:>7} {b:>7}");
    }
    println!("{:>5}  {:<20} {:>7} {:>7}", "", "total", train.len(), test.len());
    write_text(&ctx.layout.path("class_counts.csv"), &table)?;
    println!("wrote {} (config {})", ctx.layout.root.display(), ctx.hash);
    Ok(())
}

// ------------------------------------------------------------------ decompose

#[derive(Serialize, Deserialize)]
pub struct DecompositionBody {
    pub easy_ids: Vec<u16>,
    pub full_task_depth: usize,
    pub trials: Vec<(usize, f64)>,
    pub per_class_f1: std::collections::BTreeMap<u16, f64>,
}

pub fn decompose(ctx: &Ctx) -> Result<()> {
    let (train, meta) = ctx.train()?;
    let d = search::decompose(&train, &meta.static_ids, &ctx.cfg.sweep, ctx.exec)?;
    println!("full-task tree depth {} (macro-F1 {:.4})", d.full_task_depth, d.full_task_scores.macro_f1);
    for (id, f1) in &d.full_task_scores.per_class_f1 {
        let mark = if d.easy_ids.contains(id) { "  easy" } else { "" };
        println!("  class {id:>3} {:<20} F1 {f1:.4}{mark}", train.class_names[id]);
    }
    ctx.write(
        &ctx.layout.path("decomposition.json"),
        DecompositionBody {
            easy_ids: d.easy_ids.iter().copied().collect(),
            full_task_depth: d.full_task_depth,
            trials: d.trials,
            per_class_f1: d.full_task_scores.per_class_f1,
        },
    )
}

fn easy_ids(ctx: &Ctx) -> Result<BTreeSet<u16>> {
    let d: DecompositionBody = ctx.read(&ctx.layout.path("decomposition.json"))?;
    Ok(d.easy_ids.into_iter().collect())
}

// ------------------------------------------------------------------ train-dt

#[derive(Serialize, Deserialize)]
pub struct DtBody {
    pub depth: usize,
    pub trials: Vec<(usize, f64)>,
    pub easy_ids: Vec<u16>,
    pub tree: TreeModel,
}

pub fn train_dt(ctx: &Ctx) -> Result<()> {
    let (train, _) = ctx.train()?;
    let easy = easy_ids(ctx)?;
    let g = search::train_final_dt(&train, &easy, &ctx.cfg.sweep, ctx.exec)?;
    println!(
        "easy-vs-fallback tree: depth {}, {} nodes, training macro-F1 {:.4}",
        g.best_depth,
        g.model.n_nodes(),
        g.scores.macro_f1
    );
    ctx.write(
        &ctx.layout.path("dt.json"),
        DtBody { depth: g.best_depth, trials: g.trials, easy_ids: easy.into_iter().collect(), tree: g.model },
    )
}

// ------------------------------------------------------------------ sweep-cnn

#[derive(Serialize, Deserialize)]
pub struct CnnBody {
    pub target: String,
    pub spec: CnnSpec,
    pub log: TrainLog,
    pub model: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
pub struct SweepManifest {
    pub hard: Vec<String>,
    #[serde(rename = "static")]
    pub statics: Vec<String>,
}

fn target_name(t: &SweepTarget) -> &'static str {
    match t {
        SweepTarget::Hard(_) => "hard",
        SweepTarget::AllClasses => "static",
    }
}

pub fn sweep_cnn(ctx: &Ctx, dry_run: bool, forest: bool) -> Result<()> {
    let (train, _) = ctx.train()?;
    let n_all = train.class_names.len();
    let input_len = train.windows.first().map_or(WINDOW_LEN, |w| w.len());
    if dry_run {
        let n_hard = match easy_ids(ctx) {
            Ok(e) => n_all - e.len(),
            Err(_) => n_all.saturating_sub(ctx.cfg.sweep.m_easy),
        };
        println!("{:<8} {:<26} {:>12} {:>9} {:>10}", "target", "config", "MACs", "params", "memory_kB");
        for (target, n) in [("hard", n_hard), ("static", n_all)] {
            for spec in ctx.cfg.sweep.specs(n, input_len)? {
                println!(
                    "{target:<8} {:<26} {:>12} {:>9} {:>10.1}",
                    spec.config_id(),
                    count_macs_cnn(&spec).total(),
                    spec.n_params(),
                    cnn_memory_bytes(&spec) as f64 / 1000.0
                );
            }
        }
        if forest {
            let s = &ctx.cfg.sweep;
            let n = s.forest_trees_max * (s.forest_depth_max - s.forest_depth_min + 1);
            println!("forest   {n} grid points ({} tree counts x depths {}..={})", s.forest_trees_max, s.forest_depth_min, s.forest_depth_max);
        }
        return Ok(());
    }

    let easy = easy_ids(ctx)?;
    let (fit, valid) = split_validation(&train, &ctx.cfg.sweep)?;
    let mut manifest = SweepManifest { hard: Vec::new(), statics: Vec::new() };
    for target in [SweepTarget::Hard(easy.clone()), SweepTarget::AllClasses] {
        let name = target_name(&target);
        let entries = sweep_cnns(&fit, &valid, &target, &ctx.cfg.sweep, ctx.exec)?;
        for e in entries {
            let id = e.spec.config_id();
            println!("{name:<7} {id:<26} valid accuracy {:.4} (epoch {})", e.model.valid_accuracy, e.model.best_epoch);
            ctx.write(
                &ctx.layout.cnn(name, &id),
                CnnBody { target: name.into(), spec: e.spec, log: e.log, model: e.model.to_value()? },
            )?;
            match target {
                SweepTarget::Hard(_) => manifest.hard.push(id),
                SweepTarget::AllClasses => manifest.statics.push(id),
            }
        }
    }
    ctx.write(&ctx.layout.path("sweep_manifest.json"), manifest)?;

    if forest {
        let test = ctx.test()?;
        let points = run_forest_baseline(&train, &test, &ctx.cfg.sweep, &ctx.cfg.profile, ctx.exec)?;
        let best = best_by_accuracy(&points).context("empty forest grid")?;
        println!("forest baseline: {} points, best {} accuracy {:.4}", points.len(), best.config_id, best.accuracy);
        write_bytes(&ctx.layout.path("forest.csv"), &csv_bytes(|b| write_sweep_csv(b, &points))?)?;
        ctx.write(&ctx.layout.path("forest_points.json"), points)?;
    }
    Ok(())
}

fn load_entries(ctx: &Ctx, target: &str, ids: &[String]) -> Result<Vec<SweepEntry>> {
    ids.iter()
        .map(|id| {
            let body: CnnBody = ctx.read(&ctx.layout.cnn(target, id))?;
            Ok(SweepEntry { spec: body.spec, model: CnnModel::from_value(body.model)?, log: body.log })
        })
        .collect()
}

// ------------------------------------------------------------------ build-cascade

#[derive(Serialize, Deserialize)]
pub struct CascadeBody {
    pub config_id: String,
    pub valid_accuracy: Option<f64>,
    pub model: serde_json::Value,
}

pub fn build_cascade(ctx: &Ctx) -> Result<()> {
    let (train, _) = ctx.train()?;
    let test = ctx.test()?;
    let dt: DtBody = ctx.read(&ctx.layout.path("dt.json"))?;
    let manifest: SweepManifest = ctx.read(&ctx.layout.path("sweep_manifest.json"))?;
    let hard = load_entries(ctx, "hard", &manifest.hard)?;
    let statics = load_entries(ctx, "static", &manifest.statics)?;
    let easy: BTreeSet<u16> = dt.easy_ids.iter().copied().collect();
    let (_, valid) = split_validation(&train, &ctx.cfg.sweep)?;
    let profile = &ctx.cfg.profile;
    let assembly = assemble(&dt.tree, &easy, &hard, &statics, &valid, &test, profile, ctx.exec)?;

    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (cascade, point)) in assembly.cascades.iter().zip(&assembly.points).enumerate() {
        let body = CascadeBody {
            config_id: point.config_id.clone(),
            valid_accuracy: point.valid_accuracy,
            model: serde_json::from_str(&cascade.to_json()?)?,
        };
        ctx.write(&ctx.layout.cascade(&point.config_id), body)?;
        let v = point.valid_accuracy.unwrap_or(0.0);
        if best.is_none_or(|(_, bv, be)| v > bv || (v == bv && point.energy_j < be)) {
            best = Some((i, v, point.energy_j));
        }
    }
    let (bi, _, _) = best.context("no cascade assembled")?;
    let best_point = &assembly.points[bi];
    std::fs::copy(ctx.layout.cascade(&best_point.config_id), ctx.layout.path("best_cascade.json"))
        .context("copying best cascade")?;

    let test_f = extract_all(&test.windows, ctx.exec);
    let mut reports = vec![("dt".to_string(), tree_cost(&dt.tree, &test_f, profile)?)];
    for e in &hard {
        reports.push((format!("hard_{}", e.spec.config_id()), cnn_cost(&e.spec, profile)));
    }
    for e in &statics {
        reports.push((format!("static_{}", e.spec.config_id()), cnn_cost(&e.spec, profile)));
    }
    write_bytes(&ctx.layout.path("costs.csv"), &csv_bytes(|b| write_reports_csv(b, &reports))?)?;
    write_bytes(&ctx.layout.path("sweep.csv"), &csv_bytes(|b| write_sweep_csv(b, &assembly.points))?)?;
    ctx.write(&ctx.layout.path("points.json"), &assembly.points)?;
    print_points(&assembly.points);
    println!("best cascade (validation): {}", best_point.config_id);
    Ok(())
}

fn print_points(points: &[ParetoPoint]) {
    println!("{:<9} {:<26} {:>8} {:>10} {:>10} {:>10}", "kind", "config", "accuracy", "p_fallback", "energy_uJ", "memory_kB");
    for p in points {
        println!(
            "{:<9} {:<26} {:>8.4} {:>10} {:>10.3} {:>10.1}",
            p.kind.as_str(),
            p.config_id,
            p.accuracy,
            p.p_fallback.map_or("-".to_string(), |v| format!("{v:.4}")),
            p.energy_j * 1e6,
            p.memory_bytes as f64 / 1000.0
        );
    }
}

// ------------------------------------------------------------------ evaluate

fn load_cascade(ctx: &Ctx, path: &Path) -> Result<CascadeModel> {
    let body: CascadeBody = ctx.read(path)?;
    Ok(CascadeModel::from_json(&body.model.to_string())?)
}

pub fn evaluate(ctx: &Ctx, cascade: Option<PathBuf>, oversample: &[usize]) -> Result<()> {
    let test = ctx.test()?;
    let path = cascade.unwrap_or_else(|| ctx.layout.path("best_cascade.json"));
    let model = load_cascade(ctx, &path)?;
    let profile = &ctx.cfg.profile;
    let mut rows: Vec<(String, CascadeMetrics)> = Vec::new();

    if let Ok(manifest) = ctx.read::<SweepManifest>(&ctx.layout.path("sweep_manifest.json")) {
        let statics = load_entries(ctx, "static", &manifest.statics)?;
        let best = statics.iter().min_by(|a, b| {
            b.model
                .valid_accuracy
                .total_cmp(&a.model.valid_accuracy)
                .then(cnn_cost(&a.spec, profile).energy_j.total_cmp(&cnn_cost(&b.spec, profile).energy_j))
        });
        if let Some(e) = best {
            rows.push((format!("static_{}", e.spec.config_id()), evaluate_static(&e.model, &test, profile, ctx.exec)?));
        }
    }
    rows.push(("adaptive".into(), evaluate_cascade(&model, &test, profile, ctx.exec)?));
    for &k in oversample {
        if k < 1 {
            bail!("--oversample factor must be at least 1");
        }
        let ds = oversample_classes(&test, &model.easy_ids, k)?;
        rows.push((format!("adaptive_oversample_x{k}"), evaluate_cascade(&model, &ds, profile, ctx.exec)?));
    }
    println!("{:<34} {:>7} {:>8} {:>10} {:>10} {:>10}", "mode", "n", "accuracy", "p_fallback", "energy_uJ", "memory_kB");
    for (name, m) in &rows {
        println!(
            "{name:<34} {:>7} {:>8.4} {:>10.4} {:>10.3} {:>10.1}",
            m.n,
            m.accuracy,
            m.p_fallback,
            m.avg_energy_j * 1e6,
            m.memory_bytes as f64 / 1000.0
        );
    }
    write_bytes(&ctx.layout.path("metrics.csv"), &csv_bytes(|b| write_metrics_csv(b, &rows))?)?;
    ctx.write(&ctx.layout.path("metrics.json"), &rows)
}

// ------------------------------------------------------------------ report

pub fn report(ctx: &Ctx) -> Result<()> {
    let mut points: Vec<ParetoPoint> = ctx.read(&ctx.layout.path("points.json"))?;
    let forest_path = ctx.layout.path("forest_points.json");
    if forest_path.exists() {
        points.extend(ctx.read::<Vec<ParetoPoint>>(&forest_path)?);
    }
    search::sort_points(&mut points);
    for (axis, name) in [(CostAxis::Energy, "plot_energy.csv"), (CostAxis::Memory, "plot_memory.csv")] {
        write_bytes(&ctx.layout.path(name), &csv_bytes(|b| write_plot_csv(b, &points, axis))?)?;
        let front = pareto_front(&points, axis)?;
        println!("{name}: {} points, {} on the front", points.len(), front.len());
        for p in front {
            let cost = match axis {
                CostAxis::Energy => format!("{:.3} uJ", p.energy_j * 1e6),
                CostAxis::Memory => format!("{:.1} kB", p.memory_bytes as f64 / 1000.0),
            };
            println!("  {:<9} {:<26} accuracy {:.4}  {cost}", p.kind.as_str(), p.config_id, p.accuracy);
        }
    }
    let adaptive = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Adaptive));
    let stat = best_by_accuracy(points.iter().filter(|p| p.kind == PointKind::Static));
    if let (Some(a), Some(s)) = (adaptive, stat) {
        println!(
            "best adaptive {} ({:.4}, {:.3} uJ) vs best static {} ({:.4}, {:.3} uJ)",
            a.config_id,
            a.accuracy,
            a.energy_j * 1e6,
            s.config_id,
            s.accuracy,
            s.energy_j * 1e6
        );
    }
    Ok(())
}
