use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harcascade::search::pareto_indices;

const TINY: &str = r#"
[data]
kind = "synth"
preset = "default"
train_count = 30
test_count = 10

[sweep]
channel_choices = [2, 4]
kernel_choices = [7]
dt_depth_max = 5
forest_trees_max = 2
forest_depth_max = 3

[sweep.train]
epochs = 4
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_harcascade"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = dir.join("out");
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(&out).current_dir(dir);
    cmd.output().expect("spawn harcascade")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn full_pipeline(dir: &Path) {
    ok(dir, &["prepare", "--config", "tiny.toml", "--seed", "7"]);
    ok(dir, &["decompose"]);
    ok(dir, &["train-dt"]);
    ok(dir, &["sweep-cnn", "--forest", "--jobs", "2"]);
    ok(dir, &["build-cascade"]);
    ok(dir, &["evaluate", "--oversample", "10"]);
    ok(dir, &["report"]);
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (a, b) = (workspace(), workspace());
    full_pipeline(a.path());
    full_pipeline(b.path());
    let (ra, rb) = (a.path().join("out"), b.path().join("out"));
    let fa = files_under(&ra);
    assert!(fa.len() > 15);
    for f in fa {
        let rel = f.strip_prefix(&ra).unwrap();
        if rel == Path::new("run.log") {
            continue;
        }
        assert_eq!(fs::read(&f).unwrap(), fs::read(rb.join(rel)).unwrap(), "{} differs", rel.display());
    }
}

#[test]
fn artifacts_carry_hash_and_seed() {
    let dir = workspace();
    full_pipeline(dir.path());
    let out = dir.path().join("out");
    let hashes: Vec<String> = ["decomposition.json", "dt.json", "points.json", "best_cascade.json", "metrics.json"]
        .iter()
        .map(|name| {
            let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join(name)).unwrap()).unwrap();
            assert_eq!(v["seed"], 7, "{name}");
            v["config_hash"].as_str().unwrap().to_string()
        })
        .collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    assert_eq!(log.lines().count(), 7);
}

#[test]
fn plot_flags_match_the_front() {
    let dir = workspace();
    full_pipeline(dir.path());
    let out = dir.path().join("out");
    for (file, col) in [("plot_energy.csv", "energy_uj"), ("plot_memory.csv", "memory_kb")] {
        let rows = read_csv(&out.join(file));
        let pts: Vec<(f64, f64)> =
            rows.iter().map(|r| (r["accuracy"].parse().unwrap(), r[col].parse().unwrap())).collect();
        let mut expected = vec!["0"; rows.len()];
        for i in pareto_indices(&pts).unwrap() {
            expected[i] = "1";
        }
        let got: Vec<&str> = rows.iter().map(|r| r["on_pareto_front"].as_str()).collect();
        assert_eq!(got, expected, "{file}");
        assert!(rows.iter().any(|r| r["kind"] == "forest"));
    }
    let sweep = read_csv(&out.join("sweep.csv"));
    assert!(sweep.iter().any(|r| r["kind"] == "adaptive") && sweep.iter().any(|r| r["kind"] == "static"));
}

#[test]
fn oversampling_lowers_energy_and_keeps_accuracy() {
    let dir = workspace();
    full_pipeline(dir.path());
    let rows = read_csv(&dir.path().join("out/metrics.csv"));
    let find = |mode: &str| rows.iter().find(|r| r["mode"] == mode).unwrap();
    let (base, x10) = (find("adaptive"), find("adaptive_oversample_x10"));
    let f = |r: &BTreeMap<String, String>, k: &str| r[k].parse::<f64>().unwrap();
    assert!(f(x10, "energy_uj") < f(base, "energy_uj"));
    assert!(f(x10, "p_fallback") < f(base, "p_fallback"));
    assert!(f(x10, "accuracy") >= f(base, "accuracy"));
    assert!(rows.iter().any(|r| r["mode"].starts_with("static_")));
}

#[test]
fn dry_run_trains_nothing() {
    let dir = workspace();
    ok(dir.path(), &["prepare", "--config", "tiny.toml"]);
    let stdout = ok(dir.path(), &["sweep-cnn", "--dry-run"]);
    assert!(stdout.contains("c2-2-2_k7-7-7") && stdout.contains("c4-4-4_k7-7-7"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("hard") || l.starts_with("static")).count(), 4);
    assert!(!dir.path().join("out/cnn").exists());
    assert!(!dir.path().join("out/sweep_manifest.json").exists());
}

#[test]
fn missing_hapt_labels_names_the_path() {
    let dir = workspace();
    let raw = dir.path().join("HAPT/RawData");
    fs::create_dir_all(&raw).unwrap();
    let o = run(dir.path(), &["prepare", "--hapt", raw.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("labels.txt"), "{err}");
}

#[test]
fn missing_upstream_artifact_fails() {
    let dir = workspace();
    ok(dir.path(), &["prepare", "--config", "tiny.toml"]);
    let o = run(dir.path(), &["train-dt"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("decomposition.json"));
}

#[test]
fn changed_config_is_a_hash_mismatch() {
    let dir = workspace();
    ok(dir.path(), &["prepare", "--config", "tiny.toml", "--seed", "7"]);
    let o = run(dir.path(), &["decompose", "--seed", "8"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config hash mismatch"));
}

#[test]
fn prepare_is_deterministic() {
    let (a, b) = (workspace(), workspace());
    let table = ok(a.path(), &["prepare", "--config", "tiny.toml", "--synth", "default", "--seed", "7"]);
    ok(b.path(), &["prepare", "--config", "tiny.toml", "--synth", "default", "--seed", "7"]);
    assert!(table.contains("SITTING") && table.contains("total"));
    for f in ["train.cache", "test.cache", "class_counts.csv", "config.toml"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap());
    }
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = workspace();
    let o = run(dir.path(), &["prepare", "--synth", "nonsense"]);
    assert!(!o.status.success());
}
