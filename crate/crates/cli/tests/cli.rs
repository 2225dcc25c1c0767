use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn brie(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brie")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = brie(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

const SMALL: [&str; 6] = ["--users", "40", "--items", "10", "--photos", "800"];

fn synth_small(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec!["--seed", "7", "synth", "--out", data.to_str().unwrap()];
    args.extend(SMALL);
    ok(&args);
    data
}

fn file_args(data: &Path) -> Vec<String> {
    ["triads", "features", "split"]
        .iter()
        .zip(["triads.tsv", "features.bin", "split.tsv"])
        .flat_map(|(flag, f)| [format!("--{flag}"), path(data, f)])
        .collect()
}

fn json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_small(&dir.path().join("a"));
    let b = synth_small(&dir.path().join("b"));
    for f in ["triads.tsv", "features.bin", "split.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = json(a.join("manifest.json"));
    assert_eq!(m["resolved"]["spec"]["n_photos"], 800);
    assert_eq!(m["global"]["seed"], 7);
}

#[test]
fn synth_rejects_bad_dims() {
    let dir = tempfile::tempdir().unwrap();
    let out = brie(&["synth", "--true-dim", "64", "--feature-dim", "32", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error[config]:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn train_defaults_for_brie() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let out = path(dir.path(), "brie");
    let mut args: Vec<String> = vec!["train".into(), "--model".into(), "brie".into(), "--out".into(), out.clone()];
    args.extend(file_args(&data));
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let m = json(Path::new(&out).join("manifest.json"));
    let r = &m["resolved"];
    assert_eq!(r["model"]["d"], 64);
    assert_eq!(r["model"]["dropout"], 0.75);
    assert_eq!(r["train"]["lr"], 1e-3);
    assert_eq!(r["train"]["max_epochs"], 15);
    assert_eq!(r["train"]["batch_size"], 16384);
    assert_eq!(r["train"]["loss"], "bpr");
    let log = std::fs::read_to_string(Path::new(&out).join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 15);
    assert!(Path::new(&out).join("model.bin").exists());
}

#[test]
fn loss_model_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = brie(&["train", "--model", "mf-elvis", "--loss", "bpr", "--synthetic", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error[config]:"));
}

#[test]
fn exactly_one_data_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = brie(&["eval", "--model", "rnd", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error[config]:"));
}

#[test]
fn dropout_ablation_orders_losses() {
    let dir = tempfile::tempdir().unwrap();
    let final_loss = |p: f32| {
        let out = path(dir.path(), &format!("drop{p}"));
        ok(&["--seed", "7", "train", "--model", "brie", "--synthetic", "--dropout", &p.to_string(), "--out", &out]);
        let log = std::fs::read_to_string(Path::new(&out).join("train_log.jsonl")).unwrap();
        let last: Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
        assert_eq!(last["epoch"], 14);
        last["train_loss"].as_f64().unwrap()
    };
    let (plain, heavy) = (final_loss(0.0), final_loss(0.75));
    assert!(plain < heavy, "{plain} vs {heavy}");
}

#[test]
fn random_baseline_null_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "rnd");
    ok(&["--seed", "1", "eval", "--model", "rnd", "--synthetic", "--photos", "12000", "--out", &out]);
    let r = json(Path::new(&out).join("report.json"));
    let mauc = r["report"]["mauc"].as_f64().unwrap();
    assert!(r["report"]["total_cases"].as_u64().unwrap() >= 2000);
    assert!((0.48..=0.52).contains(&mauc), "{mauc}");
}

#[test]
fn eval_is_deterministic_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let model = path(dir.path(), "m");
    let mut args: Vec<String> = ["train", "--model", "elvis", "--d", "8", "--epochs", "2", "--out", &model]
        .map(String::from)
        .to_vec();
    args.extend(file_args(&data));
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let artifact = path(Path::new(&model), "model.bin");
    let run = |name: &str| {
        let out = path(dir.path(), name);
        let mut args: Vec<String> = ["eval", "--artifact", &artifact, "--sweep", "0,10,20", "--dump-cases", "--out", &out]
            .map(String::from)
            .to_vec();
        args.extend(file_args(&data));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        PathBuf::from(out)
    };
    let (a, b) = (run("e1"), run("e2"));
    for f in ["report.json", "report.tsv", "sweep.tsv", "cases.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let sweep = std::fs::read_to_string(a.join("sweep.tsv")).unwrap();
    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split('\t').count() == 3));

    // the artifact holds an elvis model
    let out = brie(&["eval", "--model", "brie", "--artifact", &artifact, "--synthetic", "--out", &path(dir.path(), "x")]);
    assert!(!out.status.success());
}

#[test]
fn artifact_corpus_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let model = path(dir.path(), "m");
    let mut args: Vec<String> = ["train", "--model", "brie", "--d", "4", "--epochs", "1", "--out", &model]
        .map(String::from)
        .to_vec();
    args.extend(file_args(&data));
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    // trained on 40 users, evaluated on the 400-user default corpus
    let out = brie(&["eval", "--artifact", &path(Path::new(&model), "model.bin"), "--synthetic", "--out", &path(dir.path(), "x")]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error["), "{}", stderr(&out));
}

#[test]
fn benchmark_shape_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "bench");
    let mut args = vec!["--seed", "7", "benchmark", "--models", "brie,mf-elvis,cnt,rnd", "--synthetic", "--d", "8", "--epochs", "3", "--out", &out];
    args.extend(SMALL);
    ok(&args);
    let tsv = std::fs::read_to_string(Path::new(&out).join("benchmark.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 5);
    let width = lines[0].split('\t').count();
    assert!(lines.iter().all(|l| l.split('\t').count() == width));
    let models: Vec<&str> = lines[1..].iter().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(models, ["brie", "mf-elvis", "cnt", "rnd"]);

    let traces: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.file_name().into_string().unwrap()))
        .filter(|n| n.starts_with("trace_"))
        .collect();
    assert_eq!(traces.len(), 2);
    for t in traces {
        let text = std::fs::read_to_string(Path::new(&out).join(t)).unwrap();
        let times: Vec<f64> = text.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(times.len(), 3);
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn single_worker_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let run = |name: &str| {
        let out = path(dir.path(), name);
        let mut args: Vec<String> = ["--workers", "1", "--seed", "5", "train", "--model", "brie", "--d", "8", "--epochs", "4", "--batch-size", "256", "--out", &out]
            .map(String::from)
            .to_vec();
        args.extend(file_args(&data));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let eval_out = format!("{out}/eval");
        let mut args: Vec<String> = ["--workers", "1", "eval", "--artifact", &format!("{out}/model.bin"), "--out", &eval_out]
            .map(String::from)
            .to_vec();
        args.extend(file_args(&data));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        PathBuf::from(out)
    };
    let (a, b) = (run("r1"), run("r2"));
    assert_eq!(std::fs::read(a.join("model.bin")).unwrap(), std::fs::read(b.join("model.bin")).unwrap());
    for f in ["report.json", "report.tsv"] {
        assert_eq!(std::fs::read(a.join("eval").join(f)).unwrap(), std::fs::read(b.join("eval").join(f)).unwrap());
    }
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_small(dir.path());
    let out = path(dir.path(), "orig");
    let mut args: Vec<String> = ["--seed", "9", "train", "--model", "mf-elvis", "--d", "6", "--epochs", "2", "--out", &out]
        .map(String::from)
        .to_vec();
    args.extend(file_args(&data));
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let again = path(dir.path(), "again");
    ok(&["replay", &path(Path::new(&out), "manifest.json"), "--out", &again]);
    assert_eq!(
        std::fs::read(Path::new(&out).join("model.bin")).unwrap(),
        std::fs::read(Path::new(&again).join("model.bin")).unwrap()
    );
    let (m1, m2) = (json(Path::new(&out).join("manifest.json")), json(Path::new(&again).join("manifest.json")));
    assert_eq!(m1["resolved"], m2["resolved"]);
}
