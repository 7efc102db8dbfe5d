use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sdc_core::config::RunConfig;

fn sdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdc")).args(args).output().expect("spawn sdc")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path, train: usize, test: usize) -> std::path::PathBuf {
    let mut cfg = RunConfig::toy();
    cfg.synth.train.n_images = train;
    cfg.synth.test.n_images = test;
    cfg.train.max_iterations = Some(6);
    let path = dir.join("run.json");
    cfg.save(&path).unwrap();
    path
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["train", "test"] {
        let mut names: Vec<_> = fs::read_dir(dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    out.push(("manifest.json".into(), fs::read(dir.join("manifest.json")).unwrap()));
    out
}

#[test]
fn synth_writes_the_toy_dataset_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(sdc(&["synth", "--out", arg(&a)]).status.success());
    assert!(sdc(&["synth", "--out", arg(&b)]).status.success());
    let first = read_dir_sorted(&a);
    // one image and one point file per sample, plus the manifest
    assert_eq!(first.len(), 2 * (500 + 500) + 1);
    assert!(first == read_dir_sorted(&b), "two synth runs differ");
}

#[test]
fn synth_seed_changes_the_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 3, 2);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(sdc(&["synth", "--config", arg(&cfg), "--out", arg(&a), "--seed", "1"]).status.success());
    assert!(sdc(&["synth", "--config", arg(&cfg), "--out", arg(&b), "--seed", "2"]).status.success());
    assert_ne!(fs::read(a.join("train/img_00000.pgm")).unwrap(), fs::read(b.join("train/img_00000.pgm")).unwrap());
}

#[test]
fn usage_errors_exit_with_two() {
    let out = sdc(&["synth"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let out = sdc(&["train", "--variant", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["sdcnet", "classification", "regression", "regression_sdc_open", "regression_sdc_closed"] {
        assert!(err.contains(name), "variant list missing {name}: {err}");
    }

    let out = sdc(&["eval", "--data", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(2), "eval needs --checkpoint or --oracle");

    let out = sdc(&["train", "--data", "x"]);
    assert_eq!(out.status.code(), Some(2), "train needs --out");
}

#[test]
fn runtime_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    let out = sdc(&["train", "--data", arg(&missing), "--out", arg(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"nmae": "x"}"#).unwrap();
    let out = sdc(&["synth", "--config", arg(&bad), "--out", arg(&tmp.path().join("d"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_then_eval_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 4, 3);
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    assert!(sdc(&["synth", "--config", arg(&cfg), "--out", arg(&data)]).status.success());
    let out = sdc(&[
        "train", "--config", arg(&cfg), "--data", arg(&data), "--out", arg(&model), "--variant", "sdcnet",
        "--stages", "1", "--deterministic",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.ckpt", "train_log.csv", "config.json"] {
        assert!(model.join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(model.join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,iterations,loss,lr\n"));
    let echoed = RunConfig::load(model.join("config.json")).unwrap();
    assert_eq!(echoed.train.variant.stages(), 1);

    let report = tmp.path().join("report");
    let ckpt = model.join("model.ckpt");
    let out = sdc(&[
        "eval", "--config", arg(&cfg), "--data", arg(&data), "--out", arg(&report), "--checkpoint", arg(&ckpt),
        "--game", "2", "--dump-masks",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(report.join("summary.csv")).unwrap();
    for key in ["mae,", "mse,", "game0,", "game1,", "game2,"] {
        assert!(summary.contains(key), "summary lacks {key}: {summary}");
    }
    assert!(!summary.contains("game3"));
    let bins = fs::read_to_string(report.join("bins.csv")).unwrap();
    assert!(bins.starts_with("bin_low,bin_high,n,mae,rmae\n"));
    let images = fs::read_to_string(report.join("images.csv")).unwrap();
    assert_eq!(images.lines().count(), 1 + 3);
    // one mask per test image and division stage
    let masks = fs::read_dir(report.join("masks")).unwrap().count();
    assert_eq!(masks, 3);
    assert!(report.join("config.json").is_file());
}

#[test]
fn oracle_eval_has_zero_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), 1, 5);
    let data = tmp.path().join("data");
    assert!(sdc(&["synth", "--config", arg(&cfg), "--out", arg(&data)]).status.success());
    let report = tmp.path().join("report");
    let out = sdc(&["eval", "--config", arg(&cfg), "--data", arg(&data), "--out", arg(&report), "--oracle", "--game", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(report.join("summary.csv")).unwrap();
    let mut keys = Vec::new();
    for line in summary.lines().skip(1) {
        let (k, v) = line.split_once(',').unwrap();
        let v: f64 = v.parse().unwrap();
        assert!(v.abs() < 1e-9, "{k} = {v}");
        keys.push(k.to_string());
    }
    assert_eq!(keys, ["mae", "mse", "game0", "game1", "game2", "game3"]);
}
