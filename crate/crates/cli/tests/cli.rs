use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hiergrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiergrasp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = hiergrasp(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn gen(dir: &Path, seed: &str) {
    ok(&[
        "gen-dataset",
        "--instances",
        "2",
        "--records",
        "3",
        "--clutter",
        "2",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ]);
}

#[test]
fn pipeline_from_generation_to_preshape() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let models = tmp.path().join("models");
    let out = tmp.path().join("out");
    gen(&ds, "3");
    let manifest = fs::read_to_string(ds.join("dataset.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 2 * 2 * 3 + 2);

    let (d, m, o) = (ds.to_str().unwrap(), models.to_str().unwrap(), out.to_str().unwrap());
    ok(&["train", "--data", d, "--out", m]);
    assert!(models.join("cuboid-hier-feat.model").exists());
    assert!(models.join("cylinder-hier-feat.model").exists());

    let cv = ok(&["cross-validate", "--data", d, "--out", o]);
    assert!(cv.contains("cuboid") && cv.contains("cylinder"));
    let csv = fs::read_to_string(out.join("cv-hier-feat.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);

    let clutter = ok(&["eval-clutter", "--data", d, "--models", m, "--out", o]);
    assert!(clutter.contains("hier-feat"));
    assert_eq!(fs::read_to_string(out.join("clutter.csv")).unwrap().lines().count(), 1 + 2);

    let model = models.join("cuboid-hier-feat.model");
    let mp = model.to_str().unwrap();
    ok(&["overlay", "--data", d, "--model", mp, "--record", "cuboid-00-r01", "--out", o]);
    let first = fs::read(out.join("cuboid-00-r01-overlay.ppm")).unwrap();
    assert!(first.starts_with(b"P6"));
    ok(&["overlay", "--data", d, "--model", mp, "--record", "cuboid-00-r01", "--out", o]);
    assert_eq!(first, fs::read(out.join("cuboid-00-r01-overlay.ppm")).unwrap());

    let run = ok(&["run-preshape", "--data", d, "--model", mp, "--record", "cuboid-00-r01", "--out", o]);
    assert!(run.contains("final error"), "{run}");
    let log = fs::read_to_string(out.join("cuboid-00-r01-preshape.csv")).unwrap();
    assert!(log.starts_with("stage,iteration,phi"));
    assert!(log.lines().any(|l| l.starts_with("hand,")));
}

#[test]
fn generation_is_deterministic_in_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    gen(&a, "11");
    gen(&b, "11");
    gen(&c, "12");
    let rec = "cylinder-01-r02";
    for f in ["annotation.txt", "image.ppm", "cloud.bin"] {
        assert_eq!(fs::read(a.join(rec).join(f)).unwrap(), fs::read(b.join(rec).join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join(rec).join("image.ppm")).unwrap(), fs::read(c.join(rec).join("image.ppm")).unwrap());
}

#[test]
fn bad_params_exit_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hiergrasp(&["train", "--data", "x", "--params", "5,5,0,15", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_with_the_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("none");
    let o = hiergrasp(&["train", "--data", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dataset.txt"));
}

#[test]
fn unknown_record_and_strategy_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    gen(&ds, "5");
    let d = ds.to_str().unwrap();
    let o = hiergrasp(&["cross-validate", "--data", d, "--strategy", "bogus", "--out", tmp.path().to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    let model = tmp.path().join("m");
    ok(&["train", "--data", d, "--out", model.to_str().unwrap()]);
    let mp = model.join("cuboid-hier-feat.model");
    let o = hiergrasp(&["overlay", "--data", d, "--model", mp.to_str().unwrap(), "--record", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
