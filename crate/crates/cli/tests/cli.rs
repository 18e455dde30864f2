use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use libu::model::{Checkpoint, Model, ModelConfig};
use tempfile::TempDir;

fn libu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_libu"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = libu(args);
    assert!(
        out.status.success(),
        "libu {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Failing run whose single stderr line carries the error kind.
fn fails(args: &[&str]) -> String {
    let out = libu(args);
    assert!(!out.status.success(), "libu {args:?} unexpectedly succeeded");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.trim_end().lines().count(), 1, "multi-line error: {err}");
    assert!(err.starts_with("error kind="), "{err}");
    err
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, seed: &str) {
    ok(&["gen-corpus", "--out", p(dir), "--seed", seed]);
}

#[test]
fn gen_corpus_writes_five_files_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "5");
    gen(&b, "5");
    for f in [
        "retain.jsonl",
        "forget.jsonl",
        "utility.jsonl",
        "mia_member.jsonl",
        "mia_nonmember.jsonl",
    ] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f} empty");
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(a.join("manifest.json").is_file());
}

#[test]
fn gen_corpus_guards() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("c");
    let err = fails(&["gen-corpus", "--out", p(&dir), "--forget-count", "0"]);
    assert!(err.contains("invalid_corpus_spec"), "{err}");
    gen(&dir, "1");
    let err = fails(&["gen-corpus", "--out", p(&dir)]);
    assert!(err.contains("--force"), "{err}");
    ok(&["gen-corpus", "--out", p(&dir), "--force"]);
}

#[test]
fn memorize_zero_epochs_is_initialization() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("m");
    gen(&data, "2");
    ok(&[
        "memorize",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--epochs",
        "0",
        "--seed",
        "9",
    ]);
    let ckpt = Checkpoint::load(&out.join("model.ckpt")).unwrap();
    let mut config = ModelConfig::desk(ckpt.vocabulary.as_ref().unwrap().len());
    config.seed = 9;
    assert_eq!(ckpt.model, Model::build(config).unwrap());
}

#[test]
fn missing_dataset_names_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere");
    let err = fails(&["memorize", "--data", p(&missing), "--out", p(&tmp.path().join("o"))]);
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn unlearn_argument_guards() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let m = tmp.path().join("m");
    gen(&data, "3");
    ok(&["memorize", "--data", p(&data), "--out", p(&m), "--epochs", "0"]);
    let ckpt = m.join("model.ckpt");
    let u = tmp.path().join("u");
    let base = ["unlearn", "--data", p(&data), "--checkpoint", p(&ckpt), "--out", p(&u)];

    let mut args = base.to_vec();
    args.extend(["--algorithm", "npo"]);
    let err = fails(&args);
    assert!(err.contains("libu, ga, gd, kl"), "{err}");

    let cfg = tmp.path().join("override.cfg");
    fs::write(&cfg, "NUM_EPOCHS = 1\n").unwrap();
    let mut args = base.to_vec();
    args.extend(["--config", p(&cfg)]);
    let err = fails(&args);
    assert!(err.contains("--allow-override"), "{err}");
    args.push("--allow-override");
    ok(&args);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("u/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["unlearn"]["num_epochs"], 1);
    assert_eq!(manifest["config"]["unlearn"]["damping_factor"], 1e-3);
}

#[test]
fn eval_rejects_foreign_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, "1");
    ok(&[
        "gen-corpus",
        "--out",
        p(&b),
        "--seed",
        "1",
        "--retain-count",
        "8",
        "--forget-count",
        "8",
        "--mia-member-count",
        "8",
        "--mia-nonmember-count",
        "8",
        "--utility-count",
        "8",
    ]);
    let m = tmp.path().join("m");
    ok(&["memorize", "--data", p(&b), "--out", p(&m), "--epochs", "0"]);
    let err = fails(&[
        "eval",
        "--data",
        p(&a),
        "--checkpoint",
        p(&m.join("model.ckpt")),
        "--out",
        p(&tmp.path().join("e")),
    ]);
    assert!(err.contains("model_mismatch"), "{err}");
}

#[test]
fn compare_guards() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let err = fails(&["compare", p(&bad), p(&bad)]);
    assert!(err.contains("bad.json"), "{err}");
}

#[test]
fn full_pipeline_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let data = t.join("data");
    gen(&data, "0");
    ok(&["memorize", "--data", p(&data), "--out", p(&t.join("mem"))]);
    let mem_ckpt = t.join("mem/model.ckpt");
    for run in ["u1", "u2"] {
        ok(&[
            "unlearn",
            "--data",
            p(&data),
            "--checkpoint",
            p(&mem_ckpt),
            "--out",
            p(&t.join(run)),
        ]);
        let ckpt = t.join(run).join("model.ckpt");
        ok(&[
            "eval",
            "--data",
            p(&data),
            "--checkpoint",
            p(&ckpt),
            "--out",
            p(&t.join(format!("e{run}"))),
        ]);
    }
    let r1 = fs::read(t.join("eu1/report.json")).unwrap();
    assert_eq!(r1, fs::read(t.join("eu2/report.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    assert!(report["formula"].as_str().unwrap().contains("harmonic_mean"));

    ok(&[
        "eval",
        "--data",
        p(&data),
        "--checkpoint",
        p(&mem_ckpt),
        "--out",
        p(&t.join("emem")),
    ]);
    let mem: serde_json::Value = serde_json::from_slice(&fs::read(t.join("emem/report.json")).unwrap()).unwrap();
    assert!(mem["forget_regurgitation"].as_f64().unwrap() < 0.05);
    assert!(mem["retain_exact_match"].as_f64().unwrap() > 0.95);

    let out = ok(&[
        "compare",
        p(&t.join("emem/report.json")),
        p(&t.join("eu1/report.json")),
        "--out",
        p(&t.join("cmp")),
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 4, "{table}");
    assert!(table.contains('*'));

    let mut other: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    other["schema_version"] = 99.into();
    let v99 = t.join("v99.json");
    fs::write(&v99, serde_json::to_string(&other).unwrap()).unwrap();
    let err = fails(&["compare", p(&t.join("eu1/report.json")), p(&v99)]);
    assert!(err.contains("schema"), "{err}");
}
