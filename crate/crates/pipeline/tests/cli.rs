mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{read_tree, tiny_config, write_config};

fn kdloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdloc")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kdloc(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    kdloc(dir, args).status.code().unwrap()
}

/// Every subcommand in sequence, with paths relative to `dir`.
fn full_run(dir: &Path) {
    write_config(&dir.join("config.json"), &tiny_config());
    let c = ["--config", "config.json"];
    let with = |rest: &[&'static str]| -> Vec<&str> { c.iter().copied().chain(rest.iter().copied()).collect() };
    ok(dir, &with(&["gen-data", "--seed", "5", "--train", "40", "--test", "20", "--out", "data"]));
    ok(dir, &with(&["train-teacher", "--dataset", "data", "--out", "t"]));
    ok(dir, &with(&["train-student", "--teacher", "t/teacher.ckpt", "--dataset", "data", "--out", "s"]));
    let loc = ok(dir, &with(&["localize", "--checkpoint", "s/student.ckpt", "--dataset", "data", "--out", "ls"]));
    assert!(loc.starts_with("miou "));
    ok(dir, &with(&["evaluate", "--checkpoint", "t/teacher.ckpt", "--dataset", "data", "--out", "et"]));
    ok(
        dir,
        &with(&[
            "hessian-report",
            "--checkpoint",
            "t/teacher.ckpt",
            "--checkpoint",
            "s/student.ckpt",
            "--dataset",
            "data",
            "--out",
            "h",
        ]),
    );
    ok(
        dir,
        &with(&[
            "hessian-report",
            "--checkpoint",
            "s/student.ckpt",
            "--loss",
            "kd",
            "--teacher",
            "t/teacher.ckpt",
            "--dataset",
            "data",
            "--out",
            "hk",
        ]),
    );
}

#[test]
fn every_subcommand_runs_and_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(a.path());
    full_run(b.path());

    let ta = read_tree(a.path());
    let tb = read_tree(b.path());
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{} differs between reruns", k.display());
    }

    for f in [
        "data/manifest.json",
        "data/annotations.json",
        "t/teacher.ckpt",
        "t/teacher_run.json",
        "s/student.ckpt",
        "s/student_run.json",
        "ls/localization.json",
        "ls/predictions.json",
        "et/metrics.json",
        "h/trace_comparison.csv",
        "h/teacher/spectrum.json",
        "h/teacher/esd.csv",
        "h/teacher/dense_check.json",
        "h/student/spectrum.json",
        "hk/spectrum.json",
    ] {
        assert!(ta.contains_key(Path::new(f)), "missing {f}");
    }
    let table = String::from_utf8(ta[Path::new("h/trace_comparison.csv")].clone()).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "checkpoint,params,trace,top_eigenvalue,dense_trace");
    assert!(lines[1].starts_with("teacher,64,") && lines[2].starts_with("student,64,"));

    let rec: serde_json::Value = serde_json::from_slice(&ta[Path::new("s/student_run.json")]).unwrap();
    assert_eq!(rec["role"], "student");
    assert_eq!(rec["teacher_checkpoint"], "t/teacher.ckpt");
    assert!(rec.get("wall_clock_seconds").is_none_or(|v| v.is_null()));
    assert!(rec["config"]["output_dir"].is_null());

    let boxes = ta.keys().filter(|k| k.starts_with("ls/boxes")).count();
    let maps = ta.keys().filter(|k| k.starts_with("ls/heatmaps")).count();
    assert!(boxes > 0 && boxes == maps);
}

#[test]
fn invalid_input_exits_with_status_two() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("unknown.json"), r#"{"seed": 1, "learning_rate": 0.1}"#).unwrap();
    assert_eq!(code(p, &["--config", "unknown.json", "train-teacher"]), 2);
    std::fs::write(p.join("broken.json"), "{").unwrap();
    assert_eq!(code(p, &["--config", "broken.json", "train-teacher"]), 2);
    assert_eq!(code(p, &["train-teacher", "--dataset", "no-such-dir"]), 2);
    assert_eq!(code(p, &["evaluate", "--checkpoint", "missing.ckpt"]), 2);
    std::fs::write(p.join("junk.ckpt"), b"KDL1 but not really").unwrap();
    assert_eq!(code(p, &["localize", "--checkpoint", "junk.ckpt"]), 2);
    assert_eq!(code(p, &["localize", "--checkpoint", "junk.ckpt", "--tau", "1.5"]), 2);
    assert_eq!(code(p, &["sweep", "--axis", "alpha", "--values", "0.5,1.5"]), 2);
    assert_eq!(code(p, &["sweep", "--axis", "seed", "--values", "1,1"]), 2);
    assert_eq!(code(p, &["hessian-report", "--checkpoint", "junk.ckpt", "--loss", "kd"]), 2);
    assert_eq!(code(p, &["no-such-command"]), 2);
    assert_eq!(code(p, &["train-student"]), 2);
}

#[test]
fn divergent_training_exits_with_status_three() {
    let d = tempfile::tempdir().unwrap();
    let mut c = tiny_config();
    c.training.adam.lr = 1e300;
    c.training.adam.weight_decay = 0.0;
    write_config(&d.path().join("c.json"), &c);
    let out = kdloc(d.path(), &["--config", "c.json", "train-teacher", "--out", "t"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.path().join("t/teacher.ckpt").exists());
}

#[test]
fn single_class_test_split_reports_null_auc() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let mut c = tiny_config();
    if let kdloc::config::DatasetSource::Synthetic(s) = &mut c.dataset {
        s.positive_fraction = 1.0;
    }
    write_config(&p.join("c.json"), &c);
    ok(p, &["--config", "c.json", "train-teacher", "--out", "t", "--max-epochs", "1"]);
    let out = kdloc(p, &["--config", "c.json", "evaluate", "--checkpoint", "t/teacher.ckpt", "--out", "e"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("AUC is undefined"));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("e/metrics.json")).unwrap()).unwrap();
    assert!(m["auc"].is_null());
    assert!(m["accuracy"].as_f64().unwrap() >= 0.0);
}
