use std::path::Path;
use std::process::{Command, Output};

fn elgeo(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_elgeo"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn end_to_end_on_the_hand_built_kb() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("toy");
    let out = elgeo(&["gen-toy", "--hand-built", p(&ds)], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = tmp.path().join("run");
    let out = elgeo(
        &["train", p(&ds), p(&run), "--preset", "toy-faithful", "--set", "train.epochs=20", "--set", "model.dim=4"],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cl = tmp.path().join("cl");
    assert!(elgeo(&["closure", p(&ds), p(&cl)], &[]).status.success());

    let ev = tmp.path().join("ev");
    let ckpt = run.join("model.ckpt");
    let out = elgeo(&["evaluate", p(&ckpt), p(&ds), p(&ev), "--closure-positives", "--closure", p(&cl), "--filtered"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ev.join("eval_report.json").is_file());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("toy");
    assert!(elgeo(&["gen-toy", "--hand-built", p(&ds)], &[]).status.success());

    // usage and input errors
    assert_eq!(elgeo(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(elgeo(&["reason", p(&tmp.path().join("missing")), p(&tmp.path().join("r"))], &[]).status.code(), Some(2));
    let out = elgeo(&["train", p(&ds), p(&tmp.path().join("t")), "--set", "train.learning_rate=1"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert_eq!(elgeo(&["reason", p(&ds), p(&tmp.path().join("r"))], &[("ELGEO_THREADS", "zero")]).status.code(), Some(2));

    // runtime failure
    let out = elgeo(&["closure", p(&ds), p(&tmp.path().join("c")), "--set", "closure.budget=10"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("closure.budget"));

    let out = elgeo(&["reason", p(&ds), p(&tmp.path().join("r"))], &[("ELGEO_THREADS", "1")]);
    assert_eq!(out.status.code(), Some(0));
}
