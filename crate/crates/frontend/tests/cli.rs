//! The command line end to end: exit codes, files written, report shapes.

use std::fs;
use std::path::{Path, PathBuf};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ogwb::cli::run(std::iter::once("ogwb").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn model(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(rel).to_str().unwrap().to_string()
}

fn with_sched_min(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(model("echronos.og")).unwrap();
    assert!(text.contains("sched = max"));
    let path = dir.join("min.og");
    fs::write(&path, text.replace("sched = max", "sched = min")).unwrap();
    path
}

#[test]
fn check_passes_on_toy() {
    let (code, out, _) = run(&["check", &model("corpus/toy.og")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("reachable 4\n"));
    assert!(out.contains("invariant YSmall holds\n"));
}

#[test]
fn violation_exits_1_and_writes_a_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let faulty = with_sched_min(dir.path());
    let report = dir.path().join("report.txt");
    let (code, _, err) = run(&[
        "check",
        faulty.to_str().unwrap(),
        "--invariant",
        "QuiescentPriority",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{err}");
    assert!(fs::read_to_string(&report).unwrap().contains("invariant QuiescentPriority VIOLATED"));
    let trace = PathBuf::from(format!("{}.QuiescentPriority.ogt", report.display()));
    let (code, out, _) = run(&["replay", faulty.to_str().unwrap(), trace.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    // the same trace does not belong to the unmodified configuration
    let (code, out, _) = run(&["replay", &model("echronos.og"), trace.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
}

#[test]
fn state_limit_exits_3() {
    let (code, out, _) = run(&["check", &model("echronos.og"), "--max-states", "100"]);
    assert_eq!(code, 3);
    assert!(out.contains("limits_hit max-states\n"), "{out}");
    assert!(out.contains("not violated within limits"));
}

#[test]
fn limits_do_not_change_the_config_digest() {
    let digest = |extra: &[&str]| {
        let mut args = vec!["check", "--max-states", "50"];
        args.extend_from_slice(extra);
        let m = model("corpus/tiny.og");
        args.push(&m);
        let (_, out, _) = run(&args);
        out.lines().find(|l| l.starts_with("config ")).unwrap().to_string()
    };
    assert_eq!(digest(&[]), digest(&["--max-depth", "3"]));
    assert_ne!(digest(&[]), digest(&["--variant", "generic"]));
}

#[test]
fn unknown_invariant_is_a_usage_error() {
    let (code, _, err) = run(&["check", &model("corpus/toy.og"), "--invariant", "Nope"]);
    assert_eq!(code, 2);
    assert!(err.contains("Nope"));
}

#[test]
fn toy_vcs_are_all_trivial() {
    let (code, out, _) = run(&["vcs", &model("corpus/toy.og"), "--verbosity", "1"]);
    assert_eq!(code, 0, "{out}");
    let row: Vec<&str> = out.lines().find(|l| l.starts_with("interference")).unwrap().split_whitespace().collect();
    assert_eq!(row[1..3], ["18", "18"]);
    assert_eq!(out.matches("TRIVIAL contradiction").count(), 18);
}

#[test]
fn preset_vcs_report_failures() {
    let (code, out, _) = run(&["vcs", &model("echronos.og")]);
    assert_eq!(code, 1);
    assert!(out.lines().any(|l| l.starts_with("vc ") && l.contains("FAILED witness")));
}

#[test]
fn graph_is_dot() {
    let (code, out, _) = run(&["graph", &model("corpus/toy.og")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("digraph"));
    // Task2 is guarded by AT = 3 and nothing ever switches to it
    assert_eq!(out.matches(" -> ").count(), 3, "{out}");
    assert!(!out.contains("Task2"));
}

#[test]
fn parse_errors_exit_2_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.og");
    fs::write(&bad, "system \"x\"\nconfig { users = 1 }\nvar a: bool\ninvariant I: a = \n").unwrap();
    let (code, _, err) = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("bad.og:5:1: syntax error"), "{err}");
}

#[test]
fn simulate_is_seeded() {
    let m = model("corpus/choice.og");
    let a = run(&["simulate", &m, "--seed", "1", "--steps", "50"]).1;
    let b = run(&["simulate", &m, "--seed", "1", "--steps", "50"]).1;
    let c = run(&["simulate", &m, "--seed", "2", "--steps", "50"]).1;
    assert_eq!(a, b);
    assert_ne!(a, c);
}
