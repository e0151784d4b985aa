use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_priorshift")).args(args).output().expect("spawn priorshift")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_owned()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.dir.path().join(name)).unwrap()
    }

    fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.dir.path().join(name), text).unwrap();
        self.path(name)
    }

    fn files(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(self.dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
        v.sort();
        v
    }

    fn simulate(&self, seed: &str, outliers: &str) {
        ok(&[
            "simulate", "--classes", "3", "--symbols", "5", "--separability", "0.6",
            "--train-prior-family", "linear", "--test-prior-family", "exp-rev:0.7", "--n", "300",
            "--outliers", outliers, "--seed", seed,
            "--out-posteriors", &self.path("post.csv"), "--out-labels", &self.path("labels.csv"),
            "--out-train-prior", &self.path("train.csv"), "--out-test-prior", &self.path("test.csv"),
        ]);
    }
}

#[test]
fn adjust_with_identical_priors_reproduces_input() {
    let w = Workspace::new();
    w.simulate("5", "0.1");
    ok(&[
        "adjust", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
        "--test-prior", &w.path("train.csv"), "--out", &w.path("same.csv"),
    ]);
    assert_eq!(w.read("same.csv"), w.read("post.csv"));
}

#[test]
fn same_arguments_give_identical_bytes() {
    let a = Workspace::new();
    let b = Workspace::new();
    for w in [&a, &b] {
        w.simulate("77", "0.2");
        ok(&[
            "estimate", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
            "--method", "pga-map", "--alpha", "3", "--trace", &w.path("trace.csv"), "--out", &w.path("est.csv"),
        ]);
        ok(&[
            "online", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
            "--method", "em", "--refit-every", "25", "--out", &w.path("online.csv"), "--snapshots", &w.path("snap.csv"),
        ]);
        ok(&[
            "diagnose-split", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
            "--method", "em", "--split-fraction", "0.5", "--seed", "3",
            "--report", &w.path("split.csv"), "--out", &w.path("split_est.csv"),
        ]);
    }
    for name in ["post.csv", "labels.csv", "train.csv", "test.csv", "trace.csv", "est.csv", "online.csv", "snap.csv", "split.csv", "split_est.csv"] {
        assert_eq!(a.read(name), b.read(name), "{name}");
    }
}

#[test]
fn estimate_prints_summary_only_unless_trace_requested() {
    let w = Workspace::new();
    w.simulate("1", "0");
    let before = w.files().len();
    let stdout = ok(&[
        "estimate", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
        "--method", "em", "--out", &w.path("est.csv"),
    ]);
    assert_eq!(w.files().len(), before + 1);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3, "{stdout}");
    assert!(lines[0].starts_with("log_likelihood: "));
    assert!(lines[1].starts_with("iterations: "));
    assert_eq!(lines[2], "termination: converged");
    assert_eq!(w.read("est.csv").lines().count(), 3);
}

#[test]
fn online_snapshots_and_split_report() {
    let w = Workspace::new();
    w.simulate("2", "0");
    let stdout = ok(&[
        "online", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
        "--method", "pga-mle", "--refit-every", "100", "--out", &w.path("online.csv"), "--snapshots", &w.path("snap.csv"),
    ]);
    assert_eq!(stdout, "refits: 2\n");
    let snaps = w.read("snap.csv");
    let rows_seen: Vec<&str> = snaps.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows_seen, ["0", "100", "200"]);
    // The first refit happens at row 100, so rows 0..100 pass through unchanged.
    let original: Vec<String> = w.read("post.csv").lines().take(101).map(str::to_owned).collect();
    let adjusted: Vec<String> = w.read("online.csv").lines().take(101).map(str::to_owned).collect();
    assert_eq!(original, adjusted);

    ok(&[
        "diagnose-split", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"),
        "--method", "em", "--split-fraction", "0.3", "--seed", "9",
        "--report", &w.path("split.csv"), "--out", &w.path("split_est.csv"),
    ]);
    let report = w.read("split.csv");
    assert_eq!(
        report.lines().next().unwrap(),
        "iteration,optimization_mean_log_likelihood,validation_mean_log_likelihood"
    );
    assert!(report.lines().count() > 2);
}

#[test]
fn evaluate_reports_known_prior_accuracy() {
    let w = Workspace::new();
    w.simulate("4", "0");
    let stdout = ok(&[
        "evaluate", "--posteriors", &w.path("post.csv"), "--labels", &w.path("labels.csv"),
        "--train-prior", &w.path("train.csv"), "--test-prior", &w.path("test.csv"), "--report", &w.path("rep.csv"),
    ]);
    assert!(stdout.starts_with("accuracy: "));
    let report = w.read("rep.csv");
    assert!(report.starts_with("metric,value\naccuracy,"));
    assert_eq!(report.lines().filter(|l| l.starts_with("class,")).count(), 1);

    // Only one of the two prior flags is a usage error.
    let out = run(&[
        "evaluate", "--posteriors", &w.path("post.csv"), "--labels", &w.path("labels.csv"),
        "--train-prior", &w.path("train.csv"), "--report", &w.path("rep2.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn label_free_commands_do_not_take_labels() {
    let w = Workspace::new();
    w.simulate("6", "0");
    let common = ["--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv")].map(str::to_owned);
    let commands: Vec<Vec<String>> = vec![
        vec!["adjust".into(), "--test-prior".into(), w.path("test.csv"), "--out".into(), w.path("o.csv")],
        vec!["estimate".into(), "--method".into(), "em".into(), "--out".into(), w.path("o.csv")],
        vec!["online".into(), "--method".into(), "em".into(), "--out".into(), w.path("o.csv"), "--snapshots".into(), w.path("s.csv")],
        vec![
            "diagnose-split".into(), "--method".into(), "em".into(), "--split-fraction".into(), "0.5".into(),
            "--seed".into(), "1".into(), "--report".into(), w.path("r.csv"), "--out".into(), w.path("o.csv"),
        ],
    ];
    for cmd in commands {
        let mut args: Vec<String> = cmd.clone();
        args.extend(common.iter().cloned());
        let plain: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&plain);
        args.extend(["--labels".to_owned(), w.path("labels.csv")]);
        let with_labels: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(&with_labels).status.code(), Some(2), "{}", cmd[0]);
    }
}

#[test]
fn bad_input_exits_one_with_single_line_and_no_output() {
    let w = Workspace::new();
    let post = w.write("post.csv", "0.5,0.5\n0.2,x\n");
    let train = w.write("train.csv", "0.5\n0.5\n");
    let out = run(&["estimate", "--posteriors", &post, "--train-prior", &train, "--method", "em", "--out", &w.path("est.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: parse: ") && err.contains("post.csv:2:5:"), "{err}");
    assert!(!Path::new(&w.path("est.csv")).exists());
    assert_eq!(w.files().len(), 2);

    let bad_prior = w.write("bad.csv", "0.7\n0.7\n");
    let post = w.write("post.csv", "0.5,0.5\n");
    let out = run(&["estimate", "--posteriors", &post, "--train-prior", &bad_prior, "--method", "em", "--out", &w.path("est.csv")]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "estimate", "--posteriors", &post, "--train-prior", &train, "--method", "pga-map", "--alpha", "0.5",
        "--out", &w.path("est.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["estimate", "--posteriors", "p", "--train-prior", "t", "--method", "pga-map", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--posteriors", "p", "--train-prior", "t", "--method", "newton", "--out", "o"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--classes", "3"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let help = run(&["estimate", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8(help.stdout).unwrap();
    for flag in ["--posteriors", "--train-prior", "--method", "--alpha", "--lr", "--max-iters", "--tol", "--init", "--trace", "--out"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn existing_output_is_replaced_whole() {
    let w = Workspace::new();
    w.simulate("8", "0");
    let target = w.write("est.csv", "stale\n");
    ok(&["estimate", "--posteriors", &w.path("post.csv"), "--train-prior", &w.path("train.csv"), "--method", "em", "--out", &target]);
    let text = w.read("est.csv");
    assert!(!text.contains("stale"));
    let sum: f64 = text.lines().map(|l| l.parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-12);
}
