use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use enprocell::format::load_pipeline;

const BIN: &str = env!("CARGO_BIN_EXE_enprocell");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("ENPROCELL_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const SMALL: &[&str] = &["--hvg", "40", "--pcs", "5", "--hidden", "16,8", "--epochs", "40", "--batch-size", "16"];

/// A small, easy dataset written by the synth command.
fn dataset(dir: &Path, extra: &[&str]) -> (String, String) {
    let mut args = vec![
        "synth", "--out", "data", "--cells-per-class", "40,40,40", "--genes", "80", "--informative", "30",
        "--sparsity", "0", "--baseline", "5", "--housekeeping-genes", "0", "--separation", "10",
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
    ("data/matrix.csv".into(), "data/labels.csv".into())
}

fn body(path: PathBuf) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = dataset(dir.path(), &[]);
    let out = run(dir.path(), &["train", "--ref-matrix", &m]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ref-labels"));
    assert_eq!(run(dir.path(), &["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["evaluate", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["predict", "--query", &m]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one_and_a_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &[]);
    let mut train = vec!["train", "--ref-matrix", &m, "--ref-labels", &l, "--out", "p.enpc"];
    train.extend_from_slice(SMALL);
    ok(dir.path(), &train);

    let mut bytes = std::fs::read(dir.path().join("p.enpc")).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    std::fs::write(dir.path().join("bad.enpc"), bytes).unwrap();
    let out = run(dir.path(), &["predict", "--model", "bad.enpc", "--query", &m]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("checksum"), "{stderr}");

    let out = run(dir.path(), &["predict", "--model", "p.enpc", "--query", "nowhere.csv"]);
    assert_eq!(out.status.code(), Some(1));

    // a query missing one of the model's genes
    let used = load_pipeline(&dir.path().join("p.enpc")).unwrap().recipe.selected_genes[0].clone();
    let text = std::fs::read_to_string(dir.path().join(&m)).unwrap();
    let drop = text.lines().next().unwrap().split(',').position(|g| g == used).unwrap();
    let trimmed: String = text
        .lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').enumerate().filter(|(i, _)| *i != drop).map(|(_, f)| f).collect();
            fields.join(",") + "\n"
        })
        .collect();
    std::fs::write(dir.path().join("fewer.csv"), trimmed).unwrap();
    let out = run(dir.path(), &["predict", "--model", "p.enpc", "--query", "fewer.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(&used), "{stderr}");
}

#[test]
fn zero_pcs_trains_an_mda_only_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &[]);
    let mut args = vec!["train", "--ref-matrix", &m, "--ref-labels", &l, "--out", "mda.enpc"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(&["--pcs", "0"]);
    ok(dir.path(), &args);
    let p = load_pipeline(&dir.path().join("mda.enpc")).unwrap();
    assert_eq!(p.basis.pca.n_components(), 0);
    assert_eq!(p.basis.n_components(), 3);
    assert!(dir.path().join("mda.enpc.loss.csv").exists());
}

#[test]
fn predict_writes_probabilities_named_by_class() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &[]);
    let mut train = vec!["train", "--ref-matrix", &m, "--ref-labels", &l, "--out", "p.enpc"];
    train.extend_from_slice(SMALL);
    ok(dir.path(), &train);
    ok(dir.path(), &["predict", "--model", "p.enpc", "--query", &m, "--probs", "--align-batches", "off", "--out", "pred.csv"]);
    let rows = body(dir.path().join("pred.csv"));
    assert_eq!(rows[0], "cell_id,predicted_label,max_probability,type_0,type_1,type_2");
    assert_eq!(rows.len(), 121);
    let truth = std::fs::read_to_string(dir.path().join(&l)).unwrap();
    let correct = rows[1..]
        .iter()
        .zip(truth.lines())
        .filter(|(p, t)| p.split(',').nth(1) == t.split(',').nth(1))
        .count();
    assert!(correct >= 118, "{correct} of 120 training cells");
    ok(dir.path(), &["predict", "--model", "p.enpc", "--query", &m, "--out", "plain.csv"]);
    assert_eq!(body(dir.path().join("plain.csv"))[0], "cell_id,predicted_label,max_probability");
}

#[test]
fn train_and_evaluate_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &[]);
    for out in ["a", "b"] {
        let pipeline = format!("{out}/p.enpc");
        let mut train = vec!["train", "--ref-matrix", &m, "--ref-labels", &l, "--out", &pipeline, "--seed", "7"];
        train.extend_from_slice(SMALL);
        ok(dir.path(), &train);
        let report = format!("{out}/report");
        let mut eval = vec!["evaluate", "--mode", "intra", "--ref-matrix", &m, "--ref-labels", &l, "--split-seed", "7", "--out", &report];
        eval.extend_from_slice(SMALL);
        ok(dir.path(), &eval);
    }
    let same = |f: &str| {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    };
    for f in ["p.enpc", "p.enpc.loss.csv", "report/report.txt", "report/summary.csv", "report/per_class.csv", "report/confusion.csv", "report/report.jsonl"] {
        same(f);
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &[]);
    let mut eval = vec!["evaluate", "--ref-matrix", &m, "--ref-labels", &l, "--split-seed", "3", "--out", "first"];
    eval.extend_from_slice(SMALL);
    ok(dir.path(), &eval);
    ok(dir.path(), &["evaluate", "--config", "first/summary.csv", "--out", "second"]);
    for f in ["report.txt", "summary.csv", "per_class.csv", "confusion.csv", "report.jsonl"] {
        let a = std::fs::read(dir.path().join("first").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("second").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    // flags still override the file
    ok(dir.path(), &["evaluate", "--config", "first/summary.csv", "--split-seed", "4", "--out", "third"]);
    let text = std::fs::read_to_string(dir.path().join("third/summary.csv")).unwrap();
    assert!(text.contains("#@ split-seed=4\n"));
}

#[test]
fn sweep_and_bench_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (m, l) = dataset(dir.path(), &["--cells-per-class", "60,60,60", "--genes", "150"]);
    let grid = (0..=10).map(|i| (i * 10).to_string()).collect::<Vec<_>>().join(",");
    let mut sweep = vec!["sweep", "--ref-matrix", &m, "--ref-labels", &l, "--out", "sweep.csv", "--jobs", "4"];
    sweep.extend_from_slice(SMALL);
    sweep.extend_from_slice(&["--hvg", "120", "--epochs", "10", "--pcs", &grid]);
    ok(dir.path(), &sweep);
    let rows = body(dir.path().join("sweep.csv"));
    assert_eq!(rows[0], "n_pcs,accuracy,macro_f1");
    assert_eq!(rows.len(), 12);
    assert!(rows[11].starts_with("100,"));

    let mut train = vec!["train", "--ref-matrix", &m, "--ref-labels", &l, "--out", "p.enpc"];
    train.extend_from_slice(SMALL);
    ok(dir.path(), &train);
    ok(dir.path(), &["bench", "--model", "p.enpc", "--query", &m, "--repeats", "5", "--out", "bench.csv"]);
    let rows = body(dir.path().join("bench.csv"));
    assert_eq!(rows.len(), 7);
    assert!(rows[1].starts_with("median,"));
    assert!(rows[6].starts_with("repeat_4,"));
}

#[test]
fn mtx_input_and_inter_mode() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path(), &["--format", "mtx"]);
    ok(dir.path(), &[
        "synth", "--out", "other", "--cells-per-class", "40,40,40", "--genes", "80", "--informative", "30",
        "--sparsity", "0", "--baseline", "5", "--housekeeping-genes", "0", "--separation", "10", "--seed", "1",
        "--format", "mtx",
    ]);
    assert!(dir.path().join("data/matrix/matrix.mtx").exists());
    let mut args = vec![
        "evaluate", "--mode", "inter", "--format", "mtx",
        "--ref-matrix", "data/matrix", "--ref-labels", "data/labels.csv",
        "--ref-matrix", "other/matrix", "--ref-labels", "other/labels.csv",
        "--query", "data/matrix", "--query-labels", "data/labels.csv", "--out", "inter",
    ];
    args.extend_from_slice(SMALL);
    let out = ok(dir.path(), &args);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("accuracy"));
    let summary = body(dir.path().join("inter/summary.csv"));
    assert_eq!(summary[0], "accuracy,macro_f1,n_cells");
    assert!(summary[1].ends_with(",120"));
    let header = std::fs::read_to_string(dir.path().join("inter/summary.csv")).unwrap();
    assert!(header.contains("#@ ref-matrix=data/matrix,other/matrix\n"));

    // intra mode takes exactly one reference
    let mut two = args.clone();
    two[2] = "intra";
    assert_eq!(run(dir.path(), &two).status.code(), Some(2));
}

#[test]
fn out_dir_variable_sets_default_locations() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["synth", "--cells-per-class", "5,5", "--genes", "20", "--informative", "4"])
        .current_dir(dir.path())
        .env("ENPROCELL_OUT_DIR", "results")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("results/synth/labels.csv").exists());
}
