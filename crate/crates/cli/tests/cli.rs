use std::path::Path;
use std::process::{Command, Output};

use spadeprune::dataset::{save_dataset, DatasetBundle, DatasetParts};
use spadeprune::{CsrMatrix, DenseMatrix};

fn spadeprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spadeprune"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Two classes on a ring with stride-5 chords.
fn write_toy(dir: &Path) {
    let n = 60;
    let labels: Vec<usize> = (0..n).map(|i| (i / 5) % 2).collect();
    let mut x = DenseMatrix::zeros(n, 6);
    for i in 0..n {
        x[(i, labels[i])] = 1.0;
        x[(i, 2 + i % 4)] = 1.0;
    }
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i.min((i + 1) % n), i.max((i + 1) % n)));
        if i + 5 < n {
            edges.push((i, i + 5));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let bundle = DatasetBundle::new(DatasetParts {
        features: CsrMatrix::from_dense(&x),
        labels,
        num_classes: 2,
        edges,
        train_mask: (0..n).map(|i| i < 20).collect(),
        val_mask: (0..n).map(|i| (20..30).contains(&i)).collect(),
        test_mask: (0..n).map(|i| i >= 30).collect(),
    })
    .unwrap();
    save_dataset(&bundle, dir).unwrap();
}

fn small_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "--dataset", data, "--out", out, "--hidden-dim", "4", "--max-epochs", "20", "--k", "4", "--s", "3",
    ]
}

#[test]
fn run_then_rerun_a_phase() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_toy(&data);
    let out = dir.path().join("out");
    let (d, o) = (data.to_str().unwrap(), out.to_str().unwrap());

    let mut args = vec!["run"];
    args.extend(small_args(d, o));
    let res = spadeprune(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("| Original |"), "{stdout}");
    let csv = std::fs::read(out.join("eval/report.csv")).unwrap();

    let mut args = vec!["eval"];
    args.extend(small_args(d, o));
    assert!(spadeprune(&args).status.success());
    assert_eq!(std::fs::read(out.join("eval/report.csv")).unwrap(), csv);

    // a hopeless sweep cap is a convergence failure: exit 2
    let mut args = vec!["eigs"];
    args.extend(small_args(d, o));
    args.extend(["--max-sweeps", "1", "--eig-tol=1e-15"]);
    let res = spadeprune(&args);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).contains("phase `eigs` failed"));
}

#[test]
fn config_file_and_multi_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_toy(&data);
    let out = dir.path().join("out");
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# toy\ndataset={}\nout={}\nhidden_dim=4\nmax_epochs=10\nk=4\ns=2\nrhos=0.1\n",
            data.display(),
            out.display()
        ),
    )
    .unwrap();
    let res = spadeprune(&["run", "--config", cfg.to_str().unwrap(), "--seed", "3", "--seeds", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("seed_3/eval/report.csv").is_file());
    assert!(out.join("seed_4/eval/report.csv").is_file());
    assert!(out.join("summary.csv").is_file());
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none");
    let res = spadeprune(&["train", "--dataset", missing.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(spadeprune(&["train", "--colour", "blue"]).status.code(), Some(1));
    assert_eq!(spadeprune(&["train", "--k", "ten"]).status.code(), Some(1));
    assert_eq!(spadeprune(&["train", "--prune-fraction", "2"]).status.code(), Some(1));
    assert_eq!(spadeprune(&["train", "--k"]).status.code(), Some(1));
}

#[test]
fn convert_citeseer() {
    let raw = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/planetoid/citeseer");
    let dir = tempfile::tempdir().unwrap();
    let res = spadeprune(&["convert", "--raw", raw.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("citeseer: 3327 nodes, 4552 edges, 3703 features, 6 classes"));
    assert!(dir.path().join("edges.txt").is_file());
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(spadeprune(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(spadeprune(&[]).status.code(), Some(1));
    assert_eq!(spadeprune(&["--help"]).status.code(), Some(0));
}
