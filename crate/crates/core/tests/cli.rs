use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qspt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qspt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const SMALL: &str = "width=30\nrange=8\nsink_x=15\nsink_y=15\nnodes=30,50\ngraphs=3\ntest_graphs=2\nepisodes=2000\n";

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("out");
    let out_s = out.display().to_string();
    let base = ["--config", cfg.as_str(), "--out", out_s.as_str()];

    let run = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend_from_slice(&base);
        args.extend_from_slice(extra);
        let o = qspt(&args);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };

    run("gen", &[]);
    let manifest = fs::read_to_string(out.join("corpus/manifest.txt")).unwrap();
    assert!(manifest.contains("# width=30"));
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 2 * (3 + 2));

    let train = run("train", &["--distributed"]);
    assert!(train.contains("identical=true"), "{train}");
    assert!(out.join("qtables/n30.qtable").exists());
    let log = fs::read_to_string(out.join("logs/train_n50.log")).unwrap();
    assert!(log.contains("distributed_identical true"));

    let test = run("test", &[]);
    assert_eq!(test.lines().count(), 2);
    let q50 = out.join("qtables/n50.qtable").display().to_string();
    run("test", &["--qtable", q50.as_str(), "--test-nodes", "30"]);
    let csv = fs::read_to_string(out.join("results/q50_t30.csv")).unwrap();
    assert!(csv.contains("# train_nodes 50") && csv.contains("# test_nodes 30"));

    let graph = out.join("corpus/n30/test/g0000.graph").display().to_string();
    let tree = out.join("trees/q30_t30/g0000.tree").display().to_string();
    let svg = dir.path().join("fig.svg").display().to_string();
    let o = qspt(&["render", "--graph", &graph, "--tree", &tree, "--oracle", "-o", &svg]);
    assert!(o.status.success());
    assert!(dir.path().join("fig_oracle.svg").exists());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let csvs: Vec<String> = ["q30_t30", "q50_t50", "q50_t30"]
        .iter()
        .map(|s| out.join(format!("results/{s}.csv")).display().to_string())
        .collect();
    let mut args = vec!["report", "--out", out_s.as_str()];
    args.extend(csvs.iter().map(String::as_str));
    let o = qspt(&args);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("| 30 |") && table.contains("| 50 |"), "{table}");
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.starts_with("test_nodes,train_30_mean,train_30_std,train_50_mean,train_50_std"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();

    assert_eq!(qspt(&["gen", "--nodes", "20000", "--out", &out]).status.code(), Some(1));
    assert_eq!(qspt(&["gen", "--alpha", "0", "--out", &out]).status.code(), Some(1));
    assert_eq!(qspt(&["frobnicate"]).status.code(), Some(1));

    let gen_fail = qspt(&[
        "gen",
        "--range",
        "1",
        "--nodes",
        "3",
        "--graphs",
        "1",
        "--test-graphs",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(gen_fail.status.code(), Some(2));

    let cfg = write_config(dir.path());
    assert!(qspt(&["gen", "--config", &cfg, "--out", &out]).status.success());
    let victim = dir.path().join("out/corpus/n30/train/g0001.graph");
    fs::write(&victim, "30\n8\n15\n15\n2\n15 15\n").unwrap();
    let corrupt = qspt(&["train", "--config", &cfg, "--out", &out]);
    assert_eq!(corrupt.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("g0001.graph"));
}
