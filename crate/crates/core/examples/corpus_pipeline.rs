//! The file-based pipeline behind the `qspt` binary, driven from code:
//! gen -> train -> test (same-size and cross-size) -> report.

use qspt::harness::pipeline::{cmd_gen, cmd_report, cmd_test, cmd_train, qtable_path};
use qspt::harness::ExperimentConfig;

fn main() -> qspt::Result<()> {
    let mut cfg = ExperimentConfig {
        nodes: vec![100, 200],
        train_graphs: 20,
        test_graphs: 10,
        out: std::env::temp_dir().join("qspt-corpus-pipeline"),
        ..ExperimentConfig::default()
    };
    cfg.hyper.episodes_per_graph = 10_000;

    let corpus = cmd_gen(&cfg)?;
    println!(
        "{} graph files, manifest at {}",
        corpus.files.len(),
        corpus.manifest.display()
    );
    for t in cmd_train(&cfg)? {
        println!(
            "trained n={} ({} updates) -> {}",
            t.nodes,
            t.report.updates,
            t.qtable.display()
        );
    }
    let mut csvs: Vec<_> = cmd_test(&cfg, &[], &[])?.into_iter().map(|o| o.csv).collect();
    let cross = cmd_test(&cfg, &[qtable_path(&cfg.out, 200)], &[100])?;
    csvs.extend(cross.into_iter().map(|o| o.csv));

    let (path, table) = cmd_report(&csvs, &cfg.out)?;
    print!("{table}");
    println!("report written to {}", path.display());
    Ok(())
}
