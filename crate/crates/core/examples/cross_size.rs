//! Cross-size testing: one table trained at N=300, tested on every size.

use qspt::harness::config::mix_seed;
use qspt::{bfs_layers, build_tree, generate_graph, train, AccuracyReport, GridParams, Hyperparams, Location};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let grid = GridParams::new(100, 20.0)?;
    let sink = Location::new(50, 50);
    let graphs = (0..50)
        .map(|i| generate_graph(grid, 300, sink, mix_seed(1, &[300, 0, i])))
        .collect::<qspt::Result<Vec<_>>>()?;
    let q = train(
        &graphs,
        &Hyperparams::standard(20_000),
        &mut ChaCha8Rng::seed_from_u64(3),
    )?;

    for n in [100usize, 200, 300, 400, 500] {
        let mut report = AccuracyReport::default();
        for i in 0..20 {
            let g = generate_graph(grid, n, sink, mix_seed(1, &[n as u64, 1, i]))?;
            report.push(format!("g{i}"), &build_tree(&g, &q), &bfs_layers(&g)?)?;
        }
        println!(
            "N=300 table on N={n}: mean {:.4} +- {:.4}, pooled {:.4}",
            report.mean_accuracy(),
            report.std_accuracy(),
            report.pooled_accuracy()
        );
    }
    Ok(())
}
