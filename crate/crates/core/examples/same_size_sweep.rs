//! Same-size testing across node counts, with the untrained table as the
//! greedy-geographic baseline. Pass the number of training graphs per size
//! as the first argument (default 50).
//!
//! cargo run --release --example same_size_sweep -- 500

use qspt::harness::config::mix_seed;
use qspt::{bfs_layers, build_tree, generate_graph, train, AccuracyReport, GridParams, Hyperparams, Location, QTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let m: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let grid = GridParams::new(100, 20.0)?;
    let sink = Location::new(50, 50);
    let h = Hyperparams::standard(1_000_000 / m.max(1));

    println!("M={m} training graphs, K={} episodes each", h.episodes_per_graph);
    println!("{:>5} {:>10} {:>10}", "N", "learned", "baseline");
    for n in [100usize, 200, 300, 400, 500] {
        let graphs = (0..m)
            .map(|i| generate_graph(grid, n, sink, mix_seed(1, &[n as u64, 0, i])))
            .collect::<qspt::Result<Vec<_>>>()?;
        let q = train(&graphs, &h, &mut ChaCha8Rng::seed_from_u64(n as u64))?;
        let fresh = QTable::new(grid);
        let (mut learned, mut baseline) = (AccuracyReport::default(), AccuracyReport::default());
        for i in 0..20 {
            let g = generate_graph(grid, n, sink, mix_seed(1, &[n as u64, 1, i]))?;
            let labels = bfs_layers(&g)?;
            learned.push(format!("g{i}"), &build_tree(&g, &q), &labels)?;
            baseline.push(format!("g{i}"), &build_tree(&g, &fresh), &labels)?;
        }
        println!(
            "{n:>5} {:>10.4} {:>10.4}",
            learned.mean_accuracy(),
            baseline.mean_accuracy()
        );
    }
    Ok(())
}
