//! Train a location-indexed Q-table on a few random deployments and build a
//! routing tree on a deployment it has never seen.
//!
//! cargo run --release --example quickstart

use qspt::{bfs_layers, build_tree, generate_graph, routing_accuracy, train, GridParams, Hyperparams, Location};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let grid = GridParams::new(40, 10.0)?;
    let sink = Location::new(20, 20);

    let graphs = (0..200)
        .map(|seed| generate_graph(grid, 150, sink, seed))
        .collect::<qspt::Result<Vec<_>>>()?;
    let q = train(
        &graphs,
        &Hyperparams::standard(2_000),
        &mut ChaCha8Rng::seed_from_u64(1),
    )?;

    let unseen = generate_graph(grid, 150, sink, 10_000)?;
    let tree = build_tree(&unseen, &q);
    let labels = bfs_layers(&unseen)?;
    println!(
        "unseen graph: {} nodes, {} edges, max hop distance {}",
        unseen.len(),
        unseen.edge_count(),
        labels.max_layer()
    );
    println!(
        "routing accuracy {:.4}, dead ends {}",
        routing_accuracy(&tree, &labels)?,
        tree.failures.len()
    );
    Ok(())
}
