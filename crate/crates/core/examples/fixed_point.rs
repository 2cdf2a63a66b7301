//! Single-graph training converges to Q*(v,u) = 100 * gamma^d(u), and the
//! resulting tree is an exact shortest-path tree.

use qspt::{
    bfs_layers, build_tree, generate_graph, q_star, routing_accuracy, train, GridParams, Hyperparams, Location,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let g = generate_graph(GridParams::new(30, 8.0)?, 40, Location::new(15, 15), 11)?;
    let h = Hyperparams::standard(200_000);
    let q = train(std::slice::from_ref(&g), &h, &mut ChaCha8Rng::seed_from_u64(12))?;

    // episodes end at the sink, so its own row is never trained
    let target: Vec<_> = q_star(&g, h.gamma)?
        .into_iter()
        .filter(|((v, _), _)| *v != g.sink())
        .collect();
    let worst = target
        .iter()
        .map(|&((v, u), qs)| (q.get(v, u) - qs).abs())
        .fold(0.0, f64::max);
    println!("{} directed edges, max |Q - Q*| = {worst:.3e}", target.len());

    let labels = bfs_layers(&g)?;
    let tree = build_tree(&g, &q);
    println!("accuracy on the training graph: {}", routing_accuracy(&tree, &labels)?);
    for layer in 0..=labels.max_layer() {
        let n = labels.layers.values().filter(|&&l| l == layer).count();
        println!(
            "  layer {layer}: {n} nodes, Q* {:.2}",
            100.0 * h.gamma.powi(layer as i32)
        );
    }
    Ok(())
}
