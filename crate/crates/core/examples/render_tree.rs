//! Writes a learned tree and the breadth-first tree for the same graph as
//! SVG, side by side in the current directory.

use qspt::harness::svg::render_svg;
use qspt::{build_tree, generate_graph, oracle_tree, train, GridParams, Hyperparams, Location};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> qspt::Result<()> {
    let grid = GridParams::new(100, 20.0)?;
    let sink = Location::new(50, 50);
    let g = generate_graph(grid, 100, sink, 5)?;
    let q = train(
        std::slice::from_ref(&g),
        &Hyperparams::standard(100_000),
        &mut ChaCha8Rng::seed_from_u64(5),
    )?;

    for (path, svg) in [
        (
            "learned_tree.svg",
            render_svg(&g, &build_tree(&g, &q), "Q-learning tree"),
        ),
        (
            "oracle_tree.svg",
            render_svg(&g, &oracle_tree(&g)?, "shortest-path tree (BFS)"),
        ),
    ] {
        std::fs::write(path, svg).map_err(|e| qspt::Error::Io {
            path: path.into(),
            source: e,
        })?;
        println!("wrote {path}");
    }
    Ok(())
}
