//! Shortest-path trees for sensor networks learned with a location-indexed
//! Q-table.
//!
//! Nodes live on a `W x W` integer grid and talk to every other node within
//! range `R`. Training runs epsilon-greedy Q-learning over many random
//! graphs that share one table keyed by grid location, so what is learned
//! on one deployment carries over to another. At test time every node walks
//! greedily on `Q(c, u) - d(u, sink)` to build a routing tree, which is
//! scored against exact breadth-first hop counts.
//!
//! ```no_run
//! use qspt::{generate_graph, train, build_tree, bfs_layers, routing_accuracy};
//! use qspt::{GridParams, Hyperparams, Location};
//! use rand::SeedableRng;
//!
//! let grid = GridParams::new(100, 20.0)?;
//! let sink = Location::new(50, 50);
//! let graphs: Vec<_> = (0..10)
//!     .map(|s| generate_graph(grid, 300, sink, s))
//!     .collect::<Result<_, _>>()?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let q = train(&graphs, &Hyperparams::standard(20_000), &mut rng)?;
//!
//! let test = generate_graph(grid, 300, sink, 1234)?;
//! let tree = build_tree(&test, &q);
//! println!("accuracy {}", routing_accuracy(&tree, &bfs_layers(&test)?)?);
//! # Ok::<(), qspt::Error>(())
//! ```

pub mod dist;
pub mod error;
pub mod grid;
pub mod harness;
pub mod oracle;
pub mod qlearn;
pub mod qtable;
pub mod spt;
pub mod topology;

pub use dist::{
    run_distributed, DistributedRun, DistributedRuntime, MessageStats, NodeAgent, QSummaryMsg, SummaryMode,
};
pub use error::{Error, Result};
pub use grid::{euclid_dist, GridParams, Location};
pub use oracle::{
    bfs_layers, oracle_tree, q_star, routing_accuracy, validate_tree, AccuracyReport, AccuracyRow, LayerMap,
    TreeValidation,
};
pub use qlearn::{
    bellman_update, reward, run_episode, select_action, train, EpisodeEnd, EpisodeRecord, Hyperparams, TrainReport,
    Trainer,
};
pub use qtable::{init_qtable, parse_qtable, serialize_qtable, QTable, INVALID_Q};
pub use spt::{build_path, build_tree, build_tree_traced, parse_tree, score, serialize_tree, RoutingTree, Walk};
pub use topology::{generate_graph, parse_graph, serialize_graph, GraphInstance};
