use std::collections::BTreeSet;

use proptest::prelude::*;
use qspt::qlearn::bellman_value;
use qspt::{
    bfs_layers, build_tree_traced, generate_graph, parse_graph, parse_qtable, parse_tree, q_star, serialize_graph,
    serialize_qtable, serialize_tree, validate_tree, GraphInstance, GridParams, Location, QTable,
};

fn grid_strategy() -> impl Strategy<Value = GridParams> {
    (3u32..=30)
        .prop_flat_map(|w| (Just(w), 1.0f64..f64::from(w).min(9.0)))
        .prop_map(|(w, r)| GridParams::new(w, r).unwrap())
}

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = GraphInstance> {
    (grid_strategy(), any::<u64>(), 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map(
        "generation budget exhausted",
        move |(grid, seed, fx, fy, fn_)| {
            let w = grid.width();
            let sink = Location::new((fx * f64::from(w)) as u32 % w, (fy * f64::from(w)) as u32 % w);
            let n = 1 + (fn_ * (grid.cells().min(max_nodes) as f64)) as usize;
            generate_graph(grid, n.min(grid.cells()), sink, seed).ok()
        },
    )
}

/// All-pairs hop distances by Floyd-Warshall over the range predicate.
fn floyd_warshall(g: &GraphInstance) -> Vec<Vec<u64>> {
    let nodes = g.nodes();
    let n = nodes.len();
    let inf = u64::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if i != j && nodes[i].dist_sq(nodes[j]) <= g.params().range_sq() {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn range_is_symmetric(grid in grid_strategy(), a in any::<(u16, u16)>(), b in any::<(u16, u16)>()) {
        let w = grid.width();
        let a = Location::new(u32::from(a.0) % w, u32::from(a.1) % w);
        let b = Location::new(u32::from(b.0) % w, u32::from(b.1) % w);
        prop_assert_eq!(grid.in_range(a, b), grid.in_range(b, a));
        let na = grid.grid_neighbors(a).unwrap();
        let nb = grid.grid_neighbors(b).unwrap();
        prop_assert_eq!(na.contains(&b), nb.contains(&a));
        prop_assert!(!na.contains(&a));
    }

    #[test]
    fn index_is_a_bijection(grid in grid_strategy()) {
        let mut seen = BTreeSet::new();
        for i in 0..grid.cells() {
            let loc = grid.location(i).unwrap();
            prop_assert_eq!(grid.index(loc).unwrap(), i);
            prop_assert!(seen.insert(loc));
        }
        prop_assert!(grid.location(grid.cells()).is_err());
    }

    #[test]
    fn graph_text_roundtrip(g in graph_strategy(60)) {
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        prop_assert_eq!(serialize_graph(&back), text);
        prop_assert_eq!(back.edge_count(), g.edge_count());
        prop_assert_eq!(back, g);
    }

    #[test]
    fn bfs_matches_floyd_warshall(g in graph_strategy(50)) {
        let layers = bfs_layers(&g).unwrap();
        let d = floyd_warshall(&g);
        let s = g.sink_id();
        for (i, &v) in g.nodes().iter().enumerate() {
            prop_assert_eq!(layers.get(v).map(|l| l as u64), Some(d[i][s]));
        }
    }

    #[test]
    fn q_star_is_a_bellman_fixed_point(g in graph_strategy(40), gamma in 0.05f64..0.99) {
        let qs = q_star(&g, gamma).unwrap();
        let sink = g.sink();
        for (&(v, u), &value) in &qs {
            let r = if u == sink { 100.0 } else { 0.0 };
            let next = if u == sink {
                0.0
            } else {
                g.graph_neighbors(u).unwrap().iter().map(|&w| qs[&(u, w)]).fold(0.0, f64::max)
            };
            let updated = bellman_value(value, r, next, 0.9, gamma);
            prop_assert!((updated - value).abs() <= 1e-9 * value.max(1.0), "{v} -> {u}: {value} vs {updated}");
        }
    }

    #[test]
    fn walks_are_simple_and_never_beat_bfs(g in graph_strategy(60), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut q = QTable::new(*g.params());
        for &v in g.nodes() {
            for u in g.graph_neighbors(v).unwrap() {
                q.set(v, u, rng.gen_range(0.0..100.0)).unwrap();
            }
        }
        let (tree, walks) = build_tree_traced(&g, &q);
        let layers = bfs_layers(&g).unwrap();
        for w in &walks {
            prop_assert!(w.is_simple());
        }
        for (v, &l) in &tree.predicted_layers {
            if !tree.failures.contains(v) {
                prop_assert!(l >= layers.get(*v).unwrap());
            }
        }
        let report = validate_tree(&tree, &g);
        prop_assert!(report.missing_edges.is_empty());
        prop_assert!(!report.node_set_mismatch);
        prop_assert_eq!(parse_tree(&serialize_tree(&tree)).unwrap(), tree);
    }

    #[test]
    fn qtable_text_roundtrip(g in graph_strategy(40), values in proptest::collection::vec(-5.0f64..105.0, 1..64)) {
        let mut q = QTable::new(*g.params());
        let mut k = 0;
        for &v in g.nodes() {
            for u in g.graph_neighbors(v).unwrap() {
                q.set(v, u, values[k % values.len()]).unwrap();
                k += 1;
            }
        }
        let text = serialize_qtable(&q, &[]);
        let back = parse_qtable(&text).unwrap();
        prop_assert!(back.bit_eq(&q));
        prop_assert_eq!(serialize_qtable(&back, &[]), text);
    }
}
