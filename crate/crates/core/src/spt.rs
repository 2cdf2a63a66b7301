//! Test-phase tree construction from a trained Q-table.
//!
//! Every non-sink node runs its own greedy walk. At each step the walk
//! moves to the unvisited neighbor with the highest score
//! `Q(c, u) - d(u, sink)`; equal scores go to the lowest linear index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Location;
use crate::qtable::QTable;
use crate::topology::{parse_num, GraphInstance};

/// `Q(c, u) - d(u, sink)`.
pub fn score(c: Location, u: Location, q: &QTable, sink: Location) -> f64 {
    q.get(c, u) - u.euclid_dist(sink)
}

/// A per-node walk. `path[0]` is the start node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub path: Vec<Location>,
    pub reached_sink: bool,
}

impl Walk {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn is_simple(&self) -> bool {
        let set: BTreeSet<_> = self.path.iter().collect();
        set.len() == self.path.len()
    }
}

pub fn build_path(v: Location, g: &GraphInstance, q: &QTable) -> Result<Walk> {
    let start = g
        .id_of(v)
        .ok_or_else(|| Error::Domain(format!("{v} is not a node of the graph")))?;
    let sink = g.sink();
    let mut visited = vec![false; g.len()];
    visited[start] = true;
    let mut path = vec![v];
    let mut c = start;
    while c != g.sink_id() && path.len() <= g.len() {
        let cur = g.location(c);
        let mut best: Option<(usize, f64)> = None;
        for &u in g.neighbors(c) {
            if visited[u] {
                continue;
            }
            let s = score(cur, g.location(u), q, sink);
            // neighbors come in index order, so strict > keeps the lowest index
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((u, s));
            }
        }
        let Some((u, _)) = best else { break };
        visited[u] = true;
        path.push(g.location(u));
        c = u;
    }
    Ok(Walk {
        reached_sink: c == g.sink_id(),
        path,
    })
}

/// Parent pointers and predicted hop counts for one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTree {
    pub sink: Location,
    /// Every node of the graph, sink included.
    pub nodes: BTreeSet<Location>,
    /// First hop of each successful walk.
    pub parent: BTreeMap<Location, Location>,
    pub predicted_layers: BTreeMap<Location, usize>,
    /// Nodes whose walk dead-ended.
    pub failures: BTreeSet<Location>,
}

impl RoutingTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn layer(&self, v: Location) -> Option<usize> {
        self.predicted_layers.get(&v).copied()
    }
}

/// Builds the tree and also returns every node's walk, in node order.
pub fn build_tree_traced(g: &GraphInstance, q: &QTable) -> (RoutingTree, Vec<Walk>) {
    let mut tree = RoutingTree {
        sink: g.sink(),
        nodes: g.nodes().iter().copied().collect(),
        parent: BTreeMap::new(),
        predicted_layers: BTreeMap::from([(g.sink(), 0)]),
        failures: BTreeSet::new(),
    };
    let mut walks = Vec::with_capacity(g.len().saturating_sub(1));
    for &v in g.nodes() {
        if v == g.sink() {
            continue;
        }
        let walk = build_path(v, g, q).expect("node of the graph");
        tree.predicted_layers.insert(v, walk.hops());
        if walk.reached_sink {
            tree.parent.insert(v, walk.path[1]);
        } else {
            tree.failures.insert(v);
        }
        walks.push(walk);
    }
    (tree, walks)
}

pub fn build_tree(g: &GraphInstance, q: &QTable) -> RoutingTree {
    build_tree_traced(g, q).0
}

/// Multiset of every directed edge traversed by any walk.
pub fn walk_edges(walks: &[Walk]) -> BTreeMap<(Location, Location), usize> {
    let mut out = BTreeMap::new();
    for w in walks {
        for pair in w.path.windows(2) {
            *out.entry((pair[0], pair[1])).or_insert(0) += 1;
        }
    }
    out
}

/// One line per node: `x y parent_x parent_y layer`, with `- -` as the
/// parent of the sink and of failed nodes, and a trailing `dead` marker on
/// failed nodes.
pub fn serialize_tree(tree: &RoutingTree) -> String {
    let mut out = String::new();
    for &v in &tree.nodes {
        let layer = tree.predicted_layers.get(&v).copied().unwrap_or(0);
        match tree.parent.get(&v) {
            Some(p) => write!(out, "{} {} {} {} {}", v.x, v.y, p.x, p.y, layer).unwrap(),
            None => write!(out, "{} {} - - {}", v.x, v.y, layer).unwrap(),
        }
        if tree.failures.contains(&v) {
            out.push_str(" dead");
        }
        out.push('\n');
    }
    out
}

pub fn parse_tree(text: &str) -> Result<RoutingTree> {
    const WHAT: &str = "tree";
    let mut sink = None;
    let mut nodes = BTreeSet::new();
    let mut parent = BTreeMap::new();
    let mut layers = BTreeMap::new();
    let mut failures = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |msg: &str| Error::parse(WHAT, "line", format!("line {}: {msg}", lineno + 1));
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (fields, dead) = match parts.len() {
            5 => (&parts[..], false),
            6 if parts[5] == "dead" => (&parts[..5], true),
            _ => return Err(at("expected `x y parent_x parent_y layer [dead]`")),
        };
        let v = Location::new(parse_num(WHAT, "x", fields[0])?, parse_num(WHAT, "y", fields[1])?);
        let layer: usize = parse_num(WHAT, "layer", fields[4])?;
        if !nodes.insert(v) {
            return Err(at(&format!("duplicate node {v}")));
        }
        layers.insert(v, layer);
        match (fields[2], fields[3]) {
            ("-", "-") if dead => {
                failures.insert(v);
            }
            ("-", "-") => {
                if layer != 0 {
                    return Err(at("sink line must have layer 0"));
                }
                if sink.replace(v).is_some() {
                    return Err(at("more than one sink line"));
                }
            }
            (px, py) => {
                if dead {
                    failures.insert(v);
                }
                let p = Location::new(parse_num(WHAT, "parent_x", px)?, parse_num(WHAT, "parent_y", py)?);
                parent.insert(v, p);
            }
        }
    }
    let sink = sink.ok_or_else(|| Error::parse(WHAT, "sink", "no sink line"))?;
    Ok(RoutingTree {
        sink,
        nodes,
        parent,
        predicted_layers: layers,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;

    fn p() -> GridParams {
        GridParams::new(10, 2.0).unwrap()
    }

    #[test]
    fn score_arithmetic() {
        let params = GridParams::new(100, 20.0).unwrap();
        let mut q = QTable::new(params);
        let sink = Location::new(50, 50);
        let c = Location::new(50, 80);
        let u = Location::new(50, 70);
        q.set(c, u, 90.0).unwrap();
        assert_eq!(score(c, u, &q, sink), 70.0);
        let c2 = Location::new(50, 60);
        q.set(c2, sink, 100.0).unwrap();
        assert_eq!(score(c2, sink, &q, sink), 100.0);
    }

    #[test]
    fn fresh_table_prefers_geometrically_closer() {
        let params = GridParams::new(100, 20.0).unwrap();
        let sink = Location::new(50, 50);
        let v = Location::new(50, 90);
        let near = Location::new(50, 70);
        let far = Location::new(60, 80);
        let g = GraphInstance::new(params, sink, [v, near, far]).unwrap();
        let q = QTable::new(params);
        assert!(score(v, near, &q, sink) > score(v, far, &q, sink));
        let w = build_path(v, &g, &q).unwrap();
        assert_eq!(w.path, vec![v, near, sink]);
    }

    #[test]
    fn adjacent_to_sink() {
        let g = GraphInstance::new(p(), Location::new(0, 0), [Location::new(0, 1)]).unwrap();
        let q = QTable::new(p());
        let w = build_path(Location::new(0, 1), &g, &q).unwrap();
        assert_eq!(w.path, vec![Location::new(0, 1), Location::new(0, 0)]);
        assert!(w.reached_sink);
        let t = build_tree(&g, &q);
        assert_eq!(t.parent.get(&Location::new(0, 1)), Some(&Location::new(0, 0)));
        assert_eq!(
            t.predicted_layers,
            BTreeMap::from([(Location::new(0, 0), 0), (Location::new(0, 1), 1)])
        );
        assert!(build_path(Location::new(5, 5), &g, &q).is_err());
    }

    #[test]
    fn converged_line_walk() {
        let (s, a, b) = (Location::new(0, 0), Location::new(0, 2), Location::new(0, 4));
        let g = GraphInstance::new(p(), s, [a, b]).unwrap();
        let mut q = QTable::new(p());
        q.set(a, s, 100.0).unwrap();
        q.set(b, a, 90.0).unwrap();
        q.set(a, b, 81.0).unwrap();
        assert_eq!(build_path(b, &g, &q).unwrap().path, vec![b, a, s]);
    }

    #[test]
    fn dead_end_fixture() {
        // v's only neighbor u leads nowhere but back to v; the sink is isolated
        let (s, u, v) = (Location::new(9, 9), Location::new(0, 1), Location::new(0, 0));
        let g = GraphInstance::new(p(), s, [u, v]).unwrap();
        let q = QTable::new(p());
        let w = build_path(v, &g, &q).unwrap();
        assert_eq!(w.path, vec![v, u]);
        assert!(!w.reached_sink);
        let (t, walks) = build_tree_traced(&g, &q);
        assert_eq!(t.failures, BTreeSet::from([u, v]));
        assert!(t.parent.is_empty());
        assert_eq!(t.layer(v), Some(1));
        assert!(walks.iter().all(Walk::is_simple));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // two symmetric candidates at equal distance from the sink
        let params = GridParams::new(10, 1.0).unwrap();
        let s = Location::new(5, 5);
        let (a, b, v) = (Location::new(4, 5), Location::new(5, 4), Location::new(4, 4));
        let g = GraphInstance::new(params, s, [a, b, v]).unwrap();
        let w = build_path(v, &g, &QTable::new(params)).unwrap();
        // (4,5) has index 45, (5,4) has index 54
        assert_eq!(w.path, vec![v, a, s]);
    }

    #[test]
    fn tree_text_roundtrip() {
        let (s, u, v) = (Location::new(9, 9), Location::new(0, 1), Location::new(0, 0));
        let g = GraphInstance::new(p(), s, [u, v]).unwrap();
        let t = build_tree(&g, &QTable::new(p()));
        let text = serialize_tree(&t);
        assert!(text.contains("9 9 - - 0\n"));
        assert!(text.contains("0 0 - - 1 dead\n"));
        assert_eq!(parse_tree(&text).unwrap(), t);

        assert!(parse_tree("1 1 - - 0\n2 2 - - 0\n").is_err());
        assert!(parse_tree("1 1 2 2 1\n").is_err());
        assert!(parse_tree("1 1 - - 3\n").is_err());
        assert!(parse_tree("1 1 - - 0 alive\n").is_err());
    }
}
