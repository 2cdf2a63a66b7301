//! Ground truth and scoring: exact hop layers, the analytic Q fixed point,
//! routing accuracy and structural checks on built trees.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Location;
use crate::qlearn::SINK_REWARD;
use crate::spt::RoutingTree;
use crate::topology::{parse_num, GraphInstance};

/// Exact hop distance from every node to the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMap {
    pub layers: BTreeMap<Location, usize>,
}

impl LayerMap {
    pub fn get(&self, v: Location) -> Option<usize> {
        self.layers.get(&v).copied()
    }

    pub fn max_layer(&self) -> usize {
        self.layers.values().copied().max().unwrap_or(0)
    }
}

/// Unit-weight shortest paths to the sink by breadth-first search.
pub fn bfs_layers(g: &GraphInstance) -> Result<LayerMap> {
    let dist = hop_distances(g);
    if let Some(v) = dist.iter().position(Option::is_none) {
        return Err(Error::Domain(format!("{} cannot reach the sink", g.location(v))));
    }
    Ok(LayerMap {
        layers: g
            .nodes()
            .iter()
            .zip(dist)
            .map(|(&v, d)| (v, d.expect("checked above")))
            .collect(),
    })
}

/// Hop distance to the sink by node id, `None` when unreachable.
pub(crate) fn hop_distances(g: &GraphInstance) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.len()];
    let mut queue = VecDeque::from([g.sink_id()]);
    dist[g.sink_id()] = Some(0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have a distance");
        for &u in g.neighbors(v) {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// The breadth-first shortest-path tree: each node's parent is its
/// lowest-index neighbor one layer closer to the sink.
pub fn oracle_tree(g: &GraphInstance) -> Result<RoutingTree> {
    let layers = bfs_layers(g)?;
    let mut parent = BTreeMap::new();
    for (v, &loc) in g.nodes().iter().enumerate() {
        if v == g.sink_id() {
            continue;
        }
        let d = layers.layers[&loc];
        let p = g
            .neighbors(v)
            .iter()
            .map(|&u| g.location(u))
            .find(|u| layers.layers[u] + 1 == d)
            .expect("a connected node has a neighbor one layer closer");
        parent.insert(loc, p);
    }
    Ok(RoutingTree {
        sink: g.sink(),
        nodes: g.nodes().iter().copied().collect(),
        parent,
        predicted_layers: layers.layers,
        failures: Default::default(),
    })
}

/// Converged Q-value of every directed edge: `100 * gamma^d(u, sink)`.
pub fn q_star(g: &GraphInstance, gamma: f64) -> Result<BTreeMap<(Location, Location), f64>> {
    let layers = bfs_layers(g)?;
    let mut out = BTreeMap::new();
    for (a, &va) in g.nodes().iter().enumerate() {
        for &b in g.neighbors(a) {
            let u = g.location(b);
            let d = layers.get(u).expect("every node has a layer");
            out.insert((va, u), SINK_REWARD * gamma.powi(d as i32));
        }
    }
    Ok(out)
}

/// Fraction of nodes whose predicted layer equals the true layer. Failed
/// walks never count as matches.
pub fn routing_accuracy(tree: &RoutingTree, labels: &LayerMap) -> Result<f64> {
    let (matches, total) = match_count(tree, labels)?;
    Ok(matches as f64 / total as f64)
}

fn match_count(tree: &RoutingTree, labels: &LayerMap) -> Result<(usize, usize)> {
    if tree.nodes.len() != labels.layers.len() || !tree.nodes.iter().all(|v| labels.layers.contains_key(v)) {
        return Err(Error::Domain("tree and labels cover different node sets".into()));
    }
    let matches = tree
        .nodes
        .iter()
        .filter(|&&v| !tree.failures.contains(&v) && tree.layer(v) == labels.get(v))
        .count();
    Ok((matches, tree.nodes.len()))
}

/// Problems found by [`validate_tree`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeValidation {
    /// Parent pointers that are not graph edges.
    pub missing_edges: Vec<(Location, Location)>,
    /// Nodes whose parent chain never reaches the sink within `|V|` steps.
    pub cyclic: Vec<Location>,
    /// Nodes whose parent chain stops at a node without a parent.
    pub dangling: Vec<Location>,
    /// Tree nodes that are not graph nodes, or the reverse.
    pub node_set_mismatch: bool,
}

impl TreeValidation {
    pub fn is_valid(&self) -> bool {
        self.missing_edges.is_empty() && self.cyclic.is_empty() && self.dangling.is_empty() && !self.node_set_mismatch
    }
}

/// Checks edge existence and that every parent chain ends at the sink.
pub fn validate_tree(tree: &RoutingTree, g: &GraphInstance) -> TreeValidation {
    let mut report = TreeValidation {
        node_set_mismatch: tree.nodes.len() != g.len() || !tree.nodes.iter().all(|&v| g.contains(v)),
        ..Default::default()
    };
    for (&v, &p) in &tree.parent {
        if !g.has_edge(v, p) {
            report.missing_edges.push((v, p));
        }
    }
    let limit = tree.nodes.len();
    for &v in &tree.nodes {
        if v == tree.sink {
            continue;
        }
        let mut cur = v;
        let mut steps = 0;
        loop {
            if cur == tree.sink {
                break;
            }
            if steps > limit {
                report.cyclic.push(v);
                break;
            }
            match tree.parent.get(&cur) {
                Some(&p) => cur = p,
                None => {
                    report.dangling.push(v);
                    break;
                }
            }
            steps += 1;
        }
    }
    report
}

/// One scored graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub graph_id: String,
    pub n_nodes: usize,
    pub accuracy: f64,
    pub dead_ends: usize,
    pub matches: usize,
}

/// Per-graph accuracies with the per-graph mean, its standard deviation,
/// and the pooled node-level figure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyReport {
    pub rows: Vec<AccuracyRow>,
    /// Free-form `key value` metadata written as `#` comment lines.
    pub meta: BTreeMap<String, String>,
}

impl AccuracyReport {
    pub fn push(&mut self, graph_id: impl Into<String>, tree: &RoutingTree, labels: &LayerMap) -> Result<()> {
        let (matches, total) = match_count(tree, labels)?;
        self.rows.push(AccuracyRow {
            graph_id: graph_id.into(),
            n_nodes: total,
            accuracy: matches as f64 / total as f64,
            dead_ends: tree.failures.len(),
            matches,
        });
        Ok(())
    }

    pub fn mean_accuracy(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.accuracy).sum::<f64>() / self.rows.len() as f64
    }

    /// Sample standard deviation of per-graph accuracy.
    pub fn std_accuracy(&self) -> f64 {
        let n = self.rows.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_accuracy();
        (self.rows.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn pooled_accuracy(&self) -> f64 {
        let nodes: usize = self.rows.iter().map(|r| r.n_nodes).sum();
        if nodes == 0 {
            return 0.0;
        }
        self.rows.iter().map(|r| r.matches).sum::<usize>() as f64 / nodes as f64
    }

    pub fn dead_ends(&self) -> usize {
        self.rows.iter().map(|r| r.dead_ends).sum()
    }

    pub fn mean_nodes(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.n_nodes).sum::<usize>() as f64 / self.rows.len() as f64
    }

    /// CSV with `graph_id,n_nodes,accuracy,dead_ends` rows followed by
    /// `mean`, `std` and `pooled` rows. Per-graph rows carry the match count
    /// implicitly through `accuracy * n_nodes`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k} {v}").unwrap();
        }
        out.push_str("graph_id,n_nodes,accuracy,dead_ends\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:?},{}", r.graph_id, r.n_nodes, r.accuracy, r.dead_ends).unwrap();
        }
        let total: usize = self.rows.iter().map(|r| r.n_nodes).sum();
        writeln!(
            out,
            "mean,{},{:?},{}",
            self.mean_nodes(),
            self.mean_accuracy(),
            self.dead_ends()
        )
        .unwrap();
        writeln!(out, "std,,{:?},", self.std_accuracy()).unwrap();
        writeln!(
            out,
            "pooled,{},{:?},{}",
            total,
            self.pooled_accuracy(),
            self.dead_ends()
        )
        .unwrap();
        out
    }

    /// Reads a CSV written by [`AccuracyReport::to_csv`]. Summary rows are
    /// recomputed from the per-graph rows and checked.
    pub fn from_csv(text: &str) -> Result<Self> {
        const WHAT: &str = "accuracy csv";
        let mut report = AccuracyReport::default();
        let mut saw_header = false;
        let mut summary = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once(' ') {
                    report.meta.insert(k.to_string(), v.trim().to_string());
                }
                continue;
            }
            if !saw_header {
                if line != "graph_id,n_nodes,accuracy,dead_ends" {
                    return Err(Error::parse(
                        WHAT,
                        "header",
                        format!("line {}: unexpected header", lineno + 1),
                    ));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    WHAT,
                    "row",
                    format!("line {}: expected 4 columns", lineno + 1),
                ));
            }
            match cols[0] {
                "mean" | "std" | "pooled" => {
                    summary.insert(cols[0].to_string(), parse_num::<f64>(WHAT, "accuracy", cols[2])?);
                }
                id => {
                    let n_nodes: usize = parse_num(WHAT, "n_nodes", cols[1])?;
                    let accuracy: f64 = parse_num(WHAT, "accuracy", cols[2])?;
                    if !(0.0..=1.0).contains(&accuracy) {
                        return Err(Error::parse(
                            WHAT,
                            "accuracy",
                            format!("line {}: outside [0, 1]", lineno + 1),
                        ));
                    }
                    let matches = (accuracy * n_nodes as f64).round() as usize;
                    report.rows.push(AccuracyRow {
                        graph_id: id.to_string(),
                        n_nodes,
                        accuracy,
                        dead_ends: parse_num(WHAT, "dead_ends", cols[3])?,
                        matches,
                    });
                }
            }
        }
        if !saw_header {
            return Err(Error::parse(WHAT, "header", "missing header"));
        }
        if let Some(&mean) = summary.get("mean") {
            if mean.to_bits() != report.mean_accuracy().to_bits() {
                return Err(Error::parse(WHAT, "mean", "mean row disagrees with per-graph rows"));
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;
    use crate::qtable::QTable;
    use crate::spt::build_tree;
    use std::collections::BTreeSet;

    fn line() -> (GraphInstance, [Location; 3]) {
        let p = GridParams::new(10, 2.0).unwrap();
        let (s, a, b) = (Location::new(0, 0), Location::new(0, 2), Location::new(0, 4));
        (GraphInstance::new(p, s, [a, b]).unwrap(), [s, a, b])
    }

    #[test]
    fn path_graph_layers() {
        let (g, [s, a, b]) = line();
        let l = bfs_layers(&g).unwrap();
        assert_eq!(l.layers, BTreeMap::from([(s, 0), (a, 1), (b, 2)]));
        assert_eq!(l.max_layer(), 2);
    }

    #[test]
    fn complete_graph_layers() {
        let p = GridParams::new(10, 13.0).unwrap();
        let nodes = [
            Location::new(0, 0),
            Location::new(9, 9),
            Location::new(3, 7),
            Location::new(8, 1),
        ];
        let g = GraphInstance::new(p, Location::new(5, 5), nodes).unwrap();
        let l = bfs_layers(&g).unwrap();
        assert!(nodes.iter().all(|&v| l.get(v) == Some(1)));
    }

    #[test]
    fn disconnected_is_an_error() {
        let p = GridParams::new(10, 2.0).unwrap();
        let g = GraphInstance::new(p, Location::new(0, 0), [Location::new(9, 9)]).unwrap();
        assert!(bfs_layers(&g).is_err());
        assert!(q_star(&g, 0.9).is_err());
    }

    #[test]
    fn oracle_tree_is_valid_and_exact() {
        let (g, [s, a, b]) = line();
        let t = oracle_tree(&g).unwrap();
        assert_eq!(t.parent, BTreeMap::from([(a, s), (b, a)]));
        assert!(validate_tree(&t, &g).is_valid());
        assert_eq!(routing_accuracy(&t, &bfs_layers(&g).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn q_star_values() {
        let (g, [s, a, b]) = line();
        let qs = q_star(&g, 0.9).unwrap();
        assert_eq!(qs[&(a, s)], 100.0);
        assert_eq!(qs[&(b, a)], 90.0);
        assert!((qs[&(a, b)] - 81.0).abs() < 1e-12);
        assert_eq!(qs.len(), 4);
        assert!((100.0 * 0.9f64.powi(3) - 72.9).abs() < 1e-12);
    }

    #[test]
    fn accuracy_of_perfect_and_shifted_trees() {
        let (g, [s, a, b]) = line();
        let mut q = QTable::new(*g.params());
        q.set(a, s, 100.0).unwrap();
        q.set(b, a, 90.0).unwrap();
        let t = build_tree(&g, &q);
        let labels = bfs_layers(&g).unwrap();
        assert_eq!(routing_accuracy(&t, &labels).unwrap(), 1.0);

        let mut shifted = t.clone();
        for (v, l) in shifted.predicted_layers.iter_mut() {
            if *v != s {
                *l += 1;
            }
        }
        assert_eq!(routing_accuracy(&shifted, &labels).unwrap(), 1.0 / 3.0);

        let mut other = t.clone();
        other.nodes.insert(Location::new(9, 9));
        assert!(routing_accuracy(&other, &labels).is_err());
    }

    #[test]
    fn failed_walks_never_match() {
        let (g, [s, a, b]) = line();
        let labels = bfs_layers(&g).unwrap();
        let tree = RoutingTree {
            sink: s,
            nodes: BTreeSet::from([s, a, b]),
            parent: BTreeMap::from([(a, s)]),
            predicted_layers: BTreeMap::from([(s, 0), (a, 1), (b, 2)]),
            failures: BTreeSet::from([b]),
        };
        assert_eq!(routing_accuracy(&tree, &labels).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn validation_flags_cycles_and_missing_edges() {
        let (g, [s, a, b]) = line();
        let base = RoutingTree {
            sink: s,
            nodes: BTreeSet::from([s, a, b]),
            parent: BTreeMap::from([(a, s), (b, a)]),
            predicted_layers: BTreeMap::from([(s, 0), (a, 1), (b, 2)]),
            failures: BTreeSet::new(),
        };
        assert!(validate_tree(&base, &g).is_valid());

        let mut cycle = base.clone();
        cycle.parent = BTreeMap::from([(a, b), (b, a)]);
        let r = validate_tree(&cycle, &g);
        assert_eq!(r.cyclic, vec![a, b]);
        assert!(r.missing_edges.is_empty());

        let mut skip = base.clone();
        skip.parent.insert(b, s);
        let r = validate_tree(&skip, &g);
        assert_eq!(r.missing_edges, vec![(b, s)]);
        assert!(r.cyclic.is_empty());

        let mut orphan = base;
        orphan.parent.remove(&a);
        assert_eq!(validate_tree(&orphan, &g).dangling, vec![a, b]);
    }

    #[test]
    fn csv_report_roundtrip_and_summary_rows() {
        let mut r = AccuracyReport::default();
        for (i, (acc, n)) in [(0.9, 100), (0.97, 100), (1.0, 100)].iter().enumerate() {
            r.rows.push(AccuracyRow {
                graph_id: format!("g{i:04}"),
                n_nodes: *n,
                accuracy: *acc,
                dead_ends: i,
                matches: (acc * *n as f64).round() as usize,
            });
        }
        r.meta.insert("train_nodes".into(), "300".into());
        let csv = r.to_csv();
        assert!(csv.starts_with("# train_nodes 300\ngraph_id,n_nodes,accuracy,dead_ends\n"));
        let mean = (0.9 + 0.97 + 1.0) / 3.0;
        assert!(csv.contains(&format!("mean,100,{mean:?},3\n")));
        assert!(csv.contains("pooled,300,0.9566666666666667,3\n"));
        let back = AccuracyReport::from_csv(&csv).unwrap();
        assert_eq!(back, r);
        assert!(AccuracyReport::from_csv("graph_id,n_nodes,accuracy,dead_ends\ng0,10,1.5,0\n").is_err());
        assert!(AccuracyReport::from_csv("g0,10,1.0,0\n").is_err());
    }
}
