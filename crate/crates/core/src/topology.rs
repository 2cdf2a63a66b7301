//! Random geometric network instances with a fixed sink.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridParams, Location, Stencil};

/// Whole-graph rejection budget for [`generate_graph`].
pub const GENERATION_RETRIES: u32 = 1000;

const NO_NODE: u32 = u32::MAX;

/// Dense node id inside one [`GraphInstance`]. Ids follow the linear index
/// order of the node locations.
pub type NodeId = usize;

/// One network: distinct nodes on the grid, unit-disk edges, and a sink.
#[derive(Debug, Clone)]
pub struct GraphInstance {
    params: GridParams,
    sink: Location,
    sink_id: NodeId,
    nodes: Vec<Location>,
    adjacency: Vec<Vec<NodeId>>,
    lookup: Vec<u32>,
}

impl PartialEq for GraphInstance {
    fn eq(&self, other: &Self) -> bool {
        // adjacency and lookup are functions of the rest
        self.params == other.params && self.sink == other.sink && self.nodes == other.nodes
    }
}

impl GraphInstance {
    /// Builds an instance from node locations. The sink is added if it is
    /// missing. Connectivity is not required here; see
    /// [`GraphInstance::reachability`].
    pub fn new(params: GridParams, sink: Location, nodes: impl IntoIterator<Item = Location>) -> Result<Self> {
        params.check(sink)?;
        let mut lookup = vec![NO_NODE; params.cells()];
        let mut idx = Vec::new();
        for loc in nodes {
            params.check(loc)?;
            let i = params.index_unchecked(loc);
            if lookup[i] != NO_NODE {
                return Err(Error::Domain(format!("duplicate node location {loc}")));
            }
            lookup[i] = 0;
            idx.push(i);
        }
        let s = params.index_unchecked(sink);
        if lookup[s] == NO_NODE {
            lookup[s] = 0;
            idx.push(s);
        }
        idx.sort_unstable();
        let nodes: Vec<Location> = idx
            .iter()
            .map(|&i| params.location(i).expect("index in range"))
            .collect();
        for (id, &i) in idx.iter().enumerate() {
            lookup[i] = id as u32;
        }
        let sink_id = lookup[s] as usize;
        let adjacency = build_adjacency(&params, &nodes, &lookup);
        Ok(Self {
            params,
            sink,
            sink_id,
            nodes,
            adjacency,
            lookup,
        })
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn sink(&self) -> Location {
        self.sink
    }

    pub fn sink_id(&self) -> NodeId {
        self.sink_id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node locations sorted by linear index.
    pub fn nodes(&self) -> &[Location] {
        &self.nodes
    }

    pub fn location(&self, id: NodeId) -> Location {
        self.nodes[id]
    }

    pub fn id_of(&self, loc: Location) -> Option<NodeId> {
        if !self.params.contains(loc) {
            return None;
        }
        match self.lookup[self.params.index_unchecked(loc)] {
            NO_NODE => None,
            id => Some(id as usize),
        }
    }

    pub fn contains(&self, loc: Location) -> bool {
        self.id_of(loc).is_some()
    }

    /// Neighbor ids of `id`, sorted by linear index.
    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id]
    }

    /// Graph-specific neighbors: grid neighbors of `v` that are nodes.
    pub fn graph_neighbors(&self, v: Location) -> Result<Vec<Location>> {
        let id = self
            .id_of(v)
            .ok_or_else(|| Error::Domain(format!("{v} is not a node of the graph")))?;
        Ok(self.adjacency[id].iter().map(|&u| self.nodes[u]).collect())
    }

    pub fn has_edge(&self, a: Location, b: Location) -> bool {
        a != b && self.contains(a) && self.contains(b) && self.params.in_range(a, b)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(a, b)` with `a < b` in id order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    /// Breadth-first reachability from the sink. Returns whether every node
    /// is reachable, and the unreachable locations.
    pub fn reachability(&self) -> (bool, Vec<Location>) {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.sink_id]);
        seen[self.sink_id] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        let unreachable: Vec<Location> = seen
            .iter()
            .zip(&self.nodes)
            .filter(|(s, _)| !**s)
            .map(|(_, &l)| l)
            .collect();
        (unreachable.is_empty(), unreachable)
    }

    pub fn is_connected_to_sink(&self) -> bool {
        self.reachability().0
    }
}

fn build_adjacency(params: &GridParams, nodes: &[Location], lookup: &[u32]) -> Vec<Vec<NodeId>> {
    let n = nodes.len();
    let stencil = Stencil::new(params);
    if n <= 2 * stencil.len() {
        let mut adj = vec![Vec::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                if params.in_range(nodes[a], nodes[b]) {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        // ids are index-ordered, and pushes above happen in increasing order
        adj
    } else {
        nodes
            .iter()
            .map(|&v| {
                let mut ns: Vec<NodeId> = stencil
                    .offsets()
                    .iter()
                    .filter_map(|&(dx, dy)| stencil.apply(params, v, dx, dy))
                    .map(|u| lookup[params.index_unchecked(u)])
                    .filter(|&id| id != NO_NODE)
                    .map(|id| id as usize)
                    .collect();
                ns.sort_unstable();
                ns
            })
            .collect()
    }
}

/// Samples a connected random geometric graph: the sink plus `n_nodes - 1`
/// distinct uniform locations, regenerated until every node reaches the sink.
pub fn generate_graph(params: GridParams, n_nodes: usize, sink: Location, seed: u64) -> Result<GraphInstance> {
    params.check(sink)?;
    if n_nodes == 0 {
        return Err(Error::Domain("a graph needs at least the sink".into()));
    }
    if n_nodes > params.cells() {
        return Err(Error::Domain(format!(
            "{n_nodes} nodes do not fit on a grid of {} cells",
            params.cells()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sink_idx = params.index_unchecked(sink);
    let mut unreachable = 0;
    for _ in 0..GENERATION_RETRIES {
        let picks = index::sample(&mut rng, params.cells() - 1, n_nodes - 1);
        let nodes = picks.into_iter().map(|i| {
            let i = if i >= sink_idx { i + 1 } else { i };
            params.location(i).expect("sampled index in range")
        });
        let g = GraphInstance::new(params, sink, nodes)?;
        let (ok, missing) = g.reachability();
        if ok {
            return Ok(g);
        }
        unreachable = missing.len();
    }
    Err(Error::Generation {
        attempts: GENERATION_RETRIES,
        reason: format!("last sample left {unreachable} nodes unreachable from the sink"),
    })
}

/// Textual graph document. Edges are implied by the range predicate.
pub fn serialize_graph(g: &GraphInstance) -> String {
    let mut out = String::new();
    let p = g.params();
    writeln!(out, "W {}", p.width()).unwrap();
    writeln!(out, "R {}", p.range()).unwrap();
    writeln!(out, "sink_x {}", g.sink().x).unwrap();
    writeln!(out, "sink_y {}", g.sink().y).unwrap();
    writeln!(out, "n {}", g.len()).unwrap();
    for v in g.nodes() {
        writeln!(out, "{} {}", v.x, v.y).unwrap();
    }
    out
}

/// Parses a graph document and checks every instance invariant, including
/// connectivity to the sink. An optional trailing `edges <m>` block of
/// `x1 y1 x2 y2` lines is accepted and must match the range predicate.
pub fn parse_graph(text: &str) -> Result<GraphInstance> {
    const WHAT: &str = "graph";
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut header = |key: &str| -> Result<String> {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, key, "missing header line"))?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(v), None) if k == key => Ok(v.to_string()),
            _ => Err(Error::parse(
                WHAT,
                key,
                format!("line {}: expected `{key} <value>`, got `{line}`", lineno + 1),
            )),
        }
    };
    let width: u32 = parse_num(WHAT, "W", &header("W")?)?;
    let range: f64 = parse_num(WHAT, "R", &header("R")?)?;
    let sink_x: u32 = parse_num(WHAT, "sink_x", &header("sink_x")?)?;
    let sink_y: u32 = parse_num(WHAT, "sink_y", &header("sink_y")?)?;
    let n: usize = parse_num(WHAT, "n", &header("n")?)?;
    let params = GridParams::new(width, range).map_err(|e| Error::parse(WHAT, "W/R", e.to_string()))?;
    let sink = Location::new(sink_x, sink_y);
    params
        .check(sink)
        .map_err(|e| Error::parse(WHAT, "sink", e.to_string()))?;

    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, "nodes", format!("expected {n} nodes, found {k}")))?;
        let nums = parse_ints(WHAT, "nodes", lineno, line, 2)?;
        let loc = Location::new(nums[0], nums[1]);
        params
            .check(loc)
            .map_err(|e| Error::parse(WHAT, "nodes", format!("line {}: {e}", lineno + 1)))?;
        nodes.push(loc);
    }
    if !nodes.contains(&sink) {
        return Err(Error::parse(
            WHAT,
            "sink",
            format!("sink {sink} is not among the nodes"),
        ));
    }
    let g = GraphInstance::new(params, sink, nodes.iter().copied())
        .map_err(|e| Error::parse(WHAT, "nodes", e.to_string()))?;

    if let Some((lineno, line)) = lines.next() {
        let m = match line.split_whitespace().collect::<Vec<_>>()[..] {
            ["edges", m] => parse_num::<usize>(WHAT, "edges", m)?,
            _ => {
                return Err(Error::parse(
                    WHAT,
                    "edges",
                    format!("line {}: unexpected trailing content `{line}`", lineno + 1),
                ))
            }
        };
        let mut listed = std::collections::BTreeSet::new();
        for _ in 0..m {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(WHAT, "edges", format!("expected {m} edges")))?;
            let e = parse_ints(WHAT, "edges", lineno, line, 4)?;
            let (a, b) = (Location::new(e[0], e[1]), Location::new(e[2], e[3]));
            if !g.has_edge(a, b) {
                return Err(Error::parse(
                    WHAT,
                    "edges",
                    format!("line {}: {a}-{b} is not within range", lineno + 1),
                ));
            }
            listed.insert((a.min(b), a.max(b)));
        }
        if listed.len() != g.edge_count() {
            return Err(Error::parse(
                WHAT,
                "edges",
                format!(
                    "edge list has {} edges but the range predicate gives {}",
                    listed.len(),
                    g.edge_count()
                ),
            ));
        }
        if let Some((lineno, _)) = lines.next() {
            return Err(Error::parse(
                WHAT,
                "edges",
                format!("line {}: trailing content", lineno + 1),
            ));
        }
    }

    let (ok, missing) = g.reachability();
    if !ok {
        return Err(Error::parse(
            WHAT,
            "nodes",
            format!("{} nodes cannot reach the sink, e.g. {}", missing.len(), missing[0]),
        ));
    }
    Ok(g)
}

pub(crate) fn parse_num<T: std::str::FromStr>(what: &'static str, field: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>()
        .map_err(|e| Error::parse(what, field, format!("`{s}`: {e}")))
}

fn parse_ints(what: &'static str, field: &str, lineno: usize, line: &str, count: usize) -> Result<Vec<u32>> {
    let nums: Vec<u32> = line
        .split_whitespace()
        .map(|s| parse_num(what, field, s))
        .collect::<Result<_>>()?;
    if nums.len() != count {
        return Err(Error::parse(
            what,
            field,
            format!("line {}: expected {count} integers, got `{line}`", lineno + 1),
        ));
    }
    Ok(nums)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: u32, r: f64) -> GridParams {
        GridParams::new(w, r).unwrap()
    }

    #[test]
    fn graph_neighbors_small_fixture() {
        let g = GraphInstance::new(
            params(10, 2.0),
            Location::new(0, 0),
            [Location::new(0, 1), Location::new(5, 5)],
        )
        .unwrap();
        assert_eq!(
            g.graph_neighbors(Location::new(0, 0)).unwrap(),
            vec![Location::new(0, 1)]
        );
        assert!(g.graph_neighbors(Location::new(5, 5)).unwrap().is_empty());
        assert!(g.graph_neighbors(Location::new(4, 4)).is_err());
    }

    #[test]
    fn range_boundary_includes_sink() {
        let sink = Location::new(50, 50);
        let g = GraphInstance::new(params(100, 20.0), sink, [Location::new(50, 70)]).unwrap();
        assert_eq!(g.graph_neighbors(Location::new(50, 70)).unwrap(), vec![sink]);
    }

    #[test]
    fn singleton_and_disconnected_pair() {
        let sink = Location::new(50, 50);
        let g = generate_graph(params(100, 20.0), 1, sink, 3).unwrap();
        assert_eq!(g.nodes(), &[sink]);
        assert_eq!(g.reachability(), (true, vec![]));

        let far = Location::new(0, 0);
        let g = GraphInstance::new(params(100, 20.0), sink, [far]).unwrap();
        assert_eq!(g.reachability(), (false, vec![far]));
    }

    #[test]
    fn duplicate_locations_rejected() {
        let r = GraphInstance::new(
            params(10, 2.0),
            Location::new(0, 0),
            [Location::new(1, 1), Location::new(1, 1)],
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn too_many_nodes_rejected() {
        let r = generate_graph(params(100, 20.0), 20_000, Location::new(50, 50), 1);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn generation_failure_reports_attempts() {
        // unit range on a 100x100 grid practically never connects
        let r = generate_graph(params(100, 1.0), 3, Location::new(0, 0), 9);
        match r {
            Err(Error::Generation { attempts, .. }) => assert_eq!(attempts, GENERATION_RETRIES),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn near_diagonal_range_gives_complete_graph() {
        let g = generate_graph(params(100, 141.0), 10, Location::new(50, 50), 11).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g.edge_count(), 45);
        for a in g.nodes() {
            for b in g.nodes() {
                if a != b {
                    assert!(a.euclid_dist(*b) <= 141.0);
                }
            }
        }
    }

    #[test]
    fn generated_graph_is_connected_and_deterministic() {
        let p = params(100, 20.0);
        let sink = Location::new(50, 50);
        let g = generate_graph(p, 100, sink, 42).unwrap();
        assert_eq!(g.len(), 100);
        assert!(g.contains(sink));
        assert!(g.is_connected_to_sink());
        let h = generate_graph(p, 100, sink, 42).unwrap();
        assert_eq!(serialize_graph(&g), serialize_graph(&h));
        let k = generate_graph(p, 100, sink, 43).unwrap();
        assert_ne!(g, k);
    }

    #[test]
    fn adjacency_matches_brute_force() {
        let p = params(100, 20.0);
        for seed in 0..5 {
            let g = generate_graph(p, 150, Location::new(50, 50), seed).unwrap();
            for (a, &va) in g.nodes().iter().enumerate() {
                let want: Vec<usize> = (0..g.len())
                    .filter(|&b| b != a && va.euclid_dist(g.location(b)) <= 20.0)
                    .collect();
                assert_eq!(g.neighbors(a), &want[..]);
            }
        }
    }

    #[test]
    fn dense_path_matches_pairwise_path() {
        // enough nodes to take the stencil branch of build_adjacency
        let p = params(12, 2.0);
        let all: Vec<Location> = (0..12)
            .flat_map(|x| (0..12).map(move |y| Location::new(x, y)))
            .collect();
        let g = GraphInstance::new(p, Location::new(6, 6), all.iter().copied()).unwrap();
        for (a, &va) in g.nodes().iter().enumerate() {
            let want: Vec<usize> = (0..g.len())
                .filter(|&b| b != a && p.in_range(va, g.location(b)))
                .collect();
            assert_eq!(g.neighbors(a), &want[..]);
        }
    }

    #[test]
    fn mean_degree_sanity_band() {
        let p = params(100, 20.0);
        let n = 200;
        let mut total = 0.0;
        for seed in 0..100 {
            let g = generate_graph(p, n, Location::new(50, 50), 1000 + seed).unwrap();
            total += 2.0 * g.edge_count() as f64 / g.len() as f64;
        }
        let mean = total / 100.0;
        let interior = n as f64 * std::f64::consts::PI * 400.0 / 10_000.0;
        // boundary effects only lower the degree
        assert!(
            mean <= interior * 1.25 && mean >= interior * 0.75,
            "mean {mean} vs {interior}"
        );
    }

    #[test]
    fn parse_roundtrip_and_rejections() {
        let g = generate_graph(params(30, 8.0), 40, Location::new(15, 15), 5).unwrap();
        let text = serialize_graph(&g);
        assert_eq!(parse_graph(&text).unwrap(), g);

        let dup = "W 10\nR 2\nsink_x 0\nsink_y 0\nn 3\n0 0\n0 1\n0 1\n";
        assert!(matches!(parse_graph(dup), Err(Error::Parse { .. })));

        let no_sink = "W 10\nR 2\nsink_x 0\nsink_y 0\nn 1\n0 1\n";
        assert!(matches!(parse_graph(no_sink), Err(Error::Parse { ref field, .. }) if field == "sink"));

        let short = "W 10\nR 2\nsink_x 0\nsink_y 0\nn 3\n0 0\n0 1\n";
        assert!(parse_graph(short).is_err());

        let disconnected = "W 10\nR 2\nsink_x 0\nsink_y 0\nn 2\n0 0\n9 9\n";
        assert!(parse_graph(disconnected).is_err());

        let bad_header = "W 10\nRange 2\nsink_x 0\nsink_y 0\nn 1\n0 0\n";
        assert!(matches!(parse_graph(bad_header), Err(Error::Parse { ref field, .. }) if field == "R"));
    }

    #[test]
    fn parse_checks_optional_edge_list() {
        let base = "W 10\nR 2\nsink_x 0\nsink_y 0\nn 3\n0 0\n0 1\n0 3\n";
        let good = format!("{base}edges 2\n0 0 0 1\n0 1 0 3\n");
        assert!(parse_graph(&good).is_ok());
        // (0,0)-(0,3) is at distance 3 > R
        let wrong = format!("{base}edges 3\n0 0 0 1\n0 1 0 3\n0 0 0 3\n");
        assert!(matches!(parse_graph(&wrong), Err(Error::Parse { ref field, .. }) if field == "edges"));
        let missing = format!("{base}edges 1\n0 0 0 1\n");
        assert!(parse_graph(&missing).is_err());
    }
}
