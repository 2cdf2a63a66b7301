//! Tabular Q-learning over a sequence of graphs sharing one grid.
//!
//! A single [`QTable`] is threaded through every training graph in order.
//! Random draws happen in a fixed order so other runtimes can replay a
//! run decision for decision:
//!
//! 1. episode start node, uniform over non-sink nodes
//! 2. per step, the explore/exploit coin
//! 3. on explore, a uniform neighbor pick
//! 4. on exploit with several maximizers, a uniform pick among them
//!
//! The last two are drawn only when needed.

use std::collections::HashMap;

use log::{debug, info};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Location;
use crate::qtable::QTable;
use crate::topology::{GraphInstance, NodeId};

/// Reward for a transition into the sink.
pub const SINK_REWARD: f64 = 100.0;

/// Default episode cap, in steps per node of the graph.
pub const DEFAULT_STEP_CAP_PER_NODE: usize = 10;

/// Episodes per telemetry window.
pub const PROGRESS_WINDOW: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes_per_graph: u64,
    /// `None` caps episodes at [`DEFAULT_STEP_CAP_PER_NODE`] times the
    /// node count.
    pub max_steps_per_episode: Option<usize>,
}

impl Hyperparams {
    pub fn new(alpha: f64, gamma: f64, epsilon: f64, episodes_per_graph: u64) -> Result<Self> {
        let h = Self {
            alpha,
            gamma,
            epsilon,
            episodes_per_graph,
            max_steps_per_episode: None,
        };
        h.validate()?;
        Ok(h)
    }

    /// alpha = 0.9, gamma = 0.9, epsilon = 0.5 with the given episode count.
    pub fn standard(episodes_per_graph: u64) -> Self {
        Self {
            alpha: 0.9,
            gamma: 0.9,
            epsilon: 0.5,
            episodes_per_graph,
            max_steps_per_episode: None,
        }
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.max_steps_per_episode = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.max_steps_per_episode == Some(0) {
            return Err(Error::Config("max_steps_per_episode must be positive".into()));
        }
        Ok(())
    }

    pub fn step_cap(&self, n_nodes: usize) -> usize {
        self.max_steps_per_episode
            .unwrap_or(DEFAULT_STEP_CAP_PER_NODE * n_nodes)
            .max(1)
    }
}

/// 100 for a transition into the sink, 0 for any other graph neighbor.
pub fn reward(v: Location, u: Location, g: &GraphInstance) -> Result<f64> {
    if !g.has_edge(v, u) {
        return Err(Error::Domain(format!("{v} -> {u} is not a graph edge")));
    }
    Ok(if u == g.sink() { SINK_REWARD } else { 0.0 })
}

/// The Bellman target blended into the old value.
#[inline]
pub fn bellman_value(old: f64, reward: f64, max_next: f64, alpha: f64, gamma: f64) -> f64 {
    (1.0 - alpha) * old + alpha * (reward + gamma * max_next)
}

/// Max over a row of Q-values; 0 for an empty row.
#[inline]
pub fn row_max(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    match it.next() {
        Some(first) => it.fold(first, f64::max),
        None => 0.0,
    }
}

/// Epsilon-greedy choice over a row of Q-values, returning the position of
/// the chosen action. `values` must be non-empty.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    debug_assert!(!values.is_empty());
    let coin: f64 = rng.gen();
    if coin < epsilon {
        return rng.gen_range(0..values.len());
    }
    let best = row_max(values.iter().copied());
    let ties = values.iter().filter(|&&q| q == best).count();
    let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
    values
        .iter()
        .enumerate()
        .filter(|(_, &q)| q == best)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("maximizer exists")
}

/// Per-graph cache of Q-table coordinates for each adjacency entry.
pub(crate) struct GraphView<'g> {
    pub(crate) graph: &'g GraphInstance,
    pub(crate) rows: Vec<usize>,
    pub(crate) slots: Vec<Vec<usize>>,
}

impl<'g> GraphView<'g> {
    pub(crate) fn new(graph: &'g GraphInstance, q: &QTable) -> Result<Self> {
        if graph.params() != q.params() {
            return Err(Error::Config("graph and Q-table use different grids".into()));
        }
        let p = graph.params();
        let rows = graph.nodes().iter().map(|&v| p.index_unchecked(v)).collect();
        let slots = (0..graph.len())
            .map(|v| {
                graph
                    .neighbors(v)
                    .iter()
                    .map(|&u| {
                        q.slot(graph.location(v), graph.location(u))
                            .expect("graph edges are grid neighbors")
                    })
                    .collect()
            })
            .collect();
        Ok(Self { graph, rows, slots })
    }

    pub(crate) fn row_values(&self, q: &QTable, v: NodeId, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.slots[v].iter().map(|&s| q.get_slot(self.rows[v], s)));
    }

    pub(crate) fn max_q(&self, q: &QTable, v: NodeId) -> f64 {
        row_max(self.slots[v].iter().map(|&s| q.get_slot(self.rows[v], s)))
    }
}

pub fn select_action<R: Rng + ?Sized>(
    v: Location,
    g: &GraphInstance,
    q: &QTable,
    epsilon: f64,
    rng: &mut R,
) -> Result<Location> {
    let id = g
        .id_of(v)
        .ok_or_else(|| Error::Domain(format!("{v} is not a node of the graph")))?;
    let neighbors = g.neighbors(id);
    if neighbors.is_empty() {
        return Err(Error::Domain(format!("dead end: {v} has no neighbors")));
    }
    let values: Vec<f64> = neighbors.iter().map(|&u| q.get(v, g.location(u))).collect();
    Ok(g.location(neighbors[epsilon_greedy(&values, epsilon, rng)]))
}

/// Applies one Bellman update to `Q(v, u)` and returns the new value.
pub fn bellman_update(
    q: &mut QTable,
    v: Location,
    u: Location,
    r: f64,
    g: &GraphInstance,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    if !g.has_edge(v, u) {
        return Err(Error::Domain(format!("{v} -> {u} is not a graph edge")));
    }
    let next = g.graph_neighbors(u)?;
    let max_next = row_max(next.iter().map(|&w| q.get(u, w)));
    let value = bellman_value(q.get(v, u), r, max_next, alpha, gamma);
    q.set(v, u, value)?;
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    Sink,
    DeadEnd,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeRecord {
    pub steps: usize,
    pub end: EpisodeEnd,
}

impl EpisodeRecord {
    pub fn reached_sink(&self) -> bool {
        self.end == EpisodeEnd::Sink
    }
}

/// `(from_index, to_index)` -> number of updates applied to that entry.
pub type VisitCounts = HashMap<(usize, usize), u64>;

fn episode_from<R: Rng + ?Sized>(
    view: &GraphView<'_>,
    q: &mut QTable,
    h: &Hyperparams,
    start: NodeId,
    rng: &mut R,
    mut visits: Option<&mut VisitCounts>,
    buf: &mut Vec<f64>,
) -> EpisodeRecord {
    let g = view.graph;
    let sink = g.sink_id();
    let cap = h.step_cap(g.len());
    let mut v = start;
    let mut steps = 0;
    while v != sink {
        if steps >= cap {
            return EpisodeRecord {
                steps,
                end: EpisodeEnd::Truncated,
            };
        }
        let neighbors = g.neighbors(v);
        if neighbors.is_empty() {
            return EpisodeRecord {
                steps,
                end: EpisodeEnd::DeadEnd,
            };
        }
        view.row_values(q, v, buf);
        let k = epsilon_greedy(buf, h.epsilon, rng);
        let u = neighbors[k];
        let r = if u == sink { SINK_REWARD } else { 0.0 };
        let max_next = view.max_q(q, u);
        let (row, slot) = (view.rows[v], view.slots[v][k]);
        let value = bellman_value(q.get_slot(row, slot), r, max_next, h.alpha, h.gamma);
        q.set_slot(row, slot, value);
        if let Some(counts) = visits.as_deref_mut() {
            *counts.entry((row, view.rows[u])).or_default() += 1;
        }
        v = u;
        steps += 1;
    }
    EpisodeRecord {
        steps,
        end: EpisodeEnd::Sink,
    }
}

/// Runs one episode from `start`, updating `q` in place.
pub fn run_episode<R: Rng + ?Sized>(
    g: &GraphInstance,
    q: &mut QTable,
    h: &Hyperparams,
    start: Location,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    let id = g
        .id_of(start)
        .ok_or_else(|| Error::Domain(format!("{start} is not a node of the graph")))?;
    if id == g.sink_id() {
        return Err(Error::Domain("episodes cannot start at the sink".into()));
    }
    let view = GraphView::new(g, q)?;
    Ok(episode_from(&view, q, h, id, rng, None, &mut Vec::new()))
}

/// Mean episode length over one telemetry window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressPoint {
    pub graph: usize,
    pub episodes: u64,
    pub mean_steps: f64,
    pub sink_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub episodes: u64,
    pub updates: u64,
    pub reached_sink: u64,
    pub dead_ends: u64,
    pub truncated: u64,
    pub progress: Vec<ProgressPoint>,
    pub visits: Option<VisitCounts>,
}

impl TrainReport {
    pub fn mean_steps(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.updates as f64 / self.episodes as f64
        }
    }
}

/// Checks that every graph shares the first graph's grid and sink.
pub fn check_curriculum(graphs: &[GraphInstance]) -> Result<()> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::Config("training needs at least one graph".into()))?;
    for (m, g) in graphs.iter().enumerate().skip(1) {
        if g.params() != first.params() {
            return Err(Error::Config(format!("graph {m} uses a different grid than graph 0")));
        }
        if g.sink() != first.sink() {
            return Err(Error::Config(format!(
                "graph {m} has sink {} instead of {}",
                g.sink(),
                first.sink()
            )));
        }
    }
    Ok(())
}

/// Training driver with optional instrumentation.
#[derive(Debug, Clone)]
pub struct Trainer {
    hyper: Hyperparams,
    record_visits: bool,
}

impl Trainer {
    pub fn new(hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            hyper,
            record_visits: false,
        })
    }

    /// Count updates per Q-table entry.
    pub fn record_visits(mut self, on: bool) -> Self {
        self.record_visits = on;
        self
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn run<R: Rng + ?Sized>(&self, graphs: &[GraphInstance], rng: &mut R) -> Result<(QTable, TrainReport)> {
        check_curriculum(graphs)?;
        let mut q = QTable::new(*graphs[0].params());
        let report = self.run_on(&mut q, graphs, rng)?;
        Ok((q, report))
    }

    /// Continues training an existing table.
    pub fn run_on<R: Rng + ?Sized>(
        &self,
        q: &mut QTable,
        graphs: &[GraphInstance],
        rng: &mut R,
    ) -> Result<TrainReport> {
        check_curriculum(graphs)?;
        let h = &self.hyper;
        let mut report = TrainReport {
            visits: self.record_visits.then(VisitCounts::new),
            ..TrainReport::default()
        };
        let mut buf = Vec::new();
        let (mut win_eps, mut win_steps, mut win_sink) = (0u64, 0u64, 0u64);
        for (m, g) in graphs.iter().enumerate() {
            let view = GraphView::new(g, q)?;
            let starts: Vec<NodeId> = (0..g.len()).filter(|&v| v != g.sink_id()).collect();
            if starts.is_empty() {
                debug!("graph {m} has no nodes besides the sink, skipping");
                continue;
            }
            for _ in 0..h.episodes_per_graph {
                let start = starts[rng.gen_range(0..starts.len())];
                let rec = episode_from(&view, q, h, start, rng, report.visits.as_mut(), &mut buf);
                report.episodes += 1;
                report.updates += rec.steps as u64;
                match rec.end {
                    EpisodeEnd::Sink => report.reached_sink += 1,
                    EpisodeEnd::DeadEnd => report.dead_ends += 1,
                    EpisodeEnd::Truncated => report.truncated += 1,
                }
                win_eps += 1;
                win_steps += rec.steps as u64;
                win_sink += u64::from(rec.reached_sink());
                if win_eps == PROGRESS_WINDOW {
                    let point = ProgressPoint {
                        graph: m,
                        episodes: report.episodes,
                        mean_steps: win_steps as f64 / win_eps as f64,
                        sink_rate: win_sink as f64 / win_eps as f64,
                    };
                    debug!(
                        "graph {m}: {} episodes, mean steps {:.2}, sink rate {:.3}",
                        point.episodes, point.mean_steps, point.sink_rate
                    );
                    report.progress.push(point);
                    (win_eps, win_steps, win_sink) = (0, 0, 0);
                }
            }
        }
        info!(
            "trained {} episodes over {} graphs, mean steps {:.2}, truncated {}",
            report.episodes,
            graphs.len(),
            report.mean_steps(),
            report.truncated
        );
        Ok(report)
    }
}

/// Trains one shared table over `graphs` in order.
pub fn train<R: Rng + ?Sized>(graphs: &[GraphInstance], h: &Hyperparams, rng: &mut R) -> Result<QTable> {
    Trainer::new(*h)?.run(graphs, rng).map(|(q, _)| q)
}
