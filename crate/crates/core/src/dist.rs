//! Training as per-node agents that only exchange max-Q summaries.
//!
//! Each node owns its row `Q(v, .)`. When `v` updates `Q(v, u)` it needs
//! `max_u' Q(u, u')`, which arrives as a [`QSummaryMsg`] from `u` over a
//! lossless, ordered message layer. In the default [`SummaryMode::PullFresh`]
//! mode the summary is requested at update time and the run replays the
//! centralized trainer exactly, given the same seed.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Location;
use crate::qlearn::{bellman_value, check_curriculum, epsilon_greedy, row_max, EpisodeEnd, Hyperparams, SINK_REWARD};
use crate::qtable::QTable;
use crate::topology::{GraphInstance, NodeId};

/// One max-Q summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSummaryMsg {
    pub sender: Location,
    pub max_q: f64,
}

/// A node's local learner state.
#[derive(Debug, Clone)]
pub struct NodeAgent {
    location: Location,
    neighbors: Vec<Location>,
    q_row: Vec<f64>,
    /// Last summary heard from each neighbor (stale-cache mode only).
    neighbor_max_cache: Vec<Option<f64>>,
    summaries_received: u64,
    summaries_served: u64,
}

impl NodeAgent {
    pub fn new(location: Location, neighbors: Vec<Location>, q_row: Vec<f64>) -> Result<Self> {
        if neighbors.len() != q_row.len() {
            return Err(Error::Domain("q_row must have one value per neighbor".into()));
        }
        Ok(Self {
            location,
            neighbor_max_cache: vec![None; neighbors.len()],
            neighbors,
            q_row,
            summaries_received: 0,
            summaries_served: 0,
        })
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn neighbors(&self) -> &[Location] {
        &self.neighbors
    }

    pub fn q_row(&self) -> &[f64] {
        &self.q_row
    }

    pub fn q(&self, u: Location) -> Option<f64> {
        self.position(u).map(|k| self.q_row[k])
    }

    pub fn summaries_received(&self) -> u64 {
        self.summaries_received
    }

    pub fn cached_max(&self, u: Location) -> Option<f64> {
        self.position(u).and_then(|k| self.neighbor_max_cache[k])
    }

    fn position(&self, u: Location) -> Option<usize> {
        self.neighbors.iter().position(|&n| n == u)
    }

    fn max_q(&self) -> f64 {
        row_max(self.q_row.iter().copied())
    }

    /// This agent's current summary. Serving one is the only way another
    /// agent learns anything about this row.
    fn serve_summary(&mut self) -> QSummaryMsg {
        self.summaries_served += 1;
        QSummaryMsg {
            sender: self.location,
            max_q: self.max_q(),
        }
    }

    /// Bellman update of `Q(v, u)` with the max term taken from `summary`.
    pub fn agent_update(&mut self, u: Location, r: f64, summary: &QSummaryMsg, alpha: f64, gamma: f64) -> Result<f64> {
        if summary.sender != u {
            return Err(Error::Protocol(format!(
                "{} expected a summary from {u}, got one from {}",
                self.location, summary.sender
            )));
        }
        let k = self
            .position(u)
            .ok_or_else(|| Error::Protocol(format!("{u} is not a neighbor of {}", self.location)))?;
        Ok(self.update_at(k, r, summary.max_q, alpha, gamma))
    }

    fn update_at(&mut self, k: usize, r: f64, max_next: f64, alpha: f64, gamma: f64) -> f64 {
        self.summaries_received += 1;
        let value = bellman_value(self.q_row[k], r, max_next, alpha, gamma);
        self.q_row[k] = value;
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SummaryMode {
    /// Summaries are requested at update time.
    #[default]
    PullFresh,
    /// Agents push their max on change; deliveries land `delay` updates
    /// later, and updates use the last value received.
    StaleCache { delay: u64 },
}

/// One row of the optional message trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub sender: Location,
    pub receiver: Location,
    pub max_q: f64,
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("step,sender_x,sender_y,receiver_x,receiver_y,max_q\n");
    for t in trace {
        writeln!(
            out,
            "{},{},{},{},{},{:?}",
            t.step, t.sender.x, t.sender.y, t.receiver.x, t.receiver.y, t.max_q
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MessageStats {
    pub messages: u64,
    pub updates: u64,
    pub episodes: u64,
    pub reached_sink: u64,
    pub truncated: u64,
    pub dead_ends: u64,
    /// Summaries served by agents; equals `messages` when no agent reads
    /// another agent's row directly.
    pub summaries_served: u64,
    /// Size of the largest message payload, in bytes.
    pub max_payload_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub qtable: QTable,
    pub stats: MessageStats,
    pub trace: Vec<TraceRecord>,
}

/// Lossless ordered delivery between one-hop neighbors.
struct MessageLayer {
    messages: u64,
    trace: Option<Vec<TraceRecord>>,
    pending: VecDeque<(u64, NodeId, usize, QSummaryMsg)>,
}

impl MessageLayer {
    fn send(&mut self, clock: u64, g: &GraphInstance, from: NodeId, to: NodeId, msg: QSummaryMsg) -> Result<()> {
        if !g.neighbors(to).contains(&from) {
            return Err(Error::Protocol(format!(
                "{} and {} are not neighbors",
                g.location(from),
                g.location(to)
            )));
        }
        self.messages += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord {
                step: clock,
                sender: msg.sender,
                receiver: g.location(to),
                max_q: msg.max_q,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DistributedRuntime {
    hyper: Hyperparams,
    mode: SummaryMode,
    walkers: usize,
    trace: bool,
}

struct Walker {
    at: NodeId,
    steps: usize,
}

impl DistributedRuntime {
    pub fn new(hyper: Hyperparams) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            hyper,
            mode: SummaryMode::PullFresh,
            walkers: 1,
            trace: false,
        })
    }

    pub fn mode(mut self, mode: SummaryMode) -> Self {
        self.mode = mode;
        self
    }

    /// Number of episodes in flight at once, stepped round-robin. Anything
    /// above 1 changes the draw order, so the run no longer matches the
    /// centralized trainer.
    pub fn walkers(mut self, n: usize) -> Self {
        self.walkers = n.max(1);
        self
    }

    pub fn trace(mut self, on: bool) -> Self {
        self.trace = on;
        self
    }

    pub fn run<R: Rng + ?Sized>(&self, graphs: &[GraphInstance], rng: &mut R) -> Result<DistributedRun> {
        check_curriculum(graphs)?;
        let mut q = QTable::new(*graphs[0].params());
        let mut layer = MessageLayer {
            messages: 0,
            trace: self.trace.then(Vec::new),
            pending: VecDeque::new(),
        };
        let mut stats = MessageStats {
            max_payload_bytes: std::mem::size_of::<f64>(),
            ..Default::default()
        };
        for g in graphs {
            self.run_graph(g, &mut q, &mut layer, &mut stats, rng)?;
        }
        stats.messages = layer.messages;
        Ok(DistributedRun {
            qtable: q,
            stats,
            trace: layer.trace.unwrap_or_default(),
        })
    }

    fn run_graph<R: Rng + ?Sized>(
        &self,
        g: &GraphInstance,
        q: &mut QTable,
        layer: &mut MessageLayer,
        stats: &mut MessageStats,
        rng: &mut R,
    ) -> Result<()> {
        let h = &self.hyper;
        // agents pick up the location's row from the shared table
        let mut agents: Vec<NodeAgent> = (0..g.len())
            .map(|v| {
                let loc = g.location(v);
                let neighbors: Vec<Location> = g.neighbors(v).iter().map(|&u| g.location(u)).collect();
                let row = neighbors.iter().map(|&u| q.get(loc, u)).collect();
                NodeAgent::new(loc, neighbors, row)
            })
            .collect::<Result<_>>()?;
        // position of v within each neighbor's list, for cache delivery
        let back_index: Vec<Vec<usize>> = (0..g.len())
            .map(|v| {
                g.neighbors(v)
                    .iter()
                    .map(|&u| g.neighbors(u).binary_search(&v).expect("symmetric adjacency"))
                    .collect()
            })
            .collect();

        layer.pending.clear();
        let mut clock = 0u64;
        if let SummaryMode::StaleCache { .. } = self.mode {
            for v in 0..g.len() {
                self.broadcast(g, &mut agents, &back_index, layer, v, clock, 0)?;
            }
        }

        let starts: Vec<NodeId> = (0..g.len()).filter(|&v| v != g.sink_id()).collect();
        if !starts.is_empty() && h.episodes_per_graph > 0 {
            let cap = h.step_cap(g.len());
            let mut remaining = h.episodes_per_graph;
            let mut active: Vec<Walker> = Vec::new();
            while active.len() < self.walkers && remaining > 0 {
                remaining -= 1;
                active.push(Walker {
                    at: starts[rng.gen_range(0..starts.len())],
                    steps: 0,
                });
            }
            let mut i = 0;
            while !active.is_empty() {
                let w = &mut active[i];
                let end = if w.steps >= cap {
                    Some(EpisodeEnd::Truncated)
                } else if g.neighbors(w.at).is_empty() {
                    Some(EpisodeEnd::DeadEnd)
                } else {
                    self.deliver_due(&mut agents, layer, clock);
                    let v = w.at;
                    let k = epsilon_greedy(agents[v].q_row(), h.epsilon, rng);
                    let u = g.neighbors(v)[k];
                    let r = if u == g.sink_id() { SINK_REWARD } else { 0.0 };
                    let before = agents[v].max_q();
                    match self.mode {
                        SummaryMode::PullFresh => {
                            let msg = agents[u].serve_summary();
                            layer.send(clock, g, u, v, msg)?;
                            agents[v].agent_update(g.location(u), r, &msg, h.alpha, h.gamma)?;
                        }
                        SummaryMode::StaleCache { delay } => {
                            let max_next = agents[v].neighbor_max_cache[k].unwrap_or(0.0);
                            agents[v].update_at(k, r, max_next, h.alpha, h.gamma);
                            if agents[v].max_q().to_bits() != before.to_bits() {
                                self.broadcast(g, &mut agents, &back_index, layer, v, clock, delay)?;
                            }
                        }
                    }
                    stats.updates += 1;
                    clock += 1;
                    let w = &mut active[i];
                    w.at = u;
                    w.steps += 1;
                    (u == g.sink_id()).then_some(EpisodeEnd::Sink)
                };
                if let Some(end) = end {
                    stats.episodes += 1;
                    match end {
                        EpisodeEnd::Sink => stats.reached_sink += 1,
                        EpisodeEnd::Truncated => stats.truncated += 1,
                        EpisodeEnd::DeadEnd => stats.dead_ends += 1,
                    }
                    if remaining > 0 {
                        remaining -= 1;
                        active[i] = Walker {
                            at: starts[rng.gen_range(0..starts.len())],
                            steps: 0,
                        };
                    } else {
                        active.remove(i);
                        if active.is_empty() {
                            break;
                        }
                        i %= active.len();
                        continue;
                    }
                }
                i = (i + 1) % active.len();
            }
        }

        for agent in &agents {
            stats.summaries_served += agent.summaries_served;
            for (&u, &value) in agent.neighbors.iter().zip(&agent.q_row) {
                q.set(agent.location, u, value)?;
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn broadcast(
        &self,
        g: &GraphInstance,
        agents: &mut [NodeAgent],
        back_index: &[Vec<usize>],
        layer: &mut MessageLayer,
        v: NodeId,
        clock: u64,
        delay: u64,
    ) -> Result<()> {
        for (j, &u) in g.neighbors(v).iter().enumerate() {
            let msg = agents[v].serve_summary();
            layer.send(clock, g, v, u, msg)?;
            layer.pending.push_back((clock + delay, u, back_index[v][j], msg));
        }
        if delay == 0 {
            self.deliver_due(agents, layer, clock);
        }
        Ok(())
    }

    fn deliver_due(&self, agents: &mut [NodeAgent], layer: &mut MessageLayer, clock: u64) {
        while let Some(&(due, to, k, msg)) = layer.pending.front() {
            if due > clock {
                break;
            }
            layer.pending.pop_front();
            agents[to].neighbor_max_cache[k] = Some(msg.max_q);
        }
    }
}

/// Single-graph distributed training in pull-fresh mode, seeded the same
/// way as a centralized run with `ChaCha8Rng::seed_from_u64(seed)`.
pub fn run_distributed(g: &GraphInstance, h: &Hyperparams, seed: u64) -> Result<DistributedRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DistributedRuntime::new(*h)?.run(std::slice::from_ref(g), &mut rng)
}
