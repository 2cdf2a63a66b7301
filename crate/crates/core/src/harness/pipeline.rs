//! The experiment pipeline behind the CLI: corpus generation, training,
//! testing, rendering and report aggregation. Every step reads and writes
//! plain files under the configured output directory:
//!
//! ```text
//! out/corpus/manifest.txt
//! out/corpus/n100/{train,test}/g0000.graph
//! out/qtables/n100.qtable
//! out/logs/train_n100.log
//! out/results/q100_t100.csv
//! out/trees/q100_t100/g0000.tree
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{mix_seed, ExperimentConfig};
use super::svg::render_svg;
use crate::dist::{DistributedRuntime, MessageStats, SummaryMode};
use crate::error::{Error, Result};
use crate::oracle::{bfs_layers, oracle_tree, validate_tree, AccuracyReport, TreeValidation};
use crate::qlearn::{TrainReport, Trainer};
use crate::qtable::{parse_qtable, qtable_meta, serialize_qtable, QTable};
use crate::spt::{build_tree_traced, parse_tree, serialize_tree};
use crate::topology::{generate_graph, parse_graph, serialize_graph, GraphInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

pub fn corpus_dir(out: &Path, nodes: usize, split: Split) -> PathBuf {
    out.join("corpus").join(format!("n{nodes}")).join(split.name())
}

pub fn qtable_path(out: &Path, nodes: usize) -> PathBuf {
    out.join("qtables").join(format!("n{nodes}.qtable"))
}

pub fn result_path(out: &Path, train_label: &str, test_nodes: usize) -> PathBuf {
    out.join("results").join(format!("q{train_label}_t{test_nodes}.csv"))
}

/// Seed of graph `i` of one corpus split.
pub fn graph_seed(cfg: &ExperimentConfig, nodes: usize, split: Split, i: usize) -> u64 {
    mix_seed(cfg.corpus_seed, &[nodes as u64, split as u64, i as u64])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn in_file(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { what, field, message } => Error::Parse {
            what,
            field,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

pub fn load_graph(path: &Path) -> Result<GraphInstance> {
    parse_graph(&read_file(path)?).map_err(|e| in_file(path, e))
}

pub fn load_qtable(path: &Path) -> Result<(QTable, BTreeMap<String, String>)> {
    let text = read_file(path)?;
    let q = parse_qtable(&text).map_err(|e| in_file(path, e))?;
    Ok((q, qtable_meta(&text)))
}

/// All `*.graph` files of a directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, GraphInstance)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "graph"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no graph files in {}", dir.display())));
    }
    paths
        .par_iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            load_graph(p).map(|g| (id, g))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GenSummary {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Writes `M` training and `T` test graphs per node count, plus a manifest
/// with the effective config, per-file seeds and SHA-256 checksums.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<GenSummary> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut jobs = Vec::new();
    for &n in &cfg.nodes {
        for (split, count) in [(Split::Train, cfg.train_graphs), (Split::Test, cfg.test_graphs)] {
            for i in 0..count {
                jobs.push((n, split, i));
            }
        }
    }
    let docs: Vec<(PathBuf, u64, String)> = jobs
        .par_iter()
        .map(|&(n, split, i)| {
            let seed = graph_seed(cfg, n, split, i);
            let g = generate_graph(grid, n, cfg.sink, seed)?;
            let path = corpus_dir(&cfg.out, n, split).join(format!("g{i:04}.graph"));
            Ok((path, seed, serialize_graph(&g)))
        })
        .collect::<Result<_>>()?;

    let mut manifest = String::from("# effective config\n");
    for line in cfg.to_kv().lines() {
        writeln!(manifest, "# {line}").unwrap();
    }
    manifest.push_str("# path seed sha256\n");
    let root = cfg.out.join("corpus");
    let mut files = Vec::with_capacity(docs.len());
    for (path, seed, text) in docs {
        write_file(&path, &text)?;
        let rel = path.strip_prefix(&root).unwrap_or(&path);
        writeln!(manifest, "{} {seed} {}", rel.display(), sha256_hex(text.as_bytes())).unwrap();
        files.push(path);
    }
    let manifest_path = root.join("manifest.txt");
    write_file(&manifest_path, &manifest)?;
    info!("wrote {} graph files to {}", files.len(), root.display());
    Ok(GenSummary {
        files,
        manifest: manifest_path,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub nodes: usize,
    pub qtable: PathBuf,
    pub log: PathBuf,
    pub report: TrainReport,
    /// Set when a distributed run was requested.
    pub distributed: Option<DistributedCheck>,
}

#[derive(Debug, Clone)]
pub struct DistributedCheck {
    pub stats: MessageStats,
    pub identical: bool,
    pub max_abs_diff: f64,
}

/// Trains one table per node count from its training corpus.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    if cfg.is_full_scale() {
        warn!(
            "full-scale run: {} graphs x {} episodes per table",
            cfg.train_graphs, cfg.hyper.episodes_per_graph
        );
    }
    cfg.nodes.par_iter().map(|&n| train_one(cfg, n)).collect()
}

fn train_one(cfg: &ExperimentConfig, n: usize) -> Result<TrainOutcome> {
    let corpus: Vec<GraphInstance> = load_corpus(&corpus_dir(&cfg.out, n, Split::Train))?
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    let grid = cfg.grid()?;
    if corpus.iter().any(|g| *g.params() != grid || g.sink() != cfg.sink) {
        return Err(Error::Config(format!(
            "training corpus for n={n} does not match the configured grid and sink"
        )));
    }
    let seed = mix_seed(cfg.train_seed, &[n as u64]);
    let started = Instant::now();
    let (q, report) = Trainer::new(cfg.hyper)?.run(&corpus, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let central_secs = started.elapsed().as_secs_f64();

    let (table, distributed) = if cfg.distributed {
        let mode = match cfg.stale_cache {
            Some(delay) => SummaryMode::StaleCache { delay },
            None => SummaryMode::PullFresh,
        };
        let run = DistributedRuntime::new(cfg.hyper)?
            .mode(mode)
            .run(&corpus, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let identical = run.qtable.bit_eq(&q);
        if mode == SummaryMode::PullFresh && !identical {
            return Err(Error::Protocol(format!(
                "distributed table for n={n} differs from the centralized table"
            )));
        }
        let check = DistributedCheck {
            stats: run.stats,
            identical,
            max_abs_diff: run.qtable.max_abs_diff(&q).unwrap_or(f64::NAN),
        };
        (run.qtable, Some(check))
    } else {
        (q, None)
    };

    let h = &cfg.hyper;
    let meta = [
        ("trained_nodes", n.to_string()),
        ("graphs", corpus.len().to_string()),
        ("episodes", h.episodes_per_graph.to_string()),
        ("alpha", h.alpha.to_string()),
        ("gamma", h.gamma.to_string()),
        ("epsilon", h.epsilon.to_string()),
        ("seed", seed.to_string()),
    ];
    let qpath = qtable_path(&cfg.out, n);
    write_file(&qpath, &serialize_qtable(&table, &meta))?;

    let mut log = String::from("# effective config\n");
    log.push_str(&cfg.to_kv());
    writeln!(log, "nodes {n}").unwrap();
    writeln!(log, "episodes {}", report.episodes).unwrap();
    writeln!(log, "updates {}", report.updates).unwrap();
    writeln!(log, "mean_steps {:.4}", report.mean_steps()).unwrap();
    writeln!(log, "reached_sink {}", report.reached_sink).unwrap();
    writeln!(log, "truncated {}", report.truncated).unwrap();
    writeln!(log, "dead_ends {}", report.dead_ends).unwrap();
    writeln!(log, "wall_seconds {central_secs:.3}").unwrap();
    if let Some(d) = &distributed {
        writeln!(log, "distributed_messages {}", d.stats.messages).unwrap();
        writeln!(log, "distributed_updates {}", d.stats.updates).unwrap();
        writeln!(log, "distributed_identical {}", d.identical).unwrap();
        writeln!(log, "distributed_max_abs_diff {:e}", d.max_abs_diff).unwrap();
    }
    log.push_str("# graph episodes mean_steps sink_rate\n");
    for p in &report.progress {
        writeln!(log, "{} {} {:.4} {:.4}", p.graph, p.episodes, p.mean_steps, p.sink_rate).unwrap();
    }
    let lpath = cfg.out.join("logs").join(format!("train_n{n}.log"));
    write_file(&lpath, &log)?;
    info!(
        "n={n}: {} episodes in {central_secs:.1}s -> {}",
        report.episodes,
        qpath.display()
    );
    Ok(TrainOutcome {
        nodes: n,
        qtable: qpath,
        log: lpath,
        report,
        distributed,
    })
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub train_label: String,
    pub test_nodes: usize,
    pub csv: PathBuf,
    pub report: AccuracyReport,
    /// Structural problems summed over every tree.
    pub invalid_trees: usize,
    pub non_simple_walks: usize,
}

/// Tests every table on every requested corpus size. `tables` defaults to
/// the configured node counts' tables, `test_nodes` to the same sizes as
/// each table (same-size testing).
pub fn cmd_test(cfg: &ExperimentConfig, tables: &[PathBuf], test_nodes: &[usize]) -> Result<Vec<TestOutcome>> {
    cfg.validate()?;
    let tables: Vec<PathBuf> = if tables.is_empty() {
        cfg.nodes.iter().map(|&n| qtable_path(&cfg.out, n)).collect()
    } else {
        tables.to_vec()
    };
    let mut outcomes = Vec::new();
    for path in &tables {
        let (q, meta) = load_qtable(path)?;
        let label = meta
            .get("trained_nodes")
            .cloned()
            .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        let sizes: Vec<usize> = if test_nodes.is_empty() {
            vec![label.parse().map_err(|_| {
                Error::Config(format!(
                    "{}: cannot infer a test size, pass --test-nodes",
                    path.display()
                ))
            })?]
        } else {
            test_nodes.to_vec()
        };
        for &n in &sizes {
            outcomes.push(test_one(cfg, &q, &label, n)?);
        }
    }
    Ok(outcomes)
}

fn test_one(cfg: &ExperimentConfig, q: &QTable, label: &str, n: usize) -> Result<TestOutcome> {
    let corpus = load_corpus(&corpus_dir(&cfg.out, n, Split::Test))?;
    if let Some((id, _)) = corpus.iter().find(|(_, g)| g.params() != q.params()) {
        return Err(Error::Config(format!(
            "test graph {id} (n={n}) uses a different grid than the Q-table"
        )));
    }
    let scored: Vec<(String, String, AccuracyReport, TreeValidation, usize)> = corpus
        .par_iter()
        .map(|(id, g)| {
            let (tree, walks) = build_tree_traced(g, q);
            let labels = bfs_layers(g)?;
            let mut one = AccuracyReport::default();
            one.push(id.clone(), &tree, &labels)?;
            let validation = validate_tree(&tree, g);
            let non_simple = walks.iter().filter(|w| !w.is_simple()).count();
            Ok((id.clone(), serialize_tree(&tree), one, validation, non_simple))
        })
        .collect::<Result<_>>()?;

    let mut report = AccuracyReport::default();
    report.meta.insert("train_nodes".into(), label.to_string());
    report.meta.insert("test_nodes".into(), n.to_string());
    let tree_dir = cfg.out.join("trees").join(format!("q{label}_t{n}"));
    let (mut invalid, mut non_simple) = (0, 0);
    for (id, tree_text, one, validation, ns) in scored {
        write_file(&tree_dir.join(format!("{id}.tree")), &tree_text)?;
        report.rows.extend(one.rows);
        // dead ends leave dangling chains; anything else is a real defect
        if !validation.missing_edges.is_empty() || !validation.cyclic.is_empty() {
            invalid += 1;
        }
        non_simple += ns;
    }
    if invalid > 0 || non_simple > 0 {
        warn!("q{label} on n={n}: {invalid} trees with cycles or non-edges, {non_simple} non-simple walks");
    }
    let csv = result_path(&cfg.out, label, n);
    write_file(&csv, &report.to_csv())?;
    info!(
        "q{label} on n={n}: mean accuracy {:.4} over {} graphs",
        report.mean_accuracy(),
        report.rows.len()
    );
    Ok(TestOutcome {
        train_label: label.to_string(),
        test_nodes: n,
        csv,
        report,
        invalid_trees: invalid,
        non_simple_walks: non_simple,
    })
}

/// Renders `graph` with a learned tree and/or the breadth-first oracle tree.
/// With both, the oracle figure goes next to `output` as `<stem>_oracle.svg`.
pub fn cmd_render(graph: &Path, tree: Option<&Path>, oracle: bool, output: &Path) -> Result<Vec<PathBuf>> {
    let g = load_graph(graph)?;
    let mut written = Vec::new();
    if let Some(tp) = tree {
        let t = parse_tree(&read_file(tp)?).map_err(|e| in_file(tp, e))?;
        let nodes: BTreeSet<_> = g.nodes().iter().copied().collect();
        if t.nodes != nodes || t.sink != g.sink() {
            return Err(Error::Config(format!(
                "{} does not describe the nodes of {}",
                tp.display(),
                graph.display()
            )));
        }
        write_file(output, &render_svg(&g, &t, "Q-learning tree"))?;
        written.push(output.to_path_buf());
    }
    if oracle {
        let target = if tree.is_some() {
            let stem = output.file_stem().unwrap_or_default().to_string_lossy();
            output.with_file_name(format!("{stem}_oracle.svg"))
        } else {
            output.to_path_buf()
        };
        write_file(&target, &render_svg(&g, &oracle_tree(&g)?, "shortest-path tree (BFS)"))?;
        written.push(target);
    }
    if written.is_empty() {
        return Err(Error::Config("render needs --tree, --oracle, or both".into()));
    }
    Ok(written)
}

/// Aggregates test CSVs into a test-size by train-size table of mean
/// accuracies, written as `report.csv` under `out`.
pub fn cmd_report(csvs: &[PathBuf], out: &Path) -> Result<(PathBuf, String)> {
    if csvs.is_empty() {
        return Err(Error::Config("report needs at least one CSV".into()));
    }
    let mut cells: BTreeMap<(usize, String), (f64, f64, usize)> = BTreeMap::new();
    let mut train_labels: Vec<String> = Vec::new();
    for path in csvs {
        let r = AccuracyReport::from_csv(&read_file(path)?).map_err(|e| in_file(path, e))?;
        let train = r.meta.get("train_nodes").cloned().unwrap_or_else(|| "?".into());
        let test: usize = r
            .meta
            .get("test_nodes")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse("accuracy csv", "test_nodes", format!("{}: missing", path.display())))?;
        if !train_labels.contains(&train) {
            train_labels.push(train.clone());
        }
        cells.insert((test, train), (r.mean_accuracy(), r.std_accuracy(), r.rows.len()));
    }
    train_labels.sort_by_key(|l| (l.parse::<usize>().unwrap_or(usize::MAX), l.clone()));
    let tests: BTreeSet<usize> = cells.keys().map(|(t, _)| *t).collect();

    let mut csv = String::from("test_nodes");
    for l in &train_labels {
        write!(csv, ",train_{l}_mean,train_{l}_std").unwrap();
    }
    csv.push('\n');
    let mut table = String::from("| test size |");
    for l in &train_labels {
        write!(table, " {l}-node table (%) |").unwrap();
    }
    table.push('\n');
    table.push_str("|---|");
    table.push_str(&"---|".repeat(train_labels.len()));
    table.push('\n');
    for t in &tests {
        write!(csv, "{t}").unwrap();
        write!(table, "| {t} |").unwrap();
        for l in &train_labels {
            match cells.get(&(*t, l.clone())) {
                Some((mean, std, _)) => {
                    write!(csv, ",{mean:?},{std:?}").unwrap();
                    write!(table, " {:.2} ± {:.2} |", mean * 100.0, std * 100.0).unwrap();
                }
                None => {
                    csv.push_str(",,");
                    table.push_str(" - |");
                }
            }
        }
        csv.push('\n');
        table.push('\n');
    }
    let path = out.join("report.csv");
    write_file(&path, &csv)?;
    Ok((path, table))
}
