//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 graph generation failure, 3 data-format error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use super::config::ExperimentConfig;
use super::pipeline::{cmd_gen, cmd_render, cmd_report, cmd_test, cmd_train};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "qspt", version, about = "Q-learning shortest-path trees for sensor networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate training and test graph corpora.
    Gen(#[command(flatten)] ExperimentArgs),
    /// Train one Q-table per node count.
    Train(#[command(flatten)] ExperimentArgs),
    /// Build trees on test corpora and write accuracy CSVs.
    Test {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Q-table files; defaults to the tables of --nodes.
        #[arg(long = "qtable")]
        qtables: Vec<PathBuf>,
        /// Test corpus sizes; defaults to each table's own size.
        #[arg(long, value_delimiter = ',')]
        test_nodes: Vec<usize>,
    },
    /// Render a graph and tree as SVG.
    Render {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Also render the breadth-first shortest-path tree.
        #[arg(long)]
        oracle: bool,
        #[arg(long, short = 'o', default_value = "tree.svg")]
        output: PathBuf,
    },
    /// Aggregate test CSVs into a test-size by train-size table.
    Report {
        csvs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Flags shared by the experiment commands. They override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<usize>,
    /// Training graphs per node count (M).
    #[arg(long)]
    pub graphs: Option<usize>,
    /// Test graphs per node count (T).
    #[arg(long)]
    pub test_graphs: Option<usize>,
    /// Episodes per training graph (K).
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub range: Option<f64>,
    /// Train through per-node agents exchanging max-Q summaries.
    #[arg(long)]
    pub distributed: bool,
    /// With --distributed, use pushed summaries delivered after this many updates.
    #[arg(long)]
    pub stale_cache: Option<u64>,
    /// Use the full-size training and test counts.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = if self.full_scale {
            ExperimentConfig::full_scale()
        } else {
            ExperimentConfig::default()
        };
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.seed {
            cfg.corpus_seed = v;
        }
        if let Some(v) = self.train_seed {
            cfg.train_seed = v;
        }
        if !self.nodes.is_empty() {
            cfg.nodes = self.nodes.clone();
        }
        if let Some(v) = self.graphs {
            cfg.train_graphs = v;
        }
        if let Some(v) = self.test_graphs {
            cfg.test_graphs = v;
        }
        if let Some(v) = self.episodes {
            cfg.hyper.episodes_per_graph = v;
        }
        if let Some(v) = self.alpha {
            cfg.hyper.alpha = v;
        }
        if let Some(v) = self.gamma {
            cfg.hyper.gamma = v;
        }
        if let Some(v) = self.epsilon {
            cfg.hyper.epsilon = v;
        }
        if let Some(v) = self.width {
            cfg.width = v;
        }
        if let Some(v) = self.range {
            cfg.range = v;
        }
        if self.distributed {
            cfg.distributed = true;
        }
        if self.stale_cache.is_some() {
            cfg.stale_cache = self.stale_cache;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Generation { .. } => 2,
        Error::Parse { .. } => 3,
        _ => 1,
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let s = cmd_gen(&args.resolve()?)?;
            println!("wrote {} graphs, manifest {}", s.files.len(), s.manifest.display());
        }
        Command::Train(args) => {
            for t in cmd_train(&args.resolve()?)? {
                print!(
                    "n={} episodes={} mean_steps={:.3} -> {}",
                    t.nodes,
                    t.report.episodes,
                    t.report.mean_steps(),
                    t.qtable.display()
                );
                if let Some(d) = &t.distributed {
                    print!(
                        " (distributed: {} messages, identical={})",
                        d.stats.messages, d.identical
                    );
                }
                println!();
            }
        }
        Command::Test {
            exp,
            qtables,
            test_nodes,
        } => {
            for o in cmd_test(&exp.resolve()?, &qtables, &test_nodes)? {
                println!(
                    "q{} on n={}: mean {:.4} std {:.4} pooled {:.4} dead_ends {} -> {}",
                    o.train_label,
                    o.test_nodes,
                    o.report.mean_accuracy(),
                    o.report.std_accuracy(),
                    o.report.pooled_accuracy(),
                    o.report.dead_ends(),
                    o.csv.display()
                );
            }
        }
        Command::Render {
            graph,
            tree,
            oracle,
            output,
        } => {
            for p in cmd_render(&graph, tree.as_deref(), oracle, &output)? {
                println!("{}", p.display());
            }
        }
        Command::Report { csvs, out } => {
            let (path, table) = cmd_report(&csvs, &out)?;
            print!("{table}");
            println!("{}", path.display());
        }
    }
    Ok(())
}

/// Parses `std::env::args`, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
