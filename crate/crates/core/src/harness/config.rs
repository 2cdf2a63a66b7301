use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{GridParams, Location};
use crate::qlearn::Hyperparams;

/// Total episodes per Q-table above which a run counts as full scale and logs a warning.
pub const FULL_SCALE_EPISODES: u64 = 100_000_000;

/// Everything needed to reproduce an experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub width: u32,
    pub range: f64,
    pub sink: Location,
    pub nodes: Vec<usize>,
    pub train_graphs: usize,
    pub test_graphs: usize,
    pub hyper: Hyperparams,
    pub corpus_seed: u64,
    pub train_seed: u64,
    pub out: PathBuf,
    pub distributed: bool,
    /// Stale-cache delivery delay; `None` selects pull-fresh summaries.
    pub stale_cache: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            width: 100,
            range: 20.0,
            sink: Location::new(50, 50),
            nodes: vec![100, 200, 300, 400, 500],
            train_graphs: 50,
            test_graphs: 20,
            hyper: Hyperparams::standard(20_000),
            corpus_seed: 1,
            train_seed: 2,
            out: PathBuf::from("out"),
            distributed: false,
            stale_cache: None,
        }
    }
}

impl ExperimentConfig {
    /// Full-size setting: 5000 training graphs, 500000 episodes each, 100
    /// test graphs.
    pub fn full_scale() -> Self {
        Self {
            train_graphs: 5000,
            test_graphs: 100,
            hyper: Hyperparams::standard(500_000),
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Result<GridParams> {
        GridParams::new(self.width, self.range).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        grid.check(self.sink).map_err(|e| Error::Config(e.to_string()))?;
        self.hyper.validate()?;
        if self.nodes.is_empty() {
            return Err(Error::Config("node count list is empty".into()));
        }
        for &n in &self.nodes {
            if n == 0 || n > grid.cells() {
                return Err(Error::Config(format!(
                    "node count {n} must be in [1, {}] for a {w}x{w} grid",
                    grid.cells(),
                    w = self.width
                )));
            }
        }
        if self.train_graphs == 0 || self.test_graphs == 0 {
            return Err(Error::Config("graph counts must be positive".into()));
        }
        Ok(())
    }

    pub fn is_full_scale(&self) -> bool {
        (self.train_graphs as u64).saturating_mul(self.hyper.episodes_per_graph) >= FULL_SCALE_EPISODES
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{key}={value}: {e}"));
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "width" | "W" => self.width = num(value).map_err(|e| bad(&e))?,
            "range" | "R" => self.range = num(value).map_err(|e| bad(&e))?,
            "sink_x" => self.sink.x = num(value).map_err(|e| bad(&e))?,
            "sink_y" => self.sink.y = num(value).map_err(|e| bad(&e))?,
            "nodes" => self.nodes = parse_list(value).map_err(|e| bad(&e))?,
            "graphs" => self.train_graphs = num(value).map_err(|e| bad(&e))?,
            "test_graphs" => self.test_graphs = num(value).map_err(|e| bad(&e))?,
            "episodes" => self.hyper.episodes_per_graph = num(value).map_err(|e| bad(&e))?,
            "alpha" => self.hyper.alpha = num(value).map_err(|e| bad(&e))?,
            "gamma" => self.hyper.gamma = num(value).map_err(|e| bad(&e))?,
            "epsilon" => self.hyper.epsilon = num(value).map_err(|e| bad(&e))?,
            "max_steps" => {
                self.hyper.max_steps_per_episode = match value {
                    "auto" => None,
                    v => Some(num(v).map_err(|e| bad(&e))?),
                }
            }
            "seed" => self.corpus_seed = num(value).map_err(|e| bad(&e))?,
            "train_seed" => self.train_seed = num(value).map_err(|e| bad(&e))?,
            "out" => self.out = PathBuf::from(value),
            "distributed" => self.distributed = num(value).map_err(|e| bad(&e))?,
            "stale_cache" => {
                self.stale_cache = match value {
                    "off" | "none" => None,
                    v => Some(num(v).map_err(|e| bad(&e))?),
                }
            }
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Reads a flat `key=value` file on top of the current values. Blank
    /// lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// The effective configuration as `key=value` lines; parses back with
    /// [`ExperimentConfig::apply_text`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let nodes: Vec<String> = self.nodes.iter().map(ToString::to_string).collect();
        let h = &self.hyper;
        writeln!(out, "width={}", self.width).unwrap();
        writeln!(out, "range={}", self.range).unwrap();
        writeln!(out, "sink_x={}", self.sink.x).unwrap();
        writeln!(out, "sink_y={}", self.sink.y).unwrap();
        writeln!(out, "nodes={}", nodes.join(",")).unwrap();
        writeln!(out, "graphs={}", self.train_graphs).unwrap();
        writeln!(out, "test_graphs={}", self.test_graphs).unwrap();
        writeln!(out, "episodes={}", h.episodes_per_graph).unwrap();
        writeln!(out, "alpha={}", h.alpha).unwrap();
        writeln!(out, "gamma={}", h.gamma).unwrap();
        writeln!(out, "epsilon={}", h.epsilon).unwrap();
        match h.max_steps_per_episode {
            Some(n) => writeln!(out, "max_steps={n}").unwrap(),
            None => writeln!(out, "max_steps=auto").unwrap(),
        }
        writeln!(out, "seed={}", self.corpus_seed).unwrap();
        writeln!(out, "train_seed={}", self.train_seed).unwrap();
        writeln!(out, "out={}", self.out.display()).unwrap();
        writeln!(out, "distributed={}", self.distributed).unwrap();
        match self.stale_cache {
            Some(d) => writeln!(out, "stale_cache={d}").unwrap(),
            None => writeln!(out, "stale_cache=off").unwrap(),
        }
        out
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<usize>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

/// SplitMix64 finalizer, used to derive independent per-item seeds.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
