//! Experiment descriptions shared by the command-line flags and `--config`
//! files.

use std::fs;
use std::path::{Path, PathBuf};

use age_patrol::graph::{self, MobilityGraph};
use age_patrol::{AgeFunction, SolverOptions, WeightMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Default number of slots per run.
pub const DEFAULT_HORIZON: u64 = 50_000;

/// Where the mobility graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    Geometric {
        n: usize,
        /// Connection radius; `None` picks `2/√n`.
        #[serde(default)]
        r: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Grid {
        side: usize,
    },
    Ring {
        n: usize,
        k: usize,
    },
    Complete {
        n: usize,
    },
    Path {
        n: usize,
    },
    Tree {
        levels: u32,
    },
    Star {
        leaves: usize,
    },
    File {
        path: PathBuf,
    },
}

impl GraphSpec {
    /// Builds the graph, then applies `weights` if given. Generated graphs
    /// start with uniform weights; files keep their own unless overridden.
    pub fn build(&self, weights: Option<WeightMode>) -> Result<MobilityGraph> {
        let g = match self {
            GraphSpec::Geometric { n, r, seed } => {
                let r = r.unwrap_or_else(|| graph::default_geometric_radius(*n));
                graph::random_geometric(*n, r, *seed)?
            }
            GraphSpec::Grid { side } => graph::grid_with_diagonals(*side)?,
            GraphSpec::Ring { n, k } => graph::ring(*n, *k)?,
            GraphSpec::Complete { n } => graph::complete(*n)?,
            GraphSpec::Path { n } => graph::path(*n)?,
            GraphSpec::Tree { levels } => graph::binary_tree(*levels)?,
            GraphSpec::Star { leaves } => graph::star(*leaves)?,
            GraphSpec::File { path } => load_graph(path)?,
        };
        Ok(match weights {
            Some(mode) => g.with_weights(mode)?,
            None => g,
        })
    }
}

/// Trajectory (and, for `separation`, update rates) under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Mh,
    FastestMixing {
        #[serde(default)]
        solver: SolverOptions,
    },
    AgeBased {
        #[serde(default)]
        g_fn: AgeFunction,
    },
    Periodic {
        sequence: Vec<usize>,
    },
    /// A transition matrix saved by `design`.
    Design {
        path: PathBuf,
    },
    /// Fastest-mixing trajectory with the rates that minimise each
    /// terminal's peak-age bound, scaled by `rate_scale`.
    Separation {
        #[serde(default)]
        solver: SolverOptions,
        #[serde(default = "unit")]
        rate_scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Mh => "mh",
            PolicySpec::FastestMixing { .. } => "fastest_mixing",
            PolicySpec::AgeBased { .. } => "age_based",
            PolicySpec::Periodic { .. } => "periodic",
            PolicySpec::Design { .. } => "design",
            PolicySpec::Separation { .. } => "separation",
        }
    }

    pub fn is_dissemination(&self) -> bool {
        matches!(self, PolicySpec::Separation { .. })
    }
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn one() -> usize {
    1
}

/// One simulation or dissemination experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    #[serde(default)]
    pub weights: Option<WeightMode>,
    pub policy: PolicySpec,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    /// Defaults to 2% of the horizon.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default = "one")]
    pub replications: usize,
    /// One seed per replication; defaults to `1..=replications`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub start: usize,
    /// Summary CSV; stdout when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Per-slot age trace of the first replication (gathering only).
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// Event log of the first replication (dissemination only).
    #[serde(default)]
    pub events: Option<PathBuf>,
    /// Per-replication bound checks as JSON (dissemination only).
    #[serde(default)]
    pub report: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(graph: GraphSpec, policy: PolicySpec) -> Self {
        ExperimentConfig {
            graph,
            weights: None,
            policy,
            horizon: DEFAULT_HORIZON,
            burn_in: None,
            replications: 1,
            seeds: None,
            start: 0,
            output: None,
            trace: None,
            events: None,
            report: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(self.horizon / 50)
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (1..=self.replications as u64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.burn_in() {
            return Err(CliError::usage(format!(
                "horizon {} must exceed burn-in {}",
                self.horizon,
                self.burn_in()
            )));
        }
        if self.replications == 0 {
            return Err(CliError::usage("replications must be at least 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.replications {
                return Err(CliError::usage(format!(
                    "{} seeds given for {} replications",
                    seeds.len(),
                    self.replications
                )));
            }
        }
        match &self.policy {
            PolicySpec::Periodic { sequence } if sequence.is_empty() => {
                Err(CliError::usage("periodic policy needs a non-empty sequence"))
            }
            PolicySpec::Separation { rate_scale, .. } if !(*rate_scale > 0.0 && *rate_scale <= 1.0) => {
                Err(CliError::usage("rate_scale must lie in (0, 1]"))
            }
            PolicySpec::AgeBased { g_fn } => Ok(g_fn.validate()?),
            _ => Ok(()),
        }
    }
}

pub fn load_graph(path: &Path) -> Result<MobilityGraph> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(MobilityGraph::from_json(&text)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
