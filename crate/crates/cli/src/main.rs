use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use age_patrol::design::DesignMethod;
use age_patrol::{AgeFunction, SolverOptions, WeightMode};
use age_patrol_cli::commands::{cmd_design, cmd_graph, print_design_summary, run_experiment};
use age_patrol_cli::config::{ExperimentConfig, GraphSpec, PolicySpec, DEFAULT_HORIZON};
use age_patrol_cli::reproduce::{reproduce, Figure, ReproduceOptions};
use age_patrol_cli::{CliError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

/// Trajectory design and age-of-information analysis for a mobile agent
/// serving terminals on a mobility graph.
#[derive(Debug, Parser)]
#[command(name = "age-patrol", version)]
struct Cli {
    /// Run the experiment described by a JSON file instead of a subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for replications and sweep points.
    #[arg(long, global = true, env = "AGE_PATROL_JOBS")]
    jobs: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug). AGE_PATROL_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a mobility graph and write it as JSON.
    Graph(GraphArgs),
    /// Design a randomized trajectory for a graph file.
    Design(DesignArgs),
    /// Simulate information gathering.
    Simulate(SimulateArgs),
    /// Simulate information dissemination under the separation policy.
    Disseminate(DisseminateArgs),
    /// Run the network-size sweeps and write one CSV per figure.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Geometric,
    Grid,
    Ring,
    Complete,
    Path,
    Tree,
    Star,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightsArg {
    Uniform,
    /// Independent uniform weights in (1, 2].
    Random,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Number of terminals.
    #[arg(long)]
    n: Option<usize>,
    /// Ring neighbourhood: each terminal links to the k nearest on each side.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Geometric connection radius, or `auto` for 2/√n.
    #[arg(long, default_value = "auto")]
    r: String,
    /// Grid side length (alternative to a square --n).
    #[arg(long)]
    side: Option<usize>,
    /// Binary tree depth (alternative to --n = 2^levels − 1).
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform")]
    weights: WeightsArg,
    /// Seed for random weights; defaults to --seed.
    #[arg(long)]
    weight_seed: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

impl GraphArgs {
    fn spec(&self) -> Result<GraphSpec> {
        let need_n = || {
            self.n
                .ok_or_else(|| CliError::usage("--n is required for this family (see `age-patrol graph --help`)"))
        };
        Ok(match self.family {
            FamilyArg::Geometric => {
                let r = match self.r.as_str() {
                    "auto" => None,
                    s => Some(s.parse::<f64>().map_err(|_| {
                        CliError::usage(format!("--r expects a number or `auto`, got `{s}`"))
                    })?),
                };
                GraphSpec::Geometric { n: need_n()?, r, seed: self.seed }
            }
            FamilyArg::Grid => {
                let side = match (self.side, self.n) {
                    (Some(s), _) => s,
                    (None, Some(n)) => {
                        let s = (n as f64).sqrt().round() as usize;
                        if s * s != n {
                            return Err(CliError::usage(format!("grid needs a square --n, got {n}")));
                        }
                        s
                    }
                    (None, None) => return Err(CliError::usage("grid needs --side or --n")),
                };
                GraphSpec::Grid { side }
            }
            FamilyArg::Ring => GraphSpec::Ring { n: need_n()?, k: self.k },
            FamilyArg::Complete => GraphSpec::Complete { n: need_n()? },
            FamilyArg::Path => GraphSpec::Path { n: need_n()? },
            FamilyArg::Tree => {
                let levels = match (self.levels, self.n) {
                    (Some(l), _) => l,
                    (None, Some(n)) if (n + 1).is_power_of_two() && n > 0 => (n + 1).trailing_zeros(),
                    (None, Some(n)) => {
                        return Err(CliError::usage(format!("tree needs --n = 2^levels − 1, got {n}")))
                    }
                    (None, None) => return Err(CliError::usage("tree needs --levels or --n")),
                };
                GraphSpec::Tree { levels }
            }
            FamilyArg::Star => {
                let n = need_n()?;
                if n < 2 {
                    return Err(CliError::usage("a star needs at least 2 terminals"));
                }
                GraphSpec::Star { leaves: n - 1 }
            }
        })
    }

    fn weight_mode(&self) -> WeightMode {
        match self.weights {
            WeightsArg::Uniform => WeightMode::Uniform,
            WeightsArg::Random => WeightMode::RandomInterval {
                lo: 1.0,
                hi: 2.0,
                seed: self.weight_seed.unwrap_or(self.seed),
            },
        }
    }
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Iteration cap of the fastest-mixing solver.
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(m) = self.max_iterations {
            o.max_iterations = m;
        }
        o
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Mh,
    #[value(alias = "fastest_mixing")]
    Fastest,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(short, long, default_value = "design.json")]
    output: PathBuf,
    /// Fail (exit 4) if the solver stops at its iteration cap.
    #[arg(long)]
    strict: bool,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

/// Seeds as `1,2,3` or an inclusive range `1..5`.
fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(SeedList((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().map_err(|e| format!("{e}")))
        .collect::<std::result::Result<_, _>>()
        .map(SeedList)
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u64,
    /// Defaults to 2% of the horizon.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Defaults to the number of seeds, or 1.
    #[arg(long)]
    replications: Option<usize>,
    /// `1,2,3` or `1..5`; defaults to 1..=replications.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Summary CSV; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self, policy: PolicySpec) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(GraphSpec::File { path: self.graph.clone() }, policy);
        cfg.horizon = self.horizon;
        cfg.burn_in = self.burn_in;
        cfg.start = self.start;
        cfg.output = self.output.clone();
        let seeds = self.seeds.as_ref().map(|s| s.0.clone());
        cfg.replications = match (&seeds, self.replications) {
            (Some(s), Some(r)) if s.len() != r => {
                return Err(CliError::usage(format!("{} seeds given for {r} replications", s.len())))
            }
            (Some(s), _) => s.len(),
            (None, r) => r.unwrap_or(1),
        };
        cfg.seeds = seeds;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PolicyArg {
    Mh,
    #[value(alias = "fastest")]
    FastestMixing,
    AgeBased,
    Periodic,
    /// Transition matrix from a `design` output (--design).
    Design,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AgeFnArg {
    /// g(a) = a
    Identity,
    /// g(a) = a² + a
    Quadratic,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "mh")]
    policy: PolicyArg,
    /// Design file for --policy design.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Closed walk for --policy periodic, e.g. `0,1,2,1`.
    #[arg(long, value_delimiter = ',')]
    sequence: Option<Vec<usize>>,
    /// Age transform of the age-based walk.
    #[arg(long, value_enum, default_value = "quadratic")]
    g_fn: AgeFnArg,
    /// Per-slot age trace of the first replication (horizon ≤ 100000).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

impl SimulateArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let policy = match self.policy {
            PolicyArg::Mh => PolicySpec::Mh,
            PolicyArg::FastestMixing => PolicySpec::FastestMixing { solver: self.solver.options() },
            PolicyArg::AgeBased => PolicySpec::AgeBased {
                g_fn: match self.g_fn {
                    AgeFnArg::Identity => AgeFunction::Identity,
                    AgeFnArg::Quadratic => AgeFunction::QuadraticPlusLinear,
                },
            },
            PolicyArg::Periodic => PolicySpec::Periodic {
                sequence: self
                    .sequence
                    .clone()
                    .ok_or_else(|| CliError::usage("--policy periodic needs --sequence"))?,
            },
            PolicyArg::Design => PolicySpec::Design {
                path: self
                    .design
                    .clone()
                    .ok_or_else(|| CliError::usage("--policy design needs --design"))?,
            },
        };
        let mut cfg = self.run.config(policy)?;
        cfg.trace = self.trace.clone();
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct DisseminateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Multiplies every update rate; must lie in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    rate_scale: f64,
    /// Event log of the first replication.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Per-replication bound checks as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    All,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u64,
    #[arg(long, default_value_t = 3)]
    replications: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build()?;
    let mut out = io::stdout();
    let stdout = &mut out;
    let command = match (cli.config, cli.command) {
        (Some(path), None) => {
            let cfg = ExperimentConfig::load(&path)?;
            return pool.install(|| run_experiment(&cfg, stdout)).map(|_| ());
        }
        (Some(_), Some(_)) => return Err(CliError::usage("--config replaces the subcommand; give one or the other")),
        (None, None) => return Err(CliError::usage("no command given (see `age-patrol --help`)")),
        (None, Some(c)) => c,
    };
    match command {
        Command::Graph(args) => {
            let g = cmd_graph(&args.spec()?, Some(args.weight_mode()), &args.output)?;
            eprintln!("wrote {} ({} terminals, {} edges)", args.output.display(), g.n(), g.edge_count());
        }
        Command::Design(args) => {
            let method = match args.method {
                MethodArg::Mh => DesignMethod::MetropolisHastings,
                MethodArg::Fastest => DesignMethod::FastestMixing,
            };
            let summary = pool.install(|| cmd_design(&args.graph, method, &args.solver.options(), args.strict, &args.output))?;
            let io_err = |e| CliError::io("<stdout>", e);
            if args.json {
                let text = serde_json::to_string_pretty(&summary).map_err(|e| io_err(io::Error::other(e)))?;
                writeln!(stdout, "{text}").map_err(io_err)?;
            } else {
                print_design_summary(&summary, stdout).map_err(io_err)?;
            }
        }
        Command::Simulate(args) => {
            let cfg = args.config()?;
            pool.install(|| run_experiment(&cfg, stdout))?;
        }
        Command::Disseminate(args) => {
            let mut cfg = args.run.config(PolicySpec::Separation {
                solver: args.solver.options(),
                rate_scale: args.rate_scale,
            })?;
            cfg.events = args.events;
            cfg.report = args.report;
            pool.install(|| run_experiment(&cfg, stdout))?;
        }
        Command::Reproduce(args) => {
            let figures = match args.figure {
                FigureArg::Fig4 => vec![Figure::Fig4],
                FigureArg::Fig5 => vec![Figure::Fig5],
                FigureArg::Fig6 => vec![Figure::Fig6],
                FigureArg::Fig7 => vec![Figure::Fig7],
                FigureArg::Fig8 => vec![Figure::Fig8],
                FigureArg::All => Figure::ALL.to_vec(),
            };
            let opts = ReproduceOptions {
                horizon: args.horizon,
                replications: args.replications,
                seed: args.seed,
                solver: args.solver.options(),
            };
            for (_, path) in pool.install(|| reproduce(&figures, &args.out_dir, &opts))? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_env("AGE_PATROL_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt().with_writer(io::stderr).with_env_filter(filter).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
