//! The `graph`, `design`, `simulate` and `disseminate` commands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use age_patrol::analysis::{analytic_ages, average_age_lower_bound};
use age_patrol::design::{self, build_fastest_mixing, build_mh, spectral_objective, DesignMethod};
use age_patrol::dissemination::{
    dissemination_report, separation_policy, simulate_dissemination, write_events_csv,
    DisseminationPolicy, DisseminationReport,
};
use age_patrol::simulation::{periodic_ages, simulate_gathering, RunConfig, Walk};
use age_patrol::{
    AgeFunction, AgeReport, AgeStats, ChainAnalysis, DesignResult, MobilityGraph, SolverOptions,
    TransitionMatrix, WeightMode,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, write_json, ExperimentConfig, GraphSpec, PolicySpec};
use crate::error::{CliError, Result};
use crate::stats::mean_stderr;

pub fn cmd_graph(spec: &GraphSpec, weights: Option<WeightMode>, out: &Path) -> Result<MobilityGraph> {
    let g = spec.build(weights)?;
    g.save(out)?;
    Ok(g)
}

/// What `design` prints besides writing the matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSummary {
    pub method: DesignMethod,
    pub objective: f64,
    /// Objective of the Metropolis-Hastings warm start on the same graph.
    pub mh_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
    pub ages: AgeReport,
}

pub fn cmd_design(
    graph_path: &Path,
    method: DesignMethod,
    solver: &SolverOptions,
    strict: bool,
    out: &Path,
) -> Result<DesignSummary> {
    let g = crate::config::load_graph(graph_path)?;
    let mh = build_mh(&g)?;
    let mh_objective = spectral_objective(mh.matrix.matrix(), &mh.target_pi);
    let result = match method {
        DesignMethod::MetropolisHastings => mh,
        DesignMethod::FastestMixing => build_fastest_mixing(&g, solver)?,
    };
    if strict && !result.converged {
        return Err(age_patrol::Error::SolverNotConverged.into());
    }
    write_json(out, &result)?;
    let ages = analytic_ages(&ChainAnalysis::new(&result.matrix)?, g.weights())?;
    Ok(DesignSummary {
        method,
        objective: result
            .objective
            .unwrap_or_else(|| spectral_objective(result.matrix.matrix(), &result.target_pi)),
        mh_objective,
        iterations: result.iterations,
        converged: result.converged,
        max_residual: result.residuals.max(),
        ages,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Replication,
    Aggregate,
}

/// One line of the `simulate`/`disseminate` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub kind: RowKind,
    pub seed: Option<u64>,
    pub policy: String,
    pub n: usize,
    pub horizon: u64,
    pub burn_in: u64,
    pub network_peak: Option<f64>,
    pub network_peak_stderr: Option<f64>,
    pub network_avg: f64,
    pub network_avg_stderr: Option<f64>,
    /// Closed-form ages, where the policy has them.
    pub analytic_peak: Option<f64>,
    pub analytic_avg: Option<f64>,
    pub lower_bound_avg: f64,
    /// Dissemination only: `Σ w_i A^UB_i`, the weighted per-terminal bounds.
    pub peak_upper_bound: Option<f64>,
    pub max_queue_len: Option<usize>,
    pub bounds_passed: Option<bool>,
}

/// Trajectory resolved from a [`PolicySpec`].
enum Prepared {
    Chain {
        matrix: TransitionMatrix,
        ages: AgeReport,
    },
    AgeBased(AgeFunction),
    Periodic {
        sequence: Vec<usize>,
        peak: f64,
        avg: f64,
    },
    Dissemination(DisseminationPolicy),
}

fn prepare(g: &MobilityGraph, policy: &PolicySpec) -> Result<Prepared> {
    let chain = |matrix: TransitionMatrix| -> Result<Prepared> {
        let ages = analytic_ages(&ChainAnalysis::new(&matrix)?, g.weights())?;
        Ok(Prepared::Chain { matrix, ages })
    };
    match policy {
        PolicySpec::Mh => chain(build_mh(g)?.matrix),
        PolicySpec::FastestMixing { solver } => chain(build_fastest_mixing(g, solver)?.matrix),
        PolicySpec::Design { path } => {
            let d: DesignResult = read_json(path)?;
            let report = design::validate_design(d.matrix.matrix(), g, &d.target_pi);
            if let Some(bad) = report.checks.iter().find(|c| c.constraint == "support" && !c.passed) {
                return Err(CliError::Core(age_patrol::Error::InvalidMatrix(format!(
                    "design uses {} transitions missing from the graph",
                    bad.offending.len()
                ))));
            }
            chain(d.matrix)
        }
        PolicySpec::AgeBased { g_fn } => Ok(Prepared::AgeBased(g_fn.clone())),
        PolicySpec::Periodic { sequence } => {
            let exact = periodic_ages(g, sequence)?;
            Ok(Prepared::Periodic {
                sequence: sequence.clone(),
                peak: exact.network_peak,
                avg: exact.network_avg,
            })
        }
        PolicySpec::Separation { solver, rate_scale } => {
            let base = separation_policy(g, solver)?;
            let policy = if *rate_scale == 1.0 {
                base
            } else {
                base.with_rates(base.rates.iter().map(|r| r * rate_scale).collect())?
            };
            Ok(Prepared::Dissemination(policy))
        }
    }
}

/// Everything one replication produced.
struct Replication {
    seed: u64,
    horizon: u64,
    burn_in: u64,
    stats: AgeStats,
    max_queue_len: Option<usize>,
    report: Option<DisseminationReport>,
}

pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub reports: Vec<DisseminationReport>,
}

/// Runs every replication of `cfg` (in parallel on the current rayon pool)
/// and writes the requested files. The summary CSV goes to `cfg.output` or
/// `stdout`.
pub fn run_experiment(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let g = cfg.graph.build(cfg.weights)?;
    let prepared = prepare(&g, &cfg.policy)?;
    if cfg.trace.is_some() && cfg.policy.is_dissemination() {
        return Err(CliError::usage("--trace applies to gathering policies; use --events"));
    }
    if (cfg.events.is_some() || cfg.report.is_some()) && !cfg.policy.is_dissemination() {
        return Err(CliError::usage("--events and --report need the separation policy"));
    }
    let seeds = cfg.seeds();
    let results: Vec<Result<Replication>> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| replicate(&g, &prepared, cfg, seed, k == 0))
        .collect();
    let reps = results.into_iter().collect::<Result<Vec<_>>>()?;

    let lower = average_age_lower_bound(g.weights())?;
    let (analytic_peak, analytic_avg) = match &prepared {
        Prepared::Chain { ages, .. } => (Some(ages.network_peak), Some(ages.network_avg)),
        Prepared::Periodic { peak, avg, .. } => (Some(*peak), Some(*avg)),
        _ => (None, None),
    };
    let peak_upper_bound = match &prepared {
        Prepared::Dissemination(p) => p
            .upper_bounds
            .iter()
            .zip(g.weights())
            .map(|(b, w)| b.map(|b| b * w))
            .sum::<Option<f64>>(),
        _ => None,
    };
    let base = |kind, seed, horizon, burn_in| ExperimentRow {
        kind,
        seed,
        policy: cfg.policy.label().to_string(),
        n: g.n(),
        horizon,
        burn_in,
        network_peak: None,
        network_peak_stderr: None,
        network_avg: 0.0,
        network_avg_stderr: None,
        analytic_peak,
        analytic_avg,
        lower_bound_avg: lower,
        peak_upper_bound,
        max_queue_len: None,
        bounds_passed: None,
    };
    let mut rows: Vec<ExperimentRow> = reps
        .iter()
        .map(|r| ExperimentRow {
            network_peak: r.stats.network_peak,
            network_avg: r.stats.network_avg,
            max_queue_len: r.max_queue_len,
            bounds_passed: r.report.as_ref().map(|rep| rep.all_passed),
            ..base(RowKind::Replication, Some(r.seed), r.horizon, r.burn_in)
        })
        .collect();
    let peaks: Option<Vec<f64>> = reps.iter().map(|r| r.stats.network_peak).collect();
    let avgs: Vec<f64> = reps.iter().map(|r| r.stats.network_avg).collect();
    let (avg, avg_err) = mean_stderr(&avgs);
    let (peak, peak_err) = match peaks.as_deref().map(mean_stderr) {
        Some((m, e)) => (Some(m), e),
        None => (None, None),
    };
    rows.push(ExperimentRow {
        network_peak: peak,
        network_peak_stderr: peak_err,
        network_avg: avg,
        network_avg_stderr: avg_err,
        max_queue_len: reps.iter().filter_map(|r| r.max_queue_len).max(),
        bounds_passed: reps
            .iter()
            .map(|r| r.report.as_ref().map(|rep| rep.all_passed))
            .collect::<Option<Vec<bool>>>()
            .map(|v| v.iter().all(|&b| b)),
        ..base(RowKind::Aggregate, None, reps[0].horizon, reps[0].burn_in)
    });

    let reports: Vec<DisseminationReport> = reps.into_iter().filter_map(|r| r.report).collect();
    if let Some(path) = &cfg.report {
        write_json(path, &reports)?;
    }
    match &cfg.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            write_rows(&rows, file)?;
        }
        None => write_rows(&rows, &mut *stdout)?,
    }
    Ok(ExperimentOutput { rows, reports })
}

fn replicate(
    g: &MobilityGraph,
    prepared: &Prepared,
    cfg: &ExperimentConfig,
    seed: u64,
    first: bool,
) -> Result<Replication> {
    let run = RunConfig {
        horizon: cfg.horizon,
        burn_in: cfg.burn_in(),
        seed,
        start: cfg.start,
    };
    let record = first && cfg.trace.is_some();
    let gather = |walk: Walk<'_>, run: RunConfig| -> Result<Replication> {
        let (stats, trace) = simulate_gathering(g, walk, &run, record)?;
        if let (Some(trace), Some(path)) = (trace, &cfg.trace) {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            trace.write_csv(BufWriter::new(file)).map_err(|e| CliError::io(path, e))?;
        }
        Ok(Replication {
            seed,
            horizon: run.horizon,
            burn_in: run.burn_in,
            stats,
            max_queue_len: None,
            report: None,
        })
    };
    match prepared {
        Prepared::Chain { matrix, .. } => gather(Walk::Randomized(matrix), run),
        Prepared::AgeBased(g_fn) => gather(
            Walk::AgeBased {
                weights: g.weights(),
                g_fn,
            },
            run,
        ),
        Prepared::Periodic { sequence, .. } => {
            // whole periods only, the first one discarded
            let len = sequence.len() as u64;
            let horizon = (cfg.horizon / len).max(2) * len;
            let run = RunConfig {
                horizon,
                burn_in: len,
                seed,
                start: sequence[0],
            };
            gather(Walk::Periodic(sequence), run)
        }
        Prepared::Dissemination(policy) => {
            let log = first && cfg.events.is_some();
            let out = simulate_dissemination(g, policy, &run, log)?;
            if let (Some(events), Some(path)) = (&out.events, &cfg.events) {
                let file = File::create(path).map_err(|e| CliError::io(path, e))?;
                write_events_csv(events, BufWriter::new(file)).map_err(|e| CliError::io(path, e))?;
            }
            let report = dissemination_report(policy, &out.stats, g.weights())?;
            Ok(Replication {
                seed,
                horizon: run.horizon,
                burn_in: run.burn_in,
                stats: out.stats,
                max_queue_len: Some(out.max_queue_len),
                report: Some(report),
            })
        }
    }
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io("<csv>", e))?;
    Ok(())
}

/// Writes the summary for `design` in a human-readable form.
pub fn print_design_summary(s: &DesignSummary, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "method: {:?}", s.method)?;
    writeln!(out, "objective: {:.10} (metropolis-hastings {:.10})", s.objective, s.mh_objective)?;
    writeln!(out, "iterations: {}, converged: {}", s.iterations, s.converged)?;
    writeln!(out, "max residual: {:.3e}", s.max_residual)?;
    writeln!(out, "network peak age: {:.10}", s.ages.network_peak)?;
    writeln!(out, "optimal peak age: {:.10}", s.ages.peak_opt_value)?;
    writeln!(out, "network average age: {:.10}", s.ages.network_avg)?;
    writeln!(
        out,
        "average age bounds: [{:.10}, {:.10}]",
        s.ages.lower_bound_avg, s.ages.upper_bound_avg
    )?;
    writeln!(out, "{}", serde_json::to_string(&s.ages).map_err(io::Error::other)?)
}
