//! Network-size sweeps behind the `reproduce` command.
//!
//! Each sweep point is one seeded instance of a graph family with random
//! weights in (1, 2]. Every applicable policy is simulated for a few
//! replications and reported next to its closed-form ages and the bounds.
//! A failing point is reported in the `note` column and the sweep goes on.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use age_patrol::analysis::{analytic_ages, average_age_lower_bound, peak_optimal_value};
use age_patrol::design::{build_fastest_mixing, build_mh, spectral_objective};
use age_patrol::dissemination::{separation_policy_for, simulate_dissemination};
use age_patrol::simulation::{simulate_age_based, simulate_randomized, RunConfig};
use age_patrol::{AgeFunction, AgeReport, AgeStats, ChainAnalysis, SolverOptions, WeightMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::write_rows;
use crate::config::{GraphSpec, DEFAULT_HORIZON};
use crate::error::{CliError, Result};
use crate::stats::mean_stderr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Figure {
    /// Peak age against network size, geometric graphs.
    Fig4,
    /// Average age, geometric graphs.
    Fig5,
    /// Average age, grids with diagonals.
    Fig6,
    /// Average age, rings with k = 3.
    Fig7,
    /// Gathering against dissemination average age, geometric graphs.
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }

    fn family(self) -> Family {
        match self {
            Figure::Fig4 | Figure::Fig5 | Figure::Fig8 => Family::Geometric,
            Figure::Fig6 => Family::Grid,
            Figure::Fig7 => Family::Ring,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Family {
    Geometric,
    Grid,
    Ring,
}

/// Ring sizes. 16 and 25 are included so rings can be compared with grids
/// of the same size.
pub const RING_SIZES: [usize; 10] = [9, 12, 15, 16, 18, 21, 24, 25, 27, 30];
pub const RING_K: usize = 3;
pub const GRID_SIDES: std::ops::RangeInclusive<usize> = 3..=9;
pub const GEOMETRIC_SIZES: [usize; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

impl Family {
    fn specs(self, seed: u64) -> Vec<(usize, GraphSpec)> {
        match self {
            Family::Geometric => GEOMETRIC_SIZES
                .iter()
                .map(|&n| {
                    let spec = GraphSpec::Geometric {
                        n,
                        r: None,
                        seed: instance_seed(seed, n),
                    };
                    (n, spec)
                })
                .collect(),
            Family::Grid => GRID_SIDES.map(|side| (side * side, GraphSpec::Grid { side })).collect(),
            Family::Ring => RING_SIZES
                .iter()
                .map(|&n| (n, GraphSpec::Ring { n, k: RING_K }))
                .collect(),
        }
    }
}

fn instance_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_mul(1_000).wrapping_add(n as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    pub horizon: u64,
    pub replications: usize,
    /// Base seed for instances, weights and simulations.
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            horizon: DEFAULT_HORIZON,
            replications: 3,
            seed: 1,
            solver: SolverOptions::default(),
        }
    }
}

/// One line of a figure CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub n: usize,
    pub policy: String,
    pub metric: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Default)]
struct Samples {
    peaks: Vec<Option<f64>>,
    avgs: Vec<f64>,
}

impl Samples {
    fn push(&mut self, s: &AgeStats) {
        self.peaks.push(s.network_peak);
        self.avgs.push(s.network_avg);
    }

    fn peak(&self) -> (Option<f64>, Option<f64>) {
        match self.peaks.iter().copied().collect::<Option<Vec<f64>>>() {
            Some(v) => {
                let (m, e) = mean_stderr(&v);
                (Some(m), e)
            }
            None => (None, None),
        }
    }

    fn avg(&self) -> (Option<f64>, Option<f64>) {
        let (m, e) = mean_stderr(&self.avgs);
        (Some(m), e)
    }
}

/// Everything measured at one sweep point.
struct Point {
    mh: AgeReport,
    fm: AgeReport,
    fm_note: String,
    lower: f64,
    peak_opt: f64,
    sim_mh: Samples,
    sim_fm: Samples,
    sim_age: Samples,
    dissemination: Option<(Samples, f64)>,
}

fn run_point(spec: &GraphSpec, weight_seed: u64, dissemination: bool, opts: &ReproduceOptions) -> Result<Point> {
    let g = spec.build(Some(WeightMode::RandomInterval {
        lo: 1.0,
        hi: 2.0,
        seed: weight_seed,
    }))?;
    let w = g.weights();
    let mh = build_mh(&g)?;
    let fm = build_fastest_mixing(&g, &opts.solver)?;
    let mh_ages = analytic_ages(&ChainAnalysis::new(&mh.matrix)?, w)?;
    let fm_ages = analytic_ages(&ChainAnalysis::new(&fm.matrix)?, w)?;
    let fm_note = format!(
        "objective {:.6} (mh {:.6}), {} iterations{}",
        fm.objective.unwrap_or(f64::NAN),
        spectral_objective(mh.matrix.matrix(), &mh.target_pi),
        fm.iterations,
        if fm.converged { "" } else { ", iteration cap" }
    );
    let policy = if dissemination {
        Some(separation_policy_for(fm.matrix.clone())?)
    } else {
        None
    };

    let seeds: Vec<u64> = (1..=opts.replications as u64)
        .map(|r| opts.seed.wrapping_mul(1_000).wrapping_add(r))
        .collect();
    let g_fn = AgeFunction::default();
    let runs: Vec<Result<[Option<AgeStats>; 4]>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = RunConfig::new(opts.horizon).seed(seed);
            Ok([
                Some(simulate_randomized(&g, &mh.matrix, &cfg)?),
                Some(simulate_randomized(&g, &fm.matrix, &cfg)?),
                Some(simulate_age_based(&g, w, &g_fn, &cfg)?),
                match &policy {
                    Some(p) => Some(simulate_dissemination(&g, p, &cfg, false)?.stats),
                    None => None,
                },
            ])
        })
        .collect();
    let mut sims: [Samples; 4] = Default::default();
    for run in runs {
        for (s, stats) in sims.iter_mut().zip(run?) {
            if let Some(stats) = stats {
                s.push(&stats);
            }
        }
    }
    let [sim_mh, sim_fm, sim_age, sim_dis] = sims;
    let dissemination = policy.map(|p| {
        let bound = p.upper_bounds.iter().zip(w).map(|(b, w)| b.unwrap_or(f64::NAN) * w).sum();
        (sim_dis, bound)
    });
    Ok(Point {
        mh: mh_ages,
        fm: fm_ages,
        fm_note,
        lower: average_age_lower_bound(w)?,
        peak_opt: peak_optimal_value(w)?,
        sim_mh,
        sim_fm,
        sim_age,
        dissemination,
    })
}

fn figure_rows(figure: Figure, n: usize, point: &std::result::Result<Point, String>) -> Vec<FigureRow> {
    let row = |policy: &str, metric: &str, (value, stderr): (Option<f64>, Option<f64>), note: &str| FigureRow {
        n,
        policy: policy.to_string(),
        metric: metric.to_string(),
        value,
        stderr,
        note: match value {
            Some(_) => note.to_string(),
            None => "no peak recorded at some terminal; run longer".to_string(),
        },
    };
    let p = match point {
        Ok(p) => p,
        Err(e) => return vec![row("all", "error", (None, None), e)],
    };
    let exact = |v: f64| (Some(v), None);
    match figure {
        Figure::Fig4 => vec![
            row("mh", "peak_age", p.sim_mh.peak(), ""),
            row("fastest_mixing", "peak_age", p.sim_fm.peak(), &p.fm_note),
            row("age_based", "peak_age", p.sim_age.peak(), ""),
            row("mh", "analytic_peak_age", exact(p.mh.network_peak), ""),
            row("fastest_mixing", "analytic_peak_age", exact(p.fm.network_peak), ""),
            row("bound", "peak_opt", exact(p.peak_opt), ""),
        ],
        Figure::Fig5 | Figure::Fig6 | Figure::Fig7 => vec![
            row("mh", "avg_age", p.sim_mh.avg(), ""),
            row("fastest_mixing", "avg_age", p.sim_fm.avg(), &p.fm_note),
            row("age_based", "avg_age", p.sim_age.avg(), ""),
            row("mh", "analytic_avg_age", exact(p.mh.network_avg), ""),
            row("fastest_mixing", "analytic_avg_age", exact(p.fm.network_avg), ""),
            row("bound", "lower_bound_avg", exact(p.lower), ""),
        ],
        Figure::Fig8 => {
            let mut rows = vec![
                row("gathering", "avg_age", p.sim_fm.avg(), "fastest-mixing trajectory"),
                row("gathering", "peak_age", p.sim_fm.peak(), "fastest-mixing trajectory"),
            ];
            if let Some((d, bound)) = &p.dissemination {
                rows.push(row("dissemination", "avg_age", d.avg(), "separation policy"));
                rows.push(row("dissemination", "peak_age", d.peak(), "separation policy"));
                rows.push(row("dissemination", "peak_upper_bound", exact(*bound), ""));
            }
            rows.push(row("bound", "lower_bound_avg", exact(p.lower), ""));
            rows
        }
    }
}

/// Runs the sweeps needed by `figures`, sharing instances between figures
/// of the same family, and writes `<out_dir>/<figure>.csv` for each.
pub fn reproduce(figures: &[Figure], out_dir: &Path, opts: &ReproduceOptions) -> Result<Vec<(Figure, PathBuf)>> {
    if opts.replications == 0 {
        return Err(CliError::usage("replications must be at least 1"));
    }
    if opts.horizon <= opts.horizon / 50 {
        return Err(CliError::usage("horizon too short"));
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let figures: BTreeSet<Figure> = figures.iter().copied().collect();
    let families: BTreeSet<Family> = figures.iter().map(|f| f.family()).collect();
    let dissemination = figures.contains(&Figure::Fig8);

    let mut jobs: Vec<(Family, usize, GraphSpec)> = families
        .iter()
        .flat_map(|&fam| fam.specs(opts.seed).into_iter().map(move |(n, s)| (fam, n, s)))
        .collect();
    // biggest instances first so the solver-heavy points start early
    jobs.sort_by_key(|job| std::cmp::Reverse(job.1));
    let points: Vec<(Family, usize, std::result::Result<Point, String>)> = jobs
        .par_iter()
        .map(|(fam, n, spec)| {
            let weight_seed = instance_seed(opts.seed, *n).wrapping_add(500);
            let dis = dissemination && *fam == Family::Geometric;
            let started = std::time::Instant::now();
            let point = run_point(spec, weight_seed, dis, opts).map_err(|e| e.to_string());
            tracing::info!(family = ?fam, n, seconds = started.elapsed().as_secs_f64(), ok = point.is_ok(), "sweep point");
            (*fam, *n, point)
        })
        .collect();

    let mut written = Vec::new();
    for figure in figures {
        let mut rows: Vec<FigureRow> = Vec::new();
        let mut mine: Vec<_> = points.iter().filter(|(fam, _, _)| *fam == figure.family()).collect();
        mine.sort_by_key(|(_, n, _)| *n);
        for (_, n, point) in mine {
            rows.extend(figure_rows(figure, *n, point));
        }
        let path = out_dir.join(format!("{}.csv", figure.name()));
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_rows(&rows, file)?;
        written.push((figure, path));
    }
    Ok(written)
}

/// Reads a figure CSV back.
pub fn read_figure(path: &Path) -> Result<Vec<FigureRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<FigureRow>, _>>()?)
}
