//! Slotted simulation of information gathering.
//!
//! In slot `t` the agent sits at `m(t)` and collects a fresh update there, so
//! `A_i(t+1) = 1` if `m(t) = i` and `A_i(t) + 1` otherwise, with `A_i(1) = 1`.
//! The age recorded at a visit is a peak; it equals the time since the
//! previous visit. Statistics cover the slots `t ∈ (burn_in, horizon]`.
//!
//! Between resets an age is affine in `t`, so the accumulator stores only the
//! slot at which each age was last zero and sums arithmetic series when it
//! resets.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MobilityGraph;
use crate::markov::TransitionMatrix;
use crate::rng;

/// Longest horizon for which a full [`AgeTrace`] may be recorded.
pub const MAX_TRACE_HORIZON: u64 = 100_000;

/// Horizon, burn-in, seed and start terminal of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub start: usize,
}

impl RunConfig {
    /// Seed 0, start 0 and a burn-in of 2% of the horizon.
    pub fn new(horizon: u64) -> Self {
        RunConfig {
            horizon,
            burn_in: horizon / 50,
            seed: 0,
            start: 0,
        }
    }

    pub fn burn_in(self, burn_in: u64) -> Self {
        RunConfig { burn_in, ..self }
    }

    pub fn seed(self, seed: u64) -> Self {
        RunConfig { seed, ..self }
    }

    pub fn start(self, start: usize) -> Self {
        RunConfig { start, ..self }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.horizon <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "horizon {} must exceed burn-in {}",
                self.horizon, self.burn_in
            )));
        }
        if self.start >= n {
            return Err(Error::InvalidParameter(format!(
                "start terminal {} out of range for {n} terminals",
                self.start
            )));
        }
        Ok(())
    }
}

/// Measured ages of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeStats {
    pub horizon: u64,
    pub burn_in: u64,
    /// Mean recorded peak per terminal; `None` when no peak was recorded.
    pub empirical_peak: Vec<Option<f64>>,
    /// Time-average age per terminal.
    pub empirical_avg: Vec<f64>,
    /// `None` if some terminal recorded no peak.
    pub network_peak: Option<f64>,
    pub network_avg: f64,
    pub n_peaks: Vec<u64>,
}

impl AgeStats {
    /// Fraction of measured slots with a peak at each terminal.
    pub fn peak_frequency(&self) -> Vec<f64> {
        let slots = (self.horizon - self.burn_in) as f64;
        self.n_peaks.iter().map(|&k| k as f64 / slots).collect()
    }
}

/// Full record of a short run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeTrace {
    pub horizon: u64,
    /// `m(t)` for `t = 1..=horizon`.
    pub visit_log: Vec<usize>,
    /// `ages[t − 1][i] = A_i(t)`.
    pub ages: Vec<Vec<u64>>,
    /// Peaks recorded after burn-in, per terminal, in time order.
    pub peaks: Vec<Vec<u64>>,
}

impl AgeTrace {
    /// CSV with header `t,m,A_0,…,A_{n−1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.ages.first().map_or(0, Vec::len);
        write!(out, "t,m")?;
        for i in 0..n {
            write!(out, ",A_{i}")?;
        }
        writeln!(out)?;
        for (k, (m, row)) in self.visit_log.iter().zip(&self.ages).enumerate() {
            write!(out, "{},{m}", k + 1)?;
            for a in row {
                write!(out, ",{a}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Lazily integrated age processes of `n` terminals.
#[derive(Debug, Clone)]
pub(crate) struct AgeAccumulator {
    burn_in: u64,
    horizon: u64,
    /// `A_i(t) = t − base_i` until the next reset.
    base: Vec<u64>,
    /// Last slot already added to `area`.
    accounted: Vec<u64>,
    area: Vec<i128>,
    peak_sum: Vec<i128>,
    peak_count: Vec<u64>,
    trace: Option<AgeTrace>,
}

impl AgeAccumulator {
    pub(crate) fn new(n: usize, cfg: &RunConfig, record: bool) -> Result<Self> {
        let trace = if record {
            if cfg.horizon > MAX_TRACE_HORIZON {
                return Err(Error::InvalidParameter(format!(
                    "traces are limited to {MAX_TRACE_HORIZON} slots"
                )));
            }
            Some(AgeTrace {
                horizon: cfg.horizon,
                visit_log: Vec::with_capacity(cfg.horizon as usize),
                ages: Vec::with_capacity(cfg.horizon as usize),
                peaks: vec![Vec::new(); n],
            })
        } else {
            None
        };
        Ok(AgeAccumulator {
            burn_in: cfg.burn_in,
            horizon: cfg.horizon,
            base: vec![0; n],
            accounted: vec![0; n],
            area: vec![0; n],
            peak_sum: vec![0; n],
            peak_count: vec![0; n],
            trace,
        })
    }

    /// `A_i(t)`, valid for any `t` after the last reset of `i`.
    pub(crate) fn age(&self, i: usize, t: u64) -> u64 {
        t - self.base[i]
    }

    fn integrate(&mut self, i: usize, upto: u64) {
        let from = self.accounted[i].max(self.burn_in) + 1;
        if upto >= from {
            let (a, b, base) = (from as i128, upto as i128, self.base[i] as i128);
            self.area[i] += (b - a + 1) * (a + b - 2 * base) / 2;
        }
        self.accounted[i] = self.accounted[i].max(upto);
    }

    /// Logs slot `t` in the trace; call once per slot before any reset.
    pub(crate) fn observe(&mut self, t: u64, position: usize) {
        if let Some(trace) = self.trace.as_mut() {
            trace.visit_log.push(position);
            trace.ages.push(self.base.iter().map(|b| t - b).collect());
        }
    }

    /// Records `A_i(t)` as a peak and sets `A_i(t + s) = t + s − new_base`.
    pub(crate) fn reset(&mut self, i: usize, t: u64, new_base: u64) {
        self.integrate(i, t);
        if t > self.burn_in {
            let peak = t - self.base[i];
            self.peak_sum[i] += peak as i128;
            self.peak_count[i] += 1;
            if let Some(trace) = self.trace.as_mut() {
                trace.peaks[i].push(peak);
            }
        }
        self.base[i] = new_base;
    }

    pub(crate) fn finish(mut self, weights: &[f64]) -> (AgeStats, Option<AgeTrace>) {
        let n = self.base.len();
        for i in 0..n {
            self.integrate(i, self.horizon);
        }
        let slots = (self.horizon - self.burn_in) as f64;
        let empirical_avg: Vec<f64> = self.area.iter().map(|&a| a as f64 / slots).collect();
        let empirical_peak: Vec<Option<f64>> = self
            .peak_sum
            .iter()
            .zip(&self.peak_count)
            .map(|(&s, &k)| (k > 0).then(|| s as f64 / k as f64))
            .collect();
        let network_avg = empirical_avg.iter().zip(weights).map(|(a, w)| a * w).sum();
        let network_peak = empirical_peak
            .iter()
            .zip(weights)
            .map(|(p, w)| p.map(|p| p * w))
            .sum::<Option<f64>>();
        let stats = AgeStats {
            horizon: self.horizon,
            burn_in: self.burn_in,
            empirical_peak,
            empirical_avg,
            network_peak,
            network_avg,
            n_peaks: self.peak_count,
        };
        (stats, self.trace)
    }
}

/// Monotone increasing transform applied to ages by the age-based walker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgeFunction {
    Identity,
    /// `a² + a`
    #[default]
    QuadraticPlusLinear,
    /// `values[a − 1]` for ages up to the table length, continued linearly
    /// with the last slope beyond it.
    Table { values: Vec<f64> },
}

impl AgeFunction {
    pub fn validate(&self) -> Result<()> {
        if let AgeFunction::Table { values } = self {
            if values.len() < 2 {
                return Err(Error::InvalidParameter(
                    "age function table needs at least two values".into(),
                ));
            }
            if values.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "age function table must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, age: u64) -> f64 {
        let a = age as f64;
        match self {
            AgeFunction::Identity => a,
            AgeFunction::QuadraticPlusLinear => a * a + a,
            AgeFunction::Table { values } => {
                let k = values.len();
                if (1..=k as u64).contains(&age) {
                    values[age as usize - 1]
                } else {
                    let slope = values[k - 1] - values[k - 2];
                    values[k - 1] + slope * (a - k as f64)
                }
            }
        }
    }
}

/// How the agent moves.
#[derive(Debug, Clone, Copy)]
pub enum Walk<'a> {
    /// Markov chain `P`.
    Randomized(&'a TransitionMatrix),
    /// Greedy move to the neighbour maximising `w_j g(A_j(t))`, lowest index
    /// on ties. Never stays put.
    AgeBased {
        weights: &'a [f64],
        g_fn: &'a AgeFunction,
    },
    /// Fixed cyclic sequence, `m(t) = sequence[(t − 1) mod L]`.
    Periodic(&'a [usize]),
}

/// Inverse-CDF sampler over the non-zero entries of each row.
pub(crate) struct RowSampler {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl RowSampler {
    pub(crate) fn new(p: &TransitionMatrix) -> Self {
        let n = p.n();
        let mut targets = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for i in 0..n {
            let mut ts = Vec::new();
            let mut cs = Vec::new();
            let mut acc = 0.0;
            for j in 0..n {
                let v = p.get(i, j);
                if v > 0.0 {
                    acc += v;
                    ts.push(j);
                    cs.push(acc);
                }
            }
            targets.push(ts);
            cumulative.push(cs);
        }
        RowSampler {
            targets,
            cumulative,
        }
    }

    pub(crate) fn sample<R: Rng>(&self, i: usize, rng: &mut R) -> usize {
        let cs = &self.cumulative[i];
        let u = rng.random::<f64>() * cs[cs.len() - 1];
        let k = cs.partition_point(|&c| c <= u).min(cs.len() - 1);
        self.targets[i][k]
    }
}

/// Runs the gathering model, optionally recording a full trace.
pub fn simulate_gathering(
    g: &MobilityGraph,
    walk: Walk<'_>,
    cfg: &RunConfig,
    record_trace: bool,
) -> Result<(AgeStats, Option<AgeTrace>)> {
    let n = g.n();
    cfg.validate(n)?;
    let mut acc = AgeAccumulator::new(n, cfg, record_trace)?;
    let mut position = cfg.start;
    match walk {
        Walk::Randomized(p) => {
            if p.n() != n {
                return Err(Error::InvalidParameter(format!(
                    "{}-state chain on a {n}-terminal graph",
                    p.n()
                )));
            }
            p.check_support(g)?;
            if !p.is_irreducible() {
                return Err(Error::Reducible);
            }
            let sampler = RowSampler::new(p);
            let mut rng = rng::seeded(cfg.seed);
            for t in 1..=cfg.horizon {
                acc.observe(t, position);
                acc.reset(position, t, t);
                position = sampler.sample(position, &mut rng);
            }
        }
        Walk::AgeBased { weights, g_fn } => {
            g_fn.validate()?;
            if weights.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "{} weights for {n} terminals",
                    weights.len()
                )));
            }
            if let Some(i) = (0..n).find(|&i| g.out_degree(i) == 0) {
                return Err(Error::InvalidGraph(format!("terminal {i} has no out-edges")));
            }
            for t in 1..=cfg.horizon {
                acc.observe(t, position);
                acc.reset(position, t, t);
                let mut best = usize::MAX;
                let mut best_score = f64::NEG_INFINITY;
                // neighbours are sorted, so strict improvement keeps the lowest index
                for &j in g.neighbors(position) {
                    let score = weights[j] * g_fn.eval(acc.age(j, t));
                    if score > best_score {
                        best_score = score;
                        best = j;
                    }
                }
                position = best;
            }
        }
        Walk::Periodic(sequence) => {
            check_sequence(g, sequence)?;
            let len = sequence.len();
            position = sequence[0];
            for t in 1..=cfg.horizon {
                acc.observe(t, position);
                acc.reset(position, t, t);
                position = sequence[t as usize % len];
            }
        }
    }
    Ok(acc.finish(g.weights()))
}

pub fn simulate_randomized(
    g: &MobilityGraph,
    p: &TransitionMatrix,
    cfg: &RunConfig,
) -> Result<AgeStats> {
    simulate_gathering(g, Walk::Randomized(p), cfg, false).map(|r| r.0)
}

/// Age-based walk; `weights` drive the moves while `g.weights()` weigh the
/// network statistics.
pub fn simulate_age_based(
    g: &MobilityGraph,
    weights: &[f64],
    g_fn: &AgeFunction,
    cfg: &RunConfig,
) -> Result<AgeStats> {
    simulate_gathering(g, Walk::AgeBased { weights, g_fn }, cfg, false).map(|r| r.0)
}

/// Replays `sequence` for `horizon` slots, discarding the first period.
pub fn simulate_periodic(g: &MobilityGraph, sequence: &[usize], horizon: u64) -> Result<AgeStats> {
    check_sequence(g, sequence)?;
    let len = sequence.len() as u64;
    if !horizon.is_multiple_of(len) || horizon < 2 * len {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must be a multiple of the period {len}, at least two periods"
        )));
    }
    let cfg = RunConfig {
        horizon,
        burn_in: len,
        seed: 0,
        start: sequence[0],
    };
    simulate_gathering(g, Walk::Periodic(sequence), &cfg, false).map(|r| r.0)
}

fn check_sequence(g: &MobilityGraph, sequence: &[usize]) -> Result<()> {
    let n = g.n();
    if sequence.is_empty() {
        return Err(Error::InvalidParameter("empty periodic sequence".into()));
    }
    if let Some(v) = sequence.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidParameter(format!(
            "terminal {v} out of range for {n} terminals"
        )));
    }
    let len = sequence.len();
    for k in 0..len {
        let (a, b) = (sequence[k], sequence[(k + 1) % len]);
        if a != b && !g.has_edge(a, b) {
            return Err(Error::InvalidParameter(format!(
                "sequence moves along non-edge ({a},{b})"
            )));
        }
    }
    let mut seen = vec![false; n];
    sequence.iter().for_each(|&v| seen[v] = true);
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!(
            "terminal {i} is never visited, its age is unbounded"
        )));
    }
    Ok(())
}

/// Exact long-run ages of a periodic trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicAges {
    pub per_terminal_avg: Vec<f64>,
    pub per_terminal_peak: Vec<f64>,
    pub network_avg: f64,
    pub network_peak: f64,
}

/// Gap numerators `(Σ_g h_g² + h_g, visits)` per terminal.
fn gap_sums(n: usize, sequence: &[usize]) -> Vec<(u64, u64)> {
    let len = sequence.len();
    let mut first = vec![usize::MAX; n];
    let mut last = vec![usize::MAX; n];
    let mut sums = vec![(0u64, 0u64); n];
    for (pos, &v) in sequence.iter().enumerate() {
        if first[v] == usize::MAX {
            first[v] = pos;
        } else {
            let h = (pos - last[v]) as u64;
            sums[v].0 += h * h + h;
        }
        last[v] = pos;
        sums[v].1 += 1;
    }
    for v in 0..n {
        if first[v] != usize::MAX {
            let h = (len - last[v] + first[v]) as u64;
            sums[v].0 += h * h + h;
        }
    }
    sums
}

/// With gaps `h_1..h_k` between visits to `i` in a period of length `L`:
/// `A^ave_i = Σ(h² + h)/(2L)` and `A^p_i = L/k`.
pub fn periodic_ages(g: &MobilityGraph, sequence: &[usize]) -> Result<PeriodicAges> {
    check_sequence(g, sequence)?;
    let len = sequence.len() as f64;
    let sums = gap_sums(g.n(), sequence);
    let per_terminal_avg: Vec<f64> = sums.iter().map(|&(s, _)| s as f64 / (2.0 * len)).collect();
    let per_terminal_peak: Vec<f64> = sums.iter().map(|&(_, k)| len / k as f64).collect();
    let w = g.weights();
    Ok(PeriodicAges {
        network_avg: per_terminal_avg.iter().zip(w).map(|(a, w)| a * w).sum(),
        network_peak: per_terminal_peak.iter().zip(w).map(|(a, w)| a * w).sum(),
        per_terminal_avg,
        per_terminal_peak,
    })
}

/// Best periodic trajectory found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPeriodic {
    pub sequence: Vec<usize>,
    pub network_avg: f64,
    pub network_peak: f64,
}

pub const BRUTE_FORCE_MAX_TERMINALS: usize = 8;
pub const BRUTE_FORCE_MAX_PERIOD: usize = 16;

/// Closed walk of length at most `max_period` covering every terminal with
/// the smallest network average age (smallest peak among ties).
///
/// Only periodic trajectories are searched, so this is the best periodic
/// trajectory, not necessarily the best trajectory.
pub fn brute_force_optimal_periodic(
    g: &MobilityGraph,
    weights: &[f64],
    max_period: usize,
) -> Result<BestPeriodic> {
    let n = g.n();
    if n > BRUTE_FORCE_MAX_TERMINALS || max_period > BRUTE_FORCE_MAX_PERIOD {
        return Err(Error::InvalidParameter(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_TERMINALS} terminals and period {BRUTE_FORCE_MAX_PERIOD}"
        )));
    }
    if weights.len() != n || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(
            "need one positive weight per terminal".into(),
        ));
    }
    let avg_floor = crate::analysis::average_age_lower_bound(weights)?;
    let peak_floor = crate::analysis::peak_optimal_value(weights)?;
    let mut search = PeriodSearch {
        g,
        weights,
        to_origin: distances_to(g, 0),
        best: None,
    };
    for len in n.max(2)..=max_period {
        search.run(len);
        if let Some(b) = &search.best {
            let slack = 1e-9 * avg_floor;
            if b.network_avg <= avg_floor + slack && b.network_peak <= peak_floor + slack {
                break;
            }
        }
    }
    search.best.ok_or(Error::NoCoveringWalk(max_period))
}

fn distances_to(g: &MobilityGraph, target: usize) -> Vec<usize> {
    let n = g.n();
    let mut dist = vec![usize::MAX; n];
    dist[target] = 0;
    let mut frontier = vec![target];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for v in frontier {
            for u in 0..n {
                if dist[u] == usize::MAX && g.has_edge(u, v) {
                    dist[u] = dist[v] + 1;
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    dist
}

struct PeriodSearch<'a> {
    g: &'a MobilityGraph,
    weights: &'a [f64],
    to_origin: Vec<usize>,
    best: Option<BestPeriodic>,
}

#[derive(Clone, Copy)]
struct Visits {
    first: usize,
    last: usize,
    closed: u64,
    count: u64,
}

impl PeriodSearch<'_> {
    fn run(&mut self, len: usize) {
        let n = self.g.n();
        let mut walk = vec![0usize];
        let mut visits: Vec<Option<Visits>> = vec![None; n];
        visits[0] = Some(Visits {
            first: 0,
            last: 0,
            closed: 0,
            count: 1,
        });
        self.extend(len, &mut walk, &mut visits, n - 1);
    }

    fn lower_bound(&self, len: usize, filled: usize, visits: &[Option<Visits>]) -> f64 {
        let remaining = (len - filled) as f64;
        let l = len as f64;
        let total: f64 = visits
            .iter()
            .zip(self.weights)
            .map(|(v, w)| {
                let part = match v {
                    Some(v) => {
                        // the open stretch from the last visit round to the first
                        let r = (len - v.last + v.first) as f64;
                        let pieces = remaining.min(r - 1.0) + 1.0;
                        v.closed as f64 + r * r / pieces + r
                    }
                    None => l * l / remaining.max(1.0) + l,
                };
                w * part
            })
            .sum();
        total / (2.0 * l)
    }

    fn extend(
        &mut self,
        len: usize,
        walk: &mut Vec<usize>,
        visits: &mut Vec<Option<Visits>>,
        unvisited: usize,
    ) {
        let filled = walk.len();
        let here = walk[filled - 1];
        if filled == len {
            if unvisited == 0 && self.g.has_edge(here, walk[0]) {
                self.consider(walk);
            }
            return;
        }
        if len - filled < unvisited || self.to_origin[here] > len - filled + 1 {
            return;
        }
        if let Some(b) = &self.best {
            if self.lower_bound(len, filled, visits) > b.network_avg * (1.0 + 1e-12) {
                return;
            }
        }
        for k in 0..self.g.neighbors(here).len() {
            let next = self.g.neighbors(here)[k];
            let saved = visits[next];
            let fresh = saved.is_none();
            visits[next] = Some(match saved {
                None => Visits {
                    first: filled,
                    last: filled,
                    closed: 0,
                    count: 1,
                },
                Some(v) => {
                    let h = (filled - v.last) as u64;
                    Visits {
                        last: filled,
                        closed: v.closed + h * h + h,
                        count: v.count + 1,
                        ..v
                    }
                }
            });
            walk.push(next);
            self.extend(len, walk, visits, unvisited - usize::from(fresh));
            walk.pop();
            visits[next] = saved;
        }
    }

    fn consider(&mut self, walk: &[usize]) {
        let len = walk.len() as f64;
        let sums = gap_sums(self.g.n(), walk);
        let avg: f64 = sums
            .iter()
            .zip(self.weights)
            .map(|(&(s, _), w)| w * s as f64)
            .sum::<f64>()
            / (2.0 * len);
        let peak: f64 = sums
            .iter()
            .zip(self.weights)
            .map(|(&(_, k), w)| w * len / k as f64)
            .sum();
        let better = match &self.best {
            None => true,
            Some(b) => {
                let eps = 1e-12 * b.network_avg;
                avg < b.network_avg - eps
                    || (avg <= b.network_avg + eps && peak < b.network_peak - 1e-12 * b.network_peak)
            }
        };
        if better {
            self.best = Some(BestPeriodic {
                sequence: walk.to_vec(),
                network_avg: avg,
                network_peak: peak,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn two_cycle_is_exact() {
        let g = graph::complete(2).unwrap();
        let p = TransitionMatrix::cycle(2);
        let s = simulate_randomized(&g, &p, &RunConfig::new(10_000).burn_in(100)).unwrap();
        assert_eq!(s.network_avg, 3.0);
        assert_eq!(s.network_peak, Some(4.0));
    }

    #[test]
    fn horizon_must_exceed_burn_in() {
        let g = graph::complete(2).unwrap();
        let p = TransitionMatrix::cycle(2);
        assert!(simulate_randomized(&g, &p, &RunConfig::new(10).burn_in(10)).is_err());
    }

    #[test]
    fn binary_tree_walk_is_dfs() {
        let g = graph::binary_tree(3).unwrap();
        let cfg = RunConfig::new(13).burn_in(0);
        let (_, trace) = simulate_gathering(
            &g,
            Walk::AgeBased {
                weights: g.weights(),
                g_fn: &AgeFunction::default(),
            },
            &cfg,
            true,
        )
        .unwrap();
        assert_eq!(
            trace.unwrap().visit_log,
            vec![0, 1, 3, 1, 4, 1, 0, 2, 5, 2, 6, 2, 0]
        );
    }

    #[test]
    fn monotone_transforms_give_same_walk_under_uniform_weights() {
        let g = graph::grid_with_diagonals(4).unwrap();
        let cfg = RunConfig::new(500).burn_in(0);
        let table = AgeFunction::Table {
            values: vec![1.0, 5.0, 6.0, 100.0],
        };
        let walks: Vec<Vec<usize>> = [AgeFunction::Identity, AgeFunction::QuadraticPlusLinear, table]
            .iter()
            .map(|f| {
                simulate_gathering(&g, Walk::AgeBased { weights: g.weights(), g_fn: f }, &cfg, true)
                    .unwrap()
                    .1
                    .unwrap()
                    .visit_log
            })
            .collect();
        assert_eq!(walks[0], walks[1]);
        assert_eq!(walks[0], walks[2]);
    }

    #[test]
    fn table_extrapolates_linearly() {
        let f = AgeFunction::Table {
            values: vec![1.0, 3.0, 4.0],
        };
        assert_eq!(f.eval(2), 3.0);
        assert_eq!(f.eval(5), 6.0);
        assert!(AgeFunction::Table { values: vec![1.0, 1.0] }.validate().is_err());
    }

    #[test]
    fn periodic_examples() {
        let k2 = graph::complete(2).unwrap();
        let a = periodic_ages(&k2, &[0, 1, 0, 1]).unwrap();
        assert_eq!((a.network_avg, a.network_peak), (3.0, 4.0));
        let s = simulate_periodic(&k2, &[0, 1, 0, 1], 400).unwrap();
        assert_eq!((s.network_avg, s.network_peak), (3.0, Some(4.0)));

        let k5 = graph::complete(5).unwrap();
        let cycle = [0, 1, 2, 3, 4];
        let a = periodic_ages(&k5, &cycle).unwrap();
        assert_eq!((a.network_avg, a.network_peak), (15.0, 25.0));

        let path = graph::path(3).unwrap();
        assert!(simulate_periodic(&path, &[0, 2, 1], 30).is_err());
        assert!(periodic_ages(&path, &[0, 1]).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let tri = graph::ring(3, 1).unwrap();
        let b = brute_force_optimal_periodic(&tri, &[1.0; 3], 6).unwrap();
        assert_eq!(b.network_avg, 6.0);
        assert_eq!(b.sequence.len(), 3);

        let path = graph::path(3).unwrap();
        let b = brute_force_optimal_periodic(&path, &[1.0; 3], 4).unwrap();
        assert_eq!(b.network_avg, 6.5);
        assert_eq!(b.sequence, vec![0, 1, 2, 1]);
        assert!(brute_force_optimal_periodic(&path, &[1.0; 3], 3).is_err());

        let k2 = graph::complete(2).unwrap();
        let b = brute_force_optimal_periodic(&k2, &[1.0; 2], 2).unwrap();
        assert_eq!((b.sequence.clone(), b.network_avg), (vec![0, 1], 3.0));
    }

    #[test]
    fn trace_respects_age_dynamics() {
        let g = graph::ring(6, 1).unwrap();
        let p = crate::design::build_mh(&g).unwrap().matrix;
        let cfg = RunConfig::new(2000).burn_in(0).seed(9);
        let (stats, trace) = simulate_gathering(&g, Walk::Randomized(&p), &cfg, true).unwrap();
        let trace = trace.unwrap();
        for t in 1..trace.ages.len() {
            let (m_prev, m_next) = (trace.visit_log[t - 1], trace.visit_log[t]);
            assert!(m_prev == m_next || g.has_edge(m_prev, m_next));
            for i in 0..6 {
                let (a, b) = (trace.ages[t - 1][i], trace.ages[t][i]);
                assert!(b == a + 1 || b == 1);
                assert_eq!(b == 1, m_prev == i);
            }
        }
        for i in 0..6 {
            let mean = trace.peaks[i].iter().sum::<u64>() as f64 / trace.peaks[i].len() as f64;
            assert_eq!(stats.empirical_peak[i], Some(mean));
            let area: u64 = trace.ages.iter().map(|row| row[i]).sum();
            assert_eq!(stats.empirical_avg[i], area as f64 / 2000.0);
        }
    }
}
