//! Information dissemination: the agent carries updates generated at the
//! ground terminals' queues and delivers one per visit, first come first
//! served.
//!
//! Seen from one terminal, the agent is a server that alternates between
//! serving and being away, so each queue is a discrete-time FCFS queue with
//! Bernoulli arrivals and vacations. The closed forms here are for that
//! queue; [`simulate_vacation_queue`] checks them without reference to any
//! mobility model.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::design::{build_fastest_mixing, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::MobilityGraph;
use crate::markov::{ChainAnalysis, TransitionMatrix};
use crate::rng;
use crate::simulation::{AgeAccumulator, AgeStats, RowSampler, RunConfig};
use crate::tolerances;

/// Queues longer than this trigger a saturation warning.
pub const QUEUE_WARNING_LEN: usize = 1_000_000;

/// Moments of a Ber/G/1 queue with vacations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueModelParams {
    /// Arrival probability per slot.
    pub lambda: f64,
    pub service_mean: f64,
    pub service_second_moment: f64,
    pub vacation_mean: f64,
    pub vacation_second_moment: f64,
}

impl QueueModelParams {
    pub fn from_laws(lambda: f64, service: &DiscreteLaw, vacation: &DiscreteLaw) -> Self {
        QueueModelParams {
            lambda,
            service_mean: service.mean(),
            service_second_moment: service.second_moment(),
            vacation_mean: vacation.mean(),
            vacation_second_moment: vacation.second_moment(),
        }
    }

    /// Load `λ E[S]`.
    pub fn rho(&self) -> f64 {
        self.lambda * self.service_mean
    }

    pub fn validate(&self) -> Result<()> {
        let slack = tolerances::RETURN_VARIANCE_SLACK;
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "arrival probability {} must lie in (0, 1)",
                self.lambda
            )));
        }
        if !(self.service_mean >= 1.0 && self.vacation_mean >= 1.0) {
            return Err(Error::InvalidParameter(
                "service and vacation means are at least one slot".into(),
            ));
        }
        if self.service_second_moment < self.service_mean.powi(2) * (1.0 - slack)
            || self.vacation_second_moment < self.vacation_mean.powi(2) * (1.0 - slack)
        {
            return Err(Error::InvalidParameter(
                "second moments cannot be below the squared means".into(),
            ));
        }
        if self.rho() >= 1.0 {
            return Err(Error::Unstable(self.rho()));
        }
        Ok(())
    }

    fn waiting_terms(&self) -> f64 {
        let rho = self.rho();
        (self.lambda * self.service_second_moment - rho) / (2.0 * (1.0 - rho))
            + self.vacation_second_moment / (2.0 * self.vacation_mean)
            - 0.5
    }
}

/// Mean system time `E[T] = E[S] + (λE[S²] − ρ)/(2(1−ρ)) + E[V²]/(2E[V]) − ½`.
pub fn berg1_vacation_system_time(p: &QueueModelParams) -> Result<f64> {
    p.validate()?;
    Ok(p.service_mean + p.waiting_terms())
}

/// Peak age `1/λ + E[T]`.
pub fn berg1_vacation_peak_age(p: &QueueModelParams) -> Result<f64> {
    Ok(1.0 / p.lambda + berg1_vacation_system_time(p)?)
}

/// Finite distribution on positive slot counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    values: Vec<u64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(outcomes: &[(u64, f64)]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if outcomes.iter().any(|&(v, p)| v == 0 || !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "outcomes must be positive with non-negative probability".into(),
            ));
        }
        let total: f64 = outcomes.iter().map(|o| o.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(DiscreteLaw {
            values: outcomes.iter().map(|o| o.0).collect(),
            probs: outcomes.iter().map(|o| o.1 / total).collect(),
        })
    }

    pub fn deterministic(value: u64) -> Result<Self> {
        Self::new(&[(value, 1.0)])
    }

    /// Uniform on `lo..=hi`.
    pub fn uniform(lo: u64, hi: u64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidParameter(format!("empty range {lo}..={hi}")));
        }
        let p = 1.0 / (hi - lo + 1) as f64;
        Self::new(&(lo..=hi).map(|v| (v, p)).collect::<Vec<_>>())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, p)| v as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&v, p)| (v * v) as f64 * p)
            .sum()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let mut u = rng.random::<f64>();
        for (&v, &p) in self.values.iter().zip(&self.probs) {
            if u < p {
                return v;
            }
            u -= p;
        }
        *self.values.last().expect("non-empty law")
    }
}

/// Measurements from [`simulate_vacation_queue`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSimStats {
    pub delivered: u64,
    pub mean_system_time: f64,
    /// Mean of `d_k − a_{k−1}` (departure minus previous arrival).
    pub mean_peak_age: f64,
    /// Time average of the continuous-time age sawtooth.
    pub mean_age: f64,
}

/// Standalone FCFS queue with vacations over `horizon` slot boundaries.
///
/// At each boundary a packet arrives with probability `λ`; then, if the
/// server has just finished its previous service or vacation, it either
/// starts serving the head-of-line packet for a fresh `S` slots or leaves on
/// a fresh `V`-slot vacation when the queue is empty.
pub fn simulate_vacation_queue(
    lambda: f64,
    service: &DiscreteLaw,
    vacation: &DiscreteLaw,
    horizon: u64,
    seed: u64,
) -> Result<QueueSimStats> {
    QueueModelParams::from_laws(lambda, service, vacation).validate()?;
    let mut rng = rng::seeded(seed);
    let mut queue: VecDeque<u64> = VecDeque::new();
    let mut free_at = 0u64;
    // (arrival, departure) in departure order, which is arrival order
    let mut served: Vec<(u64, u64)> = Vec::new();
    for b in 0..horizon {
        if rng.random::<f64>() < lambda {
            queue.push_back(b);
        }
        if b == free_at {
            match queue.pop_front() {
                Some(a) => {
                    free_at = b + service.sample(&mut rng);
                    served.push((a, free_at));
                }
                None => free_at = b + vacation.sample(&mut rng),
            }
        }
    }
    if served.len() < 2 {
        return Err(Error::InvalidParameter(
            "horizon too short: fewer than two deliveries".into(),
        ));
    }
    let system: f64 = served.iter().map(|(a, d)| (d - a) as f64).sum();
    let (mut peak, mut area) = (0.0, 0.0);
    for w in served.windows(2) {
        let ((a0, _), (a1, d1)) = (w[0], w[1]);
        let gap = (a1 - a0) as f64;
        peak += (d1 - a0) as f64;
        area += gap * (d1 - a1) as f64 + gap * gap / 2.0;
    }
    let pairs = (served.len() - 1) as f64;
    let span = (served[served.len() - 1].0 - served[0].0) as f64;
    Ok(QueueSimStats {
        delivered: served.len() as u64,
        mean_system_time: system / served.len() as f64,
        mean_peak_age: peak / pairs,
        mean_age: area / span,
    })
}

/// Upper bound on the peak age of terminal `i` when it generates updates at
/// load `ρ_i = λ_i/π_i` and the agent follows the chain behind `analysis`:
/// `(1/π)[1 + z + 1/ρ + zρ/(1−ρ)] − ρ/(1−ρ) − 1`.
pub fn terminal_age_upper_bound(analysis: &ChainAnalysis, i: usize, rho: f64) -> Result<f64> {
    if i >= analysis.n() {
        return Err(Error::InvalidParameter(format!("terminal {i} out of range")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "load {rho} must lie in (0, 1)"
        )));
    }
    let pi = analysis.pi()[i];
    let z = analysis.z_diag()[i];
    let r = rho / (1.0 - rho);
    Ok((1.0 + z + 1.0 / rho + z * r) / pi - r - 1.0)
}

/// A trajectory paired with per-terminal update rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationPolicy {
    pub matrix: TransitionMatrix,
    /// Stationary distribution of `matrix`.
    pub pi: Vec<f64>,
    pub z_diag: Vec<f64>,
    pub discrepancy: f64,
    /// Arrival probability per slot at each terminal.
    pub rates: Vec<f64>,
    /// `λ_i/π_i`
    pub rho: Vec<f64>,
    /// Peak-age bound per terminal; `None` where the rate is zero.
    pub upper_bounds: Vec<Option<f64>>,
}

impl DisseminationPolicy {
    /// Arbitrary rates in `[0, π_i)` on an arbitrary irreducible chain.
    pub fn for_chain(matrix: TransitionMatrix, rates: Vec<f64>) -> Result<Self> {
        let analysis = ChainAnalysis::new(&matrix)?;
        Self::from_analysis(matrix, &analysis, rates)
    }

    fn from_analysis(
        matrix: TransitionMatrix,
        analysis: &ChainAnalysis,
        rates: Vec<f64>,
    ) -> Result<Self> {
        let pi = analysis.pi();
        if rates.len() != pi.len() {
            return Err(Error::InvalidParameter(format!(
                "{} rates for {} terminals",
                rates.len(),
                pi.len()
            )));
        }
        let mut rho = Vec::with_capacity(rates.len());
        let mut upper_bounds = Vec::with_capacity(rates.len());
        for (i, (&lambda, &p)) in rates.iter().zip(pi).enumerate() {
            if !(lambda >= 0.0 && lambda < p) {
                return Err(Error::InvalidParameter(format!(
                    "rate {lambda} at terminal {i} must lie in [0, {p}) for a stable queue"
                )));
            }
            let r = lambda / p;
            rho.push(r);
            upper_bounds.push(if lambda > 0.0 {
                Some(terminal_age_upper_bound(analysis, i, r)?)
            } else {
                None
            });
        }
        Ok(DisseminationPolicy {
            matrix,
            pi: pi.to_vec(),
            z_diag: analysis.z_diag().to_vec(),
            discrepancy: analysis.discrepancy(),
            rates,
            rho,
            upper_bounds,
        })
    }

    /// Same chain, new rates.
    pub fn with_rates(&self, rates: Vec<f64>) -> Result<Self> {
        Self::for_chain(self.matrix.clone(), rates)
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }
}

/// Rates `λ_i = π_i/(1 + √(z_ii − π_i))`, which minimise the peak-age bound
/// of each terminal for the given chain.
pub fn separation_rates(analysis: &ChainAnalysis) -> Result<Vec<f64>> {
    analysis
        .pi()
        .iter()
        .zip(analysis.z_diag())
        .enumerate()
        .map(|(i, (&p, &z))| {
            let gap = z - p;
            if gap < -tolerances::RETURN_VARIANCE_SLACK {
                return Err(Error::Numerical(format!(
                    "z_ii − π_i = {gap:e} < 0 at terminal {i}"
                )));
            }
            Ok(p / (1.0 + gap.max(0.0).sqrt()))
        })
        .collect()
}

/// Fastest-mixing trajectory for the graph's weights with separation rates.
pub fn separation_policy(g: &MobilityGraph, opts: &SolverOptions) -> Result<DisseminationPolicy> {
    let design = build_fastest_mixing(g, opts)?;
    separation_policy_for(design.matrix)
}

/// Separation rates on a given chain.
pub fn separation_policy_for(matrix: TransitionMatrix) -> Result<DisseminationPolicy> {
    let analysis = ChainAnalysis::new(&matrix)?;
    let rates = separation_rates(&analysis)?;
    DisseminationPolicy::from_analysis(matrix, &analysis, rates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    Deliver,
    Move,
}

/// One line of the event log. `generated` is the packet's generation slot
/// for arrivals and deliveries; for moves `terminal` is the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub kind: EventKind,
    pub terminal: usize,
    pub generated: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationRun {
    pub stats: AgeStats,
    /// Longest queue observed at a visit.
    pub max_queue_len: usize,
    pub deliveries: Vec<u64>,
    pub saturated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<Vec<Event>>,
}

/// Bernoulli arrivals of one terminal, drawn only when someone looks.
struct ArrivalStream {
    next: u64,
    gaps: Option<Geometric>,
}

impl ArrivalStream {
    fn new<R: Rng>(lambda: f64, rng: &mut R) -> Result<Self> {
        let gaps = if lambda > 0.0 {
            Some(Geometric::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?)
        } else {
            None
        };
        let mut s = ArrivalStream { next: 0, gaps };
        s.advance(rng);
        Ok(s)
    }

    fn advance<R: Rng>(&mut self, rng: &mut R) {
        self.next = match &self.gaps {
            Some(geo) => self.next.saturating_add(geo.sample(rng).saturating_add(1)),
            None => u64::MAX,
        };
    }
}

/// Runs the dissemination model.
///
/// Each slot: packets generated in the slot join their queues, the agent
/// delivers the head-of-line packet of its current terminal (if any), then
/// moves. A delivery of a packet generated at `G` in slot `t` records the
/// peak `A_i(t)` and sets `A_i(t+1) = t − G + 1`.
pub fn simulate_dissemination(
    g: &MobilityGraph,
    policy: &DisseminationPolicy,
    cfg: &RunConfig,
    log_events: bool,
) -> Result<DisseminationRun> {
    let n = g.n();
    cfg.validate(n)?;
    if policy.n() != n || policy.matrix.n() != n {
        return Err(Error::InvalidParameter(format!(
            "policy for {} terminals on a {n}-terminal graph",
            policy.n()
        )));
    }
    policy.matrix.check_support(g)?;
    let mut rng = rng::seeded(cfg.seed);
    let mut streams = policy
        .rates
        .iter()
        .map(|&l| ArrivalStream::new(l, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let sampler = RowSampler::new(&policy.matrix);
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); n];
    let mut acc = AgeAccumulator::new(n, cfg, false)?;
    let mut deliveries = vec![0u64; n];
    let mut max_queue_len = 0;
    let mut saturated = false;
    let mut events = log_events.then(Vec::new);
    let mut position = cfg.start;

    for t in 1..=cfg.horizon {
        let stream = &mut streams[position];
        while stream.next <= t {
            queues[position].push_back(stream.next);
            if let Some(ev) = events.as_mut() {
                ev.push(Event {
                    t: stream.next,
                    kind: EventKind::Arrive,
                    terminal: position,
                    generated: Some(stream.next),
                });
            }
            stream.advance(&mut rng);
        }
        let queue = &mut queues[position];
        max_queue_len = max_queue_len.max(queue.len());
        if queue.len() > QUEUE_WARNING_LEN && !saturated {
            saturated = true;
            tracing::warn!(terminal = position, t, len = queue.len(), "queue is saturating");
        }
        if let Some(generated) = queue.pop_front() {
            acc.reset(position, t, generated);
            deliveries[position] += 1;
            if let Some(ev) = events.as_mut() {
                ev.push(Event {
                    t,
                    kind: EventKind::Deliver,
                    terminal: position,
                    generated: Some(generated),
                });
            }
        }
        position = sampler.sample(position, &mut rng);
        if let Some(ev) = events.as_mut() {
            ev.push(Event {
                t,
                kind: EventKind::Move,
                terminal: position,
                generated: None,
            });
        }
    }
    if let Some(ev) = events.as_mut() {
        // arrivals are materialised at the next visit; put them back in time order
        ev.sort_by_key(|e| (e.t, e.kind));
    }
    let (stats, _) = acc.finish(g.weights());
    Ok(DisseminationRun {
        stats,
        max_queue_len,
        deliveries,
        saturated,
        events,
    })
}

/// Writes the event log as CSV with header `t,event,terminal,generated`.
pub fn write_events_csv<W: std::io::Write>(events: &[Event], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,event,terminal,generated")?;
    for e in events {
        let kind = match e.kind {
            EventKind::Arrive => "arrive",
            EventKind::Deliver => "deliver",
            EventKind::Move => "move",
        };
        let generated = e.generated.map(|g| g.to_string()).unwrap_or_default();
        writeln!(out, "{},{kind},{},{generated}", e.t, e.terminal)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalCheck {
    pub peak: Option<f64>,
    pub avg: f64,
    pub upper_bound: Option<f64>,
    /// `peak ≤ upper_bound` up to the Monte-Carlo margin; `None` when either
    /// side is missing.
    pub peak_within_bound: Option<bool>,
    /// `avg ≤ peak` up to the Monte-Carlo margin; `None` without peaks.
    pub avg_within_peak: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationReport {
    pub terminals: Vec<TerminalCheck>,
    pub network_peak: Option<f64>,
    pub network_avg: f64,
    /// `Σ w_i/π_i`, the gathering peak age of the same chain.
    pub gathering_peak: f64,
    pub peak_ratio: Option<f64>,
    pub avg_ratio: f64,
    /// `𝒵/4`, a lower proxy for the chain's mixing time.
    pub mixing_proxy: f64,
    /// `4h + 4√h + 2` at the proxy `h`; informational only.
    pub peak_bound_shape: f64,
    /// `8h + 8√h + 4` at the proxy `h`; informational only.
    pub avg_bound_shape: f64,
    pub all_passed: bool,
}

pub fn dissemination_report(
    policy: &DisseminationPolicy,
    stats: &AgeStats,
    weights: &[f64],
) -> Result<DisseminationReport> {
    let n = policy.n();
    if stats.empirical_avg.len() != n || weights.len() != n {
        return Err(Error::InvalidParameter(
            "stats, weights and policy disagree on the number of terminals".into(),
        ));
    }
    let margin = 1.0 + tolerances::MONTE_CARLO_MARGIN;
    let terminals: Vec<TerminalCheck> = (0..n)
        .map(|i| {
            let peak = stats.empirical_peak[i];
            let avg = stats.empirical_avg[i];
            let upper_bound = policy.upper_bounds[i];
            TerminalCheck {
                peak,
                avg,
                upper_bound,
                peak_within_bound: peak.zip(upper_bound).map(|(p, u)| p <= u * margin),
                avg_within_peak: peak.map(|p| avg <= p * margin),
            }
        })
        .collect();
    let all_passed = terminals
        .iter()
        .all(|c| c.peak_within_bound != Some(false) && c.avg_within_peak != Some(false));
    let gathering_peak: f64 = weights.iter().zip(&policy.pi).map(|(w, p)| w / p).sum();
    let h = policy.discrepancy / 4.0;
    Ok(DisseminationReport {
        network_peak: stats.network_peak,
        network_avg: stats.network_avg,
        gathering_peak,
        peak_ratio: stats.network_peak.map(|p| p / gathering_peak),
        avg_ratio: stats.network_avg / gathering_peak,
        mixing_proxy: h,
        peak_bound_shape: 4.0 * h + 4.0 * h.sqrt() + 2.0,
        avg_bound_shape: 8.0 * h + 8.0 * h.sqrt() + 4.0,
        terminals,
        all_passed,
    })
}
