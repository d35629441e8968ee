//! Closed-form ages of randomized trajectories and the bounds around them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::ChainAnalysis;

/// Per-terminal and network ages of a randomized trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeReport {
    /// `1/π_i`
    pub per_terminal_peak: Vec<f64>,
    /// `z_ii/π_i`
    pub per_terminal_avg: Vec<f64>,
    pub network_peak: f64,
    pub network_avg: f64,
    pub lower_bound_avg: f64,
    pub upper_bound_avg: f64,
    /// `(Σ√w)²`, the smallest network peak age of any randomized trajectory.
    pub peak_opt_value: f64,
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidParameter("no weights given".into()));
    }
    match weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        Some(w) => Err(Error::InvalidParameter(format!(
            "weight must be positive, got {w}"
        ))),
        None => Ok(()),
    }
}

fn check_len(analysis: &ChainAnalysis, weights: &[f64]) -> Result<()> {
    check_weights(weights)?;
    if analysis.n() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for a chain on {} terminals",
            weights.len(),
            analysis.n()
        )));
    }
    Ok(())
}

pub fn analytic_ages(analysis: &ChainAnalysis, weights: &[f64]) -> Result<AgeReport> {
    check_len(analysis, weights)?;
    let pi = analysis.pi();
    let per_terminal_peak: Vec<f64> = pi.iter().map(|p| 1.0 / p).collect();
    let per_terminal_avg: Vec<f64> = analysis
        .z_diag()
        .iter()
        .zip(pi)
        .map(|(z, p)| z / p)
        .collect();
    let dot = |v: &[f64]| v.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
    Ok(AgeReport {
        network_peak: dot(&per_terminal_peak),
        network_avg: dot(&per_terminal_avg),
        lower_bound_avg: average_age_lower_bound(weights)?,
        upper_bound_avg: average_age_upper_bound(analysis, weights)?,
        peak_opt_value: peak_optimal_value(weights)?,
        per_terminal_peak,
        per_terminal_avg,
    })
}

/// `(Σ_i √w_i)²`
pub fn peak_optimal_value(weights: &[f64]) -> Result<f64> {
    check_weights(weights)?;
    let s: f64 = weights.iter().map(|w| w.sqrt()).sum();
    Ok(s * s)
}

/// Lower bound on the network average age of any trajectory,
/// `½[(Σ√w)² + Σw]`.
pub fn average_age_lower_bound(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    Ok(0.5 * (peak_optimal_value(weights)? + total))
}

/// `Σ_i (w_i 𝒵/π_i + w_i)` with `𝒵` the discrepancy of the chain.
pub fn average_age_upper_bound(analysis: &ChainAnalysis, weights: &[f64]) -> Result<f64> {
    check_len(analysis, weights)?;
    let zeta = analysis.discrepancy();
    Ok(weights
        .iter()
        .zip(analysis.pi())
        .map(|(w, p)| w * zeta / p + w)
        .sum())
}

/// Achieved ages relative to the best possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    /// network peak / `(Σ√w)²`
    pub peak_ratio: f64,
    /// network average / average lower bound
    pub avg_ratio: f64,
    /// `(2n+1)/(n+1)`, the guarantee of the age-based walker
    pub age_based_limit: f64,
    /// analytic upper bound / lower bound; absent for measured ages
    pub bound_ratio: Option<f64>,
}

pub fn factor_report(report: &AgeReport) -> FactorReport {
    let n = report.per_terminal_peak.len();
    FactorReport {
        peak_ratio: report.network_peak / report.peak_opt_value,
        avg_ratio: report.network_avg / report.lower_bound_avg,
        age_based_limit: age_based_limit(n),
        bound_ratio: Some(report.upper_bound_avg / report.lower_bound_avg),
    }
}

/// Ratios for ages that were measured rather than computed.
pub fn measured_factor_report(
    weights: &[f64],
    network_peak: f64,
    network_avg: f64,
) -> Result<FactorReport> {
    Ok(FactorReport {
        peak_ratio: network_peak / peak_optimal_value(weights)?,
        avg_ratio: network_avg / average_age_lower_bound(weights)?,
        age_based_limit: age_based_limit(weights.len()),
        bound_ratio: None,
    })
}

pub fn age_based_limit(n: usize) -> f64 {
    (2 * n + 1) as f64 / (n + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::target_distribution;
    use crate::markov::TransitionMatrix;
    use proptest::prelude::*;

    fn analysed(rows: &[Vec<f64>]) -> ChainAnalysis {
        ChainAnalysis::new(&TransitionMatrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn two_cycle() {
        let a = analysed(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let r = analytic_ages(&a, &[1.0, 1.0]).unwrap();
        // ages alternate 1,2,1,2: peaks are 2, time average 1.5
        for i in 0..2 {
            assert_close!(r.per_terminal_peak[i], 2.0, 1e-12);
            assert_close!(r.per_terminal_avg[i], 1.5, 1e-12);
        }
        assert_close!(r.network_peak, 4.0, 1e-12);
        assert_close!(r.network_avg, 3.0, 1e-12);
        assert_close!(r.upper_bound_avg, 4.0, 1e-12);
        let f = factor_report(&r);
        assert_close!(f.avg_ratio, 1.0, 1e-12);
    }

    #[test]
    fn iid_complete_graph() {
        let n = 5;
        let a = ChainAnalysis::new(&TransitionMatrix::iid(&vec![0.2; n]).unwrap()).unwrap();
        let r = analytic_ages(&a, &vec![1.0; n]).unwrap();
        assert_close!(r.network_peak, 25.0, 1e-9);
        assert_close!(r.network_avg, 25.0, 1e-9);
        assert!(r.upper_bound_avg >= r.network_peak);
    }

    #[test]
    fn triangle_rotation() {
        let a = ChainAnalysis::new(&TransitionMatrix::cycle(3)).unwrap();
        let r = analytic_ages(&a, &[1.0; 3]).unwrap();
        // age sequence 1,2,3 repeating averages to 2
        for v in &r.per_terminal_avg {
            assert_close!(*v, 2.0, 1e-12);
        }
        assert_close!(r.network_avg, 6.0, 1e-12);
        assert_close!(factor_report(&r).avg_ratio, 1.0, 1e-12);
    }

    #[test]
    fn lower_bound_examples() {
        assert_close!(average_age_lower_bound(&[1.0; 7]).unwrap(), 28.0, 1e-12);
        assert_close!(average_age_lower_bound(&[1.0, 4.0]).unwrap(), 7.0, 1e-12);
        assert_close!(average_age_lower_bound(&[1.0]).unwrap(), 1.0, 1e-12);
        assert!(average_age_lower_bound(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn mh_peak_is_optimal() {
        let g = crate::graph::random_geometric(12, 0.6, 3)
            .unwrap()
            .with_weights(crate::WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: 4 })
            .unwrap();
        let d = crate::design::build_mh(&g).unwrap();
        let a = ChainAnalysis::new(&d.matrix).unwrap();
        let r = analytic_ages(&a, g.weights()).unwrap();
        assert_close!(factor_report(&r).peak_ratio, 1.0, 1e-9);
    }

    fn random_chain() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..=10).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n).prop_map(
                move |mut rows| {
                    // a cycle with positive mass keeps the chain irreducible
                    for (i, row) in rows.iter_mut().enumerate() {
                        row[(i + 1) % n] += 0.05;
                        let s: f64 = row.iter().sum();
                        row.iter_mut().for_each(|x| *x /= s);
                    }
                    rows
                },
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn bounds_sandwich_the_average(
            rows in random_chain(),
            raw in prop::collection::vec(0.1f64..10.0, 10),
        ) {
            let a = analysed(&rows);
            let w = &raw[..a.n()];
            let r = analytic_ages(&a, w).unwrap();
            prop_assert!(r.lower_bound_avg <= r.network_avg * (1.0 + 1e-12));
            prop_assert!(r.network_avg <= r.upper_bound_avg * (1.0 + 1e-12));
            prop_assert!(r.peak_opt_value <= r.network_peak * (1.0 + 1e-12));
            for i in 0..a.n() {
                prop_assert!(r.per_terminal_avg[i] >= (r.per_terminal_peak[i] + 1.0) / 2.0 - 1e-9);
            }
        }

        #[test]
        fn optimal_peak_identity(raw in prop::collection::vec(0.01f64..100.0, 1..20)) {
            let target = target_distribution(&raw).unwrap();
            let direct: f64 = raw.iter().zip(&target).map(|(w, p)| w / p).sum();
            let closed = peak_optimal_value(&raw).unwrap();
            prop_assert!((direct - closed).abs() <= 1e-9 * closed);
        }
    }
}
