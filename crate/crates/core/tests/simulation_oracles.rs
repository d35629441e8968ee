use age_patrol::analysis::{age_based_limit, analytic_ages, average_age_lower_bound};
use age_patrol::graph::{self, MobilityGraph};
use age_patrol::simulation::{
    periodic_ages, simulate_age_based, simulate_gathering, simulate_periodic, simulate_randomized,
    AgeFunction, RunConfig, Walk,
};
use age_patrol::{design, ChainAnalysis, TransitionMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lazy_chain_on(g: &MobilityGraph, seed: u64) -> TransitionMatrix {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = rng.random_range(0.05..1.0);
        for &j in g.neighbors(i) {
            p[(i, j)] = rng.random_range(0.05..1.0);
        }
        let s = p.row(i).sum();
        p.row_mut(i).iter_mut().for_each(|x| *x /= s);
    }
    TransitionMatrix::new(p).unwrap()
}

#[test]
fn simulated_ages_match_analytic() {
    for k in 0..6u64 {
        let n = 3 + (k as usize % 8);
        let g = graph::random_geometric(n, 0.7, k)
            .unwrap()
            .with_weights(age_patrol::WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: k })
            .unwrap();
        let p = lazy_chain_on(&g, k + 50);
        let r = analytic_ages(&ChainAnalysis::new(&p).unwrap(), g.weights()).unwrap();
        let s = simulate_randomized(&g, &p, &RunConfig::new(1_000_000).burn_in(10_000).seed(k)).unwrap();
        let peak = s.network_peak.unwrap();
        assert!((peak - r.network_peak).abs() / r.network_peak < 0.02, "{peak} vs {}", r.network_peak);
        assert!((s.network_avg - r.network_avg).abs() / r.network_avg < 0.02);
    }
}

#[test]
fn triangle_mh_peak() {
    let g = graph::ring(3, 1).unwrap();
    let p = design::build_mh(&g).unwrap().matrix;
    let s = simulate_randomized(&g, &p, &RunConfig::new(1_000_000).seed(4)).unwrap();
    assert!((s.network_peak.unwrap() - 9.0).abs() / 9.0 < 0.02);
}

fn uniform_families() -> Vec<MobilityGraph> {
    let mut out = Vec::new();
    for n in [9, 16, 25] {
        out.push(graph::random_geometric(n, graph::default_geometric_radius(n), n as u64).unwrap());
    }
    for side in 3..=5 {
        out.push(graph::grid_with_diagonals(side).unwrap());
    }
    for n in [9, 15, 21] {
        out.push(graph::ring(n, 3).unwrap());
    }
    out
}

#[test]
fn age_based_within_factor_and_window() {
    for g in uniform_families() {
        let n = g.n();
        let cfg = RunConfig::new(50_000);
        let s = simulate_age_based(&g, g.weights(), &AgeFunction::default(), &cfg).unwrap();
        let bound = average_age_lower_bound(g.weights()).unwrap();
        assert!(s.network_avg / bound <= age_based_limit(n), "n={n}: {}", s.network_avg / bound);

        let short = RunConfig::new(20 * n as u64).burn_in(0);
        let (_, trace) = simulate_gathering(
            &g,
            Walk::AgeBased { weights: g.weights(), g_fn: &AgeFunction::Identity },
            &short,
            true,
        )
        .unwrap();
        let log = trace.unwrap().visit_log;
        // once every terminal has been seen, every 2n-slot window covers all
        let warm = (0..log.len())
            .find(|&t| {
                let mut seen = vec![false; n];
                log[..=t].iter().for_each(|&v| seen[v] = true);
                seen.iter().all(|&s| s)
            })
            .unwrap();
        for w in log[warm..].windows(2 * n) {
            let mut seen = vec![false; n];
            w.iter().for_each(|&v| seen[v] = true);
            assert!(seen.iter().all(|&s| s));
        }
    }
}

#[test]
fn periodic_replay_matches_closed_form() {
    let g = graph::grid_with_diagonals(3).unwrap().with_weight_vector(vec![1.0, 2.0, 1.5, 1.0, 1.0, 1.2, 1.9, 1.1, 1.3]).unwrap();
    let seq = [0, 1, 2, 5, 4, 3, 6, 7, 8, 4];
    let exact = periodic_ages(&g, &seq).unwrap();
    let s = simulate_periodic(&g, &seq, 10 * 400).unwrap();
    for i in 0..9 {
        assert!((s.empirical_avg[i] - exact.per_terminal_avg[i]).abs() < 1e-12);
        assert!((s.empirical_peak[i].unwrap() - exact.per_terminal_peak[i]).abs() < 1e-12);
    }
    assert!((s.network_avg - exact.network_avg).abs() < 1e-9);
}

#[test]
fn hamiltonian_cycle_on_complete_graph() {
    for n in 3..=8 {
        let g = graph::complete(n).unwrap();
        let seq: Vec<usize> = (0..n).collect();
        let exact = periodic_ages(&g, &seq).unwrap();
        assert_eq!(exact.network_avg, (n * (n + 1) / 2) as f64);
        assert_eq!(exact.network_peak, (n * n) as f64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_stats(seed in any::<u64>(), n in 3usize..9) {
        let g = graph::ring(n, 1).unwrap();
        let p = design::build_mh(&g).unwrap().matrix;
        let cfg = RunConfig::new(5_000).seed(seed);
        let a = simulate_randomized(&g, &p, &cfg).unwrap();
        let b = simulate_randomized(&g, &p, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn traces_follow_the_age_recursion(seed in any::<u64>(), n in 3usize..8) {
        let g = graph::random_geometric(n, 0.8, seed % 1000).unwrap();
        let p = lazy_chain_on(&g, seed);
        let cfg = RunConfig::new(3_000).burn_in(300).seed(seed);
        let (stats, trace) = simulate_gathering(&g, Walk::Randomized(&p), &cfg, true).unwrap();
        let trace = trace.unwrap();
        for t in 1..trace.ages.len() {
            let (prev, next) = (trace.visit_log[t - 1], trace.visit_log[t]);
            prop_assert!(prev == next || g.has_edge(prev, next));
            for i in 0..n {
                let (a, b) = (trace.ages[t - 1][i], trace.ages[t][i]);
                prop_assert!(b == a + 1 || b == 1);
            }
        }
        // peaks are the gaps between consecutive visits
        for i in 0..n {
            let visits: Vec<usize> = (0..trace.visit_log.len())
                .filter(|&t| trace.visit_log[t] == i)
                .collect();
            let gaps: Vec<u64> = visits.windows(2).filter(|w| w[1] >= 300).map(|w| (w[1] - w[0]) as u64).collect();
            let recorded = &trace.peaks[i];
            prop_assert!(recorded.ends_with(&gaps));
            prop_assert_eq!(stats.n_peaks[i] as usize, recorded.len());
        }
    }
}
