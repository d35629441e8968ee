use age_patrol::graph;
use age_patrol::markov::{self, ChainAnalysis, TransitionMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random positive weights on the edges and diagonal of a random graph.
fn lazy_random_chain(n: usize, seed: u64) -> TransitionMatrix {
    let g = graph::random_geometric(n, 1.0, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        p[(i, i)] = rng.random_range(0.1..1.0);
        for &j in g.neighbors(i) {
            p[(i, j)] = rng.random_range(0.1..1.0);
        }
        let s = p.row(i).sum();
        for j in 0..n {
            p[(i, j)] /= s;
        }
    }
    TransitionMatrix::new(p).unwrap()
}

/// Visit frequencies and the first two moments of return times to each
/// state, from one long walk.
fn walk_statistics(p: &TransitionMatrix, steps: u64, seed: u64) -> (Vec<f64>, Vec<(f64, f64)>) {
    let n = p.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits = vec![0u64; n];
    let mut last = vec![None::<u64>; n];
    let mut moments = vec![(0.0f64, 0.0f64, 0u64); n];
    let mut state = 0;
    for t in 0..steps {
        visits[state] += 1;
        if let Some(prev) = last[state] {
            let h = (t - prev) as f64;
            moments[state].0 += h;
            moments[state].1 += h * h;
            moments[state].2 += 1;
        }
        last[state] = Some(t);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = n - 1;
        for j in 0..n {
            acc += p.get(state, j);
            if u < acc {
                next = j;
                break;
            }
        }
        state = next;
    }
    let freq = visits.iter().map(|&v| v as f64 / steps as f64).collect();
    let mom = moments
        .iter()
        .map(|&(s1, s2, k)| (s1 / k as f64, s2 / k as f64))
        .collect();
    (freq, mom)
}

#[test]
fn stationary_and_return_moments_match_long_walks() {
    for seed in 0..5 {
        let p = lazy_random_chain(4 + seed as usize, seed);
        let a = ChainAnalysis::new(&p).unwrap();
        let (freq, mom) = walk_statistics(&p, 1_000_000, 100 + seed);
        for i in 0..p.n() {
            let rel = |x: f64, y: f64| (x - y).abs() / y;
            assert!(rel(freq[i], a.pi()[i]) < 0.02, "pi_{i}: {} vs {}", freq[i], a.pi()[i]);
            let (m1, m2) = a.return_time_moments(i);
            assert!(rel(mom[i].0, m1) < 0.02, "E[H] at {i}: {} vs {m1}", mom[i].0);
            assert!(rel(mom[i].1, m2) < 0.02, "E[H²] at {i}: {} vs {m2}", mom[i].1);
        }
    }
}

#[test]
fn fundamental_matrix_matches_series() {
    // Z = I + Σ_{k≥1} (P^k − Π) for an aperiodic chain
    for seed in 0..5 {
        let p = lazy_random_chain(6, seed);
        let a = ChainAnalysis::new(&p).unwrap();
        let n = p.n();
        let pi_mat = markov::stationary_projector(a.pi());
        let mut series = DMatrix::identity(n, n);
        let mut power = p.matrix().clone();
        for _ in 0..10_000 {
            let term = &power - &pi_mat;
            if term.amax() < 1e-16 {
                break;
            }
            series += term;
            power = &power * p.matrix();
        }
        assert!((&series - a.z()).amax() < 1e-10);
    }
}

#[test]
fn return_second_moment_is_at_least_squared_mean() {
    for seed in 0..20 {
        let p = lazy_random_chain(3 + (seed as usize % 8), seed);
        let a = ChainAnalysis::new(&p).unwrap();
        for i in 0..p.n() {
            let (m1, m2) = a.return_time_moments(i);
            assert!(m2 >= m1 * m1 * (1.0 - 1e-10));
            // z_ii ≥ (π_i + 1)/2
            assert!(a.z_diag()[i] >= (a.pi()[i] + 1.0) / 2.0 - 1e-10);
        }
    }
}
