use age_patrol::analysis::{analytic_ages, peak_optimal_value};
use age_patrol::design::{
    build_fastest_mixing, build_mh, spectral_objective, validate_design, SolverOptions,
};
use age_patrol::{graph, ChainAnalysis, WeightMode};
use nalgebra::DMatrix;

/// Best `‖P − J/n‖₂` over symmetric circulant chains `aI + b(S + S⁻¹)` on a
/// ring, by grid search over `b`.
fn circulant_grid_optimum(n: usize) -> f64 {
    let steps = 50_000;
    (0..=steps)
        .map(|k| {
            let b = 0.5 * k as f64 / steps as f64;
            let p = DMatrix::from_fn(n, n, |i, j| {
                let d = (i + n - j) % n;
                if d == 0 {
                    1.0 - 2.0 * b
                } else if d == 1 || d == n - 1 {
                    b
                } else {
                    0.0
                }
            });
            let m = p - DMatrix::from_element(n, n, 1.0 / n as f64);
            m.singular_values().max()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn ring_matches_circulant_oracle() {
    let g = graph::ring(8, 1).unwrap();
    let d = build_fastest_mixing(&g, &SolverOptions::default()).unwrap();
    let oracle = circulant_grid_optimum(8);
    let objective = d.objective.unwrap();
    assert!((objective - oracle).abs() <= 1e-4, "{objective} vs {oracle}");
    let mh = build_mh(&g).unwrap();
    assert!(objective <= spectral_objective(mh.matrix.matrix(), &mh.target_pi));
    assert!(d.residuals.max() <= 1e-7);
}

#[test]
fn two_terminals_sweep() {
    // with uniform weights every feasible chain on K2 is [[1−a, a], [a, 1−a]]
    let sweep = (0..=10_000)
        .map(|k| {
            let a = k as f64 / 10_000.0;
            let p = DMatrix::from_row_slice(2, 2, &[1.0 - a, a, a, 1.0 - a]);
            spectral_objective(&p, &[0.5, 0.5])
        })
        .fold(f64::INFINITY, f64::min);
    let d = build_fastest_mixing(&graph::complete(2).unwrap(), &SolverOptions::default()).unwrap();
    assert!(d.objective.unwrap() <= 1.0 + 1e-6);
    assert!((d.objective.unwrap() - sweep).abs() <= 1e-6);
}

#[test]
fn designs_are_feasible_and_peak_optimal() {
    let instances = vec![
        graph::random_geometric(15, graph::default_geometric_radius(15), 5).unwrap(),
        graph::grid_with_diagonals(4).unwrap(),
        graph::ring(12, 3).unwrap(),
    ];
    let opts = SolverOptions {
        max_iterations: 400,
        ..SolverOptions::default()
    };
    for (k, g) in instances.into_iter().enumerate() {
        let g = g
            .with_weights(WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: k as u64 })
            .unwrap();
        let opt = peak_optimal_value(g.weights()).unwrap();
        let mh = build_mh(&g).unwrap();
        let fm = build_fastest_mixing(&g, &opts).unwrap();
        for d in [&mh, &fm] {
            assert!(validate_design(d.matrix.matrix(), &g, &d.target_pi).all_passed());
            let a = ChainAnalysis::new(&d.matrix).unwrap();
            let r = analytic_ages(&a, g.weights()).unwrap();
            assert!((r.network_peak - opt).abs() <= 1e-9 * opt);
        }
        assert!(fm.objective.unwrap() <= spectral_objective(mh.matrix.matrix(), &mh.target_pi));
        // MH is reversible
        let p = mh.matrix.matrix();
        let pi = &mh.target_pi;
        for i in 0..g.n() {
            for j in 0..g.n() {
                assert!((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn solver_is_deterministic() {
    let g = graph::random_geometric(10, 0.5, 2)
        .unwrap()
        .with_weights(WeightMode::RandomInterval { lo: 1.0, hi: 2.0, seed: 1 })
        .unwrap();
    let opts = SolverOptions {
        max_iterations: 300,
        ..SolverOptions::default()
    };
    let a = build_fastest_mixing(&g, &opts).unwrap();
    let b = build_fastest_mixing(&g, &opts).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.iterations, b.iterations);
    let json = serde_json::to_string(&a).unwrap();
    let back: age_patrol::DesignResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back.matrix, a.matrix);
}

#[test]
fn complete_graphs_reach_zero() {
    for n in 2..=8 {
        let d = build_fastest_mixing(&graph::complete(n).unwrap(), &SolverOptions::default()).unwrap();
        assert!(d.objective.unwrap() <= 1e-6, "K{n}: {:?}", d.objective);
    }
}
