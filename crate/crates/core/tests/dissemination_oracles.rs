use age_patrol::dissemination::{
    berg1_vacation_peak_age, dissemination_report, separation_policy, separation_policy_for,
    simulate_dissemination, simulate_vacation_queue, DiscreteLaw, DisseminationPolicy,
    QueueModelParams,
};
use age_patrol::simulation::{simulate_randomized, RunConfig};
use age_patrol::{design, graph, SolverOptions, TransitionMatrix};

fn service_laws() -> Vec<DiscreteLaw> {
    vec![
        DiscreteLaw::deterministic(2).unwrap(),
        DiscreteLaw::uniform(1, 3).unwrap(),
        DiscreteLaw::new(&[(1, 2.0 / 3.0), (4, 1.0 / 3.0)]).unwrap(),
    ]
}

#[test]
fn vacation_queue_matches_peak_formula() {
    for (k, law) in service_laws().iter().enumerate() {
        for (j, lambda) in [0.1, 0.25, 0.35].into_iter().enumerate() {
            let analytic = berg1_vacation_peak_age(&QueueModelParams::from_laws(lambda, law, law)).unwrap();
            let sim = simulate_vacation_queue(lambda, law, law, 1_000_000, (10 * k + j) as u64).unwrap();
            let rel = (sim.mean_peak_age - analytic).abs() / analytic;
            assert!(rel < 0.02, "law {k}, λ={lambda}: {} vs {analytic}", sim.mean_peak_age);
            assert!(sim.mean_age <= sim.mean_peak_age * 1.02);
        }
    }
}

#[test]
fn worked_example_is_seven() {
    let two = DiscreteLaw::deterministic(2).unwrap();
    let p = QueueModelParams::from_laws(0.25, &two, &two);
    assert!((berg1_vacation_peak_age(&p).unwrap() - 7.0).abs() < 1e-12);
    let sim = simulate_vacation_queue(0.25, &two, &two, 1_000_000, 99).unwrap();
    assert!((sim.mean_peak_age - 7.0).abs() / 7.0 < 0.02);
}

#[test]
fn two_cycle_runs_stay_below_bound() {
    let g = graph::complete(2).unwrap();
    let policy = separation_policy_for(TransitionMatrix::cycle(2)).unwrap();
    assert!((policy.upper_bounds[0].unwrap() - 6.5).abs() < 1e-12);
    for seed in 0..4 {
        let run = simulate_dissemination(&g, &policy, &RunConfig::new(1_000_000).seed(seed), false).unwrap();
        let report = dissemination_report(&policy, &run.stats, g.weights()).unwrap();
        assert!(report.all_passed, "{report:?}");
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<age_patrol::dissemination::DisseminationReport>(&json).unwrap(), report);
    }
}

#[test]
fn halved_rates_still_bounded() {
    let g = graph::ring(6, 1).unwrap();
    let base = separation_policy(&g, &SolverOptions::default()).unwrap();
    let halved = base.with_rates(base.rates.iter().map(|r| r / 2.0).collect()).unwrap();
    let run = simulate_dissemination(&g, &halved, &RunConfig::new(1_000_000).seed(8), false).unwrap();
    for i in 0..6 {
        assert!(run.stats.empirical_peak[i].unwrap() <= halved.upper_bounds[i].unwrap() * 1.02);
    }
}

#[test]
fn dissemination_is_slower_than_gathering() {
    for seed in 0..3u64 {
        let g = graph::random_geometric(12, graph::default_geometric_radius(12), seed).unwrap();
        let policy = separation_policy(&g, &SolverOptions { max_iterations: 300, ..Default::default() }).unwrap();
        let cfg = RunConfig::new(200_000).seed(seed);
        let gather = simulate_randomized(&g, &policy.matrix, &cfg).unwrap();
        let dissem = simulate_dissemination(&g, &policy, &cfg, false).unwrap();
        assert!(dissem.stats.network_avg >= gather.network_avg);
    }
}

#[test]
fn saturated_queues_are_flagged() {
    let g = graph::complete(2).unwrap();
    let p = design::build_mh(&g).unwrap().matrix;
    let policy = DisseminationPolicy::for_chain(p, vec![0.499_999, 0.499_999]).unwrap();
    let run = simulate_dissemination(&g, &policy, &RunConfig::new(200_000).seed(1), false).unwrap();
    // load close to one: queues build up far beyond the bound's regime
    assert!(run.max_queue_len > 100);
    assert!(DisseminationPolicy::for_chain(TransitionMatrix::cycle(2), vec![0.5, 0.1]).is_err());
}
