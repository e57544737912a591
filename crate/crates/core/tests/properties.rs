//! Structural invariants checked over random seeds, grids and models.

use std::sync::Arc;

use hazard_lab::azema::closed_form_z;
use hazard_lab::grid_paths::{bridge_running_sup, running_sup, PathEnsemble, TimeGrid};
use hazard_lab::hazard::{hazard_pair, honest_decomposition, martingale_hazard};
use hazard_lab::random_times::{IntensitySpec, RandomTimeModel, Simulation, SupremumMonitoring, ZeroDetection};
use hazard_lab::rng::{inverse_normal_cdf, normal_cdf, Stream, StreamKind};
use hazard_lab::scenario::Scenario;
use hazard_lab::stat_tests::{Decision, Expectation, Rule, TestReport};
use hazard_lab::stats::{reduce_paths, with_threads, CompensatedSum, MeanVar};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = RandomTimeModel> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|rate| RandomTimeModel::Cox { intensity: IntensitySpec::Linear { rate } }),
        (0.2f64..2.0).prop_map(|rate| RandomTimeModel::Cox { intensity: IntensitySpec::BrownianSquared { rate } }),
        (1e-3f64..0.1, any::<bool>()).prop_map(|(tail_eps, bridge)| RandomTimeModel::HonestFromN {
            tail_eps,
            monitoring: if bridge { SupremumMonitoring::Bridge } else { SupremumMonitoring::Grid },
        }),
        any::<bool>().prop_map(|bridge| RandomTimeModel::LastZeroBeforeOne {
            detection: if bridge { ZeroDetection::Bridge } else { ZeroDetection::SignChange },
        }),
        (0.2f64..4.0).prop_map(|rate| RandomTimeModel::PoissonFirstJump { rate }),
    ]
}

fn simulation(model: RandomTimeModel, steps: usize, seed: u64) -> Simulation {
    let horizon = if matches!(model, RandomTimeModel::HonestFromN { .. }) { 8.0 } else { 1.0 };
    let grid = Arc::new(TimeGrid::uniform(horizon, steps).unwrap());
    Simulation::new(model, PathEnsemble::new(grid, 12, seed).unwrap()).unwrap()
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grids_are_strictly_increasing(horizon in 0.1f64..100.0, steps in 1usize..400, factor in 1usize..5, frac in 0.05f64..0.95) {
        let g = TimeGrid::uniform(horizon, steps).unwrap();
        prop_assert_eq!(g.len(), steps + 1);
        prop_assert_eq!(g.t(0), 0.0);
        prop_assert_eq!(g.horizon(), horizon);
        prop_assert!(g.times().windows(2).all(|w| w[1] > w[0]));
        let r = TimeGrid::refined(horizon, steps, frac * horizon, factor).unwrap();
        prop_assert!(r.times().windows(2).all(|w| w[1] > w[0]));
        prop_assert!(g.times().iter().all(|&t| r.index_of(t).is_some()));
    }

    #[test]
    fn paths_depend_only_on_seed_and_index(seed in any::<u64>(), path in 0usize..20, extra in 1usize..30) {
        let grid = Arc::new(TimeGrid::uniform(1.0, 64).unwrap());
        let small = PathEnsemble::new(grid.clone(), 20, seed).unwrap();
        let large = PathEnsemble::new(grid, 20 + extra, seed).unwrap().with_chunk_size(7).unwrap();
        let w = small.brownian(path);
        prop_assert_eq!(w.values[0], 0.0);
        prop_assert_eq!(&w.values, &large.brownian(path).values);
        prop_assert_eq!(&w.values, &small.brownian(path).values);
    }

    #[test]
    fn running_sup_dominates_n(seed in any::<u64>(), steps in 2usize..200) {
        let grid = Arc::new(TimeGrid::uniform(2.0, steps).unwrap());
        let e = PathEnsemble::new(grid.clone(), 1, seed).unwrap();
        let n = e.exponential_martingale(0);
        let sigma = running_sup(&n);
        prop_assert!(nondecreasing(&sigma.values));
        prop_assert!(sigma.values.iter().zip(&n.values).all(|(s, n)| s >= n));
        let logs: Vec<f64> = n.values.iter().map(|v| v.ln()).collect();
        let mut u = Stream::new(seed, StreamKind::BridgeMax, 0);
        let bridge = bridge_running_sup(&logs, &grid, |_| u.uniform());
        prop_assert!(nondecreasing(&bridge));
        prop_assert!(bridge.iter().zip(&logs).all(|(s, x)| s >= x));
    }

    #[test]
    fn bundles_decompose_exactly(model in model(), seed in any::<u64>(), steps in 20usize..120) {
        let sim = simulation(model, steps, seed);
        let bundle = closed_form_z(&sim).unwrap();
        let tau_max = sim.grid().horizon();
        for path in 0..sim.n_paths() {
            let (_, time) = sim.realize(path);
            prop_assert!(time.tau >= 0.0 && time.tau <= tau_max);
            let bp = bundle.path(path);
            prop_assert!(bp.z.values.iter().all(|z| (0.0..=1.0).contains(z)));
            prop_assert_eq!(bp.a.values[0], 0.0);
            prop_assert_eq!(bp.big_a.values[0], 0.0);
            prop_assert!(nondecreasing(&bp.a.values));
            prop_assert!(nondecreasing(&bp.big_a.values));
            for k in 0..sim.grid().len() {
                prop_assert!((bp.z.values[k] - (bp.m.values[k] - bp.a.values[k])).abs() <= 1e-14);
                prop_assert!((bp.mu.values[k] - (bp.big_a.values[k] + bp.z.values[k])).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn hazard_processes_of_cox_times(rate in 0.2f64..2.0, seed in any::<u64>(), steps in 20usize..200) {
        let sim = simulation(RandomTimeModel::Cox { intensity: IntensitySpec::BrownianSquared { rate } }, steps, seed);
        let bundle = closed_form_z(&sim).unwrap();
        for path in 0..sim.n_paths() {
            let bp = bundle.path(path);
            let pair = hazard_pair(sim.grid(), &bp).unwrap();
            prop_assert_eq!(pair.gamma.values[0], 0.0);
            prop_assert!(nondecreasing(&pair.gamma.values));
            prop_assert!(nondecreasing(&pair.lambda.values));
            for k in 0..sim.grid().len() {
                prop_assert_eq!(pair.gap[k], pair.lambda.values[k] - pair.gamma.values[k]);
            }
            // The quadrature is a pure function of (a, Z).
            prop_assert_eq!(&martingale_hazard(sim.grid(), &bp).unwrap(), &pair.lambda);
        }
    }

    #[test]
    fn honest_gap_is_ln_n(seed in any::<u64>(), steps in 50usize..300) {
        let sim = simulation(RandomTimeModel::HonestFromN { tail_eps: 0.01, monitoring: SupremumMonitoring::Grid }, steps, seed);
        let bundle = closed_form_z(&sim).unwrap();
        for path in 0..sim.n_paths() {
            let (driver, time) = sim.realize(path);
            let (ln, ls) = (driver.log_n.as_ref().unwrap(), driver.log_sigma.as_ref().unwrap());
            let d = honest_decomposition(sim.grid(), ln, ls, &bundle.path_with(&driver, &time), f64::INFINITY).unwrap();
            prop_assert!(d.pair.gap.iter().zip(ln).all(|(g, n)| (g - n).abs() <= 1e-10));
            if !time.censored {
                let k = sim.grid().index_of(time.tau).expect("g is a grid time");
                prop_assert_eq!(ln[k], ls[k]);
            }
        }
    }

    #[test]
    fn normal_quantile_inverts_the_cdf(u in 1e-12f64..1.0) {
        let x = inverse_normal_cdf(u);
        prop_assert!(((normal_cdf(x) - u) / u.min(1.0 - u).max(1e-300)).abs() < 1e-9);
        prop_assert!(inverse_normal_cdf(u * 0.999) < x);
    }

    #[test]
    fn scenario_text_round_trips(seed in any::<u64>(), n in 1usize..1_000_000, rate in 0.01f64..10.0, steps in 1usize..5000) {
        let mut s = Scenario::bundled("cox_stochastic").unwrap();
        s.seed = seed;
        s.n_paths = n;
        s.model = RandomTimeModel::Cox { intensity: IntensitySpec::BrownianSquared { rate } };
        s.grid.steps = steps;
        prop_assert_eq!(Scenario::parse(&s.to_ini()).unwrap(), s);
    }

    #[test]
    fn decisions_follow_the_sigma_rule(stat in -10.0f64..10.0, se in 1e-3f64..5.0, k in 1.0f64..5.0) {
        let within = stat.abs() <= k * se;
        let pass = TestReport::decide("x", stat, se, 100, Rule::Sigma(k), Expectation::Pass);
        prop_assert_eq!(pass.decision == Decision::Pass, within);
        let reject = TestReport::decide("x", stat, se, 100, Rule::Sigma(k), Expectation::Reject);
        prop_assert_eq!(reject.decision == Decision::RejectAsExpected, !within);
    }

    #[test]
    fn reductions_ignore_the_worker_count(seed in any::<u64>(), n in 1usize..3000, chunk in 1usize..257, threads in 2usize..6) {
        let fold = || reduce_paths(n, chunk, || (MeanVar::default(), CompensatedSum::default()), |acc, path| {
            let x = Stream::new(seed, StreamKind::Driver, path as u64).normal();
            acc.0.push(x);
            acc.1.add(x * x);
        });
        let (a, b) = (with_threads(1, fold), with_threads(threads, fold));
        prop_assert_eq!(a.0.mean().to_bits(), b.0.mean().to_bits());
        prop_assert_eq!(a.0.variance().to_bits(), b.0.variance().to_bits());
        prop_assert_eq!(a.1.value().to_bits(), b.1.value().to_bits());
    }
}
