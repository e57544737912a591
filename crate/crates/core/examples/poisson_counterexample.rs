//! First jump of a Poisson process in its own filtration. Lambda = rate (t ∧ tau)
//! is continuous, yet Z = 1{tau > t} so Gamma stays at zero before tau: a
//! continuous martingale hazard process need not equal the hazard process.
//! The jump time is also a stopping time, so it does not avoid itself.
//!
//! cargo run --release --example poisson_counterexample

use hazard_lab::grid_paths::{PathEnsemble, TimeGrid};
use hazard_lab::hazard::{conjecture_counterexample, poisson_gamma, poisson_lambda};
use hazard_lab::random_times::{RandomTimeModel, Simulation};
use hazard_lab::stat_tests::{avoidance_test, StoppingTime};
use std::sync::Arc;

fn main() -> hazard_lab::Result<()> {
    let rate = 2.0;
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);

    let tau = 0.4;
    println!("one path with tau = {tau}:");
    for t in [0.1, 0.3, 0.36, 0.5] {
        println!("  t = {t:<5} Lambda {:.3}  Gamma {:.3}", poisson_lambda(rate, tau, t), poisson_gamma(tau, t));
    }

    let r = conjecture_counterexample(rate, 20_000, 5, &grid)?;
    println!("paths {} defaults {}", r.n_paths, r.defaults);
    println!("max |Lambda - rate (t ^ tau)|    = {:.1e}", r.lambda_closed_form_error);
    println!("max Lambda step / (rate dt)      = {:.6}", r.lambda_step_ratio);
    println!("max |Gamma| before tau           = {}", r.gamma_before_tau);
    println!("max |gap(0.9 tau) - 0.9 rate tau| = {:.1e}", r.gap_at_probe_error);
    println!("mean sup gap before tau          = {:.4}", r.mean_sup_gap);
    println!("Gamma = Lambda fails: {}", r.conjecture_fails());

    let sim = Simulation::new(RandomTimeModel::PoissonFirstJump { rate }, PathEnsemble::new(grid, 20_000, 5)?)?;
    let (_, ladders) = avoidance_test(&sim, &[StoppingTime::Deterministic(0.5), StoppingTime::OwnTime], &[0.1, 0.01], 1.0 / rate)?;
    for l in ladders {
        println!("P(|tau - T| < delta) against {}: {:?} -> {}", l.stopping_time, l.estimates, l.decision);
    }
    Ok(())
}
