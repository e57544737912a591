//! Optional stopping at a random time. A Cox time is pseudo-stopping, so
//! bounded martingales keep their mean at tau. The last zero of W before 1
//! is not: E[W_g^2 - g] = -1/2 because W_g = 0 while E[g] = 1/2.
//!
//! cargo run --release --example pseudo_stopping_battery

use hazard_lab::grid_paths::{PathEnsemble, TimeGrid};
use hazard_lab::random_times::{IntensitySpec, RandomTimeModel, Simulation, ZeroDetection};
use hazard_lab::stat_tests::{battery_self_test, pseudo_stopping_test, MartingaleSpec, TestFamily};
use std::sync::Arc;

fn show(family: &TestFamily) {
    println!("{} [{}]", family.claim, family.decision);
    for r in &family.rows {
        println!("  {:<20} {:<40} {:+.4} (se {:.4})", r.decision.to_string(), r.name, r.statistic, r.standard_error);
    }
}

fn main() -> hazard_lab::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 1000)?);
    let battery = MartingaleSpec::standard_battery();

    let cox = Simulation::new(
        RandomTimeModel::Cox { intensity: IntensitySpec::Linear { rate: 1.0 } },
        PathEnsemble::new(grid.clone(), 20_000, 21)?,
    )?;
    // The battery is first checked at deterministic times, where it must pass.
    show(&battery_self_test(&cox.ensemble, &battery, (0.25, 0.75))?);
    show(&pseudo_stopping_test(&cox, &battery)?);

    let last_zero = Simulation::new(
        RandomTimeModel::LastZeroBeforeOne { detection: ZeroDetection::Bridge },
        PathEnsemble::new(grid, 20_000, 22)?,
    )?;
    show(&pseudo_stopping_test(&last_zero, &battery)?);
    Ok(())
}
