//! A Cox time with unit intensity: Z = exp(-t) in closed form, so the hazard
//! process Gamma = -ln Z and the martingale hazard process Lambda = int da / Z_-
//! should coincide up to quadrature error, which halves when the grid does.
//!
//! cargo run --release --example cox_hazard

use hazard_lab::azema::closed_form_z;
use hazard_lab::grid_paths::{PathEnsemble, TimeGrid};
use hazard_lab::hazard::hazard_pair;
use hazard_lab::random_times::{IntensitySpec, RandomTimeModel, Simulation};
use hazard_lab::stats::{reduce_paths, Max, MeanVar};
use std::sync::Arc;

fn sup_gap(steps: usize, n_paths: usize) -> hazard_lab::Result<(f64, f64)> {
    let grid = Arc::new(TimeGrid::uniform(1.0, steps)?);
    let model = RandomTimeModel::Cox { intensity: IntensitySpec::Linear { rate: 1.0 } };
    let sim = Simulation::new(model, PathEnsemble::new(grid.clone(), n_paths, 11)?)?;
    let bundle = closed_form_z(&sim)?;
    let (worst, mean) = reduce_paths(
        n_paths,
        sim.ensemble.chunk_size(),
        || (Max::default(), MeanVar::default()),
        |acc, path| {
            let pair = hazard_pair(&grid, &bundle.path(path)).expect("Z > 0 for a Cox time");
            acc.0.push(pair.sup_gap());
            acc.1.push(pair.lambda.values[grid.steps()]);
        },
    );
    Ok((worst.0, mean.mean()))
}

fn main() -> hazard_lab::Result<()> {
    let n_paths = 2_000;
    let mut previous = None;
    for steps in [250, 500, 1000, 2000] {
        let (gap, lambda_1) = sup_gap(steps, n_paths)?;
        let ratio = previous.map(|p: f64| format!("{:.3}", gap / p)).unwrap_or_else(|| "-".into());
        println!("K = {steps:>5}: sup |Gamma - Lambda| = {gap:.3e}  ratio {ratio:>6}  mean Lambda_1 {lambda_1:.4}");
        previous = Some(gap);
    }
    Ok(())
}
