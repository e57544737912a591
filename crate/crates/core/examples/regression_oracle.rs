//! Z estimated by cross-sectional regression of 1{tau > t} on the driver
//! state, checked against the closed form, followed by a regressed Doob
//! decomposition Z = m - a that should recover a_t = 1 - exp(-t).
//!
//! cargo run --release --example regression_oracle

use hazard_lab::azema::{closed_form_z, doob_meyer, regress_z};
use hazard_lab::grid_paths::{PathEnsemble, TimeGrid};
use hazard_lab::random_times::{IntensitySpec, RandomTimeModel, Simulation};
use hazard_lab::regression::{RegressionSpec, StateVar};
use hazard_lab::stats::{reduce_paths, MeanVar};
use std::sync::Arc;

fn main() -> hazard_lab::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(1.0, 200)?);
    let sim = Simulation::new(
        RandomTimeModel::Cox { intensity: IntensitySpec::BrownianSquared { rate: 1.0 } },
        PathEnsemble::new(grid.clone(), 20_000, 31)?,
    )?;
    let exact = closed_form_z(&sim)?;

    let probes: Vec<usize> = [0.25, 0.5, 0.75, 1.0].iter().map(|&t| grid.require_index(t, "probe")).collect::<Result<_, _>>()?;
    let fit = regress_z(&sim, &RegressionSpec::cubic(vec![StateVar::W, StateVar::Time]), Some(&probes))?;
    for (t, err) in probes.iter().zip(fit.mean_abs_error(&exact)) {
        println!("t = {:<5} mean |Zhat - Z| = {err:.4}", grid.t(*t));
    }

    // Unit-rate linear intensity: Z = exp(-t) and the compensator is deterministic.
    let linear = Simulation::new(
        RandomTimeModel::Cox { intensity: IntensitySpec::Linear { rate: 1.0 } },
        PathEnsemble::new(grid.clone(), 20_000, 32)?,
    )?;
    let bundle = closed_form_z(&linear)?;
    let times: Vec<usize> = (0..=grid.steps()).step_by(50).collect();
    let doob = doob_meyer(&bundle, &RegressionSpec::cubic(vec![StateVar::Z]), Some(&times))?;
    let means = reduce_paths(
        linear.n_paths(),
        linear.ensemble.chunk_size(),
        || vec![MeanVar::default(); times.len()],
        |acc, path| {
            let (driver, time) = linear.realize(path);
            let z = bundle.z_path(&driver, &time);
            let (a, _) = doob.on_times(&grid, &driver, &z);
            for (m, v) in acc.iter_mut().zip(a) {
                m.push(v);
            }
        },
    );
    for (k, m) in times.iter().zip(&means) {
        let t = grid.t(*k);
        println!("t = {t:<5} mean ahat = {:.5}  1 - exp(-t) = {:.5}", m.mean(), 1.0 - (-t).exp());
    }
    println!("clamped increments {:.2}%, max condition {:.1}", 100.0 * doob.clamp_fraction, doob.max_condition);
    Ok(())
}
