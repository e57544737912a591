//! The honest time g = last time N = exp(W - t/2) sits at its running maximum.
//! Its hazard processes differ by exactly ln N, and Lambda equals ln Sigma.
//! The laws E[ln Sigma_inf] = 1 and P(Sigma_inf > 2) = 1/2 are checked too.
//!
//! cargo run --release --example honest_gap

use hazard_lab::azema::closed_form_z;
use hazard_lab::grid_paths::{PathEnsemble, TimeGrid};
use hazard_lab::hazard::honest_quadrature;
use hazard_lab::random_times::{RandomTimeModel, Simulation, SupremumMonitoring};
use hazard_lab::stats::{reduce_paths, MeanVar};
use std::sync::Arc;

fn main() -> hazard_lab::Result<()> {
    let grid = Arc::new(TimeGrid::uniform(50.0, 1000)?);
    let model = RandomTimeModel::HonestFromN { tail_eps: 1e-3, monitoring: SupremumMonitoring::Bridge };
    let sim = Simulation::new(model, PathEnsemble::new(grid.clone(), 20_000, 3)?)?;

    let (log_sigma, above_two) = reduce_paths(
        sim.n_paths(),
        sim.ensemble.chunk_size(),
        || (MeanVar::default(), MeanVar::default()),
        |acc, path| {
            let (_, time) = sim.realize(path);
            let s = time.extra.sigma_inf.expect("honest times carry Sigma_inf");
            acc.0.push(s.ln());
            acc.1.push(f64::from(u8::from(s > 2.0)));
        },
    );
    println!("E[ln Sigma_inf]   = {:.4} (se {:.4}), expected 1", log_sigma.mean(), log_sigma.std_error());
    println!("P(Sigma_inf > 2)  = {:.4} (se {:.4}), expected 0.5", above_two.mean(), above_two.std_error());

    let bundle = closed_form_z(&sim)?;
    let q = honest_quadrature(&bundle, f64::INFINITY)?;
    println!("max |Lambda - Gamma - ln N|         = {:.2e}", q.gap_identity.0);
    println!("max |Lambda - ln Sigma|             = {:.2e}", q.lambda_identity.0);
    println!("sup_t mean |int da/Z_- - ln Sigma|  = {:.4} (grid step {})", q.sup_mean_error(), grid.max_dt());
    println!("worst single path                   = {:.4}", q.worst_path.0);
    Ok(())
}
