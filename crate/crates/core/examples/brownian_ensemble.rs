//! Simulates a Brownian ensemble on a uniform grid and checks its moments,
//! then builds `N = exp(W - t/2)` and its running supremum along one path.
//!
//! cargo run --release --example brownian_ensemble

use hazard_lab::grid_paths::{running_sup, simulate_brownian, TimeGrid};
use hazard_lab::stats::{reduce_paths, MeanVar};

fn main() -> hazard_lab::Result<()> {
    let grid = TimeGrid::uniform(1.0, 1000)?;
    let ensemble = simulate_brownian(&grid, 20_000, 7)?;

    // W_1 should be standard normal; W_1^2 - 1 and exp(W_1 - 1/2) - 1 have mean 0.
    let (w1, sq, expo) = reduce_paths(
        ensemble.n_paths(),
        ensemble.chunk_size(),
        || (MeanVar::default(), MeanVar::default(), MeanVar::default()),
        |acc, path| {
            let w = ensemble.brownian(path).values[grid.steps()];
            acc.0.push(w);
            acc.1.push(w * w - 1.0);
            acc.2.push((w - 0.5).exp() - 1.0);
        },
    );
    println!("paths {} steps {}", ensemble.n_paths(), grid.steps());
    for (name, mv) in [("E[W_1]", w1), ("E[W_1^2] - 1", sq), ("E[exp(W_1 - 1/2)] - 1", expo)] {
        println!("{name:>24} = {:+.5} (se {:.5})", mv.mean(), mv.std_error());
    }

    let n = ensemble.exponential_martingale(0);
    let sigma = running_sup(&n);
    println!("path 0: N_1 = {:.4}, Sigma_1 = {:.4}", n.values[grid.steps()], sigma.values[grid.steps()]);

    let mut out = Vec::new();
    ensemble.write_csv(&mut out, 3).expect("in-memory write");
    let text = String::from_utf8(out).expect("utf8 csv");
    println!("first rows of the path export:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
