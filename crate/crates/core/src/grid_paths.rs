//! Time grids, Brownian driver ensembles and derived path processes.
//!
//! A [`PathEnsemble`] does not keep its paths in memory. Path `i` is a pure
//! function of `(seed, i)`: the increment over step `k` is draw `k` of the
//! driver stream of path `i`, so any path can be regenerated bit-identically
//! on any worker at any time. At desk scale (10^5 paths, 10^3 steps) this is
//! what keeps memory flat.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::rng::{Stream, StreamKind};
use crate::stats::DEFAULT_CHUNK_SIZE;

/// Tolerance used to recognise a time as a grid point.
const GRID_MATCH_TOL: f64 = 1e-9;

/// Discretised horizon `0 = t_0 < t_1 < ... < t_K = horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

/// Uniform grid with `steps` intervals; the last point is set to `horizon`
/// exactly rather than accumulated.
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(horizon, steps)
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(LabError::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(LabError::invalid("grid needs at least one step"));
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
        times.push(horizon);
        Ok(Self { times })
    }

    /// Uniform spacing `horizon / steps` up to `refine_from`, then `factor`
    /// times finer up to the horizon.
    pub fn refined(horizon: f64, steps: usize, refine_from: f64, factor: usize) -> Result<Self> {
        let coarse = Self::uniform(horizon, steps)?;
        if factor <= 1 {
            return Ok(coarse);
        }
        if !(refine_from > 0.0 && refine_from < horizon) {
            return Err(LabError::invalid(format!(
                "refinement start {refine_from} must lie inside (0, {horizon})"
            )));
        }
        let mut times = Vec::with_capacity(steps * factor + 1);
        for k in 0..steps {
            let (a, b) = (coarse.times[k], coarse.times[k + 1]);
            times.push(a);
            if a >= refine_from - GRID_MATCH_TOL {
                let h = (b - a) / factor as f64;
                times.extend((1..factor).map(|j| a + j as f64 * h));
            }
        }
        times.push(horizon);
        Self::from_times(times)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(LabError::invalid("grid needs at least two points"));
        }
        if times[0] != 0.0 {
            return Err(LabError::invalid("grid must start at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(LabError::invalid("grid times must be finite and strictly increasing"));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of intervals `K`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// Length of interval `k`, i.e. `t_{k+1} - t_k`.
    #[inline]
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Largest step length.
    pub fn max_dt(&self) -> f64 {
        (0..self.steps()).map(|k| self.dt(k)).fold(0.0, f64::max)
    }

    /// Index of `t` if it is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.step_containing(t);
        let tol = GRID_MATCH_TOL * t.abs().max(1.0);
        [k, k + 1]
            .into_iter()
            .filter(|&j| j < self.times.len())
            .find(|&j| (self.times[j] - t).abs() <= tol)
    }

    /// Grid index of `t`, or an invalid-argument error naming `what`.
    pub fn require_index(&self, t: f64, what: &str) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| LabError::invalid(format!("{what} t = {t} is not a grid point")))
    }

    /// `k` with `t_k <= t < t_{k+1}`, clamped to `[0, K-1]`.
    pub fn step_containing(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        idx.saturating_sub(1).min(self.steps() - 1)
    }

    /// Linear interpolation of grid-aligned `values` at `t`, flat outside.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        if t <= 0.0 {
            return values[0];
        }
        if t >= self.horizon() {
            return values[self.steps()];
        }
        let k = self.step_containing(t);
        let w = (t - self.times[k]) / self.dt(k);
        values[k] + w * (values[k + 1] - values[k])
    }
}

/// Symbol carried by a [`ProcessPath`]; determines its shape constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    W,
    N,
    Sigma,
    Z,
    Gamma,
    Lambda,
    /// Dual optional projection `A`.
    DualOptional,
    /// Dual predictable projection `a`.
    DualPredictable,
    /// Martingale part `m` of the Doob–Meyer decomposition.
    Martingale,
    Mu,
    CumIntensity,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::W => "W",
            Label::N => "N",
            Label::Sigma => "Sigma",
            Label::Z => "Z",
            Label::Gamma => "Gamma",
            Label::Lambda => "Lambda",
            Label::DualOptional => "A",
            Label::DualPredictable => "a",
            Label::Martingale => "m",
            Label::Mu => "mu",
            Label::CumIntensity => "CumIntensity",
        };
        f.write_str(s)
    }
}

/// One path of a labelled process, aligned to a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessPath {
    pub label: Label,
    pub values: Vec<f64>,
}

impl ProcessPath {
    pub fn new(label: Label, values: Vec<f64>) -> Self {
        Self { label, values }
    }

    /// Checks the documented constraints of the label.
    pub fn check(&self, grid: &TimeGrid) -> Result<()> {
        let v = &self.values;
        if v.len() != grid.len() {
            return Err(LabError::invalid(format!(
                "{} has {} values for a grid of {} points",
                self.label,
                v.len(),
                grid.len()
            )));
        }
        let nondecreasing = v.windows(2).all(|w| w[1] >= w[0]);
        let violation = match self.label {
            Label::Sigma if !nondecreasing => Some("must be nondecreasing"),
            Label::Z if v.iter().any(|&z| !(0.0..=1.0).contains(&z)) => Some("must lie in [0, 1]"),
            Label::N if v.iter().any(|&n| n < 0.0) => Some("must be nonnegative"),
            Label::DualOptional | Label::DualPredictable | Label::CumIntensity | Label::Lambda
                if !nondecreasing || v[0] != 0.0 =>
            {
                Some("must be nondecreasing from 0")
            }
            _ => None,
        };
        match violation {
            Some(msg) => Err(LabError::InvariantViolation(format!("{} {msg}", self.label))),
            None => Ok(()),
        }
    }
}

/// `N_t = exp(W_t - t/2)` along one Brownian path.
pub fn exponential_martingale(w: &ProcessPath, grid: &TimeGrid) -> ProcessPath {
    let values = w
        .values
        .iter()
        .zip(grid.times())
        .map(|(&w, &t)| (w - 0.5 * t).exp())
        .collect();
    ProcessPath::new(Label::N, values)
}

/// Running supremum `Sigma_{t_k} = max_{j <= k} X_{t_j}` of the grid values.
pub fn running_sup(process: &ProcessPath) -> ProcessPath {
    let mut best = f64::NEG_INFINITY;
    let values = process
        .values
        .iter()
        .map(|&x| {
            best = best.max(x);
            best
        })
        .collect();
    ProcessPath::new(Label::Sigma, values)
}

/// Running supremum of a continuous Brownian path with unit volatility,
/// observed at the grid points, using the exact law of the maximum of a
/// Brownian bridge inside each step:
/// `M = (x_k + x_{k+1} + sqrt((x_{k+1} - x_k)^2 - 2 dt ln U)) / 2`.
///
/// `x` may carry any drift; conditional on its endpoints the in-step path is
/// a standard Brownian bridge. `uniform(k)` supplies the draw for step `k`.
pub fn bridge_running_sup(x: &[f64], grid: &TimeGrid, mut uniform: impl FnMut(usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut best = x[0];
    out.push(best);
    for k in 0..x.len() - 1 {
        best = best.max(bridge_step_max(x[k], x[k + 1], grid.dt(k), uniform(k)));
        out.push(best);
    }
    out
}

/// Maximum of a unit-volatility Brownian bridge from `a` to `b` over a step
/// of length `dt`, sampled by inversion of its law with the uniform `u`.
#[inline]
pub fn bridge_step_max(a: f64, b: f64, dt: f64, u: f64) -> f64 {
    0.5 * (a + b + ((b - a) * (b - a) - 2.0 * dt * u.ln()).sqrt())
}

/// Brownian driver paths on a grid, regenerated on demand.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    grid: Arc<TimeGrid>,
    n_paths: usize,
    seed: u64,
    chunk_size: usize,
}

/// Ensemble of `n_paths` Brownian paths with `W_0 = 0` and independent
/// `N(0, dt_k)` increments.
pub fn simulate_brownian(grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    PathEnsemble::new(Arc::new(grid.clone()), n_paths, seed)
}

impl PathEnsemble {
    pub fn new(grid: Arc<TimeGrid>, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(LabError::invalid("ensemble needs at least one path"));
        }
        Ok(Self {
            grid,
            n_paths,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        })
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Result<Self> {
        if chunk_size == 0 {
            return Err(LabError::invalid("chunk size must be positive"));
        }
        self.chunk_size = chunk_size;
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<TimeGrid> {
        Arc::clone(&self.grid)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    /// Writes `W` of path `path` into `out` (length `K + 1`).
    pub fn fill_brownian(&self, path: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.grid.len());
        let mut stream = Stream::new(self.seed, StreamKind::Driver, path as u64);
        let mut w = 0.0;
        out[0] = 0.0;
        for k in 0..self.grid.steps() {
            w += self.grid.dt(k).sqrt() * stream.normal();
            out[k + 1] = w;
        }
    }

    pub fn brownian(&self, path: usize) -> ProcessPath {
        let mut values = vec![0.0; self.grid.len()];
        self.fill_brownian(path, &mut values);
        ProcessPath::new(Label::W, values)
    }

    /// `N = exp(W - t/2)` along path `path`.
    pub fn exponential_martingale(&self, path: usize) -> ProcessPath {
        exponential_martingale(&self.brownian(path), &self.grid)
    }

    /// Debug dump with columns `path_id,step,t,W` for the first `max_paths` paths.
    pub fn write_csv<Wr: Write>(&self, out: &mut Wr, max_paths: usize) -> std::io::Result<()> {
        writeln!(out, "path_id,step,t,W")?;
        for path in 0..self.n_paths.min(max_paths) {
            let w = self.brownian(path);
            for (k, (&t, &x)) in self.grid.times().iter().zip(&w.values).enumerate() {
                writeln!(out, "{path},{k},{t},{x}")?;
            }
        }
        Ok(())
    }
}
