//! Azéma supermartingales, dual projections and discrete Doob–Meyer
//! decompositions.
//!
//! A [`SupermartingaleBundle`] binds a [`Simulation`] to a way of computing
//! `Z_t = P(tau > t | F_t)` per path: either the model's closed form or a
//! cross-sectional regression of `1_{tau > t}` on the path state. Bundles are
//! lazy; [`SupermartingaleBundle::path`] regenerates the driver from
//! `(seed, path)` and returns every process of the bundle on the grid.

use std::fmt;

use log::warn;

use crate::error::{LabError, Result};
use crate::grid_paths::{Label, ProcessPath, TimeGrid};
use crate::random_times::{DriverPath, PathTime, RandomTimeModel, Simulation};
use crate::regression::{fit_cross_sections, CrossSection, CrossSectionFit, RegressionSpec, StateVar};
use crate::rng::normal_cdf;
use crate::stats::{reduce_paths, Count, MeanVar, Merge};

/// Values of `Z` at or below this are treated as zero before taking logs.
pub const Z_FLOOR: f64 = 1e-12;

/// Fraction of clamped Doob increments above which the decomposition is
/// flagged as unreliable.
pub const CLAMP_WARN_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleSource {
    ClosedForm,
    Regression,
}

impl fmt::Display for BundleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BundleSource::ClosedForm => "closed-form",
            BundleSource::Regression => "regression",
        })
    }
}

/// All bundle processes of one path.
///
/// `a` stands for both dual projections; `big_a` is kept separately because
/// it differs from `a` when `tau` is a stopping time (Poisson first jump).
#[derive(Clone, Debug, PartialEq)]
pub struct BundlePath {
    pub z: ProcessPath,
    pub m: ProcessPath,
    pub a: ProcessPath,
    pub big_a: ProcessPath,
    pub mu: ProcessPath,
    /// `a` evaluated at `tau` itself, when `tau` falls inside the grid.
    pub a_at_tau: Option<f64>,
    /// Doob increments that came out negative and were clamped to zero.
    pub clamped_steps: usize,
}

impl BundlePath {
    fn from_parts(z: Vec<f64>, a: Vec<f64>, big_a: Vec<f64>, a_at_tau: Option<f64>, clamped_steps: usize) -> Self {
        let m: Vec<f64> = z.iter().zip(&a).map(|(z, a)| z + a).collect();
        let mu: Vec<f64> = z.iter().zip(&big_a).map(|(z, a)| z + a).collect();
        Self {
            z: ProcessPath::new(Label::Z, z),
            m: ProcessPath::new(Label::Martingale, m),
            a: ProcessPath::new(Label::DualPredictable, a),
            big_a: ProcessPath::new(Label::DualOptional, big_a),
            mu: ProcessPath::new(Label::Mu, mu),
            a_at_tau,
            clamped_steps,
        }
    }
}

/// Closed-form `Z` of the last zero of `W` before 1 at time `t`.
pub fn last_zero_z(w: f64, t: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    2.0 * normal_cdf(-w.abs() / (1.0 - t).sqrt())
}

/// `E|x + s xi| - |x|` for a standard normal `xi`: the expected Tanaka
/// local-time increment at zero over a step of standard deviation `s`.
pub fn local_time_step(x: f64, s: f64) -> f64 {
    let u = x.abs() / s;
    if u > 9.0 {
        return 0.0;
    }
    let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (2.0 * s * (pdf - u * normal_cdf(-u))).max(0.0)
}

/// Predictable compensator of the last zero before 1.
///
/// Off zero, `Z = 2 (1 - Phi(|W| / sqrt(1 - t)))` is space-time harmonic;
/// its kink at `W = 0` makes `a = int sqrt(2 / (pi (1 - s))) dL_s` by
/// Tanaka's formula. Each step uses the conditional mean of the local-time
/// increment, and the step into `t = 1` absorbs what is left of `Z`.
fn last_zero_compensator(grid: &TimeGrid, w: &[f64], z: &[f64]) -> Vec<f64> {
    let mut a = Vec::with_capacity(z.len());
    a.push(0.0);
    let mut acc = 0.0;
    for j in 0..z.len() - 1 {
        if z[j] > 0.0 {
            acc += if z[j + 1] == 0.0 {
                z[j]
            } else {
                let c = (2.0 / (std::f64::consts::PI * (1.0 - grid.t(j)))).sqrt();
                c * local_time_step(w[j], grid.dt(j).sqrt())
            };
        }
        a.push(acc);
    }
    a
}

/// Value of a state variable at grid index `k` of a path.
pub fn state_value(var: StateVar, grid: &TimeGrid, driver: &DriverPath, z: Option<&[f64]>, sigma: &[f64], k: usize) -> f64 {
    match var {
        StateVar::W => driver.w[k],
        StateVar::AbsW => driver.w[k].abs(),
        StateVar::Time => grid.t(k),
        StateVar::N => match &driver.log_n {
            Some(x) => x[k].exp(),
            None => (driver.w[k] - 0.5 * grid.t(k)).exp(),
        },
        StateVar::Sigma => sigma[k],
        StateVar::LogN => match &driver.log_n {
            Some(x) => x[k],
            None => driver.w[k] - 0.5 * grid.t(k),
        },
        StateVar::LogSigma => sigma[k].ln(),
        StateVar::Z => z.map_or(f64::NAN, |z| z[k]),
    }
}

fn needs_sigma(state: &[StateVar]) -> bool {
    state.iter().any(|v| matches!(v, StateVar::Sigma | StateVar::LogSigma))
}

/// Running supremum of `N`, read from the driver when it carries one.
pub fn driver_sigma(grid: &TimeGrid, driver: &DriverPath, needed: bool) -> Vec<f64> {
    if !needed {
        return Vec::new();
    }
    match &driver.log_sigma {
        Some(s) => s.iter().map(|v| v.exp()).collect(),
        None => {
            let mut best = f64::NEG_INFINITY;
            (0..grid.len())
                .map(|k| {
                    best = best.max(driver.w[k] - 0.5 * grid.t(k));
                    best.exp()
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug)]
enum ZSource {
    ClosedForm,
    Fitted(CrossSectionFit),
}

#[derive(Clone, Debug)]
enum Compensator {
    ClosedForm,
    Doob(DoobDecomposition),
}

/// Diagnostics gathered while building a bundle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BundleDiagnostics {
    /// Largest condition number met by any regression.
    pub max_condition: f64,
    /// Fraction of Doob increments clamped to zero.
    pub clamp_fraction: f64,
    pub warnings: Vec<String>,
}

/// `Z` and its decomposition for every path of a simulation.
#[derive(Clone, Debug)]
pub struct SupermartingaleBundle {
    sim: Simulation,
    source: BundleSource,
    z: ZSource,
    compensator: Compensator,
    pub diagnostics: BundleDiagnostics,
}

/// Closed-form bundle of the simulation's model.
///
/// Every model has closed-form `Z` and `a`; the last-zero `a` is the
/// discretised Tanaka compensator of [`last_zero_compensator`].
pub fn closed_form_z(sim: &Simulation) -> Result<SupermartingaleBundle> {
    if !sim.model.has_closed_form_z() {
        return Err(LabError::UnsupportedModel(format!("{} has no closed-form Z", sim.model)));
    }
    let bundle = SupermartingaleBundle {
        sim: sim.clone(),
        source: BundleSource::ClosedForm,
        z: ZSource::ClosedForm,
        compensator: Compensator::ClosedForm,
        diagnostics: BundleDiagnostics::default(),
    };
    Ok(bundle)
}

impl SupermartingaleBundle {
    pub fn source(&self) -> BundleSource {
        self.source
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn grid(&self) -> &TimeGrid {
        self.sim.grid()
    }

    fn absorb(&mut self, doob: DoobDecomposition) {
        self.diagnostics.max_condition = self.diagnostics.max_condition.max(doob.max_condition);
        self.diagnostics.clamp_fraction = doob.clamp_fraction;
        self.diagnostics.warnings.extend(doob.warnings.iter().cloned());
        self.compensator = Compensator::Doob(doob);
    }

    /// `Z` on the grid for one path.
    pub fn z_path(&self, driver: &DriverPath, time: &PathTime) -> Vec<f64> {
        let grid = self.grid();
        match &self.z {
            ZSource::ClosedForm => closed_z(&self.sim.model, grid, driver, time),
            ZSource::Fitted(fit) => {
                let state = &fit.spec().state;
                let sigma = driver_sigma(grid, driver, needs_sigma(state));
                let mut x = vec![0.0; state.len()];
                (0..grid.len())
                    .map(|k| {
                        for (slot, &v) in x.iter_mut().zip(state) {
                            *slot = state_value(v, grid, driver, None, &sigma, k);
                        }
                        fit.predict(k, &x).clamp(0.0, 1.0)
                    })
                    .collect()
            }
        }
    }

    /// Every bundle process for an already realised path.
    pub fn path_with(&self, driver: &DriverPath, time: &PathTime) -> BundlePath {
        let grid = self.grid();
        let z = self.z_path(driver, time);
        match &self.compensator {
            Compensator::ClosedForm => {
                let (a, big_a, a_at_tau) = closed_compensator(&self.sim.model, grid, driver, time, &z);
                BundlePath::from_parts(z, a, big_a, a_at_tau, 0)
            }
            Compensator::Doob(doob) => {
                let (a, clamped) = doob.compensator(grid, driver, &z);
                let a_at_tau = (!time.censored).then(|| grid.interpolate(&a, time.tau));
                BundlePath::from_parts(z, a.clone(), a, a_at_tau, clamped)
            }
        }
    }

    /// Every bundle process for path `path`.
    pub fn path(&self, path: usize) -> BundlePath {
        let (driver, time) = self.sim.realize(path);
        self.path_with(&driver, &time)
    }
}

fn closed_z(model: &RandomTimeModel, grid: &TimeGrid, driver: &DriverPath, time: &PathTime) -> Vec<f64> {
    match model {
        RandomTimeModel::Cox { .. } => driver
            .cum_intensity
            .as_ref()
            .expect("Cox driver carries its intensity")
            .iter()
            .map(|c| (-c).exp())
            .collect(),
        RandomTimeModel::HonestFromN { .. } => {
            let x = driver.log_n.as_ref().expect("honest driver carries ln N");
            let s = driver.log_sigma.as_ref().expect("honest driver carries ln Sigma");
            x.iter().zip(s).map(|(x, s)| (x - s).exp()).collect()
        }
        RandomTimeModel::LastZeroBeforeOne { .. } => {
            let dt = grid.max_dt();
            (0..grid.len())
                .map(|k| {
                    let t = grid.t(k);
                    if t <= 1.0 - dt + 1e-12 && t < 1.0 {
                        last_zero_z(driver.w[k], t)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
        RandomTimeModel::PoissonFirstJump { .. } => (0..grid.len())
            .map(|k| if time.censored || time.tau > grid.t(k) { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// `(a, A, a_tau)` for models with a closed-form compensator.
fn closed_compensator(
    model: &RandomTimeModel,
    grid: &TimeGrid,
    driver: &DriverPath,
    time: &PathTime,
    z: &[f64],
) -> (Vec<f64>, Vec<f64>, Option<f64>) {
    match model {
        RandomTimeModel::Cox { .. } => {
            let c = driver.cum_intensity.as_ref().expect("Cox driver carries its intensity");
            let a: Vec<f64> = c.iter().map(|c| -(-c).exp_m1()).collect();
            let a_tau = (!time.censored).then(|| {
                let c_tau = time.extra.theta.unwrap_or_else(|| grid.interpolate(c, time.tau));
                -(-c_tau).exp_m1()
            });
            (a.clone(), a, a_tau)
        }
        RandomTimeModel::HonestFromN { .. } => {
            let s = driver.log_sigma.clone().expect("honest driver carries ln Sigma");
            let a_tau = (!time.censored).then(|| grid.interpolate(&s, time.tau));
            (s.clone(), s, a_tau)
        }
        RandomTimeModel::PoissonFirstJump { rate } => {
            let stop = if time.censored { f64::INFINITY } else { time.tau };
            let a = grid.times().iter().map(|&t| rate * t.min(stop)).collect();
            let big_a = grid.times().iter().map(|&t| if t >= stop { 1.0 } else { 0.0 }).collect();
            (a, big_a, (!time.censored).then(|| rate * time.tau))
        }
        RandomTimeModel::LastZeroBeforeOne { .. } => {
            let a = last_zero_compensator(grid, &driver.w, z);
            let a_tau = (!time.censored).then(|| grid.interpolate(&a, time.tau));
            (a.clone(), a, a_tau)
        }
    }
}

/// Ẑ regressed at a set of grid indices.
#[derive(Clone, Debug)]
pub struct RegressedZ {
    sim: Simulation,
    pub times: Vec<usize>,
    pub fit: CrossSectionFit,
}

struct IndicatorSection<'a> {
    sim: &'a Simulation,
    times: &'a [usize],
    state: &'a [StateVar],
}

impl CrossSection for IndicatorSection<'_> {
    fn n_paths(&self) -> usize {
        self.sim.n_paths()
    }
    fn n_times(&self) -> usize {
        self.times.len()
    }
    fn dim(&self) -> usize {
        self.state.len()
    }
    fn observe(&self, path: usize, state: &mut [f64], target: &mut [f64]) {
        let grid = self.sim.grid();
        let (driver, time) = self.sim.realize(path);
        let sigma = driver_sigma(grid, &driver, needs_sigma(self.state));
        let d = self.state.len();
        for (i, &k) in self.times.iter().enumerate() {
            for (j, &v) in self.state.iter().enumerate() {
                state[i * d + j] = state_value(v, grid, &driver, None, &sigma, k);
            }
            target[i] = if time.censored || time.tau > grid.t(k) { 1.0 } else { 0.0 };
        }
    }
}

/// Regresses `1_{tau > t_k}` on the path state at each index in `times`
/// (every grid index when `None`).
pub fn regress_z(sim: &Simulation, spec: &RegressionSpec, times: Option<&[usize]>) -> Result<RegressedZ> {
    if spec.state.contains(&StateVar::Z) {
        return Err(LabError::invalid("Z cannot be a regressor of its own estimate"));
    }
    let all: Vec<usize> = (0..sim.grid().len()).collect();
    let times = times.map_or(all, <[usize]>::to_vec);
    if let Some(&k) = times.iter().find(|&&k| k >= sim.grid().len()) {
        return Err(LabError::invalid(format!("regression index {k} is off the grid")));
    }
    let section = IndicatorSection { sim, times: &times, state: &spec.state };
    let fit = fit_cross_sections(&section, spec, sim.ensemble.chunk_size())?;
    Ok(RegressedZ { sim: sim.clone(), times, fit })
}

impl RegressedZ {
    /// Ẑ at the regression times for one path.
    pub fn predict(&self, driver: &DriverPath) -> Vec<f64> {
        let grid = self.sim.grid();
        let state = &self.fit.spec().state;
        let sigma = driver_sigma(grid, driver, needs_sigma(state));
        let mut x = vec![0.0; state.len()];
        self.times
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                for (slot, &v) in x.iter_mut().zip(state) {
                    *slot = state_value(v, grid, driver, None, &sigma, k);
                }
                self.fit.predict(i, &x).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Per regression time, the mean over paths of `|Ẑ - Z|` against a
    /// reference bundle on the same simulation.
    pub fn mean_abs_error(&self, reference: &SupermartingaleBundle) -> Vec<f64> {
        let n = self.times.len();
        let acc = reduce_paths(
            self.sim.n_paths(),
            self.sim.ensemble.chunk_size(),
            || vec![MeanVar::default(); n],
            |acc, path| {
                let (driver, time) = self.sim.realize(path);
                let z = reference.z_path(&driver, &time);
                for (slot, (&k, zh)) in acc.iter_mut().zip(self.times.iter().zip(self.predict(&driver))) {
                    slot.push((zh - z[k]).abs());
                }
            },
        );
        acc.iter().map(MeanVar::mean).collect()
    }

    /// Turns a full-grid regression into a bundle, decomposing Ẑ with `doob`.
    pub fn into_bundle(self, doob: &RegressionSpec) -> Result<SupermartingaleBundle> {
        if self.times.len() != self.sim.grid().len() || self.times.iter().enumerate().any(|(i, &k)| i != k) {
            return Err(LabError::invalid("a bundle needs Z regressed at every grid time"));
        }
        let mut bundle = SupermartingaleBundle {
            sim: self.sim,
            source: BundleSource::Regression,
            z: ZSource::Fitted(self.fit.clone()),
            compensator: Compensator::ClosedForm,
            diagnostics: BundleDiagnostics {
                max_condition: self.fit.max_condition,
                ..BundleDiagnostics::default()
            },
        };
        let d = doob_meyer(&bundle, doob, None)?;
        bundle.absorb(d);
        Ok(bundle)
    }
}

/// Discrete Doob decomposition `Z = m - a` on a set of grid indices.
///
/// `a_{i+1} = a_i + max(0, Z_{t_i} - Ê[Z_{t_{i+1}} | state_{t_i}])`; negative
/// increments are clamped and counted.
#[derive(Clone, Debug)]
pub struct DoobDecomposition {
    pub times: Vec<usize>,
    fit: CrossSectionFit,
    pub max_condition: f64,
    pub clamp_fraction: f64,
    pub warnings: Vec<String>,
}

struct DoobSection<'a> {
    bundle: &'a SupermartingaleBundle,
    times: &'a [usize],
    state: &'a [StateVar],
}

impl CrossSection for DoobSection<'_> {
    fn n_paths(&self) -> usize {
        self.bundle.sim.n_paths()
    }
    fn n_times(&self) -> usize {
        self.times.len() - 1
    }
    fn dim(&self) -> usize {
        self.state.len()
    }
    fn observe(&self, path: usize, state: &mut [f64], target: &mut [f64]) {
        let grid = self.bundle.grid();
        let (driver, time) = self.bundle.sim.realize(path);
        let z = self.bundle.z_path(&driver, &time);
        let sigma = driver_sigma(grid, &driver, needs_sigma(self.state));
        let d = self.state.len();
        for i in 0..self.times.len() - 1 {
            let k = self.times[i];
            for (j, &v) in self.state.iter().enumerate() {
                state[i * d + j] = state_value(v, grid, &driver, Some(&z), &sigma, k);
            }
            target[i] = z[self.times[i + 1]];
        }
    }
}

/// Decomposes the bundle's `Z` on `times` (every grid index when `None`).
pub fn doob_meyer(bundle: &SupermartingaleBundle, spec: &RegressionSpec, times: Option<&[usize]>) -> Result<DoobDecomposition> {
    let grid = bundle.grid();
    let all: Vec<usize> = (0..grid.len()).collect();
    let times = times.map_or(all, <[usize]>::to_vec);
    if times.len() < 2 || times[0] != 0 || times.windows(2).any(|w| w[1] <= w[0]) || times[times.len() - 1] >= grid.len() {
        return Err(LabError::invalid("Doob times must start at 0 and increase along the grid"));
    }
    let section = DoobSection { bundle, times: &times, state: &spec.state };
    let fit = fit_cross_sections(&section, spec, bundle.sim.ensemble.chunk_size())?;
    let mut doob = DoobDecomposition {
        times,
        max_condition: fit.max_condition,
        fit,
        clamp_fraction: 0.0,
        warnings: Vec::new(),
    };
    let count = reduce_paths(bundle.sim.n_paths(), bundle.sim.ensemble.chunk_size(), Count::default, |acc, path| {
        let (driver, time) = bundle.sim.realize(path);
        let z = bundle.z_path(&driver, &time);
        let (_, clamped) = doob.on_times(grid, &driver, &z);
        acc.hits += clamped as u64;
        acc.total += (doob.times.len() - 1) as u64;
    });
    doob.clamp_fraction = count.fraction();
    if doob.clamp_fraction > CLAMP_WARN_FRACTION {
        let msg = format!(
            "Doob decomposition unreliable: {:.1}% of increments clamped",
            100.0 * doob.clamp_fraction
        );
        warn!("{msg}");
        doob.warnings.push(msg);
    }
    Ok(doob)
}

impl DoobDecomposition {
    /// `a` at the decomposition times and the number of clamped increments.
    pub fn on_times(&self, grid: &TimeGrid, driver: &DriverPath, z: &[f64]) -> (Vec<f64>, usize) {
        let state = &self.fit.spec().state;
        let sigma = driver_sigma(grid, driver, needs_sigma(state));
        let mut x = vec![0.0; state.len()];
        let mut a = Vec::with_capacity(self.times.len());
        let mut clamped = 0;
        a.push(0.0);
        let mut acc = 0.0;
        for i in 0..self.times.len() - 1 {
            let k = self.times[i];
            for (slot, &v) in x.iter_mut().zip(state) {
                *slot = state_value(v, grid, driver, Some(z), &sigma, k);
            }
            let step = z[k] - self.fit.predict(i, &x);
            if step < 0.0 {
                clamped += 1;
            } else {
                acc += step;
            }
            a.push(acc);
        }
        (a, clamped)
    }

    /// `a` on the full grid, linear between decomposition times.
    fn compensator(&self, grid: &TimeGrid, driver: &DriverPath, z: &[f64]) -> (Vec<f64>, usize) {
        let (a, clamped) = self.on_times(grid, driver, z);
        if self.times.len() == grid.len() {
            return (a, clamped);
        }
        let coarse: Vec<f64> = self.times.iter().map(|&k| grid.t(k)).collect();
        let full = grid
            .times()
            .iter()
            .map(|&t| {
                let i = coarse.partition_point(|&s| s <= t).saturating_sub(1).min(coarse.len() - 2);
                let w = ((t - coarse[i]) / (coarse[i + 1] - coarse[i])).clamp(0.0, 1.0);
                a[i] + w * (a[i + 1] - a[i])
            })
            .collect();
        (full, clamped)
    }
}

/// First grid point where `Z` reaches the floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloorHit {
    /// Index of the first `k` with `Z_k <= floor`, if any.
    pub first_zero: Option<usize>,
    /// Number of leading grid points with `Z` above the floor.
    pub valid_len: usize,
}

impl FloorHit {
    /// `T̂`, or infinity when `Z` stays positive on the grid.
    pub fn valid_until(&self, grid: &TimeGrid) -> f64 {
        self.first_zero.map_or(f64::INFINITY, |k| grid.t(k))
    }
}

pub fn first_zero(z: &ProcessPath, floor: f64) -> FloorHit {
    let first = z.values.iter().position(|&v| v <= floor);
    FloorHit {
        first_zero: first,
        valid_len: first.unwrap_or(z.values.len()),
    }
}

/// Ensemble summary of [`check_positive_floor`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FloorReport {
    pub paths: u64,
    /// Paths on which `Z` reaches the floor inside the grid.
    pub hits: u64,
    /// Non-censored paths with `tau > T̂`.
    pub violations: u64,
}

impl Merge for FloorReport {
    fn merge(&mut self, later: Self) {
        self.paths += later.paths;
        self.hits += later.hits;
        self.violations += later.violations;
    }
}

/// Checks per path that `tau <= T̂`, the first time `Z` reaches `floor`.
pub fn check_positive_floor(bundle: &SupermartingaleBundle, floor: f64) -> Result<FloorReport> {
    let grid = bundle.grid();
    let report = reduce_paths(bundle.sim.n_paths(), bundle.sim.ensemble.chunk_size(), FloorReport::default, |acc, path| {
        let (driver, time) = bundle.sim.realize(path);
        let z = ProcessPath::new(Label::Z, bundle.z_path(&driver, &time));
        let hit = first_zero(&z, floor);
        acc.paths += 1;
        acc.hits += hit.first_zero.is_some() as u64;
        if !time.censored && time.tau > hit.valid_until(grid) + 1e-12 {
            acc.violations += 1;
        }
    });
    if report.violations > 0 {
        return Err(LabError::InvariantViolation(format!(
            "{} of {} paths default after Z reached {floor}",
            report.violations, report.paths
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_paths::{make_grid, PathEnsemble};
    use crate::random_times::{IntensitySpec, SupremumMonitoring, ZeroDetection};
    use std::sync::Arc;

    fn sim(model: RandomTimeModel, horizon: f64, steps: usize, n: usize) -> Simulation {
        let ens = PathEnsemble::new(Arc::new(make_grid(horizon, steps).unwrap()), n, 11).unwrap();
        Simulation::new(model, ens).unwrap()
    }

    fn cox() -> RandomTimeModel {
        RandomTimeModel::Cox {
            intensity: IntensitySpec::Linear { rate: 1.0 },
        }
    }

    #[test]
    fn cox_closed_form_values() {
        let s = sim(cox(), 1.0, 100, 8);
        let b = closed_form_z(&s).unwrap();
        for p in 0..8 {
            let bp = b.path(p);
            assert!((bp.z.values[100] - (-1.0f64).exp()).abs() < 1e-12);
            for k in 0..=100 {
                assert!((bp.mu.values[k] - 1.0).abs() < 1e-12);
                assert!((bp.m.values[k] - 1.0).abs() < 1e-12);
                assert!((bp.z.values[k] - (bp.m.values[k] - bp.a.values[k])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn honest_starts_at_one() {
        let s = sim(
            RandomTimeModel::HonestFromN {
                tail_eps: 1e-3,
                monitoring: SupremumMonitoring::Bridge,
            },
            5.0,
            100,
            4,
        );
        let b = closed_form_z(&s).unwrap();
        let bp = b.path(0);
        assert_eq!(bp.z.values[0], 1.0);
        assert_eq!(bp.a.values[0], 0.0);
        assert!(bp.z.values.iter().all(|&z| (0.0..=1.0).contains(&z)));
        assert!(bp.a.values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn last_zero_closed_form() {
        assert_eq!(last_zero_z(0.0, 0.3), 1.0);
        assert_eq!(last_zero_z(0.4, 1.0), 0.0);
        assert!(last_zero_z(3.0, 0.9) < 1e-12);
    }

    #[test]
    fn poisson_bundle_is_indicator() {
        let s = sim(RandomTimeModel::PoissonFirstJump { rate: 1.0 }, 2.0, 200, 16);
        let b = closed_form_z(&s).unwrap();
        for p in 0..16 {
            let (driver, time) = s.realize(p);
            let bp = b.path_with(&driver, &time);
            let hit = first_zero(&bp.z, Z_FLOOR);
            if time.censored {
                assert_eq!(hit.first_zero, None);
            } else {
                assert!(time.tau <= hit.valid_until(s.grid()));
                assert!(hit.valid_until(s.grid()) - time.tau < 0.01 + 1e-12);
                assert!((bp.a_at_tau.unwrap() - time.tau).abs() < 1e-15);
            }
            assert!(bp.mu.values.iter().all(|&v| v == 1.0));
        }
        let r = check_positive_floor(&b, Z_FLOOR).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn cox_has_no_floor_hit() {
        let s = sim(cox(), 1.0, 50, 32);
        let r = check_positive_floor(&closed_form_z(&s).unwrap(), Z_FLOOR).unwrap();
        assert_eq!(r.hits, 0);
    }

    #[test]
    fn doob_of_deterministic_decreasing_z() {
        let s = sim(cox(), 1.0, 40, 64);
        let b = closed_form_z(&s).unwrap();
        let d = doob_meyer(&b, &RegressionSpec::cubic(vec![StateVar::Time]), None).unwrap();
        let (driver, time) = s.realize(3);
        let z = b.z_path(&driver, &time);
        let (a, clamped) = d.on_times(s.grid(), &driver, &z);
        assert_eq!(clamped, 0);
        for k in 0..z.len() {
            assert!((a[k] - (z[0] - z[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn censored_indicator_regresses_to_one() {
        let s = sim(
            RandomTimeModel::Cox {
                intensity: IntensitySpec::Linear { rate: 1e-9 },
            },
            1.0,
            10,
            256,
        );
        let r = regress_z(&s, &RegressionSpec::cubic(vec![StateVar::W]), None).unwrap();
        let (driver, _) = s.realize(5);
        assert!(r.predict(&driver).iter().all(|&z| (z - 1.0).abs() < 1e-9));
    }

    #[test]
    fn own_value_is_not_a_regressor_for_z() {
        let s = sim(cox(), 1.0, 10, 16);
        assert!(regress_z(&s, &RegressionSpec::cubic(vec![StateVar::Z]), None).is_err());
    }

    #[test]
    fn last_zero_bundle_decomposes() {
        let s = sim(
            RandomTimeModel::LastZeroBeforeOne {
                detection: ZeroDetection::Bridge,
            },
            1.0,
            50,
            2000,
        );
        let b = closed_form_z(&s).unwrap();
        let bp = b.path(1);
        assert_eq!(bp.z.values[50], 0.0);
        assert!(bp.a.values.windows(2).all(|w| w[1] >= w[0]));
        for k in 0..=50 {
            assert!((bp.z.values[k] - (bp.m.values[k] - bp.a.values[k])).abs() < 1e-15);
        }
    }
}
