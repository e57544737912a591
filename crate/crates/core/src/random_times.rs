//! Random (default) time constructions on top of a Brownian ensemble.
//!
//! Four families are provided:
//!
//! * **Cox times** `tau = inf{t : C_t > Theta}` with a predictable cumulative
//!   intensity `C` and a unit exponential `Theta` independent of the driver.
//! * **Honest times** `g = sup{t : N_t = Sigma_inf}` for the exponential
//!   martingale `N = exp(W - t/2)` and its running supremum `Sigma`.
//! * The **last zero** of `W` before time 1.
//! * The **first jump** of a Poisson process, a stopping time of its own
//!   filtration.
//!
//! All constructions are per-path pure functions of `(seed, path)`.

use std::fmt;

use crate::error::{LabError, Result};
use crate::grid_paths::{bridge_step_max, Label, PathEnsemble, ProcessPath, TimeGrid};
use crate::rng::{Stream, StreamKind};
use crate::stats::map_paths;

/// Filtration the random time is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Filtration {
    Brownian,
    Poisson,
}

/// Cumulative intensity of a Cox construction.
#[derive(Clone, Debug, PartialEq)]
pub enum IntensitySpec {
    /// `C_t = rate * t`.
    Linear { rate: f64 },
    /// `C_t = rate * int_0^t (1 + W_s^2) ds`, left-point (predictable) sums.
    BrownianSquared { rate: f64 },
}

impl IntensitySpec {
    pub fn rate(&self) -> f64 {
        match *self {
            IntensitySpec::Linear { rate } | IntensitySpec::BrownianSquared { rate } => rate,
        }
    }

    /// `CumIntensity` along one driver path.
    pub fn cumulative(&self, w: &[f64], grid: &TimeGrid) -> ProcessPath {
        let values = match *self {
            IntensitySpec::Linear { rate } => grid.times().iter().map(|&t| rate * t).collect(),
            IntensitySpec::BrownianSquared { rate } => {
                let mut c = 0.0;
                let mut out = Vec::with_capacity(grid.len());
                out.push(0.0);
                for k in 0..grid.steps() {
                    c += rate * (1.0 + w[k] * w[k]) * grid.dt(k);
                    out.push(c);
                }
                out
            }
        };
        ProcessPath::new(Label::CumIntensity, values)
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, IntensitySpec::Linear { .. })
    }
}

/// How the running supremum of `N` is monitored between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupremumMonitoring {
    /// Prefix maximum of the grid values.
    Grid,
    /// Exact Brownian-bridge maximum inside each step.
    Bridge,
}

/// How zeros of `W` are detected between grid points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroDetection {
    /// Sign changes of consecutive grid values only.
    SignChange,
    /// Sign changes plus Brownian-bridge crossings between same-sign values.
    Bridge,
}

/// Construction of a random time.
#[derive(Clone, Debug, PartialEq)]
pub enum RandomTimeModel {
    Cox { intensity: IntensitySpec },
    HonestFromN { tail_eps: f64, monitoring: SupremumMonitoring },
    LastZeroBeforeOne { detection: ZeroDetection },
    PoissonFirstJump { rate: f64 },
}

impl fmt::Display for RandomTimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandomTimeModel::Cox { intensity } => match intensity {
                IntensitySpec::Linear { rate } => write!(f, "Cox(C_t = {rate} t)"),
                IntensitySpec::BrownianSquared { rate } => {
                    write!(f, "Cox(C_t = {rate} int (1 + W^2) ds)")
                }
            },
            RandomTimeModel::HonestFromN { tail_eps, .. } => {
                write!(f, "HonestFromN(N = exp(W - t/2), eps = {tail_eps})")
            }
            RandomTimeModel::LastZeroBeforeOne { .. } => f.write_str("LastZeroBeforeOne"),
            RandomTimeModel::PoissonFirstJump { rate } => write!(f, "PoissonFirstJump(rate = {rate})"),
        }
    }
}

impl RandomTimeModel {
    pub fn filtration(&self) -> Filtration {
        match self {
            RandomTimeModel::PoissonFirstJump { .. } => Filtration::Poisson,
            _ => Filtration::Brownian,
        }
    }

    /// Whether `Z` is available in closed form. Every family here has one;
    /// the last-zero formula comes from the reflection principle and is
    /// cross-checked against regression before use.
    pub fn has_closed_form_z(&self) -> bool {
        true
    }

    /// Pseudo-stopping times satisfy `E[M_tau] = E[M_0]` for bounded martingales.
    pub fn is_pseudo_stopping(&self) -> bool {
        matches!(self, RandomTimeModel::Cox { .. } | RandomTimeModel::PoissonFirstJump { .. })
    }

    /// Whether the time avoids every stopping time of its filtration.
    pub fn avoids_stopping_times(&self) -> bool {
        !matches!(self, RandomTimeModel::PoissonFirstJump { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RandomTimeModel::Cox { intensity } if !(intensity.rate() > 0.0) => Err(LabError::invalid(
                format!("Cox intensity rate must be positive, got {}", intensity.rate()),
            )),
            RandomTimeModel::HonestFromN { tail_eps, .. } if !(*tail_eps > 0.0 && *tail_eps < 1.0) => {
                Err(LabError::invalid(format!("tail threshold must lie in (0, 1), got {tail_eps}")))
            }
            RandomTimeModel::PoissonFirstJump { rate } if !(*rate > 0.0) => {
                Err(LabError::invalid(format!("Poisson rate must be positive, got {rate}")))
            }
            _ => Ok(()),
        }
    }
}

/// Auxiliary per-path values kept next to `tau`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimeExtra {
    /// Cox threshold draw.
    pub theta: Option<f64>,
    /// `Sigma` at the tail stop (the proxy for `Sigma_inf`).
    pub sigma_inf: Option<f64>,
    /// Time of the tail stop `N < eps Sigma`.
    pub stop_time: Option<f64>,
    /// Last record time found, also for censored honest paths.
    pub last_record: Option<f64>,
    /// `W` evaluated at `tau` (by construction for the last zero).
    pub w_at_tau: Option<f64>,
}

/// One path's random time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathTime {
    /// `tau`, or the censor horizon when censored.
    pub tau: f64,
    pub censored: bool,
    pub extra: TimeExtra,
}

/// Random times over an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomTimeSample {
    pub times: Vec<PathTime>,
    pub censor_horizon: f64,
}

impl RandomTimeSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `tau` of path `i`, `None` when censored.
    pub fn tau(&self, i: usize) -> Option<f64> {
        let p = &self.times[i];
        (!p.censored).then_some(p.tau)
    }

    /// `tau ∧ horizon`.
    pub fn tau_capped(&self, i: usize) -> f64 {
        self.times[i].tau.min(self.censor_horizon)
    }

    pub fn censored_count(&self) -> usize {
        self.times.iter().filter(|p| p.censored).count()
    }
}

/// Cox time on one path: first crossing of `theta` by the cumulative
/// intensity, linearly interpolated inside the crossing step.
/// `None` if `theta` is never exceeded on the grid.
pub fn cox_time_on_path(grid: &TimeGrid, intensity: &ProcessPath, theta: f64) -> Result<Option<f64>> {
    let c = &intensity.values;
    if c.len() != grid.len() {
        return Err(LabError::invalid(format!(
            "intensity has {} values for a grid of {} points",
            c.len(),
            grid.len()
        )));
    }
    let Some(k) = c.iter().position(|&x| x > theta) else {
        return Ok(None);
    };
    if k == 0 {
        return Ok(Some(0.0));
    }
    let frac = (theta - c[k - 1]) / (c[k] - c[k - 1]);
    Ok(Some(grid.t(k - 1) + frac * grid.dt(k - 1)))
}

/// Cox times over an ensemble. `Theta` is drawn from a stream keyed by
/// `seed` that is disjoint from every driver stream.
pub fn cox_time(ensemble: &PathEnsemble, intensity: &IntensitySpec, seed: u64) -> Result<RandomTimeSample> {
    let grid = ensemble.grid();
    let times = map_paths(ensemble.n_paths(), |i| {
        let w = ensemble.brownian(i);
        let c = intensity.cumulative(&w.values, grid);
        cox_path_time(grid, &w.values, &c, seed, i)
    });
    Ok(RandomTimeSample {
        times,
        censor_horizon: grid.horizon(),
    })
}

fn cox_path_time(grid: &TimeGrid, w: &[f64], c: &ProcessPath, seed: u64, path: usize) -> PathTime {
    let theta = Stream::new(seed, StreamKind::CoxThreshold, path as u64).exponential();
    let tau = cox_time_on_path(grid, c, theta).expect("intensity built on the ensemble grid");
    let extra = TimeExtra {
        theta: Some(theta),
        w_at_tau: tau.map(|t| grid.interpolate(w, t)),
        ..TimeExtra::default()
    };
    match tau {
        Some(tau) => PathTime { tau, censored: false, extra },
        None => PathTime { tau: grid.horizon(), censored: true, extra },
    }
}

/// Honest time of one `(N, Sigma)` path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HonestTime {
    /// Last grid time at which `Sigma` set a new record (0 if none).
    pub g: f64,
    pub record_index: usize,
    /// First index with `N < eps Sigma`, if reached.
    pub stop_index: Option<usize>,
    /// `Sigma` at the tail stop (at the horizon when censored).
    pub sigma_inf: f64,
    pub censored: bool,
}

/// `g = sup{t : N_t = Sigma_inf}` on a finite grid.
///
/// The path is followed until the tail stop `N_t < eps Sigma_t`; past that
/// point a new record has probability at most `eps`. Paths that never reach
/// the tail stop are flagged censored.
pub fn honest_from_local_martingale(
    grid: &TimeGrid,
    n: &ProcessPath,
    sigma: &ProcessPath,
    eps: f64,
) -> Result<HonestTime> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::invalid(format!("tail threshold must lie in (0, 1), got {eps}")));
    }
    if n.values.len() != grid.len() || sigma.values.len() != grid.len() {
        return Err(LabError::invalid("N and Sigma must be aligned with the grid"));
    }
    let ln: Vec<f64> = n.values.iter().map(|v| v.ln()).collect();
    let ls: Vec<f64> = sigma.values.iter().map(|v| v.ln()).collect();
    Ok(honest_from_logs(grid, &ln, &ls, eps.ln()))
}

/// Log-space core of [`honest_from_local_martingale`]; the tail stop is
/// `ln N - ln Sigma < ln eps`.
fn honest_from_logs(grid: &TimeGrid, ln: &[f64], ls: &[f64], log_eps: f64) -> HonestTime {
    let stop_index = (0..ln.len()).find(|&k| ln[k] - ls[k] < log_eps);
    let last = stop_index.unwrap_or(grid.steps());
    let record_index = (1..=last).rev().find(|&k| ls[k] > ls[k - 1]).unwrap_or(0);
    HonestTime {
        g: grid.t(record_index),
        record_index,
        stop_index,
        sigma_inf: ls[last].exp(),
        censored: stop_index.is_none(),
    }
}

/// Last zero of `W` on `[0, t_end]` where `t_end = t_{end_index}`.
///
/// A step with a sign change contributes the linearly interpolated root; under
/// [`ZeroDetection::Bridge`] a step whose endpoints share a sign contributes its
/// midpoint when the bridge crossing event `U < exp(-2 w_k w_{k+1} / dt)`
/// fires. `uniform(k)` is consulted for every step, in order.
pub fn last_zero(
    w: &[f64],
    grid: &TimeGrid,
    end_index: usize,
    detection: ZeroDetection,
    mut uniform: impl FnMut(usize) -> f64,
) -> f64 {
    let mut g = 0.0;
    for k in 0..end_index {
        let (a, b) = (w[k], w[k + 1]);
        let u = uniform(k);
        if b == 0.0 {
            g = grid.t(k + 1);
        } else if a * b < 0.0 || a == 0.0 {
            g = grid.t(k) + a / (a - b) * grid.dt(k);
        } else if detection == ZeroDetection::Bridge && u < (-2.0 * a * b / grid.dt(k)).exp() {
            g = grid.t(k) + 0.5 * grid.dt(k);
        }
    }
    g
}

/// Last zero before time 1 over an ensemble.
pub fn last_zero_before_one(ensemble: &PathEnsemble, detection: ZeroDetection) -> Result<RandomTimeSample> {
    let sim = Simulation::new(RandomTimeModel::LastZeroBeforeOne { detection }, ensemble.clone())?;
    Ok(sim.sample())
}

/// First jump of a rate-`rate` Poisson process, censored at the grid horizon.
/// The Brownian driver of the returned simulation is identically zero.
pub fn poisson_first_jump(rate: f64, n_paths: usize, seed: u64, grid: &TimeGrid) -> Result<Simulation> {
    let ensemble = crate::grid_paths::simulate_brownian(grid, n_paths, seed)?;
    Simulation::new(RandomTimeModel::PoissonFirstJump { rate }, ensemble)
}

/// Driver-side processes of one path.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverPath {
    /// Brownian values (stopped at the tail stop for honest times; zero for
    /// the Poisson filtration, which carries no Brownian driver).
    pub w: Vec<f64>,
    /// `ln N` for honest times.
    pub log_n: Option<Vec<f64>>,
    /// `ln Sigma` for honest times.
    pub log_sigma: Option<Vec<f64>>,
    /// Cumulative intensity for Cox times.
    pub cum_intensity: Option<Vec<f64>>,
}

/// A model bound to a driver ensemble.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub model: RandomTimeModel,
    pub ensemble: PathEnsemble,
    one_index: Option<usize>,
}

impl Simulation {
    pub fn new(model: RandomTimeModel, ensemble: PathEnsemble) -> Result<Self> {
        model.validate()?;
        let one_index = match model {
            RandomTimeModel::LastZeroBeforeOne { .. } => {
                if ensemble.grid().horizon() < 1.0 {
                    return Err(LabError::invalid("last zero before 1 needs a horizon of at least 1"));
                }
                Some(ensemble.grid().require_index(1.0, "last-zero endpoint")?)
            }
            _ => None,
        };
        Ok(Self {
            model,
            ensemble,
            one_index,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.ensemble.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.ensemble.n_paths()
    }

    pub fn seed(&self) -> u64 {
        self.ensemble.seed()
    }

    /// Grid index of `t = 1` (last-zero model only).
    pub fn one_index(&self) -> Option<usize> {
        self.one_index
    }

    pub fn driver(&self, path: usize) -> DriverPath {
        let grid = self.grid();
        match &self.model {
            RandomTimeModel::Cox { intensity } => {
                let w = self.ensemble.brownian(path).values;
                let c = intensity.cumulative(&w, grid).values;
                DriverPath { w, log_n: None, log_sigma: None, cum_intensity: Some(c) }
            }
            RandomTimeModel::HonestFromN { tail_eps, monitoring } => {
                self.honest_driver(path, *tail_eps, *monitoring)
            }
            RandomTimeModel::LastZeroBeforeOne { .. } => DriverPath {
                w: self.ensemble.brownian(path).values,
                log_n: None,
                log_sigma: None,
                cum_intensity: None,
            },
            RandomTimeModel::PoissonFirstJump { .. } => DriverPath {
                w: vec![0.0; grid.len()],
                log_n: None,
                log_sigma: None,
                cum_intensity: None,
            },
        }
    }

    /// `W`, `ln N` and `ln Sigma`, all stopped at the tail stop.
    fn honest_driver(&self, path: usize, eps: f64, monitoring: SupremumMonitoring) -> DriverPath {
        let grid = self.grid();
        let len = grid.len();
        let log_eps = eps.ln();
        let mut normals = Stream::new(self.seed(), StreamKind::Driver, path as u64);
        let mut bridge = Stream::new(self.seed(), StreamKind::BridgeMax, path as u64);
        let (mut w, mut x, mut s) = (vec![0.0f64; len], vec![0.0f64; len], vec![0.0f64; len]);
        let mut stopped = false;
        for k in 0..grid.steps() {
            if stopped {
                w[k + 1] = w[k];
                x[k + 1] = x[k];
                s[k + 1] = s[k];
                continue;
            }
            let dt = grid.dt(k);
            w[k + 1] = w[k] + dt.sqrt() * normals.normal();
            x[k + 1] = w[k + 1] - 0.5 * grid.t(k + 1);
            let peak = match monitoring {
                SupremumMonitoring::Grid => x[k + 1],
                SupremumMonitoring::Bridge => bridge_step_max(x[k], x[k + 1], dt, bridge.uniform()),
            };
            s[k + 1] = s[k].max(peak);
            stopped = x[k + 1] - s[k + 1] < log_eps;
        }
        DriverPath { w, log_n: Some(x), log_sigma: Some(s), cum_intensity: None }
    }

    pub fn time(&self, path: usize, driver: &DriverPath) -> PathTime {
        let grid = self.grid();
        match &self.model {
            RandomTimeModel::Cox { .. } => {
                let c = ProcessPath::new(
                    Label::CumIntensity,
                    driver.cum_intensity.clone().expect("Cox driver carries its intensity"),
                );
                cox_path_time(grid, &driver.w, &c, self.seed(), path)
            }
            RandomTimeModel::HonestFromN { tail_eps, .. } => {
                let ln = driver.log_n.as_ref().expect("honest driver carries ln N");
                let ls = driver.log_sigma.as_ref().expect("honest driver carries ln Sigma");
                let h = honest_from_logs(grid, ln, ls, tail_eps.ln());
                let extra = TimeExtra {
                    sigma_inf: Some(h.sigma_inf),
                    stop_time: h.stop_index.map(|k| grid.t(k)),
                    last_record: Some(h.g),
                    w_at_tau: Some(driver.w[h.record_index]),
                    ..TimeExtra::default()
                };
                PathTime {
                    tau: if h.censored { grid.horizon() } else { h.g },
                    censored: h.censored,
                    extra,
                }
            }
            RandomTimeModel::LastZeroBeforeOne { detection } => {
                let end = self.one_index.expect("checked at construction");
                let mut stream = Stream::new(self.seed(), StreamKind::BridgeZero, path as u64);
                let g = last_zero(&driver.w, grid, end, *detection, |_| stream.uniform());
                PathTime {
                    tau: g,
                    censored: false,
                    extra: TimeExtra { w_at_tau: Some(0.0), ..TimeExtra::default() },
                }
            }
            RandomTimeModel::PoissonFirstJump { rate } => {
                let tau = Stream::new(self.seed(), StreamKind::PoissonJump, path as u64).exponential() / rate;
                let censored = tau > grid.horizon();
                PathTime {
                    tau: if censored { grid.horizon() } else { tau },
                    censored,
                    extra: TimeExtra::default(),
                }
            }
        }
    }

    pub fn realize(&self, path: usize) -> (DriverPath, PathTime) {
        let driver = self.driver(path);
        let time = self.time(path, &driver);
        (driver, time)
    }

    pub fn sample(&self) -> RandomTimeSample {
        let times = map_paths(self.n_paths(), |i| self.realize(i).1);
        RandomTimeSample {
            times,
            censor_horizon: self.grid().horizon(),
        }
    }
}
