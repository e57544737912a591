//! Hazard process `Gamma = -ln Z`, martingale hazard process
//! `Lambda = int da / Z_-`, and the special structure of honest and Poisson
//! times.

use crate::azema::{first_zero, BundlePath, SupermartingaleBundle, Z_FLOOR};
use crate::error::{LabError, Result};
use crate::grid_paths::{Label, ProcessPath, TimeGrid};
use crate::random_times::{poisson_first_jump, PathTime, RandomTimeModel};
use crate::stats::{reduce_paths, Count, Max, MeanVar, Merge};

/// `Gamma`, `Lambda` and their gap on one path.
///
/// `Gamma` and `gap` are `NaN` from `valid_len` on, where `Z` has reached
/// the floor.
#[derive(Clone, Debug, PartialEq)]
pub struct HazardPair {
    pub gamma: ProcessPath,
    pub lambda: ProcessPath,
    pub gap: Vec<f64>,
    pub valid_len: usize,
}

impl HazardPair {
    /// `Gamma` at grid index `k`, refusing indices where `Z` vanished.
    pub fn gamma_at(&self, grid: &TimeGrid, k: usize) -> Result<f64> {
        if k >= self.valid_len {
            return Err(LabError::Domain {
                t: grid.t(k),
                reason: "Z has reached zero, so tau already happened".into(),
            });
        }
        Ok(self.gamma.values[k])
    }

    /// `sup |Lambda - Gamma|` over the valid range.
    pub fn sup_gap(&self) -> f64 {
        self.gap[..self.valid_len].iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// `Gamma_k = -ln Z_k` up to the first floor hit, `NaN` afterwards; also
/// returns the number of valid points.
pub fn hazard_process(z: &ProcessPath) -> (ProcessPath, usize) {
    let valid_len = first_zero(z, Z_FLOOR).valid_len;
    let values = z
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| if k < valid_len { -v.ln() } else { f64::NAN })
        .collect();
    (ProcessPath::new(Label::Gamma, values), valid_len)
}

/// Left-endpoint quadrature `Lambda_k = sum_{j<k} (a_{j+1} - a_j) / Z_j`.
///
/// Steps with no compensator increment are skipped even where `Z` vanished;
/// an increment against a vanished `Z` is a domain error.
pub fn martingale_hazard(grid: &TimeGrid, bundle: &BundlePath) -> Result<ProcessPath> {
    let (a, z) = (&bundle.a.values, &bundle.z.values);
    let mut values = Vec::with_capacity(a.len());
    values.push(0.0);
    let mut acc = 0.0;
    for j in 0..a.len() - 1 {
        let da = a[j + 1] - a[j];
        if da != 0.0 {
            if z[j] <= Z_FLOOR {
                return Err(LabError::Domain {
                    t: grid.t(j),
                    reason: format!("compensator increases while Z_- = {} is below the floor", z[j]),
                });
            }
            acc += da / z[j];
        }
        values.push(acc);
    }
    Ok(ProcessPath::new(Label::Lambda, values))
}

pub fn hazard_pair(grid: &TimeGrid, bundle: &BundlePath) -> Result<HazardPair> {
    let (gamma, valid_len) = hazard_process(&bundle.z);
    let lambda = martingale_hazard(grid, bundle)?;
    let gap = lambda.values.iter().zip(&gamma.values).map(|(l, g)| l - g).collect();
    Ok(HazardPair {
        gamma,
        lambda,
        gap,
        valid_len,
    })
}

/// `Lambda_{t ∧ tau}`: on the grid before `tau`, and with the final partial
/// step closed by `a_tau` after it.
pub fn stopped_lambda(grid: &TimeGrid, lambda: &ProcessPath, bundle: &BundlePath, time: &PathTime, t: f64) -> f64 {
    let tau = if time.censored { f64::INFINITY } else { time.tau };
    if t <= tau {
        return grid.interpolate(&lambda.values, t);
    }
    let j = grid.step_containing(tau);
    match bundle.a_at_tau {
        Some(a_tau) => lambda.values[j] + (a_tau - bundle.a.values[j]) / bundle.z.values[j],
        None => grid.interpolate(&lambda.values, tau),
    }
}

/// `C_t = -ln Z_{t ∧ tau}` on the grid for a pseudo-stopping Cox time.
///
/// `-ln Z` is interpolated linearly in time, so for a linearly interpolated
/// cumulative intensity `C_tau` equals the threshold exactly.
pub fn compensator_pseudo(model: &RandomTimeModel, grid: &TimeGrid, bundle: &BundlePath, time: &PathTime) -> Result<ProcessPath> {
    if !matches!(model, RandomTimeModel::Cox { .. }) {
        return Err(LabError::UnsupportedModel(format!(
            "-ln Z stopped at tau compensates only Cox times here, not {model}"
        )));
    }
    let (gamma, valid_len) = hazard_process(&bundle.z);
    if valid_len < grid.len() {
        return Err(LabError::Domain {
            t: grid.t(valid_len),
            reason: "Cox Z reached the floor".into(),
        });
    }
    let tau = if time.censored { f64::INFINITY } else { time.tau };
    let c_tau = (tau < f64::INFINITY).then(|| grid.interpolate(&gamma.values, tau));
    let values = grid
        .times()
        .iter()
        .zip(&gamma.values)
        .map(|(&t, &g)| match c_tau {
            Some(c) if t > tau => c,
            _ => g,
        })
        .collect();
    Ok(ProcessPath::new(Label::CumIntensity, values))
}

/// Hazard processes of an honest time from `ln N` and `ln Sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct HonestDecomposition {
    pub pair: HazardPair,
    /// The quadrature `int da / Z_-` evaluated on the bundle.
    pub numeric_lambda: ProcessPath,
    /// `sup_t |numeric_lambda - ln Sigma|`.
    pub quadrature_error: f64,
}

/// `Gamma = ln Sigma - ln N`, `Lambda = ln Sigma`, `gap = ln N`, pathwise.
///
/// Fails when the numeric quadrature of the bundle strays from `ln Sigma`
/// by more than `tolerance` on this path.
pub fn honest_decomposition(
    grid: &TimeGrid,
    log_n: &[f64],
    log_sigma: &[f64],
    bundle: &BundlePath,
    tolerance: f64,
) -> Result<HonestDecomposition> {
    if log_n.len() != grid.len() || log_sigma.len() != grid.len() {
        return Err(LabError::invalid("ln N and ln Sigma must be aligned with the grid"));
    }
    let gamma: Vec<f64> = log_sigma.iter().zip(log_n).map(|(s, n)| s - n).collect();
    let lambda = log_sigma.to_vec();
    let gap = lambda.iter().zip(&gamma).map(|(l, g)| l - g).collect();
    let numeric_lambda = martingale_hazard(grid, bundle)?;
    let quadrature_error = numeric_lambda
        .values
        .iter()
        .zip(log_sigma)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if quadrature_error > tolerance {
        return Err(LabError::DecompositionInconsistent(format!(
            "int da / Z_- differs from ln Sigma by {quadrature_error} > {tolerance}"
        )));
    }
    Ok(HonestDecomposition {
        pair: HazardPair {
            gamma: ProcessPath::new(Label::Gamma, gamma),
            lambda: ProcessPath::new(Label::Lambda, lambda),
            gap,
            valid_len: grid.len(),
        },
        numeric_lambda,
        quadrature_error,
    })
}

/// Ensemble view of the honest quadrature error.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HonestQuadrature {
    /// Per grid time, mean over paths of `|numeric Lambda - ln Sigma|`.
    pub mean_abs_error: Vec<MeanVar>,
    /// Largest single-path error.
    pub worst_path: Max,
    /// Largest pathwise `|gap - ln N|`.
    pub gap_identity: Max,
    /// Largest pathwise `|Lambda - ln Sigma|`.
    pub lambda_identity: Max,
}

impl Merge for HonestQuadrature {
    fn merge(&mut self, later: Self) {
        self.mean_abs_error.merge(later.mean_abs_error);
        self.worst_path.merge(later.worst_path);
        self.gap_identity.merge(later.gap_identity);
        self.lambda_identity.merge(later.lambda_identity);
    }
}

impl HonestQuadrature {
    /// `sup_t` of the cross-sectional mean error.
    pub fn sup_mean_error(&self) -> f64 {
        self.mean_abs_error.iter().map(MeanVar::mean).fold(0.0, f64::max)
    }
}

/// Runs [`honest_decomposition`] on every path of an honest bundle.
///
/// The ensemble check is `sup_t mean_paths |numeric Lambda - ln Sigma|`
/// against `tolerance`; the left-endpoint rule overshoots on paths that set
/// records while `Z_-` sits below one, so single paths can exceed it.
pub fn honest_quadrature(bundle: &SupermartingaleBundle, tolerance: f64) -> Result<HonestQuadrature> {
    let sim = bundle.simulation();
    if !matches!(sim.model, RandomTimeModel::HonestFromN { .. }) {
        return Err(LabError::UnsupportedModel(format!("{} is not an honest time", sim.model)));
    }
    let grid = sim.grid();
    let len = grid.len();
    let out = reduce_paths(
        sim.n_paths(),
        sim.ensemble.chunk_size(),
        || HonestQuadrature {
            mean_abs_error: vec![MeanVar::default(); len],
            ..HonestQuadrature::default()
        },
        |acc, path| {
            let (driver, time) = sim.realize(path);
            let bp = bundle.path_with(&driver, &time);
            let (x, s) = (driver.log_n.as_ref().unwrap(), driver.log_sigma.as_ref().unwrap());
            let d = honest_decomposition(grid, x, s, &bp, f64::INFINITY).expect("honest Z stays positive");
            for k in 0..len {
                acc.mean_abs_error[k].push((d.numeric_lambda.values[k] - s[k]).abs());
                acc.gap_identity.push((d.pair.gap[k] - x[k]).abs());
                acc.lambda_identity.push((d.pair.lambda.values[k] - s[k]).abs());
            }
            acc.worst_path.push(d.quadrature_error);
        },
    );
    if out.sup_mean_error() > tolerance {
        return Err(LabError::DecompositionInconsistent(format!(
            "mean |int da / Z_- - ln Sigma| reaches {} > {tolerance}",
            out.sup_mean_error()
        )));
    }
    Ok(out)
}

/// Outcome of the Poisson first-jump counterexample.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleReport {
    pub rate: f64,
    pub n_paths: usize,
    pub defaults: u64,
    /// `1 - Z` never decreases along the grid on any path.
    pub z_monotone: bool,
    /// Largest one-step increment of `Lambda` divided by `rate * dt`; at
    /// most one for a continuous `Lambda`.
    pub lambda_step_ratio: f64,
    /// Largest `|Gamma|` strictly before `tau` on the grid.
    pub gamma_before_tau: f64,
    /// Largest `|Lambda - rate (t ∧ tau)|` on the grid.
    pub lambda_closed_form_error: f64,
    /// Largest `|gap(0.9 tau) - 0.9 rate tau|`.
    pub gap_at_probe_error: f64,
    /// Mean of `gap(0.9 tau) = Lambda - Gamma` over defaulted paths.
    pub mean_gap_at_probe: f64,
    /// `sup_{t < tau} |Lambda - Gamma|` averaged over defaulted paths.
    pub mean_sup_gap: f64,
}

impl CounterexampleReport {
    /// The conjecture that a continuous `Lambda` equals `Gamma` fails.
    pub fn conjecture_fails(&self) -> bool {
        self.defaults > 0 && self.lambda_step_ratio <= 1.0 + 1e-9 && self.gamma_before_tau == 0.0 && self.mean_sup_gap > 0.0
    }
}

#[derive(Clone, Default)]
struct CounterAcc {
    defaults: Count,
    non_monotone: u64,
    step_ratio: Max,
    gamma: Max,
    lambda_err: Max,
    probe_err: Max,
    probe_gap: MeanVar,
    sup_gap: MeanVar,
}

impl Merge for CounterAcc {
    fn merge(&mut self, later: Self) {
        self.defaults.merge(later.defaults);
        self.non_monotone += later.non_monotone;
        self.step_ratio.merge(later.step_ratio);
        self.gamma.merge(later.gamma);
        self.lambda_err.merge(later.lambda_err);
        self.probe_err.merge(later.probe_err);
        self.probe_gap.merge(later.probe_gap);
        self.sup_gap.merge(later.sup_gap);
    }
}

/// Builds the Poisson first jump and checks that its martingale hazard
/// process is continuous while its hazard process stays at zero before
/// `tau`, so the two differ.
pub fn conjecture_counterexample(rate: f64, n_paths: usize, seed: u64, grid: &TimeGrid) -> Result<CounterexampleReport> {
    if !(rate > 0.0) {
        return Err(LabError::invalid(format!("Poisson rate must be positive, got {rate}")));
    }
    let sim = poisson_first_jump(rate, n_paths, seed, grid)?;
    let bundle = crate::azema::closed_form_z(&sim)?;
    let acc = reduce_paths(n_paths, sim.ensemble.chunk_size(), CounterAcc::default, |acc, path| {
        let (driver, time) = sim.realize(path);
        let bp = bundle.path_with(&driver, &time);
        let pair = hazard_pair(grid, &bp).expect("Poisson compensator stops at tau");
        let (z, lambda) = (&bp.z.values, &pair.lambda.values);
        acc.defaults.push(!time.censored);
        if z.windows(2).any(|w| w[1] > w[0]) {
            acc.non_monotone += 1;
        }
        let tau = if time.censored { f64::INFINITY } else { time.tau };
        let mut sup_gap = 0.0f64;
        for k in 0..grid.len() {
            let t = grid.t(k);
            acc.lambda_err.push((lambda[k] - rate * t.min(tau)).abs());
            if k + 1 < grid.len() {
                acc.step_ratio.push((lambda[k + 1] - lambda[k]) / (rate * grid.dt(k)));
            }
            if t < tau {
                acc.gamma.push(pair.gamma.values[k].abs());
                sup_gap = sup_gap.max(pair.gap[k].abs());
            }
        }
        if !time.censored {
            let probe = 0.9 * tau;
            let gap = poisson_lambda(rate, tau, probe) - poisson_gamma(tau, probe);
            acc.probe_err.push((gap - 0.9 * rate * tau).abs());
            acc.probe_gap.push(gap);
            acc.sup_gap.push(sup_gap);
        }
    });
    Ok(CounterexampleReport {
        rate,
        n_paths,
        defaults: acc.defaults.hits,
        z_monotone: acc.non_monotone == 0,
        lambda_step_ratio: acc.step_ratio.0,
        gamma_before_tau: acc.gamma.0,
        lambda_closed_form_error: acc.lambda_err.0,
        gap_at_probe_error: acc.probe_err.0,
        mean_gap_at_probe: acc.probe_gap.mean(),
        mean_sup_gap: acc.sup_gap.mean(),
    })
}

/// `Lambda_t = rate (t ∧ tau)` of the Poisson first jump.
pub fn poisson_lambda(rate: f64, tau: f64, t: f64) -> f64 {
    rate * t.min(tau)
}

/// `Gamma_t = -ln 1_{tau > t}`, defined for `t < tau` only.
pub fn poisson_gamma(tau: f64, t: f64) -> f64 {
    debug_assert!(t < tau);
    -(1.0f64).ln()
}
