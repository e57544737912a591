//! Cross-sectional least-squares regression, one fit per grid time.
//!
//! This is the conditional-expectation estimator behind the regression
//! estimate of `Z` and the discrete Doob–Meyer decomposition. At every
//! regression time the state variables are standardised across paths, a
//! basis is evaluated and ridge-regularised normal equations are solved.
//! Sums are accumulated with compensation in fixed chunk order.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::stats::{reduce_paths, BlockSums, Max, MeanVar, Merge};

pub const MAX_DEGREE: usize = 5;
pub const MAX_BINS: usize = 256;
/// Largest number of state variables.
pub const MAX_DIM: usize = 8;
const MAX_RIDGE: f64 = 1e-2;

/// Per-time state observed on a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateVar {
    W,
    /// `|W|`; last-zero quantities are even in `W` with a kink at zero.
    AbsW,
    Sigma,
    N,
    /// `ln Sigma`; tames the heavy right tail of `Sigma`.
    LogSigma,
    LogN,
    Time,
    /// The supermartingale's own value; only meaningful when decomposing a
    /// known `Z`.
    Z,
}

impl StateVar {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "W" | "w" => Some(StateVar::W),
            "absW" | "abs_w" => Some(StateVar::AbsW),
            "Sigma" | "sigma" => Some(StateVar::Sigma),
            "N" | "n" => Some(StateVar::N),
            "lnSigma" | "ln_sigma" => Some(StateVar::LogSigma),
            "lnN" | "ln_n" => Some(StateVar::LogN),
            "t" | "time" => Some(StateVar::Time),
            "Z" | "z" => Some(StateVar::Z),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// All monomials of total degree at most `degree`.
    Polynomial { degree: usize },
    /// Equal-width bins on the first state variable.
    PiecewiseConstant { bins: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSpec {
    pub basis: Basis,
    pub state: Vec<StateVar>,
    pub ridge: f64,
}

impl RegressionSpec {
    /// Cubic polynomial with ridge `1e-8`.
    pub fn cubic(state: Vec<StateVar>) -> Self {
        Self {
            basis: Basis::Polynomial { degree: 3 },
            state,
            ridge: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state.is_empty() {
            return Err(LabError::invalid("regression needs at least one state variable"));
        }
        if self.state.len() > MAX_DIM {
            return Err(LabError::invalid(format!("at most {MAX_DIM} state variables")));
        }
        if !(self.ridge >= 0.0) {
            return Err(LabError::invalid(format!("ridge must be nonnegative, got {}", self.ridge)));
        }
        match self.basis {
            Basis::Polynomial { degree } if degree > MAX_DEGREE => Err(LabError::invalid(format!(
                "polynomial degree {degree} exceeds {MAX_DEGREE}"
            ))),
            Basis::PiecewiseConstant { bins } if bins == 0 || bins > MAX_BINS => {
                Err(LabError::invalid(format!("bin count {bins} outside 1..={MAX_BINS}")))
            }
            _ => Ok(()),
        }
    }

    fn monomials(&self) -> Monomials {
        let dim = self.state.len();
        let (exps, degree) = match self.basis {
            Basis::Polynomial { degree } => (monomial_exponents(dim, degree), degree),
            Basis::PiecewiseConstant { .. } => (Vec::new(), 0),
        };
        Monomials {
            exps: exps.iter().flatten().map(|&e| e as u8).collect(),
            dim,
            degree,
        }
    }
}

/// Exponent vectors of all monomials in `dim` variables with total degree
/// at most `degree`, constant term first.
pub fn monomial_exponents(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut current = vec![0; dim];
        push_compositions(&mut out, &mut current, 0, total);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, var: usize, left: usize) {
    if var + 1 == current.len() {
        current[var] = left;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for e in (0..=left).rev() {
        current[var] = e;
        push_compositions(out, current, var + 1, left - e);
    }
    current[var] = 0;
}

/// Flattened exponent table, one row of `dim` exponents per monomial.
#[derive(Clone, Debug, PartialEq)]
struct Monomials {
    exps: Vec<u8>,
    dim: usize,
    degree: usize,
}

impl Monomials {
    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.exps.len() / self.dim
        }
    }

    /// Calls `f(i, phi_i)` for each monomial at the standardized point `z`.
    #[inline]
    fn for_each(&self, z: &[f64], mut f: impl FnMut(usize, f64)) {
        let mut pow = [[1.0f64; MAX_DEGREE + 1]; MAX_DIM];
        for (j, &v) in z.iter().enumerate() {
            for e in 1..=self.degree {
                pow[j][e] = pow[j][e - 1] * v;
            }
        }
        for (i, row) in self.exps.chunks_exact(self.dim).enumerate() {
            let mut m = 1.0;
            for (j, &e) in row.iter().enumerate() {
                m *= pow[j][e as usize];
            }
            f(i, m);
        }
    }
}

/// Source of per-path observations for a family of cross-sectional fits.
pub trait CrossSection: Sync {
    fn n_paths(&self) -> usize;
    /// Number of regression times.
    fn n_times(&self) -> usize;
    fn dim(&self) -> usize;
    /// Fills `state` (`n_times × dim`, row-major) and `target` (`n_times`)
    /// for one path.
    fn observe(&self, path: usize, state: &mut [f64], target: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq)]
struct Scaling {
    mean: Vec<f64>,
    scale: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Scaling {
    #[inline]
    fn standardize(&self, j: usize, x: f64) -> f64 {
        if self.scale[j] > 0.0 {
            (x - self.mean[j]) / self.scale[j]
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum StepModel {
    Linear(Vec<f64>),
    Bins { values: Vec<f64> },
}

/// Fitted regressions, one per regression time.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSectionFit {
    spec: RegressionSpec,
    monomials: Monomials,
    scaling: Vec<Scaling>,
    models: Vec<StepModel>,
    /// Largest condition number of the regularised normal matrices.
    pub max_condition: f64,
    /// Number of times the ridge had to be raised to factorise.
    pub ridge_bumps: usize,
}

impl CrossSectionFit {
    pub fn spec(&self) -> &RegressionSpec {
        &self.spec
    }

    pub fn n_times(&self) -> usize {
        self.models.len()
    }

    /// Prediction at regression time `k` for the raw state `x`.
    pub fn predict(&self, k: usize, x: &[f64]) -> f64 {
        let sc = &self.scaling[k];
        match &self.models[k] {
            StepModel::Linear(coef) => {
                let mut z = [0.0; MAX_DIM];
                for (j, &v) in x.iter().enumerate() {
                    z[j] = sc.standardize(j, v);
                }
                let mut sum = 0.0;
                self.monomials.for_each(&z[..x.len()], |i, m| sum += coef[i] * m);
                sum
            }
            StepModel::Bins { values } => values[bin_index(sc, values.len(), x[0])],
        }
    }
}

#[inline]
fn bin_index(sc: &Scaling, bins: usize, x: f64) -> usize {
    if !(sc.hi > sc.lo) {
        return 0;
    }
    let pos = ((x - sc.lo) / (sc.hi - sc.lo) * bins as f64).floor();
    (pos.max(0.0) as usize).min(bins - 1)
}

#[derive(Clone, Default)]
struct MomentAcc {
    moments: Vec<MeanVar>,
    lo: Vec<Max>,
    hi: Vec<Max>,
}

impl Merge for MomentAcc {
    fn merge(&mut self, later: Self) {
        self.moments.merge(later.moments);
        self.lo.merge(later.lo);
        self.hi.merge(later.hi);
    }
}

#[derive(Clone, Default)]
struct NormalAcc {
    /// Per time: upper triangle of `X'X` then `X'y`.
    sums: BlockSums,
    bin_means: Vec<MeanVar>,
    target: Vec<MeanVar>,
}

impl Merge for NormalAcc {
    fn merge(&mut self, later: Self) {
        self.sums.merge(later.sums);
        self.bin_means.merge(later.bin_means);
        self.target.merge(later.target);
    }
}

/// Fits one regression per time of `source`.
pub fn fit_cross_sections(source: &impl CrossSection, spec: &RegressionSpec, chunk_size: usize) -> Result<CrossSectionFit> {
    spec.validate()?;
    let (n_times, dim) = (source.n_times(), source.dim());
    if dim != spec.state.len() {
        return Err(LabError::invalid("state dimension does not match the regression spec"));
    }
    let n_paths = source.n_paths();

    let moments = reduce_paths(
        n_paths,
        chunk_size,
        || MomentAcc {
            moments: vec![MeanVar::default(); n_times * dim],
            lo: vec![Max::default(); n_times],
            hi: vec![Max::default(); n_times],
        },
        |acc, path| {
            let mut state = vec![0.0; n_times * dim];
            let mut target = vec![0.0; n_times];
            source.observe(path, &mut state, &mut target);
            for k in 0..n_times {
                for j in 0..dim {
                    acc.moments[k * dim + j].push(state[k * dim + j]);
                }
                acc.lo[k].push(-state[k * dim]);
                acc.hi[k].push(state[k * dim]);
            }
        },
    );
    let scaling: Vec<Scaling> = (0..n_times)
        .map(|k| {
            let m = &moments.moments[k * dim..(k + 1) * dim];
            Scaling {
                mean: m.iter().map(MeanVar::mean).collect(),
                scale: m
                    .iter()
                    .map(|mv| {
                        let sd = mv.variance().sqrt();
                        if sd > 1e-12 * (1.0 + mv.mean().abs()) {
                            sd
                        } else {
                            0.0
                        }
                    })
                    .collect(),
                lo: -moments.lo[k].0,
                hi: moments.hi[k].0,
            }
        })
        .collect();

    let monomials = spec.monomials();
    let p = monomials.len();
    let tri = p * (p + 1) / 2;
    let bins = match spec.basis {
        Basis::PiecewiseConstant { bins } => bins,
        Basis::Polynomial { .. } => 0,
    };
    let acc = reduce_paths(
        n_paths,
        chunk_size,
        || NormalAcc {
            sums: BlockSums::new(n_times * (tri + p)),
            bin_means: vec![MeanVar::default(); n_times * bins],
            target: vec![MeanVar::default(); n_times],
        },
        |acc, path| {
            let mut state = vec![0.0; n_times * dim];
            let mut target = vec![0.0; n_times];
            source.observe(path, &mut state, &mut target);
            let mut z = vec![0.0; dim];
            let mut phi = vec![0.0; p];
            for k in 0..n_times {
                let sc = &scaling[k];
                let y = target[k];
                if bins > 0 {
                    acc.target[k].push(y);
                    let b = bin_index(sc, bins, state[k * dim]);
                    acc.bin_means[k * bins + b].push(y);
                    continue;
                }
                for j in 0..dim {
                    z[j] = sc.standardize(j, state[k * dim + j]);
                }
                monomials.for_each(&z, |i, m| phi[i] = m);
                let g = &mut acc.sums.partial_mut()[k * (tri + p)..(k + 1) * (tri + p)];
                let mut t = 0;
                for a in 0..p {
                    let pa = phi[a];
                    for &pb in &phi[a..] {
                        g[t] += pa * pb;
                        t += 1;
                    }
                    g[tri + a] += pa * y;
                }
            }
        },
    );

    let mut max_condition: f64 = 1.0;
    let mut ridge_bumps = 0;
    let mut models = Vec::with_capacity(n_times);
    for k in 0..n_times {
        if bins > 0 {
            let overall = acc.target[k].mean();
            let values = (0..bins)
                .map(|b| {
                    let mv = &acc.bin_means[k * bins + b];
                    if mv.count() > 0 {
                        mv.mean()
                    } else {
                        overall
                    }
                })
                .collect();
            models.push(StepModel::Bins { values });
            continue;
        }
        let base = k * (tri + p);
        let n = n_paths as f64;
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut idx = base;
        for i in 0..p {
            for j in i..p {
                let v = acc.sums.value(idx) / n;
                a[(i, j)] = v;
                a[(j, i)] = v;
                idx += 1;
            }
        }
        let rhs = DVector::from_iterator(p, (0..p).map(|i| acc.sums.value(base + tri + i) / n));
        let (coef, condition, bumps) = solve_ridge(&a, &rhs, spec.ridge, k)?;
        max_condition = max_condition.max(condition);
        ridge_bumps += bumps;
        models.push(StepModel::Linear(coef));
    }
    Ok(CrossSectionFit {
        spec: spec.clone(),
        monomials,
        scaling,
        models,
        max_condition,
        ridge_bumps,
    })
}

/// Solves `(A + ridge I') x = b`, where `I'` spares the intercept, raising
/// the ridge until a Cholesky factorisation succeeds.
fn solve_ridge(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64, step: usize) -> Result<(Vec<f64>, f64, usize)> {
    let p = a.nrows();
    let mut lambda = ridge;
    let mut bumps = 0;
    loop {
        let mut m = a.clone();
        for i in 1..p {
            m[(i, i)] += lambda;
        }
        if p > 0 && m[(0, 0)] <= 0.0 {
            m[(0, 0)] += lambda.max(f64::EPSILON);
        }
        let eig = m.clone().symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if let Some(chol) = m.cholesky() {
            if condition.is_finite() && condition < 1e14 {
                let x = chol.solve(b);
                return Ok((x.iter().copied().collect(), condition, bumps));
            }
        }
        if lambda >= MAX_RIDGE {
            return Err(LabError::Singular { step, condition });
        }
        lambda = if lambda > 0.0 { lambda * 100.0 } else { 1e-10 };
        bumps += 1;
    }
}
