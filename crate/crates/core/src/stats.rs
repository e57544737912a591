//! Deterministic reductions over path ensembles.
//!
//! Paths are split into fixed-size chunks. Chunks may be folded on any
//! worker, but partial results are always merged left to right in chunk
//! order, so every statistic is bit-identical for a given chunk size no
//! matter how many threads took part.

use rayon::prelude::*;

pub const DEFAULT_CHUNK_SIZE: usize = 1024;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HAZARD_LAB_THREADS";

/// Partial results that can absorb a later chunk.
pub trait Merge {
    fn merge(&mut self, later: Self);
}

/// Folds `fold(acc, path)` over `0..n_paths` chunk by chunk and merges the
/// chunk results in order.
pub fn reduce_paths<A, I, F>(n_paths: usize, chunk_size: usize, init: I, fold: F) -> A
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
{
    let chunk = chunk_size.max(1);
    let n_chunks = n_paths.div_ceil(chunk);
    // Chunks are folded in waves so that at most one wave of partial
    // accumulators is alive at a time.
    let wave = 2 * rayon::current_num_threads().max(1);
    let mut total: Option<A> = None;
    for first in (0..n_chunks).step_by(wave) {
        let last = (first + wave).min(n_chunks);
        let parts: Vec<A> = (first..last)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let end = ((c + 1) * chunk).min(n_paths);
                for path in c * chunk..end {
                    fold(&mut acc, path);
                }
                acc
            })
            .collect();
        for part in parts {
            match total.as_mut() {
                Some(t) => t.merge(part),
                None => total = Some(part),
            }
        }
    }
    total.unwrap_or_else(init)
}

/// Maps every path to a value, keeping path order.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// Runs `f` inside a pool sized by [`THREADS_ENV`] when it is set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => with_threads(n, f),
        _ => f(),
    }
}

/// Runs `f` inside a dedicated pool of `n` workers.
pub fn with_threads<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Compensated running sum (two-sum error terms).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        // Branch-free two-sum: the rounding error of `sum + x` is exact.
        let t = self.sum + x;
        let b = t - self.sum;
        self.compensation += (self.sum - (t - b)) + (x - b);
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Merge for CompensatedSum {
    fn merge(&mut self, later: Self) {
        self.add(later.sum);
        self.add(later.compensation);
    }
}

/// Per-slot sums: plain within a chunk, compensated across chunks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockSums {
    partial: Vec<f64>,
    total: Vec<CompensatedSum>,
}

impl BlockSums {
    pub fn new(len: usize) -> Self {
        Self {
            partial: vec![0.0; len],
            total: vec![CompensatedSum::default(); len],
        }
    }

    /// The current chunk's plain sums.
    #[inline]
    pub fn partial_mut(&mut self) -> &mut [f64] {
        &mut self.partial
    }

    pub fn value(&self, i: usize) -> f64 {
        let mut c = self.total[i];
        c.add(self.partial[i]);
        c.value()
    }
}

impl Merge for BlockSums {
    fn merge(&mut self, later: Self) {
        for ((t, lt), lp) in self.total.iter_mut().zip(later.total).zip(later.partial) {
            t.merge(lt);
            t.add(lp);
        }
    }
}

/// Streaming mean and variance (Welford, Chan et al. merge).
///
/// A constant stream keeps its mean exactly equal to the constant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl Merge for MeanVar {
    fn merge(&mut self, later: Self) {
        if later.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = later;
            return;
        }
        let n = self.n + later.n;
        let delta = later.mean - self.mean;
        self.mean += delta * (later.n as f64 / n as f64);
        self.m2 += later.m2 + delta * delta * (self.n as f64 * later.n as f64 / n as f64);
        self.n = n;
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(&mut self, later: Self) {
        debug_assert_eq!(self.len(), later.len());
        for (a, b) in self.iter_mut().zip(later) {
            a.merge(b);
        }
    }
}

impl<T: Merge, const N: usize> Merge for [T; N] {
    fn merge(&mut self, later: Self) {
        for (a, b) in self.iter_mut().zip(later) {
            a.merge(b);
        }
    }
}

macro_rules! merge_tuple {
    ($($name:ident $idx:tt),+) => {
        impl<$($name: Merge),+> Merge for ($($name,)+) {
            fn merge(&mut self, later: Self) {
                $(self.$idx.merge(later.$idx);)+
            }
        }
    };
}

merge_tuple!(A 0, B 1);
merge_tuple!(A 0, B 1, C 2);
merge_tuple!(A 0, B 1, C 2, D 3);
merge_tuple!(A 0, B 1, C 2, D 3, E 4);
merge_tuple!(A 0, B 1, C 2, D 3, E 4, F 5);

/// Maximum of observed values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Max(pub f64);

impl Default for Max {
    fn default() -> Self {
        Max(f64::NEG_INFINITY)
    }
}

impl Max {
    #[inline]
    pub fn push(&mut self, x: f64) {
        if x > self.0 {
            self.0 = x;
        }
    }
}

impl Merge for Max {
    fn merge(&mut self, later: Self) {
        self.push(later.0);
    }
}

/// Event counter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Count {
    pub hits: u64,
    pub total: u64,
}

impl Count {
    #[inline]
    pub fn push(&mut self, hit: bool) {
        self.total += 1;
        self.hits += u64::from(hit);
    }

    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.hits as f64 / self.total as f64
        }
    }
}

impl Merge for Count {
    fn merge(&mut self, later: Self) {
        self.hits += later.hits;
        self.total += later.total;
    }
}
