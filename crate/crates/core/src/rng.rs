//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, kind, path, index)`: the seed keys a
//! ChaCha8 block cipher, `(kind, path)` selects one of its 2^64 independent
//! streams and `index` is the word position inside that stream. Draws for a
//! given path therefore never depend on how paths are scheduled across
//! workers, and the streams used for different purposes are disjoint.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

/// Purpose of a stream. Distinct kinds never share counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    /// Gaussian increments of the Brownian driver.
    Driver = 0,
    /// Unit-exponential thresholds of Cox constructions.
    CoxThreshold = 1,
    /// Jump times of the Poisson counterexample.
    PoissonJump = 2,
    /// Uniforms for exact in-step Brownian bridge maxima.
    BridgeMax = 3,
    /// Uniforms for in-step Brownian bridge zero crossings.
    BridgeZero = 4,
}

const PATH_BITS: u32 = 56;

/// Sequential reader over one `(seed, kind, path)` stream.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, kind: StreamKind, path: u64) -> Self {
        Self::at(seed, kind, path, 0)
    }

    /// Stream positioned so that the next draw is draw number `index`.
    pub fn at(seed: u64, kind: StreamKind, path: u64, index: u64) -> Self {
        assert!(path < (1 << PATH_BITS), "path index {path} exceeds stream capacity");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((kind as u64) << PATH_BITS) | path);
        // one draw consumes one u64, i.e. two 32-bit words
        rng.set_word_pos(u128::from(index) * 2);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the uniform draw.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    /// Unit exponential by inversion.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }
}

const A: [f64; 8] = [
    3.387132872796366608,
    133.14166789178437745,
    1971.5909503065514427,
    13731.693765509461125,
    45921.953931549871457,
    67265.770927008700853,
    33430.575583588128105,
    2509.0809287301226727,
];
const B: [f64; 8] = [
    1.0,
    42.313330701600911252,
    687.1870074920579083,
    5394.1960214247511077,
    21213.794301586595867,
    39307.89580009271061,
    28729.085735721942674,
    5226.495278852545925,
];
const C: [f64; 8] = [
    1.42343711074968357734,
    4.6303378461565452959,
    5.7694972214606914055,
    3.64784832476320460504,
    1.27045825245236838258,
    0.24178072517745061177,
    0.0227238449892691845833,
    7.7454501427834140764e-4,
];
const D: [f64; 8] = [
    1.0,
    2.05319162663775882187,
    1.6763848301838038494,
    0.68976733498510000455,
    0.14810397642748007459,
    0.0151986665636164571966,
    5.475938084995344946e-4,
    1.05075007164441684324e-9,
];
const E: [f64; 8] = [
    6.6579046435011037772,
    5.4637849111641143699,
    1.7848265399172913358,
    0.29656057182850489123,
    0.026532189526576123093,
    0.0012426609473880784386,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const F: [f64; 8] = [
    1.0,
    0.59983220655588793769,
    0.13692988092273580531,
    0.0148753612908506148525,
    7.868691311456132591e-4,
    1.8463183175100546818e-5,
    1.4215117583164458887e-7,
    2.04426310338993978564e-15,
];

#[inline]
fn horner(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Standard normal quantile (Wichura's AS 241, about 1e-16 relative error).
#[inline]
pub fn inverse_normal_cdf(u: f64) -> f64 {
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&A, r) / horner(&B, r);
    }
    let r = (-(if q < 0.0 { u } else { 1.0 - u }).ln()).sqrt();
    let x = if r <= 5.0 {
        horner(&C, r - 1.6) / horner(&D, r - 1.6)
    } else {
        horner(&E, r - 5.0) / horner(&F, r - 5.0)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
