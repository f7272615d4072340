//! Normal and Student-t distribution functions plus reproducible normal
//! deviate streams.
//!
//! The normal CDF is evaluated through `erfc`, the t CDF through the
//! regularised incomplete beta function, and both quantiles by safeguarded
//! Newton iteration inside a bracket.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use libm::{erfc, lgamma as ln_gamma};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const QUANTILE_XTOL: f64 = 1e-12;

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail, `1 - Φ(x)`, without cancellation for large `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(normal_quantile_unchecked(p))
}

// Acklam's rational approximation followed by Halley refinement steps.
fn normal_quantile_unchecked(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        // work on whichever tail is small to keep the residual accurate
        let err = if x > 0.0 {
            (1.0 - p) - std_normal_sf(x)
        } else {
            std_normal_cdf(x) - p
        };
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 || !err.is_finite() {
            break;
        }
        let u = err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Student-t cumulative distribution function with `df` degrees of freedom.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.5;
    }
    let tail = t_tail(x.abs(), df);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t upper tail probability `P(T > x)`.
pub fn t_sf(x: f64, df: f64) -> f64 {
    t_cdf(-x, df)
}

// P(T > a) for a >= 0.
fn t_tail(a: f64, df: f64) -> f64 {
    if a.is_infinite() {
        return 0.0;
    }
    let x2 = a * a;
    // both arguments formed directly so neither suffers cancellation
    0.5 * beta_reg_split(0.5 * df, 0.5, df / (df + x2), x2 / (df + x2))
}

/// Regularised incomplete beta function `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_split(a, b, x, 1.0 - x)
}

// `y` is `1 - x`, supplied by callers that can form it without rounding loss.
fn beta_reg_split(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * y.ln();
    let front = ln_front.exp();
    // the continued fraction converges fast for x < (a + 1) / (a + b + 2)
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn t_pdf(x: f64, df: f64) -> f64 {
    let ln_norm = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_norm - 0.5 * (df + 1.0) * (x * x / df).ln_1p()).exp()
}

/// Quantile function of Student's t distribution.
///
/// Accepts `0 < p < 1` and `df >= 1`.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    check_probability(p)?;
    check_df(df)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        Ok(upper_tail_point(1.0 - p, df))
    } else {
        Ok(-upper_tail_point(p, df))
    }
}

/// Inverse upper tail: the `x` with `P(T > x) = q`.
pub fn t_isf(q: f64, df: f64) -> Result<f64> {
    check_probability(q)?;
    check_df(df)?;
    if q == 0.5 {
        return Ok(0.0);
    }
    if q < 0.5 {
        Ok(upper_tail_point(q, df))
    } else {
        Ok(-upper_tail_point(1.0 - q, df))
    }
}

// Positive root of t_tail(x) = q for q in (0, 0.5).
fn upper_tail_point(q: f64, df: f64) -> f64 {
    let f = |x: f64| t_tail(x, df) - q;

    let mut lo = 0.0_f64;
    let mut hi = normal_quantile_unchecked(1.0 - q).max(1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }

    // rtsafe: Newton on the tail, falling back to bisection outside the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -t_pdf(x, df);
        let mut next = if slope != 0.0 { x - fx / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= QUANTILE_XTOL * x.abs().max(1.0) || hi - lo <= QUANTILE_XTOL * x.abs().max(1.0)
        {
            break;
        }
    }
    x
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "probability must lie in (0, 1), got {p}"
        )))
    }
}

fn check_df(df: f64) -> Result<()> {
    if df >= 1.0 && df.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "degrees of freedom must be >= 1, got {df}"
        )))
    }
}

/// A reproducible stream of standard normal deviates.
///
/// Streams are keyed by a 64-bit seed and a substream index. Distinct
/// substreams use distinct ChaCha stream identifiers, so they never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    substream: u64,
    position: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, substream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream);
        Self {
            seed,
            substream,
            position: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self) -> u64 {
        self.substream
    }

    /// Number of deviates drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_std_normal(&mut self) -> f64 {
        self.position += 1;
        self.rng.sample(StandardNormal)
    }

    /// Fills `out` with deviates, advancing the stream by `out.len()`.
    pub fn fill_std_normal(&mut self, out: &mut [f64]) {
        for z in out.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        self.position += out.len() as u64;
    }

    /// Uniform draw on `[0, 1)`; does not count towards `position`.
    pub(crate) fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Draws `count` i.i.d. standard normal deviates from `stream`.
pub fn draw_std_normal(stream: &mut RngStream, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    stream.fill_std_normal(&mut out);
    out
}
