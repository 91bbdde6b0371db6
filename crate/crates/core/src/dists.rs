//! Sampling and density kernels used by the Gibbs blocks.
//!
//! Parameterizations are fixed once, here: gammas are shape-rate, inverse
//! gammas are shape-scale, normals are mean-variance, betas are the usual
//! two-shape form. All helpers validate their parameters and surface
//! `Error::BadParameter` instead of producing NaNs downstream.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma as GammaDist, Normal as NormalDist};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape-rate gamma parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSR {
    pub shape: f64,
    pub rate: f64,
}

impl GammaSR {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::BadParameter(format!(
                "gamma requires positive finite shape and rate, got ({shape}, {rate})"
            )));
        }
        Ok(GammaSR { shape, rate })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn var(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

/// Shape-scale inverse gamma parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaSR {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaSR {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::BadParameter(format!(
                "inverse gamma requires positive finite shape and scale, got ({shape}, {scale})"
            )));
        }
        Ok(InvGammaSR { shape, scale })
    }
}

/// Density kinds served by [`log_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Normal { mean: f64, var: f64 },
    Gamma(GammaSR),
    InvGamma(InvGammaSR),
    Beta { alpha: f64, beta: f64 },
}

/// Log density of `kind` at `x`. Returns negative infinity outside the
/// support and `BadParameter` for illegal parameters.
pub fn log_density(kind: Density, x: f64) -> Result<f64> {
    match kind {
        Density::Normal { mean, var } => {
            check_normal(mean, var)?;
            let r = x - mean;
            Ok(-0.5 * ((2.0 * std::f64::consts::PI * var).ln() + r * r / var))
        }
        Density::Gamma(g) => {
            GammaSR::new(g.shape, g.rate)?;
            if x <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(g.shape * g.rate.ln() - ln_gamma(g.shape) + (g.shape - 1.0) * x.ln() - g.rate * x)
        }
        Density::InvGamma(ig) => {
            InvGammaSR::new(ig.shape, ig.scale)?;
            if x <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(ig.shape * ig.scale.ln()
                - ln_gamma(ig.shape)
                - (ig.shape + 1.0) * x.ln()
                - ig.scale / x)
        }
        Density::Beta { alpha, beta } => {
            if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
                return Err(Error::BadParameter(format!(
                    "beta requires positive finite shapes, got ({alpha}, {beta})"
                )));
            }
            if !(0.0..=1.0).contains(&x) {
                return Ok(f64::NEG_INFINITY);
            }
            let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
            Ok((alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln() - ln_b)
        }
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

fn check_normal(mean: f64, var: f64) -> Result<()> {
    if !(mean.is_finite() && var > 0.0 && var.is_finite()) {
        return Err(Error::BadParameter(format!(
            "normal requires finite mean and positive finite variance, got ({mean}, {var})"
        )));
    }
    Ok(())
}

/// Draw from N(mean, var).
pub fn sample_normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> Result<f64> {
    check_normal(mean, var)?;
    let dist = NormalDist::new(mean, var.sqrt())
        .map_err(|e| Error::BadParameter(format!("normal sampler: {e}")))?;
    Ok(dist.sample(rng))
}

/// Draw from Gamma(shape, rate). Underflow is floored at a subnormal-free
/// positive value so downstream reciprocals stay finite.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = GammaSR::new(shape, rate)?;
    let dist = GammaDist::new(g.shape, 1.0 / g.rate)
        .map_err(|e| Error::BadParameter(format!("gamma sampler: {e}")))?;
    let draw = dist.sample(rng);
    Ok(draw.max(1e-300))
}

/// Draw from InvGamma(shape, scale), i.e. the reciprocal of a
/// Gamma(shape, rate = scale) draw.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let ig = InvGammaSR::new(shape, scale)?;
    Ok(1.0 / sample_gamma(ig.shape, ig.scale, rng)?)
}

/// Draw from Beta(alpha, beta), nudged into the open interval so that callers
/// may take log(1 - v) without guards.
pub fn sample_beta<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(Error::BadParameter(format!(
            "beta requires positive finite shapes, got ({alpha}, {beta})"
        )));
    }
    let dist = BetaDist::new(alpha, beta)
        .map_err(|e| Error::BadParameter(format!("beta sampler: {e}")))?;
    let v: f64 = dist.sample(rng);
    Ok(v.clamp(1e-12, 1.0 - 1e-12))
}

/// Draw an index with probability proportional to `weights`. Weights must be
/// finite, non-negative, and not all zero.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::BadParameter("categorical weights are empty".into()));
    }
    let mut total = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::BadParameter(format!(
                "categorical weight {k} is {w}"
            )));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::BadParameter(
            "categorical weights sum to zero".into(),
        ));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(k);
        }
    }
    // Rounding can push the cumulative sum fractionally below `total`.
    Ok(weights.len() - 1)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::BadParameter(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    use statrs::distribution::ContinuousCDF;
    let std = statrs::distribution::Normal::standard();
    Ok(std.inverse_cdf(p))
}

/// Standardized bound beyond which the inverse-CDF route loses all precision
/// and the exponential-rejection tail sampler takes over.
const TRUNC_TAIL_CUT: f64 = 6.0;

/// Draw from N(mean, var) restricted to the interval (lo, hi]. Either bound
/// may be infinite. Far-tail intervals use exponential rejection instead of
/// the inverse CDF, which would otherwise underflow.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    var: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    check_normal(mean, var)?;
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::BadParameter(format!(
            "truncation interval ({lo}, {hi}] is empty or malformed"
        )));
    }
    let sd = var.sqrt();
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;

    let z = if a > TRUNC_TAIL_CUT {
        tail_standard_normal(a, b, rng)
    } else if b < -TRUNC_TAIL_CUT {
        -tail_standard_normal(-b, -a, rng)
    } else {
        let fa = if a.is_finite() { normal_cdf(a) } else { 0.0 };
        let fb = if b.is_finite() { normal_cdf(b) } else { 1.0 };
        let u: f64 = rng.random();
        let p = (fa + u * (fb - fa)).clamp(1e-300, 1.0 - 1e-16);
        normal_quantile(p)?
    };

    let mut x = mean + sd * z;
    // Rounding guards: keep the draw strictly inside (lo, hi].
    if x > hi {
        x = hi;
    }
    if x <= lo {
        x = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            lo + 1e-8 * sd
        };
    }
    Ok(x)
}

/// Standard normal conditioned on (a, b) with a >= TRUNC_TAIL_CUT, via the
/// shifted-exponential rejection proposal with the optimal rate.
fn tail_standard_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..100_000 {
        let e = -rng.random::<f64>().ln() / lambda;
        let x = a + e;
        if x >= b {
            continue;
        }
        let d = x - lambda;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return x;
        }
    }
    // Only reachable when (a, b) is so narrow the acceptance region has
    // essentially no mass; the midpoint is the honest degenerate answer.
    if b.is_finite() {
        0.5 * (a + b)
    } else {
        a
    }
}

/// Digamma function to better than 1e-10 over positive arguments: shift the
/// argument above 8 by the recurrence, then use the asymptotic series.
/// Nonpositive or non-finite arguments yield NaN.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0 && x.is_finite()) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 8.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - tail
}

/// Trigamma function to better than 1e-10 over positive arguments.
/// Nonpositive or non-finite arguments yield NaN.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0 && x.is_finite()) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    acc + series
}
