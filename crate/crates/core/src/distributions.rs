//! Heavy- and light-tailed laws: tails, quantiles, inverse-transform
//! sampling, power moments of the positive part, and the FGM pair sampler.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::mc::open01;
use crate::quadrature::Quadrature;

/// Parameters of a catalog law, as written in experiment configs, e.g.
/// `{"kind":"rvstar","alpha":2.0,"beta":2.0,"scale":0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Law {
    /// Log-damped Pareto: tail `(x/s)^-alpha (1 + ln(x/s))^-beta` above `s`.
    RvStar { alpha: f64, beta: f64, scale: f64 },
    Pareto { alpha: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    /// The law of `inner + offset`.
    Shifted {
        inner: Box<TailDistribution>,
        offset: f64,
    },
}

/// A validated [`Law`]. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Law", into = "Law")]
pub struct TailDistribution(Law);

/// `E[ξ_+^a]`, which may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }

    /// The value, or `+inf` for a divergent moment.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl TryFrom<Law> for TailDistribution {
    type Error = Error;

    fn try_from(law: Law) -> Result<Self> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, v, "must be positive and finite"))
            }
        }
        match &law {
            Law::RvStar { alpha, beta, scale } => {
                positive("alpha", *alpha)?;
                positive("scale", *scale)?;
                if !(beta.is_finite() && *beta > 1.0) {
                    return Err(Error::invalid("beta", *beta, "must exceed 1"));
                }
            }
            Law::Pareto { alpha, scale } => {
                positive("alpha", *alpha)?;
                positive("scale", *scale)?;
            }
            Law::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu", *mu, "must be finite"));
                }
                positive("sigma", *sigma)?;
            }
            Law::Shifted { offset, .. } => {
                if !offset.is_finite() {
                    return Err(Error::invalid("offset", *offset, "must be finite"));
                }
            }
        }
        Ok(TailDistribution(law))
    }
}

impl From<TailDistribution> for Law {
    fn from(d: TailDistribution) -> Law {
        d.0
    }
}

fn check_level(name: &str, u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {u} must lie in (0, 1)")))
    }
}

/// Solve `alpha t + beta ln(1+t) = e` for `t ≥ 0` to absolute accuracy 1e-12.
///
/// The start is the root with `ln(1+t)` replaced by its Padé lower bound
/// `2t/(2+t)`, an upper bound on the solution. The left side is concave with
/// `|h''| / (2h') < 1/2`, so a Newton step of size `d` leaves an error below
/// `d^2 / 2`; iteration stops once `|d| ≤ 1e-6`. Steps that leave the running
/// bracket `[0, e/alpha]` fall back to bisection.
fn rvstar_log_quantile(alpha: f64, beta: f64, e: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = e / alpha;
    let b = alpha + beta - 0.5 * e;
    let pade = 2.0 * e / (b + (b * b + 2.0 * alpha * e).sqrt());
    let mut t = if pade.is_finite() { pade.min(hi) } else { 0.5 * hi };
    for _ in 0..200 {
        let v = alpha * t + beta * t.ln_1p() - e;
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = v / (alpha + beta / (1.0 + t));
        let next = t - step;
        if step.abs() <= 1e-6 && next >= lo && next <= hi {
            return next;
        }
        t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-12 {
            return t;
        }
    }
    t
}

impl TailDistribution {
    pub fn rv_star(alpha: f64, beta: f64, scale: f64) -> Result<Self> {
        Law::RvStar { alpha, beta, scale }.try_into()
    }

    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        Law::Pareto { alpha, scale }.try_into()
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Law::Lognormal { mu, sigma }.try_into()
    }

    pub fn shifted(inner: TailDistribution, offset: f64) -> Result<Self> {
        Law::Shifted {
            inner: Box::new(inner),
            offset,
        }
        .try_into()
    }

    pub fn law(&self) -> &Law {
        &self.0
    }

    /// The law with any shifts peeled off, and the accumulated offset.
    pub fn base(&self) -> (&TailDistribution, f64) {
        match &self.0 {
            Law::Shifted { inner, offset } => {
                let (b, o) = inner.base();
                (b, o + offset)
            }
            _ => (self, 0.0),
        }
    }

    /// Infimum of the support.
    pub fn support_lower(&self) -> f64 {
        match &self.0 {
            Law::RvStar { scale, .. } | Law::Pareto { scale, .. } => *scale,
            Law::Lognormal { .. } => 0.0,
            Law::Shifted { inner, offset } => inner.support_lower() + offset,
        }
    }

    /// `Pr(ξ > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        match &self.0 {
            Law::RvStar { alpha, beta, scale } => {
                if x <= *scale {
                    return 1.0;
                }
                let t = (x / scale).ln();
                (-alpha * t - beta * t.ln_1p()).exp()
            }
            Law::Pareto { alpha, scale } => {
                if x <= *scale {
                    1.0
                } else {
                    (x / scale).powf(-alpha)
                }
            }
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - mu) / (sigma * SQRT_2))
                }
            }
            Law::Shifted { inner, offset } => inner.tail(x - offset),
        }
    }

    /// `Pr(ξ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.tail(x)
    }

    /// Lebesgue density; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        match &self.0 {
            Law::RvStar { alpha, beta, scale } => {
                if x <= *scale {
                    return 0.0;
                }
                let t = (x / scale).ln();
                self.tail(x) * (alpha + beta / (1.0 + t)) / x
            }
            Law::Pareto { alpha, scale } => {
                if x <= *scale {
                    0.0
                } else {
                    alpha / x * (x / scale).powf(-alpha)
                }
            }
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * PI).sqrt())
            }
            Law::Shifted { inner, offset } => inner.density(x - offset),
        }
    }

    /// Quantile at CDF level `u` with tail level `q = 1 - u`, each passed at
    /// full precision; no range check.
    pub(crate) fn quantile_split(&self, u: f64, q: f64) -> f64 {
        match &self.0 {
            Law::RvStar { alpha, beta, scale } => {
                let e = if q < 0.5 { -q.ln() } else { -(-u).ln_1p() };
                scale * rvstar_log_quantile(*alpha, *beta, e).exp()
            }
            Law::Pareto { alpha, scale } => {
                let e = if q < 0.5 { -q.ln() } else { -(-u).ln_1p() };
                scale * (e / alpha).exp()
            }
            Law::Lognormal { mu, sigma } => {
                if u < 0.5 {
                    (mu - SQRT_2 * sigma * erfc_inv(2.0 * u)).exp()
                } else {
                    (mu + SQRT_2 * sigma * erfc_inv(2.0 * q)).exp()
                }
            }
            Law::Shifted { inner, offset } => inner.quantile_split(u, q) + offset,
        }
    }

    /// Generalized inverse of the CDF at `u ∈ (0,1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        check_level("u", u)?;
        Ok(self.quantile_split(u, 1.0 - u))
    }

    /// The point whose tail probability is `q ∈ (0,1)`; accurate for tiny `q`.
    pub fn tail_quantile(&self, q: f64) -> Result<f64> {
        check_level("q", q)?;
        Ok(self.quantile_split(1.0 - q, q))
    }

    /// Quantile of the checked variable, the maximum of two independent
    /// copies (CDF squared).
    pub fn checked_quantile(&self, u: f64) -> Result<f64> {
        check_level("u", u)?;
        self.quantile(u.sqrt())
    }

    /// Tail of the checked variable: `1 - (1 - tail)^2`.
    pub fn checked_tail(&self, x: f64) -> f64 {
        let t = self.tail(x);
        t * (2.0 - t)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng);
        self.quantile_split(u, 1.0 - u)
    }

    pub fn sample_checked<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng).sqrt();
        self.quantile_split(u, 1.0 - u)
    }

    /// Whether `E[ξ_+^a]` diverges, decided from the family's tail index.
    fn moment_diverges(&self, a: f64) -> bool {
        match &self.0 {
            Law::RvStar { alpha, .. } => a > *alpha,
            Law::Pareto { alpha, .. } => a >= *alpha,
            Law::Lognormal { .. } => false,
            Law::Shifted { inner, .. } => inner.moment_diverges(a),
        }
    }

    /// `E[ξ_+^a]` for `a ≥ 0`, with the convention `0^0 = 0` so that `a = 0`
    /// gives `Pr(ξ > 0)`.
    pub fn upper_moment(&self, a: f64) -> Result<Moment> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("alpha", a, "must be finite and nonnegative"));
        }
        if a == 0.0 {
            return Ok(Moment::Finite(self.tail(0.0)));
        }
        if self.moment_diverges(a) {
            return Ok(Moment::Infinite);
        }
        let closed = match &self.0 {
            Law::RvStar { alpha, beta, scale } if a == *alpha => {
                Some(scale.powf(a) * (1.0 + a / (beta - 1.0)))
            }
            Law::Pareto { alpha, scale } => Some(scale.powf(a) * alpha / (alpha - a)),
            Law::Lognormal { mu, sigma } => Some((a * mu + 0.5 * a * a * sigma * sigma).exp()),
            _ => None,
        };
        match closed {
            Some(v) => Ok(Moment::Finite(v)),
            None => self
                .moment_by_quadrature(a, |s| self.log_tail_at_log(s))
                .map(Moment::Finite),
        }
    }

    /// `E[ξ̌_+^a]` for the checked variable.
    pub fn checked_upper_moment(&self, a: f64) -> Result<Moment> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("alpha", a, "must be finite and nonnegative"));
        }
        if a == 0.0 {
            return Ok(Moment::Finite(self.checked_tail(0.0)));
        }
        if self.moment_diverges(a) {
            return Ok(Moment::Infinite);
        }
        self.moment_by_quadrature(a, |s| {
            let lt = self.log_tail_at_log(s);
            lt + (2.0 - lt.exp()).ln()
        })
        .map(Moment::Finite)
    }

    /// `ln Pr(ξ > e^s)`, evaluated without forming `e^s` when it would
    /// overflow.
    pub fn log_tail_at_log(&self, s: f64) -> f64 {
        match &self.0 {
            Law::RvStar { alpha, beta, scale } => {
                let t = s - scale.ln();
                if t <= 0.0 {
                    0.0
                } else {
                    -alpha * t - beta * t.ln_1p()
                }
            }
            Law::Pareto { alpha, scale } => {
                let t = s - scale.ln();
                if t <= 0.0 {
                    0.0
                } else {
                    -alpha * t
                }
            }
            Law::Lognormal { mu, sigma } => {
                let z = (s - mu) / (sigma * SQRT_2);
                if z < 26.0 {
                    (0.5 * erfc(z)).ln()
                } else {
                    // Leading terms of the asymptotic series of erfc.
                    -z * z - (2.0 * z * PI.sqrt()).ln() + (-0.5 / (z * z)).ln_1p()
                }
            }
            Law::Shifted { inner, offset } => {
                if s < 700.0 {
                    let y = s.exp() - offset;
                    if y <= 0.0 {
                        inner.tail(y).ln()
                    } else {
                        inner.log_tail_at_log(y.ln())
                    }
                } else {
                    inner.log_tail_at_log(s + (-offset * (-s).exp()).ln_1p())
                }
            }
        }
    }

    /// `L^a + a ∫_L^∞ x^(a-1) tail(x) dx` with `L = max(support_lower, 0)`,
    /// integrated over `s = ln x` given `log_tail(s) = ln tail(e^s)`.
    pub(crate) fn moment_by_quadrature<T: Fn(f64) -> f64>(&self, a: f64, log_tail: T) -> Result<f64> {
        let lower = self.support_lower().max(0.0);
        let mass = if lower > 0.0 { lower.powf(a) } else { 0.0 };
        let start = if lower > 0.0 { lower.ln() } else { f64::NEG_INFINITY };
        let integrand = |s: f64| {
            let e = a * s + log_tail(s);
            if e == f64::NEG_INFINITY {
                0.0
            } else {
                a * e.exp()
            }
        };
        let q = Quadrature::with_tolerances(1e-13, 1e-10);
        let r = if start.is_finite() {
            q.integrate(integrand, start, f64::INFINITY)?
        } else {
            // Split at the median so the two tail maps stay well scaled.
            let median = self.quantile_split(0.5, 0.5);
            let pivot = if median > 0.0 { median.ln() } else { 0.0 };
            q.integrate_with_breaks(integrand, &[f64::NEG_INFINITY, pivot, f64::INFINITY])?
        };
        Ok(mass + r.value)
    }
}

/// Conditional-CDF inversion for the FGM copula: the `v` solving
/// `v (1 + k (1 - v)) = w` with `k = theta (1 - 2u)`.
pub fn fgm_conditional_inverse(theta: f64, u: f64, w: f64) -> f64 {
    let k = theta * (1.0 - 2.0 * u);
    let b = 1.0 + k;
    2.0 * w / (b + (b * b - 4.0 * k * w).max(0.0).sqrt())
}

/// A pair `(X, Y)` with marginals `f`, `g` joined by an FGM copula.
#[derive(Debug, Clone, PartialEq)]
pub struct FgmPairSpec {
    theta: f64,
    f: TailDistribution,
    g: TailDistribution,
}

impl FgmPairSpec {
    pub fn new(theta: f64, f: TailDistribution, g: TailDistribution) -> Result<Self> {
        if !(-1.0..=1.0).contains(&theta) {
            return Err(Error::invalid("theta", theta, "must lie in [-1, 1]"));
        }
        if g.support_lower() < 0.0 {
            return Err(Error::invalid(
                "g.support_lower",
                g.support_lower(),
                "discount factor must be nonnegative",
            ));
        }
        Ok(Self { theta, f, g })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn f(&self) -> &TailDistribution {
        &self.f
    }

    pub fn g(&self) -> &TailDistribution {
        &self.g
    }

    pub fn sample_fgm<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u = open01(rng);
        let w = open01(rng);
        let v = fgm_conditional_inverse(self.theta, u, w).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        (self.f.quantile_split(u, 1.0 - u), self.g.quantile_split(v, 1.0 - v))
    }
}
