//! Dominance classification, the coefficients of the two-term tail
//! approximations `A F̄(x) + B Ḡ(x)` (ruin) and `A F̄(x) + C Ḡ(x)` (sum), and
//! their evaluation.

use serde::Serialize;

use crate::distributions::{FgmPairSpec, Law, TailDistribution};
use crate::error::{Error, Result};
use crate::mc::MonteCarlo;
use crate::model::{truncation_level, Dependence, Horizon, ModelSpec, PathWalker, Target};
use crate::stats::Moments;

const DOMAIN_SWEEP: u32 = 0x10;
const DOMAIN_INFINITE: u32 = 0x11;
const DOMAIN_FGM_SWEEP: u32 = 0x12;
const DOMAIN_FGM_INFINITE: u32 = 0x13;
const DOMAIN_CHECKED: u32 = 0x14;

/// Truncation tolerance used for infinite-horizon moments when the model
/// itself has a finite horizon.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceCase {
    /// The loss tail is the heavier one: `Ḡ = o(F̄)`.
    InsuranceDominant,
    /// The discount tail is the heavier one: `F̄ = o(Ḡ)`.
    FinanceDominant,
    /// Both tails of the same strongly regular order.
    Balanced,
    /// No certified case applies.
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioClass {
    pub case: DominanceCase,
    /// Index governing both tails; NaN when no heavy tail is present.
    pub effective_alpha: f64,
}

impl ScenarioClass {
    pub fn certified(&self) -> bool {
        self.case != DominanceCase::Violated
    }
}

// Tail shape of a catalog law after peeling off shifts.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Strong { alpha: f64, beta: f64 },
    Regular { alpha: f64 },
    Lognormal,
}

fn shape(d: &TailDistribution) -> Shape {
    match d.base().0.law() {
        Law::RvStar { alpha, beta, .. } => Shape::Strong {
            alpha: *alpha,
            beta: *beta,
        },
        Law::Pareto { alpha, .. } => Shape::Regular { alpha: *alpha },
        Law::Lognormal { .. } => Shape::Lognormal,
        Law::Shifted { .. } => unreachable!("base() removes shifts"),
    }
}

/// Decide which certified dominance case, if any, the pair `(F, G)` falls in.
///
/// Only catalog combinations with analytically known membership are
/// certified. A strongly regularly varying law beats any lighter tail
/// (larger index, lognormal). At equal index the log factor decides: the
/// smaller `beta` is the heavier tail, and equal `beta` gives tails of the
/// same order. A plain Pareto law is never strongly regularly varying, so
/// a configuration in which it is not strictly lighter is refused.
pub fn classify(f: &TailDistribution, g: &TailDistribution) -> ScenarioClass {
    use DominanceCase::*;
    let class = |case, effective_alpha| ScenarioClass {
        case,
        effective_alpha,
    };
    match (shape(f), shape(g)) {
        (Shape::Strong { alpha: af, beta: bf }, Shape::Strong { alpha: ag, beta: bg }) => {
            if af < ag || (af == ag && bf < bg) {
                class(InsuranceDominant, af)
            } else if ag < af || bg < bf {
                class(FinanceDominant, ag)
            } else {
                class(Balanced, af)
            }
        }
        (Shape::Strong { alpha: af, .. }, Shape::Lognormal) => class(InsuranceDominant, af),
        (Shape::Lognormal, Shape::Strong { alpha: ag, .. }) => class(FinanceDominant, ag),
        (Shape::Strong { alpha: af, .. }, Shape::Regular { alpha: ag }) if af < ag => {
            class(InsuranceDominant, af)
        }
        (Shape::Regular { alpha: af }, Shape::Strong { alpha: ag, .. }) if ag < af => {
            class(FinanceDominant, ag)
        }
        (Shape::Strong { alpha: a, .. }, _) | (_, Shape::Strong { alpha: a, .. }) => class(Violated, a),
        (Shape::Regular { alpha: af }, Shape::Regular { alpha: ag }) => class(Violated, af.min(ag)),
        (Shape::Regular { alpha: a }, Shape::Lognormal) | (Shape::Lognormal, Shape::Regular { alpha: a }) => {
            class(Violated, a)
        }
        (Shape::Lognormal, Shape::Lognormal) => class(Violated, f64::NAN),
    }
}

fn require_certified(f: &TailDistribution, g: &TailDistribution) -> Result<ScenarioClass> {
    let class = classify(f, g);
    if class.certified() {
        Ok(class)
    } else {
        Err(Error::Uncertified(format!(
            "F = {:?}, G = {:?}",
            f.law(),
            g.law()
        )))
    }
}

/// Coefficients of the two-term approximations at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientSet {
    pub alpha: f64,
    pub mu_alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(serialize_with = "serialize_horizon")]
    pub horizon: Horizon,
    pub se_b: f64,
    pub se_c: f64,
}

fn serialize_horizon<S: serde::Serializer>(h: &Horizon, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&h.label())
}

impl CoefficientSet {
    /// `(weight of F̄, weight of Ḡ)` for the given target.
    pub fn weights(&self, target: Target) -> (f64, f64) {
        match target {
            Target::Max => (self.a, self.b),
            Target::Sum => (self.a, self.c),
        }
    }

    /// Standard error of the `Ḡ` weight for the given target.
    pub fn weight_se(&self, target: Target) -> f64 {
        match target {
            Target::Max => self.se_b,
            Target::Sum => self.se_c,
        }
    }
}

/// `weight_f F̄(x) + weight_g Ḡ(x)`.
pub fn asymptotic_tail(weight_f: f64, weight_g: f64, f: &TailDistribution, g: &TailDistribution, x: f64) -> f64 {
    weight_f * f.tail(x) + weight_g * g.tail(x)
}

/// `Σ_{i=1}^n mu^i`.
pub fn geometric_a(mu: f64, n: usize) -> f64 {
    (1..=n).map(|i| mu.powi(i as i32)).sum()
}

fn finite_mu(spec: &ModelSpec) -> Result<f64> {
    let mu = spec.mu_alpha();
    if mu.is_finite() && mu > 0.0 {
        Ok(mu)
    } else {
        Err(Error::Precondition(format!(
            "E Y^alpha must be finite and positive, got {mu}"
        )))
    }
}

#[inline]
fn pow_plus(v: f64, alpha: f64) -> f64 {
    if v > 0.0 {
        v.powf(alpha)
    } else {
        0.0
    }
}

/// Coefficients for every horizon `1..=n_max` from one sweep of forward paths.
///
/// For each path the totals `Σ_k mu^(n-k-1) M_k^alpha` (and the same with
/// `S_{k,+}`) are updated by `b(n) = mu b(n-1) + M_n^alpha / mu`, so the
/// standard errors account for the correlation between prefixes.
pub fn coeff_sweep(spec: &ModelSpec, n_max: usize, mc: &MonteCarlo) -> Result<Vec<CoefficientSet>> {
    require_certified(spec.f(), spec.g())?;
    if n_max == 0 {
        return Err(Error::invalid("n", 0.0, "horizon must be at least 1"));
    }
    let mu = finite_mu(spec)?;
    let alpha = spec.alpha();
    let shards = mc.run(DOMAIN_SWEEP, |rng, paths| {
        let mut acc = vec![(Moments::default(), Moments::default()); n_max];
        for _ in 0..paths {
            let mut walk = PathWalker::new(spec);
            let (mut b, mut c) = (0.0, 0.0);
            for slot in acc.iter_mut() {
                let (s, m) = walk.step(rng);
                b = mu * b + pow_plus(m, alpha) / mu;
                c = mu * c + pow_plus(s, alpha) / mu;
                slot.0.push(b);
                slot.1.push(c);
            }
        }
        acc
    });
    let mut total = vec![(Moments::default(), Moments::default()); n_max];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.0.merge(&s.0);
            t.1.merge(&s.1);
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(i, (b, c))| CoefficientSet {
            alpha,
            mu_alpha: mu,
            a: geometric_a(mu, i + 1),
            b: b.mean(),
            c: c.mean(),
            horizon: Horizon::Finite(i + 1),
            se_b: b.std_error(),
            se_c: c.std_error(),
        })
        .collect())
}

/// `A_n`, `B_n`, `C_n` with `mc.samples` moment paths.
pub fn coeff_finite(spec: &ModelSpec, n: usize, mc: &MonteCarlo) -> Result<CoefficientSet> {
    let mut all = coeff_sweep(spec, n, mc)?;
    Ok(all.pop().expect("n ≥ 1"))
}

fn truncation_tol(spec: &ModelSpec) -> f64 {
    match spec.horizon() {
        Horizon::Infinite { truncation_tol } => truncation_tol,
        Horizon::Finite(_) => DEFAULT_TRUNCATION_TOL,
    }
}

/// `A_∞ = mu/(1-mu)` and `B_∞`, `C_∞` from truncated-infinite paths.
pub fn coeff_infinite(spec: &ModelSpec, mc: &MonteCarlo) -> Result<CoefficientSet> {
    require_certified(spec.f(), spec.g())?;
    let mu = finite_mu(spec)?;
    let tol = truncation_tol(spec);
    let n = truncation_level(mu, tol)?;
    let alpha = spec.alpha();
    let shards = mc.run(DOMAIN_INFINITE, |rng, paths| {
        let (mut bm, mut cm) = (Moments::default(), Moments::default());
        for _ in 0..paths {
            let p = spec.simulate_path(n, rng);
            bm.push(pow_plus(p.m, alpha));
            cm.push(pow_plus(p.s, alpha));
        }
        (bm, cm)
    });
    let (mut bm, mut cm) = (Moments::default(), Moments::default());
    for (b, c) in &shards {
        bm.merge(b);
        cm.merge(c);
    }
    let scale = 1.0 / (mu * (1.0 - mu));
    Ok(CoefficientSet {
        alpha,
        mu_alpha: mu,
        a: mu / (1.0 - mu),
        b: bm.mean() * scale,
        c: cm.mean() * scale,
        horizon: Horizon::Infinite { truncation_tol: tol },
        se_b: bm.std_error() * scale,
        se_c: cm.std_error() * scale,
    })
}

fn fgm_model(pair: &FgmPairSpec, alpha: f64, horizon: Horizon) -> Result<ModelSpec> {
    ModelSpec::new(
        pair.f().clone(),
        pair.g().clone(),
        Dependence::Fgm { theta: pair.theta() },
        horizon,
        alpha,
    )
}

fn checked_mu(pair: &FgmPairSpec, alpha: f64) -> Result<f64> {
    pair.g()
        .checked_upper_moment(alpha)?
        .finite()
        .ok_or_else(|| Error::Precondition("E of the checked discount factor diverges".to_string()))
}

/// FGM coefficients for every horizon `1..=n_max` from one sweep.
///
/// The mixed moments `E(M_{n-i} + X)_+^alpha` and `E(M_{n-i} + X̌)_+^alpha`
/// use one draw of `X` and one of `X̌` per path, independent of the path.
pub fn coeff_fgm_sweep(pair: &FgmPairSpec, alpha: f64, n_max: usize, mc: &MonteCarlo) -> Result<Vec<CoefficientSet>> {
    require_certified(pair.f(), pair.g())?;
    if n_max == 0 {
        return Err(Error::invalid("n", 0.0, "horizon must be at least 1"));
    }
    let spec = fgm_model(pair, alpha, Horizon::Finite(n_max))?;
    let mu = finite_mu(&spec)?;
    let theta = pair.theta();
    let mix = (1.0 - theta) * mu + theta * checked_mu(pair, alpha)?;
    let f = pair.f();
    let shards = mc.run(DOMAIN_FGM_SWEEP, |rng, paths| {
        let mut acc = vec![(Moments::default(), Moments::default()); n_max];
        for _ in 0..paths {
            let x = f.sample(rng);
            let xc = f.sample_checked(rng);
            let term = |v: f64| (1.0 - theta) * pow_plus(v + x, alpha) + theta * pow_plus(v + xc, alpha);
            let mut walk = PathWalker::new(&spec);
            let (mut s, mut m) = (0.0, 0.0);
            let (mut b, mut c) = (0.0, 0.0);
            for (k, slot) in acc.iter_mut().enumerate() {
                if k > 0 {
                    (s, m) = walk.step(rng);
                }
                b = mu * b + term(m);
                c = mu * c + term(s);
                slot.0.push(b);
                slot.1.push(c);
            }
        }
        acc
    });
    let mut total = vec![(Moments::default(), Moments::default()); n_max];
    for shard in &shards {
        for (t, s) in total.iter_mut().zip(shard) {
            t.0.merge(&s.0);
            t.1.merge(&s.1);
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(i, (b, c))| CoefficientSet {
            alpha,
            mu_alpha: mu,
            a: mix * geometric_a(mu, i + 1) / mu,
            b: b.mean(),
            c: c.mean(),
            horizon: Horizon::Finite(i + 1),
            se_b: b.std_error(),
            se_c: c.std_error(),
        })
        .collect())
}

pub fn coeff_fgm_finite(pair: &FgmPairSpec, alpha: f64, n: usize, mc: &MonteCarlo) -> Result<CoefficientSet> {
    let mut all = coeff_fgm_sweep(pair, alpha, n, mc)?;
    Ok(all.pop().expect("n ≥ 1"))
}

pub fn coeff_fgm_infinite(
    pair: &FgmPairSpec,
    alpha: f64,
    truncation_tol: f64,
    mc: &MonteCarlo,
) -> Result<CoefficientSet> {
    require_certified(pair.f(), pair.g())?;
    let spec = fgm_model(pair, alpha, Horizon::Infinite { truncation_tol })?;
    let mu = finite_mu(&spec)?;
    let n = truncation_level(mu, truncation_tol)?;
    let theta = pair.theta();
    let mix = (1.0 - theta) * mu + theta * checked_mu(pair, alpha)?;
    let f = pair.f();
    let shards = mc.run(DOMAIN_FGM_INFINITE, |rng, paths| {
        let (mut bm, mut cm) = (Moments::default(), Moments::default());
        for _ in 0..paths {
            let p = spec.simulate_path(n, rng);
            let x = f.sample(rng);
            let xc = f.sample_checked(rng);
            let term = |v: f64| (1.0 - theta) * pow_plus(v + x, alpha) + theta * pow_plus(v + xc, alpha);
            bm.push(term(p.m));
            cm.push(term(p.s));
        }
        (bm, cm)
    });
    let (mut bm, mut cm) = (Moments::default(), Moments::default());
    for (b, c) in &shards {
        bm.merge(b);
        cm.merge(c);
    }
    let scale = 1.0 / (1.0 - mu);
    Ok(CoefficientSet {
        alpha,
        mu_alpha: mu,
        a: mix * scale,
        b: bm.mean() * scale,
        c: cm.mean() * scale,
        horizon: Horizon::Infinite { truncation_tol },
        se_b: bm.std_error() * scale,
        se_c: cm.std_error() * scale,
    })
}

/// Monte Carlo mean of `max(Y1, Y2)^alpha` with its standard error; a
/// cross-check for the quadrature value of the checked moment.
pub fn checked_moment_mc(g: &TailDistribution, alpha: f64, mc: &MonteCarlo) -> (f64, f64) {
    let shards = mc.run(DOMAIN_CHECKED, |rng, paths| {
        let mut m = Moments::default();
        for _ in 0..paths {
            let y = g.sample(rng).max(g.sample(rng));
            m.push(pow_plus(y, alpha));
        }
        m
    });
    let mut m = Moments::default();
    shards.iter().for_each(|s| m.merge(s));
    (m.mean(), m.std_error())
}
