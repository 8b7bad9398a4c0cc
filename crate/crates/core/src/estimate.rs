//! Crude Monte Carlo tail estimates for `S_n` and `M_n`, the exact one-period
//! tail by quadrature, and ratio diagnostics against the asymptotic formulas.

use serde::Serialize;

use crate::asymptotics::{
    asymptotic_tail, coeff_fgm_finite, coeff_fgm_infinite, coeff_finite, coeff_infinite, CoefficientSet,
};
use crate::distributions::{FgmPairSpec, TailDistribution};
use crate::error::{Error, Result};
use crate::mc::MonteCarlo;
use crate::model::{Dependence, Horizon, ModelSpec, PathWalker, Target};
use crate::quadrature::Quadrature;
use crate::stats::{wilson_interval, wilson_zero_upper, GridCounter};

const DOMAIN_FORWARD: u32 = 0x30;
const DOMAIN_RECURSIVE: u32 = 0x31;

/// Fewest paths accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: u64 = 10_000;
/// Hit count below which Wilson intervals replace the normal approximation.
pub const WILSON_BELOW: u64 = 30;
const Z95: f64 = 1.96;
const Z95_ONE_SIDED: f64 = 1.645;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CrudeMc,
    Quadrature,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::CrudeMc => "crude_mc",
            Method::Quadrature => "quadrature",
        }
    }
}

/// Which sampler produces the paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// Forward partial sums and their running maximum.
    Forward,
    /// The backward recursions for `T_n` and `M_n`.
    Recursive,
}

/// One tail probability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub x: f64,
    pub target: Target,
    #[serde(skip)]
    pub horizon: Horizon,
    pub p_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub samples: u64,
    pub hits: u64,
    pub method: Method,
    /// No path exceeded `x`; `ci_hi` is a one-sided 95% bound.
    pub zero_hits: bool,
}

impl TailEstimate {
    pub fn from_hits(x: f64, target: Target, horizon: Horizon, hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        let (ci_lo, ci_hi) = if hits == 0 {
            (0.0, wilson_zero_upper(samples, Z95_ONE_SIDED))
        } else if hits < WILSON_BELOW {
            wilson_interval(hits, samples, Z95)
        } else {
            ((p - Z95 * se).max(0.0), (p + Z95 * se).min(1.0))
        };
        Self {
            x,
            target,
            horizon,
            p_hat: p,
            se,
            ci_lo,
            ci_hi,
            samples,
            hits,
            method: Method::CrudeMc,
            zero_hits: hits == 0,
        }
    }

    /// An exact value with no sampling error.
    pub fn exact(x: f64, target: Target, horizon: Horizon, p: f64) -> Self {
        Self {
            x,
            target,
            horizon,
            p_hat: p,
            se: 0.0,
            ci_lo: p,
            ci_hi: p,
            samples: 0,
            hits: 0,
            method: Method::Quadrature,
            zero_hits: false,
        }
    }
}

/// Estimates for both targets from one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSweep {
    pub sum: Vec<TailEstimate>,
    pub max: Vec<TailEstimate>,
}

impl TailSweep {
    pub fn get(&self, target: Target) -> &[TailEstimate] {
        match target {
            Target::Sum => &self.sum,
            Target::Max => &self.max,
        }
    }
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() {
        return Err(Error::Precondition("x grid is empty".to_string()));
    }
    if x_grid.iter().any(|x| !x.is_finite()) || x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Precondition(
            "x grid must be finite and sorted ascending".to_string(),
        ));
    }
    Ok(())
}

/// `Pr(S_n > x)` and `Pr(M_n > x)` at every grid point, counting each path
/// against the sorted grid once.
pub fn estimate_tails(spec: &ModelSpec, x_grid: &[f64], mc: &MonteCarlo, source: Source) -> Result<TailSweep> {
    check_grid(x_grid)?;
    if mc.samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            mc.samples
        )));
    }
    let n = spec.steps()?;
    let domain = match source {
        Source::Forward => DOMAIN_FORWARD,
        Source::Recursive => DOMAIN_RECURSIVE,
    };
    let shards = mc.run(domain, |rng, paths| {
        let mut cs = GridCounter::new(x_grid);
        let mut cm = GridCounter::new(x_grid);
        for _ in 0..paths {
            match source {
                Source::Forward => {
                    let p = spec.simulate_path(n, rng);
                    cs.record(p.s);
                    cm.record(p.m);
                }
                Source::Recursive => {
                    cs.record(spec.simulate_t(n, rng));
                    cm.record(spec.simulate_m_recursive(n, rng));
                }
            }
        }
        (cs, cm)
    });
    let mut cs = GridCounter::new(x_grid);
    let mut cm = GridCounter::new(x_grid);
    for (s, m) in &shards {
        cs.merge(s);
        cm.merge(m);
    }
    let horizon = spec.horizon();
    let build = |c: &GridCounter, target| {
        x_grid
            .iter()
            .zip(c.hits())
            .map(|(&x, h)| TailEstimate::from_hits(x, target, horizon, h, c.total()))
            .collect()
    };
    Ok(TailSweep {
        sum: build(&cs, Target::Sum),
        max: build(&cm, Target::Max),
    })
}

/// Forward estimates at several finite horizons from the prefixes of one set
/// of paths simulated to the largest horizon. Each horizon's estimate is an
/// ordinary crude Monte Carlo estimate; they are correlated with each other.
pub fn estimate_horizons(spec: &ModelSpec, horizons: &[usize], x_grid: &[f64], mc: &MonteCarlo) -> Result<Vec<TailSweep>> {
    check_grid(x_grid)?;
    if mc.samples < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            mc.samples
        )));
    }
    if horizons.is_empty() || horizons.contains(&0) || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition(
            "horizons must be positive and strictly increasing".to_string(),
        ));
    }
    let n_max = horizons[horizons.len() - 1];
    let shards = mc.run(DOMAIN_FORWARD, |rng, paths| {
        let mut counters = vec![(GridCounter::new(x_grid), GridCounter::new(x_grid)); horizons.len()];
        for _ in 0..paths {
            let mut walk = PathWalker::new(spec);
            let mut j = 0;
            for k in 1..=n_max {
                let (s, m) = walk.step(rng);
                if horizons[j] == k {
                    counters[j].0.record(s);
                    counters[j].1.record(m);
                    j += 1;
                }
            }
        }
        counters
    });
    let mut totals = vec![(GridCounter::new(x_grid), GridCounter::new(x_grid)); horizons.len()];
    for shard in &shards {
        for (t, s) in totals.iter_mut().zip(shard) {
            t.0.merge(&s.0);
            t.1.merge(&s.1);
        }
    }
    Ok(horizons
        .iter()
        .zip(&totals)
        .map(|(&n, (cs, cm))| {
            let build = |c: &GridCounter, target| {
                x_grid
                    .iter()
                    .zip(c.hits())
                    .map(|(&x, h)| TailEstimate::from_hits(x, target, Horizon::Finite(n), h, c.total()))
                    .collect()
            };
            TailSweep {
                sum: build(cs, Target::Sum),
                max: build(cm, Target::Max),
            }
        })
        .collect())
}

pub fn estimate_tail(spec: &ModelSpec, target: Target, x_grid: &[f64], mc: &MonteCarlo) -> Result<Vec<TailEstimate>> {
    let sweep = estimate_tails(spec, x_grid, mc, Source::Forward)?;
    Ok(match target {
        Target::Sum => sweep.sum,
        Target::Max => sweep.max,
    })
}

/// `Pr(X_+ Y > x)` for independent `X ~ f`, `Y ~ g`.
///
/// Integrates `F̄(x / y)` over the law of `Y` on the tail-level scale
/// `s = -ln Ḡ(y)`, which resolves the upper tail of `Y` evenly.
pub fn quadrature_tail_n1(f: &TailDistribution, g: &TailDistribution, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x = {x} must be positive")));
    }
    if g.support_lower() < 0.0 {
        return Err(Error::Precondition("discount factor must be nonnegative".to_string()));
    }
    let integrand = |s: f64| {
        let q = (-s).exp();
        if q == 0.0 {
            return 0.0;
        }
        let y = g.quantile_split(-(-s).exp_m1(), q);
        f.tail(x / y) * q
    };
    let mut breaks = vec![0.0];
    let lower = f.support_lower();
    if lower > 0.0 {
        let kink_tail = g.tail(x / lower);
        if kink_tail > 0.0 && kink_tail < 1.0 {
            breaks.push(-kink_tail.ln());
        }
    }
    breaks.push(f64::INFINITY);
    let q = Quadrature {
        abs_tol: 1e-300,
        rel_tol: 1e-10,
        max_intervals: 4000,
    };
    Ok(q.integrate_with_breaks(integrand, &breaks)?.value)
}

/// The `x` at which the one-period tail equals `level`.
pub fn invert_tail_n1(f: &TailDistribution, g: &TailDistribution, level: f64) -> Result<f64> {
    let top = f.tail(0.0);
    if !(level > 0.0 && level < top) {
        return Err(Error::Domain(format!(
            "tail level {level} outside (0, {top})"
        )));
    }
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while quadrature_tail_n1(f, g, lo)? < level {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Domain("tail level not reached".to_string()));
        }
    }
    while quadrature_tail_n1(f, g, hi)? >= level {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Domain("tail level not reached".to_string()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if quadrature_tail_n1(f, g, mid)? >= level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-10 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Log-spaced grid between the points where the one-period tail equals
/// `level_hi` and `level_lo` (e.g. `1e-1` and `1e-5`).
pub fn default_grid(
    f: &TailDistribution,
    g: &TailDistribution,
    points: usize,
    level_hi: f64,
    level_lo: f64,
) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::invalid("points", points as f64, "need at least two grid points"));
    }
    let a = invert_tail_n1(f, g, level_hi)?.ln();
    let b = invert_tail_n1(f, g, level_lo)?.ln();
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Monte Carlo (or exact) estimate set against its asymptotic value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioDiagnostic {
    pub x: f64,
    pub estimate: TailEstimate,
    pub asymptotic: f64,
    pub ratio: f64,
    pub ratio_ci: (f64, f64),
}

impl RatioDiagnostic {
    pub fn new(estimate: TailEstimate, asymptotic: f64) -> Self {
        Self {
            x: estimate.x,
            estimate,
            asymptotic,
            ratio: estimate.p_hat / asymptotic,
            ratio_ci: (estimate.ci_lo / asymptotic, estimate.ci_hi / asymptotic),
        }
    }
}

/// Divide each estimate by `A F̄(x) + (B or C) Ḡ(x)`.
pub fn join_ratios(
    estimates: &[TailEstimate],
    coeffs: &CoefficientSet,
    f: &TailDistribution,
    g: &TailDistribution,
) -> Vec<RatioDiagnostic> {
    estimates
        .iter()
        .map(|e| {
            let (wf, wg) = coeffs.weights(e.target);
            RatioDiagnostic::new(*e, asymptotic_tail(wf, wg, f, g, e.x))
        })
        .collect()
}

/// Coefficients matching the model's coupling and horizon.
pub fn coefficients_for(spec: &ModelSpec, moment_mc: &MonteCarlo) -> Result<CoefficientSet> {
    match (spec.dependence(), spec.horizon()) {
        (Dependence::Independent, Horizon::Finite(n)) => coeff_finite(spec, n, moment_mc),
        (Dependence::Independent, Horizon::Infinite { .. }) => coeff_infinite(spec, moment_mc),
        (Dependence::Fgm { theta }, horizon) => {
            let pair = FgmPairSpec::new(theta, spec.f().clone(), spec.g().clone())?;
            match horizon {
                Horizon::Finite(n) => coeff_fgm_finite(&pair, spec.alpha(), n, moment_mc),
                Horizon::Infinite { truncation_tol } => {
                    coeff_fgm_infinite(&pair, spec.alpha(), truncation_tol, moment_mc)
                }
            }
        }
    }
}

/// Monte Carlo estimates joined with the asymptotic approximation.
pub fn ratio_table(
    spec: &ModelSpec,
    target: Target,
    x_grid: &[f64],
    mc: &MonteCarlo,
    moment_mc: &MonteCarlo,
) -> Result<(CoefficientSet, Vec<RatioDiagnostic>)> {
    let coeffs = coefficients_for(spec, moment_mc)?;
    let estimates = estimate_tail(spec, target, x_grid, mc)?;
    Ok((coeffs, join_ratios(&estimates, &coeffs, spec.f(), spec.g())))
}

/// One-period ratios with no sampling error: the quadrature tail against
/// `E Y^alpha F̄(x) + E X_+^alpha Ḡ(x)`.
pub fn quadrature_ratio_n1(
    f: &TailDistribution,
    g: &TailDistribution,
    alpha: f64,
    x_grid: &[f64],
) -> Result<Vec<RatioDiagnostic>> {
    let mu = g
        .upper_moment(alpha)?
        .finite()
        .ok_or_else(|| Error::Precondition("E Y^alpha is infinite".to_string()))?;
    let ex = f
        .upper_moment(alpha)?
        .finite()
        .ok_or_else(|| Error::Precondition("E X_+^alpha is infinite".to_string()))?;
    x_grid
        .iter()
        .map(|&x| {
            let p = quadrature_tail_n1(f, g, x)?;
            let est = TailEstimate::exact(x, Target::Sum, Horizon::Finite(1), p);
            Ok(RatioDiagnostic::new(est, asymptotic_tail(mu, ex, f, g, x)))
        })
        .collect()
}
