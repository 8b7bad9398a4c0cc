//! Numerical checks of the tail expansions behind the asymptotic formulas:
//! products of regularly varying factors, sums of convolution-equivalent
//! log-transforms, the geometric bound on n-fold convolutions, the
//! negligibility of the remainder of the infinite sum, and Potter's bounds.

use serde::Serialize;

use crate::distributions::{Moment, TailDistribution};
use crate::error::{Error, Result};
use crate::mc::MonteCarlo;
use crate::model::{truncation_level, Horizon, ModelSpec, PathWalker};
use crate::quadrature::Quadrature;
use crate::stats::GridCounter;

const DOMAIN_PRODUCT: u32 = 0x20;
const DOMAIN_KESTEN: u32 = 0x21;
const DOMAIN_REMAINDER: u32 = 0x22;

/// The law of `ln ξ` given `ξ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTransformTail {
    source: TailDistribution,
    mass: f64,
}

impl LogTransformTail {
    pub fn new(source: TailDistribution) -> Result<Self> {
        let mass = source.tail(0.0);
        if mass <= 0.0 {
            return Err(Error::Precondition(
                "source has no mass on (0, inf)".to_string(),
            ));
        }
        Ok(Self { source, mass })
    }

    pub fn source(&self) -> &TailDistribution {
        &self.source
    }

    /// `Pr(ξ > 0)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Infimum of the support on the log scale (`-inf` if `ξ` reaches 0).
    pub fn lower(&self) -> f64 {
        let l = self.source.support_lower();
        if l > 0.0 {
            l.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `Pr(ln ξ > x | ξ > 0)`.
    pub fn v_tail(&self, x: f64) -> f64 {
        (self.source.log_tail_at_log(x).exp() / self.mass).min(1.0)
    }

    /// Density of `ln ξ` given `ξ > 0`.
    pub fn v_density(&self, x: f64) -> f64 {
        let e = x.exp();
        if e.is_infinite() {
            return 0.0;
        }
        e * self.source.density(e) / self.mass
    }

    /// Level `x` with `v_tail(x) = q`.
    pub fn v_tail_quantile(&self, q: f64) -> Result<f64> {
        Ok(self.source.tail_quantile(q * self.mass)?.ln())
    }
}

/// `∫ e^(alpha x) dV(x)`, i.e. `E[ξ^alpha | ξ > 0]`, by quadrature.
pub fn v_hat(t: &LogTransformTail, alpha: f64) -> Result<Moment> {
    if alpha == 0.0 {
        return Ok(Moment::Finite(1.0));
    }
    // The moment of the positive part carries the tail exponent check; redo
    // the integral itself by quadrature rather than through a closed form.
    if t.source.upper_moment(alpha)?.is_infinite() {
        return Ok(Moment::Infinite);
    }
    let m = t
        .source
        .moment_by_quadrature(alpha, |s| t.source.log_tail_at_log(s))?;
    Ok(Moment::Finite(m / t.mass))
}

fn finite_moment(m: Moment, what: &str) -> Result<f64> {
    m.finite()
        .ok_or_else(|| Error::Precondition(format!("{what} is infinite")))
}

/// `Σ_i (Π_{j≠i} E ξ_j^alpha) Ū_i(x)` for independent nonnegative factors.
pub fn product_tail_expansion(ds: &[TailDistribution], alpha: f64, x: f64) -> Result<f64> {
    let mut moments = Vec::with_capacity(ds.len());
    for d in ds {
        if d.support_lower() < 0.0 {
            return Err(Error::Precondition(
                "product factors must be nonnegative".to_string(),
            ));
        }
        moments.push(finite_moment(d.upper_moment(alpha)?, "a factor moment")?);
    }
    Ok(expansion(&moments, ds.iter().map(|d| d.tail(x))))
}

fn expansion<I: Iterator<Item = f64>>(moments: &[f64], tails: I) -> f64 {
    tails
        .enumerate()
        .map(|(i, t)| {
            let others: f64 = moments
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, m)| m)
                .product();
            others * t
        })
        .sum()
}

/// `Σ_i (Π_{j≠i} V̂_j(alpha)) V̄_i(x)` for independent log-scale summands.
pub fn sum_tail_expansion(vs: &[LogTransformTail], alpha: f64, x: f64) -> Result<f64> {
    let mut hats = Vec::with_capacity(vs.len());
    for v in vs {
        hats.push(finite_moment(v_hat(v, alpha)?, "V hat")?);
    }
    Ok(expansion(&hats, vs.iter().map(|v| v.v_tail(x))))
}

fn oracle_quadrature() -> Quadrature {
    Quadrature {
        abs_tol: 1e-300,
        rel_tol: 1e-10,
        max_intervals: 2000,
    }
}

// Pr(V_1 + V_2 > x): the piece where the second summand alone exceeds
// x - lower_1 is exact, the rest is an integral against its density.
fn convolve2(v1: &LogTransformTail, v2: &LogTransformTail, x: f64) -> Result<f64> {
    let (l1, l2) = (v1.lower(), v2.lower());
    if !(l1.is_finite() && l2.is_finite()) {
        return Err(Error::Precondition(
            "convolution oracle needs summands bounded below".to_string(),
        ));
    }
    let cut = x - l1;
    let exact = v2.v_tail(cut);
    if cut <= l2 {
        return Ok(exact);
    }
    let mid = 0.5 * (l2 + cut);
    let r = oracle_quadrature().integrate_with_breaks(
        |y| v1.v_tail(x - y) * v2.v_density(y),
        &[l2, mid, cut],
    )?;
    Ok(exact + r.value)
}

/// Tail of the sum of two or three independent log-scale summands by nested
/// adaptive quadrature.
pub fn convolve_tail_oracle(vs: &[LogTransformTail], x: f64) -> Result<f64> {
    match vs {
        [a, b] => convolve2(a, b, x),
        [a, b, c] => {
            let (la, lb, lc) = (a.lower(), b.lower(), c.lower());
            let cut = x - la - lb;
            let exact = c.v_tail(cut);
            if cut <= lc {
                return Ok(exact);
            }
            let inner_err = std::cell::RefCell::new(None);
            let integrand = |y: f64| match convolve2(a, b, x - y) {
                Ok(v) => v * c.v_density(y),
                Err(e) => {
                    inner_err.borrow_mut().get_or_insert(e);
                    0.0
                }
            };
            let r = oracle_quadrature().integrate_with_breaks(integrand, &[lc, 0.5 * (lc + cut), cut])?;
            if let Some(e) = inner_err.into_inner() {
                return Err(e);
            }
            Ok(exact + r.value)
        }
        _ => Err(Error::Precondition(
            "convolution oracle supports two or three summands".to_string(),
        )),
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub x: f64,
    pub observed: f64,
    pub predicted: f64,
    pub rel_err: f64,
    /// Whether this row enters `max_rel_err`.
    pub scored: bool,
}

/// Outcome of one numeric check; `pass` iff `max_rel_err ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub lemma_id: String,
    pub rows: Vec<ReportRow>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Extra verdict for checks with a shape requirement (monotonicity).
    pub monotone: Option<bool>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Scores `rows`; `pass` needs at least one scored row.
    pub fn new(lemma_id: &str, rows: Vec<ReportRow>, tolerance: f64) -> Self {
        let max_rel_err = rows
            .iter()
            .filter(|r| r.scored)
            .map(|r| r.rel_err)
            .fold(0.0, f64::max);
        let scored_any = rows.iter().any(|r| r.scored);
        Self {
            lemma_id: lemma_id.to_string(),
            rows,
            max_rel_err,
            tolerance,
            pass: scored_any && max_rel_err <= tolerance,
            monotone: None,
            notes: Vec::new(),
        }
    }

    /// Overall verdict including any shape requirement.
    pub fn passed(&self) -> bool {
        self.pass && self.monotone.unwrap_or(true)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn observed(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.observed).collect()
    }

    pub fn predicted(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.predicted).collect()
    }
}

fn rel(observed: f64, predicted: f64) -> f64 {
    ((observed - predicted) / predicted).abs()
}

/// Monte Carlo product tails against [`product_tail_expansion`].
pub fn verify_c2(
    ds: &[TailDistribution],
    alpha: f64,
    x_grid: &[f64],
    mc: &MonteCarlo,
    tolerance: f64,
) -> Result<VerificationReport> {
    let predicted: Vec<f64> = x_grid
        .iter()
        .map(|&x| product_tail_expansion(ds, alpha, x))
        .collect::<Result<_>>()?;
    let shards = mc.run(DOMAIN_PRODUCT, |rng, paths| {
        let mut c = GridCounter::new(x_grid);
        for _ in 0..paths {
            c.record(ds.iter().map(|d| d.sample(rng)).product());
        }
        c
    });
    let mut total = GridCounter::new(x_grid);
    shards.iter().for_each(|s| total.merge(s));
    let n = total.total() as f64;
    let rows = x_grid
        .iter()
        .zip(total.hits())
        .zip(&predicted)
        .map(|((&x, h), &p)| {
            let obs = h as f64 / n;
            ReportRow {
                label: format!("hits={h}"),
                x,
                observed: obs,
                predicted: p,
                rel_err: rel(obs, p),
                scored: h > 0,
            }
        })
        .collect();
    Ok(VerificationReport::new("c2", rows, tolerance))
}

/// Convolution oracle against [`sum_tail_expansion`] on a grid.
pub fn verify_l2(vs: &[LogTransformTail], alpha: f64, x_grid: &[f64], tolerance: f64) -> Result<VerificationReport> {
    let mut rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let obs = convolve_tail_oracle(vs, x)?;
        let p = sum_tail_expansion(vs, alpha, x)?;
        rows.push(ReportRow {
            label: format!("n={}", vs.len()),
            x,
            observed: obs,
            predicted: p,
            rel_err: rel(obs, p),
            scored: true,
        });
    }
    Ok(VerificationReport::new("l2", rows, tolerance))
}

/// n-fold convolution ratios `V̄^{n*}(x)/V̄(x)` against `n V̂(alpha)^(n-1)`
/// for `n = 2, 3` at the level where `V̄ = q`.
pub fn verify_pakes(source: &TailDistribution, alpha: f64, q: f64, tolerance: f64) -> Result<VerificationReport> {
    let v = LogTransformTail::new(source.clone())?;
    let hat = finite_moment(v_hat(&v, alpha)?, "V hat")?;
    let x = v.v_tail_quantile(q)?;
    let base = v.v_tail(x);
    let mut rows = Vec::new();
    for n in 2..=3usize {
        let copies = vec![v.clone(); n];
        let ratio = convolve_tail_oracle(&copies, x)? / base;
        let target = n as f64 * hat.powi(n as i32 - 1);
        rows.push(ReportRow {
            label: format!("n={n}"),
            x,
            observed: ratio,
            predicted: target,
            rel_err: rel(ratio, target),
            scored: true,
        });
    }
    Ok(VerificationReport::new("pakes", rows, tolerance))
}

/// Monte Carlo check that `Pr(Y_1 ⋯ Y_n > x)` stays within a geometric
/// envelope `K (mu + eps)^n Ḡ(x)`, with `mu = E Y^alpha`.
///
/// For each `n` the estimate `K̂(n)` is the largest ratio over the grid,
/// skipping cells without hits. The bound does not blow up when
/// `K̂(n_max) ≤ 1.1 K̂(n_max / 2)`; the scored row carries
/// `K̂(n_max)/K̂(n_max/2) - 1` against tolerance 0.1.
pub fn verify_kesten(
    g: &TailDistribution,
    alpha: f64,
    eps: f64,
    n_max: usize,
    x_grid: &[f64],
    mc: &MonteCarlo,
) -> Result<VerificationReport> {
    if g.support_lower() < 0.0 {
        return Err(Error::Precondition("discount factor must be nonnegative".to_string()));
    }
    if n_max < 2 {
        return Err(Error::invalid("n_max", n_max as f64, "must be at least 2"));
    }
    let mu = finite_moment(g.upper_moment(alpha)?, "E Y^alpha")?;
    let shards = mc.run(DOMAIN_KESTEN, |rng, paths| {
        let mut counters = vec![GridCounter::new(x_grid); n_max];
        for _ in 0..paths {
            let mut p = 1.0;
            for c in counters.iter_mut() {
                p *= g.sample(rng);
                c.record(p);
            }
        }
        counters
    });
    let mut totals = vec![GridCounter::new(x_grid); n_max];
    for shard in &shards {
        for (t, s) in totals.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    let mut rows = Vec::new();
    let mut k_hat = vec![f64::NAN; n_max];
    let mut skipped = 0usize;
    for (i, counter) in totals.iter().enumerate() {
        let n = i + 1;
        let envelope = (mu + eps).powi(n as i32);
        let samples = counter.total() as f64;
        for (&x, h) in x_grid.iter().zip(counter.hits()) {
            if h == 0 {
                skipped += 1;
                continue;
            }
            let ratio = h as f64 / samples / (envelope * g.tail(x));
            if !(k_hat[i] >= ratio) {
                k_hat[i] = ratio;
            }
        }
        rows.push(ReportRow {
            label: format!("K(n={n})"),
            x: f64::NAN,
            observed: k_hat[i],
            predicted: f64::NAN,
            rel_err: f64::NAN,
            scored: false,
        });
    }
    let half = n_max / 2;
    let growth = k_hat[n_max - 1] / k_hat[half - 1];
    rows.push(ReportRow {
        label: format!("K(n={n_max})/K(n={half})"),
        x: f64::NAN,
        observed: growth,
        predicted: 1.0,
        rel_err: if growth.is_finite() { (growth - 1.0).max(0.0) } else { f64::INFINITY },
        scored: true,
    });
    let mut report = VerificationReport::new("kesten", rows, 0.1);
    if skipped > 0 {
        report
            .notes
            .push(format!("{skipped} grid cells without hits were excluded"));
    }
    Ok(report)
}

/// Monte Carlo tails of the remainder `Σ_{i>n} X_i Π_{j≤i} Y_j`, relative to
/// `F̄(x) + Ḡ(x)`, for each `n` in `n_list`.
///
/// The infinite sum is truncated `N` periods past `n` with `N` the model's
/// truncation level. The scored rows are those at the largest `n`; the
/// `monotone` verdict requires the ratios to be nonincreasing in `n` within
/// two standard errors at every grid point.
pub fn verify_remainder(
    spec: &ModelSpec,
    n_list: &[usize],
    x_grid: &[f64],
    mc: &MonteCarlo,
    tolerance: f64,
) -> Result<VerificationReport> {
    let tol = match spec.horizon() {
        Horizon::Infinite { truncation_tol } => truncation_tol,
        Horizon::Finite(_) => crate::asymptotics::DEFAULT_TRUNCATION_TOL,
    };
    let tail_len = truncation_level(spec.mu_alpha(), tol)?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let Some(&n_top) = ns.last() else {
        return Err(Error::invalid("n_list", 0.0, "must not be empty"));
    };
    let horizon = n_top + tail_len;
    let shards = mc.run(DOMAIN_REMAINDER, |rng, paths| {
        let mut counters = vec![GridCounter::new(x_grid); ns.len()];
        let mut at = vec![0.0; ns.len()];
        for _ in 0..paths {
            let mut walk = PathWalker::new(spec);
            let mut j = 0;
            for k in 1..=horizon {
                let (s, _) = walk.step(rng);
                while j < ns.len() && ns[j] == k {
                    at[j] = s;
                    j += 1;
                }
            }
            let total = walk.s();
            for (c, &s_n) in counters.iter_mut().zip(&at) {
                c.record(total - s_n);
            }
        }
        counters
    });
    let mut totals = vec![GridCounter::new(x_grid); ns.len()];
    for shard in &shards {
        for (t, s) in totals.iter_mut().zip(shard) {
            t.merge(s);
        }
    }
    let scale: Vec<f64> = x_grid.iter().map(|&x| spec.f().tail(x) + spec.g().tail(x)).collect();
    let mut ratios = Vec::new();
    let mut rows = Vec::new();
    for (j, counter) in totals.iter().enumerate() {
        let samples = counter.total() as f64;
        let mut line = Vec::new();
        for ((&x, h), &u) in x_grid.iter().zip(counter.hits()).zip(&scale) {
            let p = h as f64 / samples;
            let se = (p * (1.0 - p) / samples).sqrt();
            let ratio = p / u;
            line.push((ratio, se / u));
            rows.push(ReportRow {
                label: format!("n={}", ns[j]),
                x,
                observed: ratio,
                predicted: 0.0,
                rel_err: ratio,
                scored: ns[j] == n_top,
            });
        }
        ratios.push(line);
    }
    let monotone = ratios.windows(2).all(|w| {
        w[0].iter()
            .zip(&w[1])
            .all(|(&(r0, s0), &(r1, s1))| r1 <= r0 + 2.0 * (s0 * s0 + s1 * s1).sqrt())
    });
    let mut report = VerificationReport::new("remainder", rows, tolerance);
    report.monotone = Some(monotone);
    report
        .notes
        .push(format!("truncated {tail_len} periods past n={n_top}"));
    Ok(report)
}

/// Search for the smallest grid point `x0` beyond which
/// `tail(x y)/tail(x)` stays inside Potter's envelope
/// `[(y^(-a-e) ∧ y^(-a+e))/b, b (y^(-a-e) ∨ y^(-a+e))]` for every grid pair
/// with `x ≥ x0` and `x y ≥ x0`.
///
/// On the log scale this is the same statement for `V̄(s + ln y)/V̄(s)`.
/// The report is scored on envelope violations at the returned `x0`, so it
/// passes iff such an `x0` exists on the grid.
pub fn verify_potter(
    d: &TailDistribution,
    alpha: f64,
    b: f64,
    eps: f64,
    x_grid: &[f64],
    ys: &[f64],
) -> Result<VerificationReport> {
    if b <= 1.0 || eps <= 0.0 {
        return Err(Error::Precondition("need b > 1 and eps > 0".to_string()));
    }
    let check = |x: f64, y: f64| -> (f64, f64, f64) {
        let ratio = d.tail(x * y) / d.tail(x);
        let lo = y.powf(-alpha - eps).min(y.powf(-alpha + eps)) / b;
        let hi = y.powf(-alpha - eps).max(y.powf(-alpha + eps)) * b;
        let violation = if ratio < lo {
            (lo - ratio) / lo
        } else if ratio > hi {
            (ratio - hi) / hi
        } else {
            0.0
        };
        (ratio, if ratio < lo { lo } else { hi }, violation)
    };
    let rows_at = |x0: f64| -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for &x in x_grid.iter().filter(|&&x| x >= x0) {
            for &y in ys {
                if x * y < x0 || x * y > *x_grid.last().unwrap_or(&x) {
                    continue;
                }
                let (ratio, bound, violation) = check(x, y);
                rows.push(ReportRow {
                    label: format!("y={y}"),
                    x,
                    observed: ratio,
                    predicted: bound,
                    rel_err: violation,
                    scored: true,
                });
            }
        }
        rows
    };
    let mut grid = x_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for &x0 in &grid {
        let rows = rows_at(x0);
        if !rows.is_empty() && rows.iter().all(|r| r.rel_err == 0.0) {
            let mut report = VerificationReport::new("potter", rows, 0.0);
            report.notes.push(format!("x0 = {x0}"));
            return Ok(report);
        }
    }
    let last = *grid.last().unwrap_or(&f64::NAN);
    let mut report = VerificationReport::new("potter", rows_at(last), 0.0);
    report.notes.push("no x0 found on the grid".to_string());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_transform_of_rvstar_has_closed_tail() {
        let v = LogTransformTail::new(TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap()).unwrap();
        for &x in &[0.0f64, 0.5, 3.0, 40.0] {
            let want = (-2.0 * x).exp() * (1.0 + x).powi(-2);
            assert!((v.v_tail(x) - want).abs() <= 1e-15 * want.max(1e-300) * 10.0);
        }
    }

    #[test]
    fn v_hat_zero_is_one() {
        let v = LogTransformTail::new(TailDistribution::pareto(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(v_hat(&v, 0.0).unwrap(), Moment::Finite(1.0));
        assert!(v_hat(&v, 2.0).unwrap().is_infinite());
    }

    #[test]
    fn convolution_of_exponentials_is_gamma() {
        // ln of Pareto(1, 1) is Exp(1); the sum of two has tail (1 + x) e^-x.
        let v = LogTransformTail::new(TailDistribution::pareto(1.0, 1.0).unwrap()).unwrap();
        for &x in &[0.5, 2.0, 10.0, 30.0] {
            let got = convolve_tail_oracle(&[v.clone(), v.clone()], x).unwrap();
            let want = (1.0 + x) * (-x as f64).exp();
            assert!((got / want - 1.0).abs() < 1e-8, "x={x}: {got} vs {want}");
            let got3 = convolve_tail_oracle(&[v.clone(), v.clone(), v.clone()], x).unwrap();
            let want3 = (1.0 + x + 0.5 * x * x) * (-x as f64).exp();
            assert!((got3 / want3 - 1.0).abs() < 1e-7, "x={x}: {got3} vs {want3}");
        }
    }

    #[test]
    fn oracle_below_supports_is_one() {
        let v = LogTransformTail::new(TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap()).unwrap();
        assert_eq!(convolve_tail_oracle(&[v.clone(), v], -1.0).unwrap(), 1.0);
    }
}
