//! Path simulation of the discounted aggregate loss `S_n`, its running
//! maximum `M_n`, and the backward recursions used as cross-checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{FgmPairSpec, TailDistribution};
use crate::error::{Error, Result};

/// How the loss `X_i` and discount factor `Y_i` of one period are coupled.
/// Different periods are always independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Dependence {
    #[default]
    Independent,
    Fgm {
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Horizon {
    Finite(usize),
    /// Simulated to the truncation level for `truncation_tol`.
    Infinite { truncation_tol: f64 },
}

impl Horizon {
    pub fn label(&self) -> String {
        match self {
            Horizon::Finite(n) => n.to_string(),
            Horizon::Infinite { .. } => "inf".to_string(),
        }
    }
}

/// Which functional of the path a tail probability refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// `S_n`, the discounted aggregate loss.
    Sum,
    /// `M_n`, its running maximum (the ruin functional).
    Max,
}

impl Target {
    pub fn label(&self) -> &'static str {
        match self {
            Target::Sum => "S",
            Target::Max => "M",
        }
    }
}

/// One simulated path at its final horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub m: f64,
    pub n_used: usize,
}

/// Horizon `N` with `mu^(N+1) / (1 - mu) ≤ tol`, at least 1.
pub fn truncation_level(mu_alpha: f64, tol: f64) -> Result<usize> {
    if !(mu_alpha > 0.0 && mu_alpha < 1.0) {
        return Err(Error::Precondition(
            "infinite horizon requires mu_alpha < 1".to_string(),
        ));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("truncation_tol", tol, "must lie in (0, 1)"));
    }
    let n = ((tol * (1.0 - mu_alpha) / mu_alpha).ln() / mu_alpha.ln()).ceil();
    Ok(n.max(1.0) as usize)
}

/// Experiment model: loss law, discount law, coupling and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    f: TailDistribution,
    g: TailDistribution,
    dependence: Dependence,
    horizon: Horizon,
    alpha: f64,
    mu_alpha: f64,
    pair: Option<FgmPairSpec>,
}

impl ModelSpec {
    pub fn new(
        f: TailDistribution,
        g: TailDistribution,
        dependence: Dependence,
        horizon: Horizon,
        alpha: f64,
    ) -> Result<Self> {
        if g.support_lower() < 0.0 {
            return Err(Error::invalid(
                "g.support_lower",
                g.support_lower(),
                "discount factor must be nonnegative",
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", alpha, "must be positive"));
        }
        match horizon {
            Horizon::Finite(0) => return Err(Error::invalid("n", 0.0, "horizon must be at least 1")),
            Horizon::Infinite { truncation_tol } if !(truncation_tol > 0.0 && truncation_tol < 1.0) => {
                return Err(Error::invalid("truncation_tol", truncation_tol, "must lie in (0, 1)"))
            }
            _ => {}
        }
        let mu_alpha = g.upper_moment(alpha)?.value();
        if matches!(horizon, Horizon::Infinite { .. }) && !(mu_alpha < 1.0) {
            return Err(Error::Precondition(
                "infinite horizon requires mu_alpha < 1".to_string(),
            ));
        }
        let pair = match dependence {
            Dependence::Independent => None,
            Dependence::Fgm { theta } => Some(FgmPairSpec::new(theta, f.clone(), g.clone())?),
        };
        Ok(Self {
            f,
            g,
            dependence,
            horizon,
            alpha,
            mu_alpha,
            pair,
        })
    }

    pub fn f(&self) -> &TailDistribution {
        &self.f
    }

    pub fn g(&self) -> &TailDistribution {
        &self.g
    }

    pub fn dependence(&self) -> Dependence {
        self.dependence
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `E Y^alpha`; `+inf` when the moment diverges.
    pub fn mu_alpha(&self) -> f64 {
        self.mu_alpha
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        Self::new(self.f.clone(), self.g.clone(), self.dependence, horizon, self.alpha)
    }

    pub fn with_dependence(&self, dependence: Dependence) -> Result<Self> {
        Self::new(self.f.clone(), self.g.clone(), dependence, self.horizon, self.alpha)
    }

    /// Number of periods actually simulated for the configured horizon.
    pub fn steps(&self) -> Result<usize> {
        match self.horizon {
            Horizon::Finite(n) => Ok(n),
            Horizon::Infinite { truncation_tol } => truncation_level(self.mu_alpha, truncation_tol),
        }
    }

    /// One period's `(X, Y)`.
    #[inline]
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match &self.pair {
            None => {
                let x = self.f.sample(rng);
                (x, self.g.sample(rng))
            }
            Some(p) => p.sample_fgm(rng),
        }
    }

    /// Forward evaluation of one path to horizon `n`.
    pub fn simulate_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PathSample {
        let mut walk = PathWalker::new(self);
        for _ in 0..n {
            walk.step(rng);
        }
        PathSample {
            s: walk.s(),
            m: walk.m(),
            n_used: n,
        }
    }

    /// `T_n` from `T_k = (X_k + T_{k-1}) Y_k`, `T_0 = 0`.
    pub fn simulate_t<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> f64 {
        let mut t = 0.0;
        for _ in 0..n {
            let (x, y) = self.draw_pair(rng);
            t = (x + t) * y;
        }
        t
    }

    /// A draw of `M_n` from `M_k = (X_k + M_{k-1})_+ Y_k`, `M_0 = 0`.
    pub fn simulate_m_recursive<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> f64 {
        let mut m: f64 = 0.0;
        for _ in 0..n {
            let (x, y) = self.draw_pair(rng);
            m = (x + m).max(0.0) * y;
        }
        m
    }

    /// A path simulated to the truncation level standing in for `(S_∞, M_∞)`.
    pub fn simulate_truncated_infinite<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathSample> {
        let tol = match self.horizon {
            Horizon::Infinite { truncation_tol } => truncation_tol,
            Horizon::Finite(_) => {
                return Err(Error::Precondition(
                    "model horizon is finite; no truncation tolerance".to_string(),
                ))
            }
        };
        let n = truncation_level(self.mu_alpha, tol)?;
        Ok(self.simulate_path(n, rng))
    }
}

/// Walks a single forward path one period at a time, exposing every prefix
/// `(S_k, M_k)`.
///
/// The running discount `Π Y_j` is multiplied directly until some factor
/// leaves `[1e-6, 1e6]`; from then on it is carried as a logarithm.
#[derive(Debug, Clone)]
pub struct PathWalker<'a> {
    spec: &'a ModelSpec,
    discount: f64,
    log_discount: f64,
    in_logs: bool,
    s: f64,
    m: f64,
    k: usize,
}

impl<'a> PathWalker<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        Self {
            spec,
            discount: 1.0,
            log_discount: 0.0,
            in_logs: false,
            s: 0.0,
            m: 0.0,
            k: 0,
        }
    }

    /// Advance one period and return `(S_k, M_k)`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (f64, f64) {
        let (x, y) = self.spec.draw_pair(rng);
        if !self.in_logs && !(1e-6..=1e6).contains(&y) {
            self.in_logs = true;
            self.log_discount = self.discount.ln();
        }
        let term = if self.in_logs {
            self.log_discount += y.ln();
            x * self.log_discount.exp()
        } else {
            self.discount *= y;
            x * self.discount
        };
        self.s += term;
        self.m = self.m.max(self.s);
        self.k += 1;
        (self.s, self.m)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn steps_taken(&self) -> usize {
        self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream;

    fn balanced() -> ModelSpec {
        let f = TailDistribution::shifted(TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap(), -1.0).unwrap();
        let g = TailDistribution::rv_star(2.0, 2.0, 0.3).unwrap();
        ModelSpec::new(f, g, Dependence::Independent, Horizon::Finite(5), 2.0).unwrap()
    }

    #[test]
    fn truncation_levels() {
        assert_eq!(truncation_level(0.27, 1e-6).unwrap(), 10);
        assert_eq!(truncation_level(0.75, 1e-6).unwrap(), 52);
        assert!(truncation_level(1.0, 1e-6).is_err());
    }

    #[test]
    fn one_step_path_is_the_product() {
        let spec = balanced();
        let mut a = stream(5, 0);
        let mut b = stream(5, 0);
        let p = spec.simulate_path(1, &mut a);
        let (x, y) = spec.draw_pair(&mut b);
        assert_eq!(p.s, x * y);
        assert_eq!(p.m, (x * y).max(0.0));
    }

    #[test]
    fn maximum_dominates_sum_and_zero() {
        let spec = balanced();
        let mut rng = stream(1, 2);
        for _ in 0..10_000 {
            let p = spec.simulate_path(7, &mut rng);
            assert!(p.m >= 0.0 && p.m >= p.s);
            assert!(spec.simulate_m_recursive(3, &mut rng) >= 0.0);
        }
    }

    #[test]
    fn log_discount_matches_direct_product() {
        let f = TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap();
        let g = TailDistribution::lognormal(0.0, 8.0).unwrap();
        let spec = ModelSpec::new(f, g, Dependence::Independent, Horizon::Finite(4), 2.0).unwrap();
        let mut a = stream(9, 1);
        let mut b = stream(9, 1);
        for _ in 0..1000 {
            let p = spec.simulate_path(4, &mut a);
            let mut disc = 1.0;
            let mut s = 0.0;
            for _ in 0..4 {
                let (x, y) = spec.draw_pair(&mut b);
                disc *= y;
                s += x * disc;
            }
            assert!((p.s - s).abs() <= 1e-9 * s.abs().max(1e-300), "{} vs {}", p.s, s);
        }
    }

    #[test]
    fn infinite_horizon_needs_contraction() {
        let f = TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap();
        let g = TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap();
        let err = ModelSpec::new(f, g, Dependence::Independent, Horizon::Infinite { truncation_tol: 1e-6 }, 2.0)
            .unwrap_err();
        assert!(err.to_string().contains("infinite horizon requires mu_alpha < 1"));
    }
}
