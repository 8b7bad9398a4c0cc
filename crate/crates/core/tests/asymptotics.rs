use ruinsim::asymptotics::{
    asymptotic_tail, checked_moment_mc, classify, coeff_fgm_finite, coeff_fgm_infinite, coeff_fgm_sweep,
    coeff_finite, coeff_infinite, coeff_sweep, geometric_a, CoefficientSet, DominanceCase,
};
use ruinsim::distributions::{FgmPairSpec, TailDistribution};
use ruinsim::mc::MonteCarlo;
use ruinsim::model::{Dependence, Horizon, ModelSpec};

fn rv(alpha: f64, beta: f64, scale: f64) -> TailDistribution {
    TailDistribution::rv_star(alpha, beta, scale).unwrap()
}

fn balanced_loss() -> TailDistribution {
    TailDistribution::shifted(rv(2.0, 2.0, 1.0), -1.0).unwrap()
}

// Moments of order 0.9 have finite variance for index-2 laws, so their Monte
// Carlo standard errors mean what they say.
const LOW_ORDER: f64 = 0.9;

fn model(g_scale: f64, alpha: f64, horizon: Horizon) -> ModelSpec {
    ModelSpec::new(balanced_loss(), rv(2.0, 2.0, g_scale), Dependence::Independent, horizon, alpha).unwrap()
}

fn within(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * (se_a * se_a + se_b * se_b).sqrt()
}

#[test]
fn classification_table() {
    let ln = TailDistribution::lognormal(0.0, 0.5).unwrap();
    let c = classify(&rv(2.0, 2.0, 1.0), &ln);
    assert_eq!((c.case, c.effective_alpha), (DominanceCase::InsuranceDominant, 2.0));
    let c = classify(&rv(2.0, 2.0, 1.0), &rv(2.0, 2.0, 0.5));
    assert_eq!((c.case, c.effective_alpha), (DominanceCase::Balanced, 2.0));
    let c = classify(&rv(3.0, 2.0, 1.0), &rv(2.0, 2.0, 0.5));
    assert_eq!((c.case, c.effective_alpha), (DominanceCase::FinanceDominant, 2.0));
    let c = classify(&TailDistribution::shifted(ln.clone(), -1.0).unwrap(), &rv(2.0, 2.0, 0.5));
    assert_eq!(c.case, DominanceCase::FinanceDominant);
    assert_eq!(classify(&balanced_loss(), &rv(2.0, 2.0, 0.3)).case, DominanceCase::Balanced);
    let pareto = TailDistribution::pareto(2.0, 1.0).unwrap();
    assert_eq!(classify(&pareto, &rv(2.0, 2.0, 0.5)).case, DominanceCase::Violated);
    assert_eq!(classify(&TailDistribution::pareto(3.0, 1.0).unwrap(), &rv(2.0, 2.0, 0.5)).case, DominanceCase::FinanceDominant);
    assert_eq!(classify(&ln, &ln).case, DominanceCase::Violated);
    assert!(!classify(&pareto, &ln).certified());
}

#[test]
fn uncertified_models_are_refused() {
    let pareto = TailDistribution::pareto(2.0, 1.0).unwrap();
    let spec = ModelSpec::new(pareto, rv(2.0, 2.0, 0.3), Dependence::Independent, Horizon::Finite(2), 2.0).unwrap();
    let err = coeff_finite(&spec, 2, &MonteCarlo::new(10_000, 1)).unwrap_err();
    assert!(err.to_string().contains("assumption 2.1 not certified for this configuration"), "{err}");
}

#[test]
fn geometric_coefficients() {
    assert!((geometric_a(0.27, 2) - 0.3429).abs() < 1e-15);
    let mc = MonteCarlo::new(20_000, 3);
    let inf = coeff_infinite(&model(0.3, 2.0, Horizon::Finite(1)), &mc).unwrap();
    assert!((inf.a - 0.369863013698630137).abs() < 1e-15);
    let inf = coeff_infinite(&model(0.5, 2.0, Horizon::Finite(1)), &mc).unwrap();
    assert!((inf.a - 3.0).abs() < 1e-12);
    let mu: f64 = 0.27;
    let a_inf = mu / (1.0 - mu);
    for n in 1..=30 {
        let gap = a_inf - geometric_a(mu, n);
        assert!((gap - mu.powi(n as i32 + 1) / (1.0 - mu)).abs() < 1e-15, "n = {n}");
    }
}

#[test]
fn one_period_coefficients() {
    let spec = model(0.3, LOW_ORDER, Horizon::Finite(1));
    let c = coeff_finite(&spec, 1, &MonteCarlo::new(400_000, 8)).unwrap();
    assert_eq!(c.b, c.c);
    assert_eq!(c.se_b, c.se_c);
    assert!((c.a - spec.mu_alpha()).abs() < 1e-15);
    let exact = balanced_loss().upper_moment(LOW_ORDER).unwrap().value();
    assert!(within(c.b, c.se_b, exact, 0.0, 3.0), "B_1 {} +- {} vs {exact}", c.b, c.se_b);
}

fn assert_shape(sweep: &[CoefficientSet]) {
    for c in sweep {
        assert!(c.a >= 0.0 && c.b >= 0.0 && c.c >= 0.0);
        assert!(c.c <= c.b + 1e-12, "C {} > B {} at {:?}", c.c, c.b, c.horizon);
    }
    for w in sweep.windows(2) {
        assert!(w[1].a > w[0].a);
        assert!(w[1].b >= w[0].b - 3.0 * w[1].se_b);
        assert!(w[1].c >= w[0].c - 3.0 * w[1].se_c);
    }
}

#[test]
fn sweep_is_ordered_and_matches_single_horizons() {
    let spec = model(0.3, LOW_ORDER, Horizon::Finite(5));
    let mc = MonteCarlo::new(100_000, 5);
    let sweep = coeff_sweep(&spec, 5, &mc).unwrap();
    assert_eq!(sweep.len(), 5);
    assert_shape(&sweep);
    assert_eq!(sweep[4], coeff_finite(&spec, 5, &mc).unwrap());
    let alpha2 = coeff_sweep(&model(0.3, 2.0, Horizon::Finite(5)), 5, &mc).unwrap();
    assert_shape(&alpha2);
}

#[test]
fn second_horizon_matches_an_oversampled_run() {
    let spec = model(0.3, LOW_ORDER, Horizon::Finite(2));
    let small = coeff_finite(&spec, 2, &MonteCarlo::new(100_000, 31)).unwrap();
    let big = coeff_finite(&spec, 2, &MonteCarlo::new(1_000_000, 32)).unwrap();
    assert!(within(small.b, small.se_b, big.b, big.se_b, 3.0), "{small:?} vs {big:?}");
    assert!(within(small.c, small.se_c, big.c, big.se_c, 3.0), "{small:?} vs {big:?}");
}

#[test]
fn infinite_horizon_bounds_the_finite_sweep() {
    for scale in [0.3, 0.5] {
        let spec = model(scale, LOW_ORDER, Horizon::Infinite { truncation_tol: 1e-6 });
        let mc = MonteCarlo::new(100_000, 40);
        let inf = coeff_infinite(&spec, &mc).unwrap();
        let sweep = coeff_sweep(&spec, 30, &mc.with_seed(41)).unwrap();
        for c in &sweep {
            assert!(inf.b >= c.b - 3.0 * (inf.se_b.powi(2) + c.se_b.powi(2)).sqrt());
            assert!(inf.c >= c.c - 3.0 * (inf.se_c.powi(2) + c.se_c.powi(2)).sqrt());
        }
        let last = sweep.last().unwrap();
        assert!(within(inf.b, inf.se_b, last.b, last.se_b, 3.0), "scale {scale}: {inf:?} vs {last:?}");
        assert!(within(inf.c, inf.se_c, last.c, last.se_c, 3.0), "scale {scale}: {inf:?} vs {last:?}");
    }
}

#[test]
fn checked_moment_quadrature_matches_sampling() {
    let g = rv(2.0, 2.0, 0.3);
    let exact = g.checked_upper_moment(LOW_ORDER).unwrap().value();
    let (mean, se) = checked_moment_mc(&g, LOW_ORDER, &MonteCarlo::new(1_000_000, 50));
    assert!(within(mean, se, exact, 0.0, 3.0), "{mean} +- {se} vs {exact}");
}

#[test]
fn fgm_at_zero_theta_reduces_to_independence() {
    let spec = model(0.3, LOW_ORDER, Horizon::Finite(3));
    let pair = FgmPairSpec::new(0.0, spec.f().clone(), spec.g().clone()).unwrap();
    let mc = MonteCarlo::new(200_000, 60);
    let fgm = coeff_fgm_finite(&pair, LOW_ORDER, 3, &mc).unwrap();
    let ind = coeff_finite(&spec, 3, &mc.with_seed(61)).unwrap();
    assert!((fgm.a - ind.a).abs() < 1e-14);
    assert!(within(fgm.b, fgm.se_b, ind.b, ind.se_b, 3.0), "{fgm:?} vs {ind:?}");
    assert!(within(fgm.c, fgm.se_c, ind.c, ind.se_c, 3.0), "{fgm:?} vs {ind:?}");

    let inf_spec = model(0.3, LOW_ORDER, Horizon::Infinite { truncation_tol: 1e-6 });
    let fgm = coeff_fgm_infinite(&pair, LOW_ORDER, 1e-6, &mc).unwrap();
    let ind = coeff_infinite(&inf_spec, &mc.with_seed(62)).unwrap();
    assert!((fgm.a - ind.a).abs() < 1e-14);
    assert!(within(fgm.b, fgm.se_b, ind.b, ind.se_b, 3.0), "{fgm:?} vs {ind:?}");
}

#[test]
fn fgm_first_horizon_unrolls() {
    let theta = 0.5;
    let f = balanced_loss();
    let g = rv(2.0, 2.0, 0.3);
    let pair = FgmPairSpec::new(theta, f.clone(), g.clone()).unwrap();
    let sweep = coeff_fgm_sweep(&pair, LOW_ORDER, 4, &MonteCarlo::new(400_000, 70)).unwrap();
    let c = &sweep[0];
    let want = (1.0 - theta) * f.upper_moment(LOW_ORDER).unwrap().value()
        + theta * f.checked_upper_moment(LOW_ORDER).unwrap().value();
    assert!(within(c.b, c.se_b, want, 0.0, 3.0), "B'_1 {} +- {} vs {want}", c.b, c.se_b);
    assert_eq!(c.b, c.c);
    let mu = g.upper_moment(LOW_ORDER).unwrap().value();
    let mix = (1.0 - theta) * mu + theta * g.checked_upper_moment(LOW_ORDER).unwrap().value();
    for (i, c) in sweep.iter().enumerate() {
        let geometric: f64 = (0..=i).map(|j| mu.powi(j as i32)).sum();
        assert!((c.a - mix * geometric).abs() < 1e-12 * c.a);
    }
    assert_shape(&sweep);
}

#[test]
fn asymptotic_tail_edge_cases() {
    let f = balanced_loss();
    let g = rv(2.0, 2.0, 0.3);
    assert_eq!(asymptotic_tail(0.0, 1.0, &f, &g, 7.0), g.tail(7.0));
    assert_eq!(asymptotic_tail(0.4, 1.5, &f, &g, -1.0), 1.9);
    let x = 50.0;
    let v = asymptotic_tail(0.27, 1.1926947246463881, &f, &g, x);
    assert!((v - (0.27 * f.tail(x) + 1.1926947246463881 * g.tail(x))).abs() < 1e-20);
}
