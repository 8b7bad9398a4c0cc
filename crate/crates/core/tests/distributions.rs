use proptest::prelude::*;
use ruinsim::distributions::{fgm_conditional_inverse, FgmPairSpec, Law, Moment, TailDistribution};
use ruinsim::mc::stream;
use ruinsim::stats::{ks_one_sample, Moments};

fn rv(alpha: f64, beta: f64, scale: f64) -> TailDistribution {
    TailDistribution::rv_star(alpha, beta, scale).unwrap()
}

fn balanced_loss() -> TailDistribution {
    TailDistribution::shifted(rv(2.0, 2.0, 1.0), -1.0).unwrap()
}

fn close(got: f64, want: f64, rel: f64) {
    assert!(
        (got - want).abs() <= rel * want.abs(),
        "got {got}, want {want} (rel tol {rel})"
    );
}

// Kolmogorov distance above which a correct sampler is rejected at 0.1%.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn rvstar_tail_at_e() {
    close(rv(2.0, 2.0, 1.0).tail(std::f64::consts::E), 0.033833820809153173, 1e-14);
}

#[test]
fn rvstar_tail_quantile() {
    close(rv(2.0, 2.0, 1.0).tail_quantile(1e-3).unwrap(), 9.672640527973697, 1e-10);
    close(rv(2.0, 2.0, 0.3).quantile(0.5).unwrap(), 0.35937120118730646, 1e-10);
}

#[test]
fn quantile_rejects_levels_outside_unit_interval() {
    let d = rv(2.0, 2.0, 1.0);
    for u in [0.0, 1.0, -0.1, f64::NAN] {
        assert!(d.quantile(u).is_err());
        assert!(d.tail_quantile(u).is_err());
    }
}

#[test]
fn rvstar_moments_in_closed_form() {
    close(rv(2.0, 2.0, 0.5).upper_moment(2.0).unwrap().value(), 0.75, 1e-12);
    close(rv(2.0, 2.0, 0.3).upper_moment(2.0).unwrap().value(), 0.27, 1e-12);
}

#[test]
fn shifted_loss_positive_moment() {
    let m = balanced_loss().upper_moment(2.0).unwrap().value();
    close(m, 1.1926947246463881, 1e-8);
}

#[test]
fn checked_moment_by_quadrature() {
    let m = rv(2.0, 2.0, 0.3).checked_upper_moment(2.0).unwrap().value();
    close(m, 0.4167188680531734, 1e-7);
}

#[test]
fn moments_beyond_the_index_diverge() {
    assert_eq!(rv(2.0, 2.0, 1.0).upper_moment(2.1).unwrap(), Moment::Infinite);
    assert_eq!(TailDistribution::pareto(2.0, 1.0).unwrap().upper_moment(2.0).unwrap(), Moment::Infinite);
    assert!(TailDistribution::lognormal(0.0, 1.0).unwrap().upper_moment(30.0).unwrap().finite().is_some());
}

#[test]
fn samplers_match_their_cdfs() {
    let laws = [
        rv(2.0, 2.0, 0.3),
        balanced_loss(),
        TailDistribution::pareto(1.5, 2.0).unwrap(),
        TailDistribution::lognormal(0.0, 0.5).unwrap(),
        TailDistribution::shifted(TailDistribution::lognormal(0.0, 1.0).unwrap(), -1.0).unwrap(),
    ];
    let n = 200_000;
    for (i, d) in laws.iter().enumerate() {
        let mut rng = stream(11, i as u64);
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let dist = ks_one_sample(&mut xs, |x| d.cdf(x));
        assert!(dist < ks_critical(n), "{:?}: KS {dist}", d.law());
    }
}

#[test]
fn checked_sampler_has_squared_cdf() {
    let d = rv(2.0, 2.0, 0.3);
    let n = 200_000;
    let mut rng = stream(12, 0);
    let mut xs: Vec<f64> = (0..n).map(|_| d.sample_checked(&mut rng)).collect();
    let dist = ks_one_sample(&mut xs, |x| d.cdf(x).powi(2));
    assert!(dist < ks_critical(n), "KS {dist}");
    for &x in &[0.5, 2.0, 40.0] {
        close(d.checked_tail(x), 1.0 - d.cdf(x).powi(2), 1e-9);
    }
}

#[test]
fn fgm_conditional_roots() {
    close(fgm_conditional_inverse(-1.0, 0.0, 0.5), 0.5f64.sqrt(), 1e-15);
    close(fgm_conditional_inverse(1.0, 0.0, 0.5), 1.0 - 0.5f64.sqrt(), 1e-15);
    close(fgm_conditional_inverse(0.0, 0.3, 0.42), 0.42, 1e-15);
}

#[test]
fn fgm_pair_marginals_and_rank_correlation() {
    let f = balanced_loss();
    let g = rv(2.0, 2.0, 0.3);
    let n = 200_000;
    for theta in [-0.8, 0.0, 0.5] {
        let pair = FgmPairSpec::new(theta, f.clone(), g.clone()).unwrap();
        let mut rng = stream(13, 0);
        let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut uv = Moments::default();
        for _ in 0..n {
            let (x, y) = pair.sample_fgm(&mut rng);
            uv.push(12.0 * f.cdf(x) * g.cdf(y) - 3.0);
            xs.push(x);
            ys.push(y);
        }
        assert!(ks_one_sample(&mut xs, |x| f.cdf(x)) < ks_critical(n));
        assert!(ks_one_sample(&mut ys, |y| g.cdf(y)) < ks_critical(n));
        // Spearman's rho of the FGM copula is theta / 3.
        let rho = uv.mean();
        assert!(
            (rho - theta / 3.0).abs() < 4.0 * uv.std_error(),
            "theta {theta}: rho {rho} +- {}",
            uv.std_error()
        );
    }
}

#[test]
fn fgm_rejects_bad_parameters() {
    let f = balanced_loss();
    let g = rv(2.0, 2.0, 0.3);
    assert!(FgmPairSpec::new(1.5, f.clone(), g.clone()).is_err());
    let signed = TailDistribution::shifted(TailDistribution::lognormal(0.0, 1.0).unwrap(), -1.0).unwrap();
    assert!(FgmPairSpec::new(0.5, f, signed).is_err());
}

#[test]
fn config_style_json_parses() {
    let d: TailDistribution = serde_json::from_str(r#"{"kind":"rvstar","alpha":2.0,"beta":2.0,"scale":0.5}"#).unwrap();
    assert_eq!(d, rv(2.0, 2.0, 0.5));
    let s: TailDistribution = serde_json::from_str(
        r#"{"kind":"shifted","inner":{"kind":"lognormal","mu":0.0,"sigma":1.0},"offset":-1.0}"#,
    )
    .unwrap();
    assert!(matches!(s.law(), Law::Shifted { offset, .. } if *offset == -1.0));
    assert!(serde_json::from_str::<TailDistribution>(r#"{"kind":"rvstar","alpha":2.0,"beta":0.5,"scale":1.0}"#).is_err());
    assert!(serde_json::from_str::<TailDistribution>(r#"{"kind":"gamma","shape":2.0}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tail_quantile_inverts_tail(alpha in 0.5f64..4.0, beta in 1.1f64..5.0, scale in 0.1f64..10.0, lq in -30.0f64..-0.01) {
        let d = rv(alpha, beta, scale);
        let q = lq.exp();
        let x = d.tail_quantile(q).unwrap();
        let back = d.tail(x);
        prop_assert!((back - q).abs() <= 1e-9 * q, "q {} back {}", q, back);
    }

    #[test]
    fn quantile_is_monotone(u in 1e-6f64..0.999, du in 1e-6f64..1e-3, sigma in 0.1f64..3.0) {
        let v = (u + du).min(1.0 - 1e-9);
        for d in [rv(2.0, 2.0, 1.0), TailDistribution::lognormal(0.0, sigma).unwrap(), TailDistribution::pareto(1.5, 1.0).unwrap()] {
            prop_assert!(d.quantile(u).unwrap() <= d.quantile(v).unwrap());
        }
    }

    #[test]
    fn tail_and_cdf_are_complementary(x in -5.0f64..1e6) {
        for d in [balanced_loss(), rv(3.0, 1.5, 0.2), TailDistribution::lognormal(0.1, 0.7).unwrap()] {
            let (t, c) = (d.tail(x), d.cdf(x));
            prop_assert!((0.0..=1.0).contains(&t));
            prop_assert!((t + c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fgm_inverse_solves_conditional_cdf(theta in -1.0f64..=1.0, u in 0.0f64..=1.0, w in 0.0f64..=1.0) {
        let v = fgm_conditional_inverse(theta, u, w);
        let k = theta * (1.0 - 2.0 * u);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v * (1.0 + k * (1.0 - v)) - w).abs() < 1e-12);
    }
}
