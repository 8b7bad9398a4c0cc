use proptest::prelude::*;
use ruinsim::distributions::TailDistribution;
use ruinsim::mc::stream;
use ruinsim::model::{truncation_level, Dependence, Horizon, ModelSpec, PathWalker};
use ruinsim::stats::ks_two_sample;

fn spec(dependence: Dependence, horizon: Horizon) -> ModelSpec {
    let f = TailDistribution::shifted(TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap(), -1.0).unwrap();
    let g = TailDistribution::rv_star(2.0, 2.0, 0.3).unwrap();
    ModelSpec::new(f, g, dependence, horizon, 2.0).unwrap()
}

fn ks_two_critical(n: usize) -> f64 {
    1.95 * (2.0 / n as f64).sqrt()
}

#[test]
fn truncation_levels_follow_the_formula() {
    assert_eq!(truncation_level(0.27, 1e-6).unwrap(), 10);
    assert_eq!(truncation_level(0.75, 1e-6).unwrap(), 52);
    for (mu, tol) in [(0.27, 1e-6), (0.75, 1e-6), (0.5, 1e-3)] {
        let n = truncation_level(mu, tol).unwrap() as i32;
        assert!(mu.powi(n + 1) / (1.0 - mu) <= tol);
        assert!(mu.powi(n) / (1.0 - mu) > tol);
    }
}

#[test]
fn infinite_horizon_runs_to_the_truncation_level() {
    let s = spec(Dependence::Independent, Horizon::Infinite { truncation_tol: 1e-6 });
    assert_eq!(s.steps().unwrap(), 10);
    let p = s.simulate_truncated_infinite(&mut stream(1, 0)).unwrap();
    assert_eq!(p.n_used, 10);
    let finite = spec(Dependence::Independent, Horizon::Finite(3));
    assert!(finite.simulate_truncated_infinite(&mut stream(1, 0)).is_err());
}

#[test]
fn rejects_invalid_models() {
    let f = TailDistribution::rv_star(2.0, 2.0, 1.0).unwrap();
    let signed = TailDistribution::shifted(f.clone(), -2.0).unwrap();
    assert!(ModelSpec::new(f.clone(), signed, Dependence::Independent, Horizon::Finite(1), 2.0).is_err());
    assert!(ModelSpec::new(f.clone(), f.clone(), Dependence::Independent, Horizon::Finite(0), 2.0).is_err());
    assert!(ModelSpec::new(f.clone(), f.clone(), Dependence::Fgm { theta: 2.0 }, Horizon::Finite(1), 2.0).is_err());
    assert!(ModelSpec::new(f.clone(), f, Dependence::Independent, Horizon::Finite(1), -1.0).is_err());
}

#[test]
fn forward_sum_and_backward_recursion_agree_in_law() {
    let n_draws = 200_000;
    for dependence in [Dependence::Independent, Dependence::Fgm { theta: 0.5 }] {
        let s = spec(dependence, Horizon::Finite(3));
        let (mut a, mut b) = (stream(21, 0), stream(21, 1));
        let mut fwd_s = Vec::with_capacity(n_draws);
        let mut fwd_m = Vec::with_capacity(n_draws);
        let mut t = Vec::with_capacity(n_draws);
        let mut m = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let p = s.simulate_path(3, &mut a);
            fwd_s.push(p.s);
            fwd_m.push(p.m);
            t.push(s.simulate_t(3, &mut b));
            m.push(s.simulate_m_recursive(3, &mut b));
        }
        let d_sum = ks_two_sample(&mut fwd_s, &mut t);
        let d_max = ks_two_sample(&mut fwd_m, &mut m);
        assert!(d_sum < ks_two_critical(n_draws), "{dependence:?}: S vs T KS {d_sum}");
        assert!(d_max < ks_two_critical(n_draws), "{dependence:?}: M forward vs recursive KS {d_max}");
    }
}

#[test]
fn walker_exposes_every_prefix() {
    let s = spec(Dependence::Independent, Horizon::Finite(6));
    let mut a = stream(4, 4);
    let mut b = stream(4, 4);
    let mut walk = PathWalker::new(&s);
    let mut last = (0.0, 0.0);
    for _ in 0..6 {
        last = walk.step(&mut a);
    }
    let p = s.simulate_path(6, &mut b);
    assert_eq!(walk.steps_taken(), 6);
    assert_eq!(last, (p.s, p.m));
}

#[test]
fn model_json_round_trip() {
    let h: Horizon = serde_json::from_str(r#"{"infinite":{"truncation_tol":1e-6}}"#).unwrap();
    assert_eq!(h, Horizon::Infinite { truncation_tol: 1e-6 });
    let h: Horizon = serde_json::from_str(r#"{"finite":5}"#).unwrap();
    assert_eq!(h, Horizon::Finite(5));
    let d: Dependence = serde_json::from_str(r#"{"type":"fgm","theta":-0.25}"#).unwrap();
    assert_eq!(d, Dependence::Fgm { theta: -0.25 });
    assert!(serde_json::from_str::<Dependence>(r#"{"type":"gumbel","theta":1.0}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn running_max_dominates(seed in any::<u64>(), n in 1usize..20, theta in -1.0f64..=1.0) {
        let s = spec(Dependence::Fgm { theta }, Horizon::Finite(n));
        let mut rng = stream(seed, 0);
        for _ in 0..200 {
            let p = s.simulate_path(n, &mut rng);
            prop_assert!(p.m >= 0.0 && p.m >= p.s);
            prop_assert!(s.simulate_m_recursive(n, &mut rng) >= 0.0);
        }
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), n in 1usize..30) {
        let s = spec(Dependence::Independent, Horizon::Finite(n));
        let a = s.simulate_path(n, &mut stream(seed, 7));
        let b = s.simulate_path(n, &mut stream(seed, 7));
        prop_assert_eq!(a, b);
    }
}
