use htd_core::analysis::{
    decreasing_ratio, inflection_fraction, ratio_r, sup_difference, RatioQuery,
};
use htd_core::optimizer::{sgd_step, OptimizerConfig, ParameterVector, VelocityState};
use htd_core::schedule::ScheduleSpec;
use proptest::prelude::*;

fn htd_spec() -> impl Strategy<Value = ScheduleSpec> {
    (
        -10.0..0.0f64,
        0.05..10.0f64,
        0.0..0.05f64,
        0.06..1.0f64,
        1u32..1000,
    )
        .prop_map(|(l, u, lo, hi, t)| ScheduleSpec::htd(l, u, lo, hi, t).unwrap())
}

proptest! {
    #[test]
    fn htd_strictly_decreasing_within_range(spec in htd_spec()) {
        let t_max = spec.horizon().unwrap();
        let (lo, hi) = spec.rate_range().unwrap();
        let c = spec.curve(t_max).unwrap();
        for w in c.samples.windows(2) {
            prop_assert!(w[1].lr < w[0].lr, "{:?}", w);
        }
        for p in &c.samples {
            prop_assert!(p.lr >= lo && p.lr <= hi);
        }
    }

    #[test]
    fn cosine_monotone_bounded_exact_ends(lo in 0.0..0.05f64, hi in 0.06..1.0f64, t in 1u32..1000) {
        let spec = ScheduleSpec::cosine(lo, hi, t).unwrap();
        let c = spec.curve(t).unwrap();
        prop_assert_eq!(c.samples[0].lr, hi);
        prop_assert_eq!(c.samples[t as usize].lr, lo);
        for w in c.samples.windows(2) {
            prop_assert!(w[1].lr < w[0].lr);
        }
        prop_assert!(c.rates().all(|r| r >= lo && r <= hi));
    }

    #[test]
    fn htd_symmetric_midpoint(u in 0.01..20.0f64, lo in 0.0..0.05f64, hi in 0.06..1.0f64, half in 1u32..500) {
        let t = 2 * half;
        let v = ScheduleSpec::htd(-u, u, lo, hi, t).unwrap().evaluate(half, t).unwrap();
        let mid = (lo + hi) / 2.0;
        prop_assert!((v - mid).abs() <= f64::EPSILON * mid);
    }

    #[test]
    fn exponential_recurrence(lr0 in 1e-4..1.0f64, lambda in 0.5..0.9999f64, t in 0u32..999) {
        let s = ScheduleSpec::exponential(lr0, lambda).unwrap();
        let a = s.evaluate(t, 1000).unwrap();
        let b = s.evaluate(t + 1, 1000).unwrap();
        prop_assert!((b - lambda * a).abs() <= 1e-12 * b);
        prop_assert!(b < a);
    }

    #[test]
    fn two_stage_continuous(lr0 in 1e-3..1.0f64, l1 in 0.9..1.0f64, l2 in 0.5..1.0f64, switch in 1u32..300) {
        let s = ScheduleSpec::two_stage(lr0, l1, l2, switch).unwrap();
        let first = lr0 * l1.powf(switch as f64);
        let second = lr0 * l1.powf(switch as f64) * l2.powf(0.0);
        let at = s.evaluate(switch, 400).unwrap();
        prop_assert!((at - first).abs() <= 1e-12 * at);
        prop_assert!((at - second).abs() <= 1e-12 * at);
    }

    #[test]
    fn step_decay_non_increasing(mut rates in prop::collection::vec(1e-4..1.0f64, 1..6), gaps in prop::collection::vec(1u32..50, 6)) {
        rates.sort_by(|a, b| b.total_cmp(a));
        let mut start = 0;
        let milestones: Vec<(u32, f64)> = rates.iter().zip(&gaps).map(|(&r, &g)| {
            let m = (start, r);
            start += g;
            m
        }).collect();
        let s = ScheduleSpec::step_decay(&milestones).unwrap();
        let c = s.curve(300).unwrap();
        for w in c.samples.windows(2) {
            prop_assert!(w[1].lr <= w[0].lr);
        }
    }

    #[test]
    fn ratio_bounds_and_monotonicity(x in -30.0..30.0f64, dx in 0.01..5.0f64, delta in 0.01..5.0f64) {
        let r = decreasing_ratio(RatioQuery::new(x, delta).unwrap());
        let r_next = decreasing_ratio(RatioQuery::new(x + dx, delta).unwrap());
        let floor = (-2.0 * delta).exp();
        // Saturated tails round onto the limits, so strictness holds only for moderate x.
        prop_assert!(r >= floor * (1.0 - 1e-14) && r <= 1.0);
        if x.abs() <= 8.0 {
            prop_assert!(r > floor && r < 1.0);
            prop_assert!(r_next < r);
        } else {
            prop_assert!(r_next <= r * (1.0 + 1e-14));
        }
    }

    #[test]
    fn ratio_cocycle(x in -20.0..20.0f64, d1 in 0.01..3.0f64, d2 in 0.01..3.0f64) {
        let r = |x: f64, d: f64| decreasing_ratio(RatioQuery::new(x, d).unwrap());
        let whole = r(x, d1 + d2);
        let parts = r(x, d1) * r(x + d1, d2);
        prop_assert!((whole - parts).abs() <= 1e-10 * whole);
    }

    #[test]
    fn inflection_matches_ratio(l in -50.0..0.0f64, u in 0.01..50.0f64) {
        let s = inflection_fraction(l, u).unwrap();
        let r = ratio_r(l, u).unwrap();
        prop_assert!((0.0..1.0).contains(&s));
        prop_assert!((s / (1.0 - s) - r).abs() <= 1e-12 * r.max(1e-300));
    }

    #[test]
    fn sup_difference_symmetric(a in htd_spec(), l in -5.0..0.0f64, u in 0.1..5.0f64, n in 2usize..200) {
        let (lo, hi) = a.rate_range().unwrap();
        let b = ScheduleSpec::htd(l, u, lo, hi, a.horizon().unwrap()).unwrap();
        let ab = sup_difference(&a, &b, n).unwrap();
        let ba = sup_difference(&b, &a, n).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab.max_abs_diff >= 0.0 && (0.0..=1.0).contains(&ab.argmax_progress));
    }

    #[test]
    fn sgd_plain_reduction(theta in prop::collection::vec(-10.0..10.0f64, 1..20), lr in 1e-4..1.0f64, seed in any::<u64>()) {
        let mut rng = htd_core::rng::SplitMix64::new(seed);
        let grads: Vec<f64> = theta.iter().map(|_| rng.next_normal()).collect();
        let mut p = ParameterVector(theta.clone());
        let mut v = VelocityState::zeros(theta.len());
        sgd_step(&mut p, &grads, lr, &OptimizerConfig::plain(), &mut v).unwrap();
        for ((new, old), g) in p.0.iter().zip(&theta).zip(&grads) {
            prop_assert_eq!(*new, old - lr * g);
        }
    }

    #[test]
    fn sgd_deterministic(theta in prop::collection::vec(-10.0..10.0f64, 1..20), lr in 1e-4..1.0f64, mu in 0.0..0.99f64, wd in 0.0..0.01f64) {
        let cfg = OptimizerConfig { momentum: mu, weight_decay: wd, nesterov: true };
        let grads: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let run = || {
            let mut p = ParameterVector(theta.clone());
            let mut v = VelocityState::zeros(theta.len());
            for _ in 0..3 {
                sgd_step(&mut p, &grads, lr, &cfg, &mut v).unwrap();
            }
            (p, v)
        };
        let (p1, v1) = run();
        let (p2, v2) = run();
        prop_assert!(p1.0.iter().zip(&p2.0).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(v1, v2);
    }

    #[test]
    fn sgd_contracts_quadratic(lr in 0.01..0.99f64) {
        let mut p = ParameterVector(vec![1.0]);
        let mut v = VelocityState::zeros(1);
        let mut prev = 1.0f64;
        for _ in 0..50 {
            let g = p.0[0];
            sgd_step(&mut p, &[g], lr, &OptimizerConfig::plain(), &mut v).unwrap();
            prop_assert!(p.0[0].abs() < prev.abs());
            prev = p.0[0];
        }
    }

    #[test]
    fn softmax_shift_invariance(bias in prop::collection::vec(-5.0..5.0f64, 3), shift in -100.0..100.0f64) {
        use htd_core::model::{Dataset, NetworkSpec, ToyNetwork};
        let spec = NetworkSpec::new(vec![1, 3], 0).unwrap();
        let data = Dataset::new(vec![0.5], 1, vec![1], 3).unwrap();
        let mut params = vec![0.3, -0.2, 0.1];
        params.extend(&bias);
        let base = ToyNetwork::with_params(&spec, params.clone()).unwrap();
        for b in &mut params[3..] { *b += shift; }
        let shifted = ToyNetwork::with_params(&spec, params).unwrap();
        let (a, _) = base.forward_loss(&data, &[0]).unwrap();
        let (b, _) = shifted.forward_loss(&data, &[0]).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
    }
}
