use proptest::prelude::*;
use regtv::oracle::{check_structure, dp_optimal, exhaustive_optimal, tv_fixed_k};
use regtv::path::{objective, PathTransform, SampledPath};
use regtv::stoppart::{phi_explicit, phi_fast, scan_stops, trace_partition, StopKind, StopTime};

/// Random-walk values on a jittered, strictly increasing grid.
fn walk_path(max_len: usize) -> impl Strategy<Value = SampledPath> {
    (2..=max_len)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n - 1),
                prop::collection::vec(0.01f64..1.0, n - 1),
                -2.0f64..2.0,
            )
        })
        .prop_map(|(steps, gaps, start)| {
            let mut times = vec![0.0];
            let mut values = vec![start];
            for (d, g) in steps.iter().zip(&gaps) {
                times.push(times.last().unwrap() + g);
                values.push(values.last().unwrap() + d);
            }
            SampledPath::new(times, values).unwrap()
        })
}

fn lambda() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.1), Just(0.3), Just(1.0), Just(3.0), 0.01f64..4.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dp_matches_exhaustive(path in walk_path(10), lambda in lambda()) {
        let dp = dp_optimal(&path, lambda).unwrap();
        let ex = exhaustive_optimal(&path, lambda).unwrap();
        prop_assert!((dp.value - ex.value).abs() <= 1e-12);
        prop_assert_eq!(dp.k(), ex.k());
    }

    #[test]
    fn fast_matches_dp(path in walk_path(60), lambda in lambda()) {
        let dp = dp_optimal(&path, lambda).unwrap();
        let fast = phi_fast(&path, lambda).unwrap();
        prop_assert!((fast.value - dp.value).abs() <= 1e-9, "fast {} dp {}", fast.value, dp.value);
        let achieved = objective(&path, lambda, &fast.partition).unwrap();
        prop_assert!((achieved - dp.value).abs() <= 1e-9);
    }

    #[test]
    fn stored_results_are_self_consistent(path in walk_path(60), lambda in lambda()) {
        for r in [dp_optimal(&path, lambda).unwrap(), phi_fast(&path, lambda).unwrap()] {
            let recomputed = objective(&path, lambda, &r.partition).unwrap();
            prop_assert!((recomputed - r.value).abs() <= 1e-12 * r.value.abs().max(1.0));
        }
    }

    #[test]
    fn dp_partition_passes_structure_checks(path in walk_path(50), lambda in lambda()) {
        let dp = dp_optimal(&path, lambda).unwrap();
        let report = check_structure(&path, lambda, &dp.partition).unwrap();
        prop_assert!(report.all_ok(), "{:?}", report.violations);
    }

    #[test]
    fn value_is_monotone_in_lambda(path in walk_path(40), l1 in 0.01f64..3.0, l2 in 0.01f64..3.0) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a = dp_optimal(&path, lo).unwrap().value;
        let b = dp_optimal(&path, hi).unwrap().value;
        prop_assert!(a >= b - 1e-12);
        let ends = (path.last_value() - path.first_value()).abs();
        prop_assert!(b >= ends - 1e-12);
    }

    #[test]
    fn tiny_lambda_recovers_full_variation(path in walk_path(30)) {
        let full = tv_fixed_k(&path, path.len() - 2).unwrap();
        let dp = dp_optimal(&path, 1e-9).unwrap();
        prop_assert!((dp.value - full).abs() <= 1e-6);
    }

    #[test]
    fn fixed_k_envelope(path in walk_path(25), lambda in lambda()) {
        let interior = path.len() - 2;
        let tv: Vec<f64> = (0..=interior).map(|k| tv_fixed_k(&path, k).unwrap()).collect();
        for w in tv.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        let envelope = tv
            .iter()
            .enumerate()
            .map(|(k, t)| t - lambda * k as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((dp_optimal(&path, lambda).unwrap().value - envelope).abs() <= 1e-9);
    }

    #[test]
    fn invariances(path in walk_path(40), lambda in lambda(), c in -5.0f64..5.0, s in 0.1f64..10.0) {
        let base = dp_optimal(&path, lambda).unwrap();
        let neg = dp_optimal(&path.transform(PathTransform::Negate).unwrap(), lambda).unwrap();
        prop_assert_eq!(neg.value, base.value);
        prop_assert_eq!(&neg.partition, &base.partition);

        let shifted = dp_optimal(&path.transform(PathTransform::AddConstant(c)).unwrap(), lambda).unwrap();
        prop_assert!((shifted.value - base.value).abs() <= 1e-9);
        prop_assert_eq!(&shifted.partition, &base.partition);

        let scaled = dp_optimal(&path.transform(PathTransform::ScaleValues(s)).unwrap(), s * lambda).unwrap();
        prop_assert!((scaled.value - s * base.value).abs() <= 1e-9 * s.max(1.0));
        prop_assert_eq!(&scaled.partition, &base.partition);
    }

    #[test]
    fn trace_identities(path in walk_path(80), lambda in lambda()) {
        let trace = scan_stops(&path, lambda).unwrap();
        let n = trace.stops.len();
        prop_assert_eq!(trace.stops[n - 1].time, StopTime::BeyondEnd);
        prop_assert!(trace.stops[..n - 1].iter().all(|s| s.time != StopTime::BeyondEnd));
        for w in trace.stops.windows(2) {
            prop_assert_ne!(w[0].kind, w[1].kind);
            if let (Some(a), Some(b)) = (w[0].time.finite(), w[1].time.finite()) {
                prop_assert!(b > a);
            }
        }
        prop_assert_eq!(trace.m_levels[0], path.first_value());
        prop_assert_eq!(trace.m_levels.len(), trace.k_prime + 2);
        for j in 1..=trace.k_prime {
            let s = trace.stops[j];
            let gap = trace.m_levels[j] - s.value;
            let expected = if s.kind == StopKind::Downstop { lambda } else { -lambda };
            prop_assert!((gap - expected).abs() <= 1e-12 * (1.0 + trace.m_levels[j].abs()));
            // (-1)^{j + alpha} is +1 exactly at downstops
            let even = (j + trace.alpha as usize).is_multiple_of(2);
            prop_assert_eq!(even, s.kind == StopKind::Downstop);
        }
        let part = trace_partition(&trace, &path, lambda).unwrap();
        for (j, t) in part.interior().iter().enumerate() {
            prop_assert_eq!(path.value_at(*t).unwrap(), trace.m_levels[j + 1]);
        }
        let explicit = phi_explicit(&trace, &path, lambda).unwrap();
        let recomputed = objective(&path, lambda, &part).unwrap();
        prop_assert!((explicit - recomputed).abs() <= 1e-12 * explicit.abs().max(1.0));
    }

    #[test]
    fn reflection_flips_labels(path in walk_path(80), lambda in lambda()) {
        let up = scan_stops(&path, lambda).unwrap();
        let down = scan_stops(&path.transform(PathTransform::Negate).unwrap(), lambda).unwrap();
        prop_assert_eq!(up.stops.len(), down.stops.len());
        prop_assert_eq!(up.k_prime, down.k_prime);
        for (a, b) in up.stops.iter().zip(&down.stops) {
            prop_assert_eq!(a.time, b.time);
            // a flat path labels its lone out-of-range stop as an upstop either way
            if path.last_value() != path.first_value() || a.time != StopTime::BeyondEnd {
                prop_assert_eq!(a.kind.flip(), b.kind);
            }
        }
        for (a, b) in up.m_levels.iter().zip(&down.m_levels) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn restrict_composes(path in walk_path(30), u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0) {
        let (s, e) = (path.start(), path.end());
        let mut cut = [u, v, w].map(|x| s + x * (e - s));
        cut.sort_by(f64::total_cmp);
        let [a, b, c] = cut;
        prop_assume!(a < b && b < c);
        let direct = path.restrict(a, b).unwrap();
        let nested = path.restrict(a, c).unwrap().restrict(a, b).unwrap();
        prop_assert_eq!(direct.times(), nested.times());
        let n = direct.len();
        // knots of the source path carry over bit for bit
        prop_assert_eq!(&direct.values()[1..n - 1], &nested.values()[1..n - 1]);
        prop_assert_eq!(direct.values()[0], nested.values()[0]);
        let (x, y) = (direct.values()[n - 1], nested.values()[n - 1]);
        prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        for t in direct.times() {
            prop_assert!((direct.value_at(*t).unwrap() - path.value_at(*t).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn knots_reproduce_values(path in walk_path(30)) {
        for (t, v) in path.times().iter().zip(path.values()) {
            prop_assert_eq!(path.value_at(*t).unwrap(), *v);
        }
    }

    #[test]
    fn negate_preserves_increments(path in walk_path(30)) {
        let neg = path.transform(PathTransform::Negate).unwrap();
        for i in 1..path.len() {
            let a = (path.values()[i] - path.values()[i - 1]).abs();
            let b = (neg.values()[i] - neg.values()[i - 1]).abs();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn flat_segments_do_not_create_stops() {
    // plateaus at the extremum and at the start level
    let path = SampledPath::uniform(vec![0.0, 0.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.9, 0.9]).unwrap();
    for lambda in [0.3, 0.5, 0.8, 1.6, 2.0] {
        let fast = phi_fast(&path, lambda).unwrap();
        let dp = dp_optimal(&path, lambda).unwrap();
        assert!((fast.value - dp.value).abs() < 1e-12, "lambda {lambda}");
        // earliest knot on the plateau
        if fast.k() > 0 {
            assert_eq!(fast.partition.interior()[0], path.times()[2]);
        }
    }
}

#[test]
fn quantized_values_with_exact_boundary_hits() {
    // integer-valued walks make |df| = lambda and lambda/2 crossings land on knots
    let mut state = 0x2545_f491_4f6c_dd1du64;
    for _ in 0..2000 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let n = 3 + (state % 15) as usize;
        let mut v = vec![0.0];
        let mut s = state;
        for _ in 1..n {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            v.push(v.last().unwrap() + ((s >> 33) % 5) as f64 - 2.0);
        }
        let path = SampledPath::uniform(v).unwrap();
        for lambda in [1.0, 2.0, 3.0, 4.0] {
            let fast = phi_fast(&path, lambda).unwrap();
            let dp = dp_optimal(&path, lambda).unwrap();
            assert!(
                (fast.value - dp.value).abs() < 1e-9,
                "{:?} {lambda}",
                path.values()
            );
            let achieved = objective(&path, lambda, &fast.partition).unwrap();
            assert!((achieved - dp.value).abs() < 1e-9);
        }
    }
}
