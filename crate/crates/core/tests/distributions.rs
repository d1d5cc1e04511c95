//! Laws of the increments and estimators against their exact values.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use regulus_core::config_graph::{sample_mask, sample_matching, Params};
use regulus_core::coupled_walks::{series, SeriesKind};
use regulus_core::exploration::{explore, ExploreOptions, Source};
use regulus_core::mc_harness::{run_tail, TailMode, TailSpec};
use regulus_core::oracles::exhaustive_small_graph;
use regulus_core::rng::RandomStream;
use regulus_core::stats::chi_square_gof;
use statrs::distribution::{Binomial, Discrete};

/// Pools the first `cap` phase-one increments of `kind` over `traces` lazy runs.
fn pooled(
    kind: SeriesKind,
    n: usize,
    d: usize,
    p: f64,
    traces: u64,
    cap: usize,
    seed: u64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..traces {
        let trace = explore(
            Source::Lazy { p },
            n,
            d,
            ExploreOptions::default(),
            &mut RandomStream::new(seed, i),
        )
        .unwrap();
        let len = trace.phase_one_steps().len().min(cap);
        let s = series(&trace, kind, None, len).unwrap();
        out.extend((0..len).map(|k| s.value(k)));
    }
    out
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v)
}

#[test]
fn drift_of_d_matches_retention_rate() {
    let (n, d, p) = (200, 4, 1.0 / 3.0);
    let xs = pooled(SeriesKind::D, n, d, p, 1000, 200, 31);
    let (m, v) = mean_var(&xs);
    let want = p * (d - 1) as f64 - 1.0;
    let se = (v / xs.len() as f64).sqrt();
    assert!((m - want).abs() <= 3.0 * se, "mean {m} vs {want}, se {se}");
}

#[test]
fn rescaled_increment_is_standardised_exactly() {
    for d in 3usize..=7 {
        let p = BigRational::new(BigInt::one(), BigInt::from(d as i64 - 1));
        let q = BigRational::one() - &p;
        let mut seen = [None, None];
        let mut i = 0;
        while seen.iter().any(Option::is_none) {
            let trace = explore(
                Source::Lazy {
                    p: 1.0 / (d - 1) as f64,
                },
                50,
                d,
                ExploreOptions::default(),
                &mut RandomStream::new(d as u64, i),
            )
            .unwrap();
            let s = series(&trace, SeriesKind::DPrime, None, 1).unwrap();
            seen[trace.steps[0].retained as usize] = Some((s.values[0], s.scale));
            i += 1;
        }
        let (v0, scale) = seen[0].unwrap();
        let (v1, _) = seen[1].unwrap();
        let inv_scale_sq = (1.0 / (scale * scale)).round() as i64;
        assert_eq!(inv_scale_sq, d as i64 - 2);
        let r = |v: i32| BigRational::from_integer(BigInt::from(v));
        let mean = &p * r(v1) + &q * r(v0);
        assert!(mean.is_zero(), "d={d} mean {mean}");
        let second = (&p * r(v1) * r(v1) + &q * r(v0) * r(v0))
            / BigRational::from_integer(BigInt::from(inv_scale_sq));
        assert!(second.is_one(), "d={d} variance {second}");
    }
}

#[test]
fn rescaled_increment_is_standardised_empirically() {
    for d in 3usize..=5 {
        let p = 1.0 / (d - 1) as f64;
        let xs = pooled(SeriesKind::DPrime, 1000, d, p, 20_000, 100, 40 + d as u64);
        let (m, v) = mean_var(&xs);
        let squares: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, v2) = mean_var(&squares);
        let n = xs.len() as f64;
        let (se_m, se_2) = ((v / n).sqrt(), (v2 / n).sqrt());
        assert!(m.abs() <= 3.0 * se_m, "d={d} mean {m} se {se_m}");
        assert!(
            (m2 - 1.0).abs() <= 3.0 * se_2 + 1e-12,
            "d={d} second moment {m2} se {se_2}"
        );
    }
}

#[test]
fn xi_sums_follow_the_shifted_binomial() {
    let (n, d, p, steps) = (20usize, 4usize, 1.0 / 3.0, 12u64);
    let mut counts = vec![0u64; steps as usize + 1];
    for i in 0..100_000 {
        let trace = explore(
            Source::Lazy { p },
            n,
            d,
            ExploreOptions::full_graph(),
            &mut RandomStream::new(50, i),
        )
        .unwrap();
        let sum: i64 = trace.steps[..steps as usize]
            .iter()
            .map(|s| (d as i64 - 1) * s.retained as i64 - 1)
            .sum();
        let j = (sum + steps as i64) / (d as i64 - 1);
        assert_eq!((d as i64 - 1) * j - steps as i64, sum);
        counts[j as usize] += 1;
    }
    let law = Binomial::new(p, steps).unwrap();
    let probs: Vec<f64> = (0..=steps).map(|j| law.pmf(j)).collect();
    let chi = chi_square_gof(&counts, &probs, 5.0);
    assert!(chi.p_value > 0.01, "chi-square p-value {}", chi.p_value);
}

#[test]
fn retained_pair_count_is_binomial_in_mean() {
    let (n, d, p) = (4, 3, 0.5);
    let trials = 100_000u64;
    let mut rng = RandomStream::new(60, 0);
    let xs: Vec<f64> = (0..trials)
        .map(|_| {
            sample_mask(sample_matching(n, d, &mut rng).unwrap(), p, &mut rng)
                .unwrap()
                .retained_count() as f64
        })
        .collect();
    let (m, v) = mean_var(&xs);
    let se = (v / trials as f64).sqrt();
    assert!((m - 3.0).abs() <= 3.0 * se, "mean {m} se {se}");
}

#[test]
fn small_graph_tails_match_exhaustive_law() {
    let (n, d, p) = (4, 3, 0.5);
    let exact = exhaustive_small_graph(n, d)
        .unwrap()
        .evaluate(p, false)
        .unwrap();
    let params = Params::new(n, d, p).unwrap();
    for (mode, law) in [
        (TailMode::Vertex, &exact.vertex),
        (TailMode::Max, &exact.max),
    ] {
        for threshold in [1.5, 2.5, 3.5] {
            let mut spec = TailSpec::with_threshold(params.clone(), mode, threshold, 100_000, 61)
                .timing(false);
            spec.confidence = 0.999;
            let est = run_tail(&spec).unwrap();
            let want = law.tail_above(threshold);
            assert!(
                est.ci_lo <= want && want <= est.ci_hi,
                "{mode:?} > {threshold}: [{}, {}] vs {want}",
                est.ci_lo,
                est.ci_hi
            );
        }
    }
}
