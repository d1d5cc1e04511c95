//! Structural invariants over randomly drawn small instances.

use proptest::prelude::*;
use regulus_core::config_graph::{parse_dump, sample_mask, sample_matching, write_dump, Params};
use regulus_core::coupled_walks::{
    check_coupling, default_slack, default_t_prime, series, AuxRandomness, SeriesKind,
};
use regulus_core::exploration::{
    check_lemma21, explore, max_component_size, ActivePolicy, ExploreOptions, Source, StartRule,
};
use regulus_core::mc_harness::{
    read_records, run_tail, with_threads, write_records, TailMode, TailSpec,
};
use regulus_core::rng::RandomStream;
use regulus_core::theory::{q_lower_curve, q_upper, x_offset};

fn policy(k: u8) -> ActivePolicy {
    if k.is_multiple_of(2) {
        ActivePolicy::Fifo
    } else {
        ActivePolicy::Lifo
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partner_is_an_involution_without_fixed_points(n in 1usize..40, d in 1usize..6, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let m = sample_matching(n, d, &mut RandomStream::new(seed, 0)).unwrap();
        prop_assert!(m.is_complete());
        for s in 0..(n * d) as u32 {
            let t = m.partner(s);
            prop_assert_ne!(s, t);
            prop_assert_eq!(m.partner(t), s);
        }
    }

    #[test]
    fn component_sizes_partition_the_vertices(n in 1usize..60, d in 1usize..5, p in 0.0f64..=1.0, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let mut rng = RandomStream::new(seed, 0);
        let m = sample_mask(sample_matching(n, d, &mut rng).unwrap(), p, &mut rng).unwrap();
        let c = m.components().unwrap();
        prop_assert_eq!(c.sizes.iter().sum::<usize>(), n);
        prop_assert_eq!(c.max_size, c.sizes[0]);
        prop_assert!(c.size_of.iter().all(|&s| s >= 1 && s <= c.max_size));
    }

    #[test]
    fn fixed_exploration_agrees_with_components(n in 2usize..40, d in 3usize..5, p in 0.0f64..=1.0, seed in any::<u64>(), pol in 0u8..2) {
        prop_assume!(n * d % 2 == 0);
        let mut rng = RandomStream::new(seed, 0);
        let m = sample_mask(sample_matching(n, d, &mut rng).unwrap(), p, &mut rng).unwrap();
        let c = m.components().unwrap();
        let v = (seed % n as u64) as u32;
        let opts = ExploreOptions { start: StartRule::Vertex(v), policy: policy(pol), ..ExploreOptions::full_graph() };
        let trace = explore(Source::Fixed(&m), n, d, opts, &mut rng).unwrap();
        prop_assert_eq!(trace.phase_one().component_size() as usize, c.size_of[v as usize]);
        prop_assert_eq!(max_component_size(&trace).unwrap() as usize, c.max_size);
        prop_assert_eq!(&trace.revealed_matching().unwrap().components().unwrap().sizes, &c.sizes);
        let report = check_lemma21(&trace, Some(c.size_of[v as usize] as u64));
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn lazy_traces_satisfy_counter_identities_and_coupling(n in 10usize..200, d in 3usize..6, lambda in -2.0f64..2.0, seed in any::<u64>(), pol in 0u8..2) {
        prop_assume!(n * d % 2 == 0);
        let params = Params::critical(n, d, lambda).unwrap();
        let mut rng = RandomStream::new(seed, 0);
        let opts = ExploreOptions { policy: policy(pol), ..ExploreOptions::default() };
        let trace = explore(Source::Lazy { p: params.p }, n, d, opts, &mut rng).unwrap();
        let report = check_lemma21(&trace, None);
        prop_assert!(report.passed(), "{:?}", report.violations);
        let aux = AuxRandomness::coupled(&trace, default_slack(n, 1.0), default_t_prime(n, 1.0), &mut rng);
        let report = check_coupling(&trace, &aux).unwrap();
        prop_assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn xi_series_is_the_rescaled_retention_indicator(n in 10usize..100, d in 3usize..6, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let p = 1.0 / (d - 1) as f64;
        let trace = explore(Source::Lazy { p }, n, d, ExploreOptions::default(), &mut RandomStream::new(seed, 0)).unwrap();
        let len = trace.phase_one_steps().len();
        let xi = series(&trace, SeriesKind::Xi, None, len).unwrap();
        let dp = series(&trace, SeriesKind::DPrime, None, len).unwrap();
        for (i, s) in trace.phase_one_steps().iter().enumerate() {
            let want = (d as i32 - 1) * s.retained as i32 - 1;
            prop_assert_eq!(xi.values[i], want);
            prop_assert!((dp.value(i) - want as f64 / ((d - 2) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_component_never_exceeds_the_largest(n in 10usize..150, d in 3usize..5, lambda in -1.0f64..1.0, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let p = Params::critical(n, d, lambda).unwrap().p;
        let first = explore(Source::Lazy { p }, n, d, ExploreOptions::default(), &mut RandomStream::new(seed, 0)).unwrap();
        let full = explore(Source::Lazy { p }, n, d, ExploreOptions::full_graph(), &mut RandomStream::new(seed, 0)).unwrap();
        prop_assert_eq!(first.phase_one(), full.phase_one());
        prop_assert!(first.phase_one().component_size() <= max_component_size(&full).unwrap());
    }

    #[test]
    fn dump_round_trips(n in 1usize..30, d in 1usize..5, p in 0.0f64..=1.0, seed in any::<u64>()) {
        prop_assume!(n * d % 2 == 0);
        let mut rng = RandomStream::new(seed, 0);
        let m = sample_mask(sample_matching(n, d, &mut rng).unwrap(), p, &mut rng).unwrap();
        let back = parse_dump(&write_dump(&m, p, seed)).unwrap();
        prop_assert_eq!(back.p, p);
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.matching, m);
    }

    #[test]
    fn x_offset_is_affine_in_k(k in -50.0f64..50.0, dk in 0.5f64..20.0, lambda in -3.0f64..3.0, t in 0.0f64..1e4, d in 3usize..8, n in 10usize..100_000) {
        let step = x_offset(k + dk, lambda, t, d, n) - x_offset(k, lambda, t, d, n);
        prop_assert!((step - dk / (d - 1) as f64).abs() < 1e-9);
    }

    #[test]
    fn curve_gap_is_the_offset_term(t in 0.0f64..1e5, p in 0.01f64..0.6, d in 3usize..8, n in 100usize..1_000_000, a in 0.1f64..5.0) {
        let gap = q_lower_curve(t, p, d, n, a) - q_upper(t, p, d, n);
        let want = a * (n as f64).powf(4.0 / 15.0) + p * (1.0 - 2.0 / d as f64) * t / (2.0 * n as f64);
        prop_assert!((gap - want).abs() <= 1e-9 * want.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tail_records_round_trip_through_csv(half in 5usize..100, lambda in -1.0f64..1.0, a in 0.2f64..2.0, seed in any::<u64>()) {
        let params = Params::critical(2 * half, 3, lambda).unwrap().with_a(a);
        let records: Vec<_> = [TailMode::Vertex, TailMode::Max]
            .into_iter()
            .map(|mode| run_tail(&TailSpec::new(params.clone(), mode, 200, seed).unwrap().timing(false)).unwrap())
            .collect();
        prop_assert!(records[0].successes <= records[1].successes);
        prop_assert_eq!(read_records(&write_records(&records).unwrap()).unwrap(), records);
    }
}

#[test]
fn tail_estimates_do_not_depend_on_thread_count() {
    let params = Params::critical(500, 3, 0.5).unwrap().with_a(1.0);
    let run = |threads| {
        with_threads(Some(threads), || {
            [TailMode::Vertex, TailMode::Max].map(|mode| {
                run_tail(
                    &TailSpec::new(params.clone(), mode, 3000, 77)
                        .unwrap()
                        .timing(false),
                )
                .unwrap()
            })
        })
        .unwrap()
    };
    assert_eq!(run(1), run(3));
}
