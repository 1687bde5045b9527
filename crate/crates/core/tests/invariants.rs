use proptest::prelude::*;

use rsp_core::blocks::{count_crossings, BlockLadder};
use rsp_core::disorder::{sample_couplings, DisorderSpec};
use rsp_core::entropy::{tsallis_singlet_entropy, EntropyTable, RunningStats};
use rsp_core::scaling::{fit_gamma_quadratic, q_ext_pure, GammaPoint};
use rsp_core::sdrg::{
    run_configuration, run_configuration_checked, DecimationEvent, ModelKind, TrioCoefficients,
};

fn model_strategy() -> impl Strategy<Value = ModelKind> {
    prop_oneof![
        Just(ModelKind::Heisenberg { two_s: 1 }),
        Just(ModelKind::Heisenberg { two_s: 2 }),
        Just(ModelKind::Heisenberg { two_s: 3 }),
        Just(ModelKind::BiquadraticSpin1),
    ]
}

fn chain(n: usize, seed: u64) -> Vec<f64> {
    sample_couplings(&DisorderSpec::new(0.8, 1.0, seed).unwrap(), n, 0).unwrap()
}

fn singlet_pairs(events: &[DecimationEvent]) -> Vec<(usize, usize)> {
    events
        .iter()
        .filter_map(|e| match *e {
            DecimationEvent::Singlet { a, b } => Some((a as usize, b as usize)),
            _ => None,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn checked_engine_on_random_chains(model in model_strategy(), half in 2usize..200, seed in any::<u64>()) {
        let n = 2 * half;
        let rec = run_configuration_checked(model, &chain(n, seed), TrioCoefficients::default()).unwrap();
        prop_assert_eq!(2 * rec.events.len() + rec.residual, n);
        if model.trio_threshold_ratio().is_none() {
            prop_assert_eq!(rec.trio_count(), 0);
            prop_assert_eq!(rec.residual, 0);
        }
    }

    #[test]
    fn unchecked_engine_matches_checked(model in model_strategy(), half in 2usize..100, seed in any::<u64>()) {
        let j = chain(2 * half, seed);
        let a = run_configuration(model, &j, TrioCoefficients::default()).unwrap();
        let b = run_configuration_checked(model, &j, TrioCoefficients::default()).unwrap();
        prop_assert_eq!(a.events, b.events);
    }

    #[test]
    fn crossing_bounds_and_complement(half in 4usize..150, seed in any::<u64>(), anchor_frac in 0.0f64..1.0) {
        let n = 2 * half;
        let rec = run_configuration(ModelKind::Heisenberg { two_s: 1 }, &chain(n, seed), TrioCoefficients::default()).unwrap();
        let anchor = ((anchor_frac * n as f64) as usize).min(n - 1);
        let sizes: Vec<usize> = (1..n).collect();
        let t = count_crossings(&rec.events, &BlockLadder::new(sizes.clone(), anchor, n).unwrap()).unwrap();
        for (i, &l) in sizes.iter().enumerate() {
            let c = t.first()[i] as usize;
            prop_assert!(c <= l.min(n - l));
            prop_assert_eq!(c % 2, l % 2, "spin-1/2 parity at L={}", l);
            // The complement block [anchor + L, anchor + N) is cut by the same singlets.
            let comp = count_crossings(
                &rec.events,
                &BlockLadder::new(vec![n - l], (anchor + l) % n, n).unwrap(),
            ).unwrap();
            prop_assert_eq!(comp.first()[0] as usize, c);
        }
    }

    #[test]
    fn crossings_ignore_event_order(half in 4usize..100, seed in any::<u64>(), rot in any::<usize>()) {
        let n = 2 * half;
        let rec = run_configuration(ModelKind::Heisenberg { two_s: 2 }, &chain(n, seed), TrioCoefficients::default()).unwrap();
        let ladder = BlockLadder::with_anchors((1..n).collect(), vec![0, n / 3, n / 2], n).unwrap();
        let a = count_crossings(&rec.events, &ladder).unwrap();
        let mut shuffled = rec.events.clone();
        let k = rot % shuffled.len().max(1);
        shuffled.rotate_left(k);
        shuffled.reverse();
        let b = count_crossings(&shuffled, &ladder).unwrap();
        prop_assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn crossing_counts_match_brute_force(half in 2usize..60, seed in any::<u64>(), anchor in 0usize..120) {
        let n = 2 * half;
        let anchor = anchor % n;
        let rec = run_configuration(ModelKind::Heisenberg { two_s: 1 }, &chain(n, seed), TrioCoefficients::default()).unwrap();
        let pairs = singlet_pairs(&rec.events);
        let t = count_crossings(&rec.events, &BlockLadder::new((1..n).collect(), anchor, n).unwrap()).unwrap();
        for l in 1..n {
            let inside = |s: usize| (s + n - anchor) % n < l;
            let brute = pairs.iter().filter(|&&(a, b)| inside(a) != inside(b)).count();
            prop_assert_eq!(t.first()[l - 1] as usize, brute);
        }
    }

    #[test]
    fn welford_merge_is_order_free(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut1 in any::<usize>(), cut2 in any::<usize>()) {
        let mut serial = RunningStats::default();
        xs.iter().for_each(|&x| serial.push(x));
        let (mut c1, mut c2) = (cut1 % xs.len(), cut2 % xs.len());
        if c1 > c2 { std::mem::swap(&mut c1, &mut c2); }
        let part = |s: &[f64]| { let mut r = RunningStats::default(); s.iter().for_each(|&x| r.push(x)); r };
        let (a, b, c) = (part(&xs[..c1]), part(&xs[c1..c2]), part(&xs[c2..]));
        let mut left = a;
        left.merge(&b);
        left.merge(&c);
        let mut bc = b;
        bc.merge(&c);
        let mut right = a;
        right.merge(&bc);
        for m in [&left, &right] {
            prop_assert_eq!(m.count(), serial.count());
            prop_assert!((m.mean() - serial.mean()).abs() <= 1e-12 * (1.0 + serial.mean().abs()));
            prop_assert!((m.variance() - serial.variance()).abs() <= 1e-9 * (1.0 + serial.variance()));
        }
    }

    #[test]
    fn table_merge_equals_serial(seeds in prop::collection::vec(any::<u64>(), 2..12), split in any::<usize>()) {
        let n = 64;
        let ladder = BlockLadder::new(vec![2, 4, 8, 16], 0, n).unwrap();
        let qs = vec![-1.0, 0.0, 0.5, 1.0];
        let counts: Vec<_> = seeds.iter().map(|&s| {
            let rec = run_configuration(ModelKind::Heisenberg { two_s: 1 }, &chain(n, s), TrioCoefficients::default()).unwrap();
            count_crossings(&rec.events, &ladder).unwrap()
        }).collect();
        let mut serial = EntropyTable::new(1, qs.clone(), ladder.sizes().to_vec()).unwrap();
        counts.iter().for_each(|c| serial.accumulate(c).unwrap());
        let k = split % counts.len();
        let mut a = EntropyTable::new(1, qs.clone(), ladder.sizes().to_vec()).unwrap();
        let mut b = a.clone();
        counts[..k].iter().for_each(|c| a.accumulate(c).unwrap());
        counts[k..].iter().for_each(|c| b.accumulate(c).unwrap());
        a.merge(&b).unwrap();
        for (x, y) in a.rows().iter().zip(serial.rows().iter()) {
            prop_assert!((x.mean - y.mean).abs() <= 1e-12 * (1.0 + y.mean.abs()));
            prop_assert!((x.stderr - y.stderr).abs() <= 1e-9 * (1.0 + y.stderr));
            prop_assert_eq!(x.m, y.m);
        }
    }

    #[test]
    fn singlet_entropy_decreases_in_q(n in 1u32..30, two_s in 1u32..4, q in -2.0f64..2.0, dq in 1e-3f64..1.0) {
        let a = tsallis_singlet_entropy(n, q, two_s).unwrap();
        let b = tsallis_singlet_entropy(n, q + dq, two_s).unwrap();
        prop_assert!(b < a);
        prop_assert!(a > 0.0 && b > 0.0);
    }

    #[test]
    fn quadratic_fit_ignores_uniform_error_rescaling(
        u in -0.5f64..0.5, v in -1.0f64..-0.1, w in 0.2f64..1.0,
        noise in prop::collection::vec(-0.01f64..0.01, 9),
        errs in prop::collection::vec(0.005f64..0.05, 9),
        scale in 0.1f64..10.0,
    ) {
        let pts: Vec<GammaPoint> = (0..9).map(|i| {
            let q = -1.0 + 0.25 * i as f64;
            GammaPoint { q, gamma: u * q * q + v * q + w + noise[i], stderr: errs[i] }
        }).collect();
        let scaled: Vec<GammaPoint> = pts.iter().map(|p| GammaPoint { stderr: p.stderr * scale, ..*p }).collect();
        let a = fit_gamma_quadratic(&pts, true).unwrap();
        let b = fit_gamma_quadratic(&scaled, true).unwrap();
        for (x, y) in [(a.u, b.u), (a.v, b.v), (a.w, b.w)] {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn pure_q_ext_is_increasing(c in 0.05f64..10.0, dc in 1e-3f64..5.0) {
        prop_assert!(q_ext_pure(c + dc) > q_ext_pure(c));
        prop_assert!(q_ext_pure(c) < 1.0);
    }
}

#[test]
fn spin_one_trio_fraction_is_reported() {
    let spec = DisorderSpec::new(0.8, 1.0, 3).unwrap();
    let (mut trios, mut total) = (0, 0);
    for i in 0..20 {
        let rec = run_configuration(
            ModelKind::Heisenberg { two_s: 2 },
            &sample_couplings(&spec, 10_000, i).unwrap(),
            TrioCoefficients::default(),
        )
        .unwrap();
        trios += rec.trio_count();
        total += rec.events.len();
    }
    let frac = trios as f64 / total as f64;
    println!("spin-1 trio fraction at N=10^4: {frac:.4}");
    assert!(frac > 0.0 && frac < 0.5);
}

#[test]
fn spin_half_ground_state_is_all_singlets() {
    let rec = run_configuration(
        ModelKind::Heisenberg { two_s: 1 },
        &chain(10_000, 5),
        TrioCoefficients::default(),
    )
    .unwrap();
    assert_eq!(rec.singlet_count(), 5_000);
    assert_eq!(rec.residual, 0);
}

#[test]
fn large_chain_completes_quickly() {
    let j = chain(200_000, 11);
    let t = std::time::Instant::now();
    let rec = run_configuration(
        ModelKind::Heisenberg { two_s: 2 },
        &j,
        TrioCoefficients::default(),
    )
    .unwrap();
    let elapsed = t.elapsed();
    assert_eq!(2 * rec.events.len() + rec.residual, 200_000);
    assert!(elapsed.as_secs_f64() < 5.0, "{elapsed:?}");
}
