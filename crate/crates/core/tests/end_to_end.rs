use ergodic_towers::counterexample::{
    build_config, chain_check, choose_n0, integral_lower_bound, lower_halves, stability_partitions,
    verify_lower_half_bound,
};
use ergodic_towers::estimator::{mean_curve, sample_points, stability_time};
use ergodic_towers::field::ratio;
use ergodic_towers::intrinsic::run_intrinsic_default;
use ergodic_towers::towers::{
    fatness_partial, inflation_tower, kakutani, partition_check, tower_check, DEFAULT_PIECE_CAP,
};
use ergodic_towers::{build_inflation, Field, IntervalSet, LeveledSet, PiecewiseTranslation, System};
use proptest::prelude::*;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn rotation() -> System {
    System::rotation(Field::golden_angle()).unwrap()
}

fn inflation(i_max: usize) -> System {
    build_inflation(PiecewiseTranslation::rotation(Field::golden_angle()).unwrap(), i_max).unwrap()
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// First return time to `[0, b)` by floating-point iteration, or `None` when
/// the orbit passes too close to an endpoint to trust.
fn float_return_time(x: f64, b: f64) -> Option<usize> {
    let mut y = x;
    for n in 1..10_000 {
        y = frac(y + GOLDEN);
        if y.min((y - b).abs()).min(1.0 - y) < 1e-9 {
            return None;
        }
        if y < b {
            return Some(n);
        }
    }
    None
}

#[test]
fn kakutani_columns_match_float_return_times() {
    let sys = rotation();
    let f = sys.field();
    let b = ratio(2, 7);
    let base = LeveledSet::flat(IntervalSet::interval(f.zero(), f.rational(b.clone())).unwrap());
    let tower = kakutani(&sys, &base, DEFAULT_PIECE_CAP).unwrap();
    assert!(partition_check(&tower, &sys.full_space()));
    for i in 0..200 {
        let x = f.ratio(2 * i + 1, 1400);
        let Some(n) = float_return_time(x.to_f64(), 2.0 / 7.0) else {
            continue;
        };
        let col = tower
            .columns()
            .iter()
            .find(|c| c.base().as_flat().contains(&x))
            .expect("base point lies in some column");
        assert_eq!(col.height(), n, "x = {}", x.to_f64());
    }
}

#[test]
fn counterexample_pipeline_on_small_inflation() {
    let sys = inflation(6);
    let tower = inflation_tower(&sys).unwrap();
    let n0 = choose_n0(&sys, &tower, &ratio(1, 4)).unwrap();
    let cfg = build_config(&sys, &tower, n0).unwrap();
    assert!(*cfg.f_integral() < sys.field().ratio(1, 4));

    let halves = lower_halves(&tower, n0);
    let verdicts = verify_lower_half_bound(&sys, &cfg, &halves, DEFAULT_PIECE_CAP).unwrap();
    assert!(verdicts.values().all(|&v| v));

    let horizons = [16, 32, 64];
    let parts = stability_partitions(&sys, &cfg, &horizons, DEFAULT_PIECE_CAP).unwrap();
    let integrals: Vec<_> = parts.iter().map(|sp| integral_lower_bound(&sys, sp)).collect();
    assert!(integrals.windows(2).all(|w| w[0] < w[1]));
    for sp in &parts {
        let k = (1..=6).filter(|&i| sys.height(i) <= sp.horizon()).max().unwrap();
        assert!(chain_check(&sys, &cfg, &halves, sp, k).unwrap().ok);
    }

    // The sweep and single-orbit evaluation are independent algorithms.
    let last = parts.last().unwrap();
    for p in sample_points(&sys, 3, 300) {
        assert_eq!(
            last.value_at(&p),
            Some(stability_time(&sys, cfg.set(), &p, 64).unwrap())
        );
    }
}

#[test]
fn estimate_brackets_exact_integral() {
    let sys = inflation(6);
    let tower = inflation_tower(&sys).unwrap();
    let cfg = build_config(&sys, &tower, 3).unwrap();
    let sp = &stability_partitions(&sys, &cfg, &[128], DEFAULT_PIECE_CAP).unwrap()[0];
    let exact = integral_lower_bound(&sys, sp).to_f64();
    let row = &mean_curve(&sys, cfg.set(), &[128], 4000, 9).unwrap()[0];
    assert!((row.mean - exact).abs() < 4.0 * row.stderr, "{} vs {exact}", row.mean);
}

#[test]
fn intrinsic_two_stages_on_rotation() {
    let sys = rotation();
    let (tower, report) = run_intrinsic_default(&sys, &[1, 16, 256], 2, &ratio(1, 10), &ratio(1, 8)).unwrap();
    assert!(report.passed());
    assert!(tower_check(&sys, &tower));
    assert!(partition_check(&tower, &sys.full_space()));
}

#[test]
fn inflation_fatness_closed_form() {
    for i_max in [3, 5, 8] {
        let sys = inflation(i_max);
        let tower = inflation_tower(&sys).unwrap();
        let fat = fatness_partial(&sys, &tower, i_max);
        assert_eq!(fat.column_form, &sys.field().int(3 * i_max as i64) / sys.normalizer());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kac_identity_for_interval_bases(num in 1i64..40, den in 41i64..120, start in 0i64..40) {
        let sys = rotation();
        let f = sys.field();
        let a = f.ratio(start, den);
        let b = f.ratio((start + num).min(den), den);
        let base = LeveledSet::flat(IntervalSet::interval(a, b).unwrap());
        let tower = kakutani(&sys, &base, DEFAULT_PIECE_CAP).unwrap();
        prop_assert_eq!(tower.kac_sum(&sys), f.one());
        prop_assert!(tower.columns().len() <= 3);
    }
}
