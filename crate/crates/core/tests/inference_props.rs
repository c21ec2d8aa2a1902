mod common;

use common::oracle::{self, OracleScale};
use fuzzy_success::construct::{default_construct, ScaleProfile};
use fuzzy_success::fuzzy::{AndOp, Implication, OperatorSet};
use fuzzy_success::inference::{Fis, FisConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn default_stages(scale: ScaleProfile) -> Vec<(String, Fis)> {
    default_construct(scale)
        .stages()
        .map(|(n, f)| (n.to_string(), f.clone()))
        .collect()
}

fn with_ops(fis: &Fis, ops: OperatorSet) -> Fis {
    Fis::new(FisConfig {
        ops,
        ..fis.config().clone()
    })
    .unwrap()
}

fn score(fis: &Fis, x: &[f64]) -> f64 {
    fis.rescale(fis.infer_values(x).unwrap().output)
}

/// Counts decreasing pairs among `pairs` random (x, x + δ·e_i) comparisons.
fn monotone_violations(fis: &Fis, seed: u64, pairs: usize) -> (usize, f64) {
    let u = fis.output().universe();
    let mut rng = common::rng(seed);
    let k = fis.inputs().len();
    let (mut bad, mut worst) = (0, 0.0f64);
    for _ in 0..pairs {
        let x: Vec<f64> = (0..k).map(|_| rng.gen_range(u.lo()..=u.hi())).collect();
        let i = rng.gen_range(0..k);
        let mut y = x.clone();
        y[i] = rng.gen_range(x[i]..=u.hi());
        let d = score(fis, &y) - score(fis, &x);
        if d < -1e-9 {
            bad += 1;
            worst = worst.min(d);
        }
    }
    (bad, worst)
}

#[test]
fn scaling_operators_are_monotone_on_every_default_stage() {
    let ops = OperatorSet {
        and_op: AndOp::Product,
        implication: Implication::ProductScale,
        ..OperatorSet::default()
    };
    for (name, fis) in default_stages(ScaleProfile::FivePoint) {
        let (bad, worst) = monotone_violations(&with_ops(&fis, ops), 11, 10_000);
        assert_eq!(bad, 0, "{name}: {bad} decreasing pairs, worst {worst}");
    }
}

/// Min-clip shrinks an edge label's height without moving its support, so a
/// half-fired lowest label has a centroid further inside than a fully fired
/// one. Moving an item from 2 to 3 removes the half-height firing and the
/// score drops back to the floor. The oracle reproduces the same drop.
#[test]
fn min_clip_monotonicity_counterexample_is_genuine() {
    let fis = default_stages(ScaleProfile::FivePoint).remove(0).1;
    let before = score(&fis, &[2.0, 1.0, 1.0, 1.0, 1.0]);
    let after = score(&fis, &[3.0, 1.0, 1.0, 1.0, 1.0]);
    assert!((before - 16.0 / 15.0).abs() < 1e-5, "{before}");
    assert!((after - 1.0).abs() < 1e-9, "{after}");

    let s = OracleScale::FIVE;
    let cal = oracle::calibration(&s);
    let w = [1.0; 5];
    let o_before = oracle::rescale(
        &s,
        oracle::raw_output(&s, &[2.0, 1.0, 1.0, 1.0, 1.0], &w),
        cal,
    );
    let o_after = oracle::rescale(
        &s,
        oracle::raw_output(&s, &[3.0, 1.0, 1.0, 1.0, 1.0], &w),
        cal,
    );
    assert!((o_before - before).abs() < 1e-5 && (o_after - after).abs() < 1e-5);
    assert!(o_after < o_before);
}

#[test]
fn rule_order_does_not_change_the_trace() {
    let mut rng = common::rng(13);
    for (_, fis) in default_stages(ScaleProfile::FivePoint) {
        let mut config = fis.config().clone();
        config.rules.rules.shuffle(&mut rng);
        let shuffled = Fis::new(config).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..fis.inputs().len())
                .map(|_| rng.gen_range(1.0..=5.0))
                .collect();
            let a = fis.infer_values(&x).unwrap().trace;
            let b = shuffled.infer_values(&x).unwrap().trace;
            assert_eq!(a.aggregate_mass.to_bits(), b.aggregate_mass.to_bits());
            assert_eq!(a.crisp_output.to_bits(), b.crisp_output.to_bits());
        }
    }
}

#[test]
fn extremes_hit_the_universe_ends() {
    for scale in [ScaleProfile::FivePoint, ScaleProfile::SevenPoint] {
        for (name, fis) in default_stages(scale) {
            let k = fis.inputs().len();
            let (lo, hi) = (scale.lo() as f64, scale.hi() as f64);
            assert!((score(&fis, &vec![lo; k]) - lo).abs() < 1e-9, "{name}");
            assert!((score(&fis, &vec![hi; k]) - hi).abs() < 1e-9, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirrored_inputs_give_mirrored_scores(
        seven in any::<bool>(),
        stage in 0usize..4,
        unit in prop::collection::vec(0.0f64..=1.0, 5),
    ) {
        let scale = if seven { ScaleProfile::SevenPoint } else { ScaleProfile::FivePoint };
        let (lo, hi) = (scale.lo() as f64, scale.hi() as f64);
        let fis = default_construct(scale).stages().nth(stage).unwrap().1.clone();
        let x: Vec<f64> = unit.iter().take(fis.inputs().len()).map(|t| lo + t * (hi - lo)).collect();
        let m: Vec<f64> = x.iter().map(|v| lo + hi - v).collect();
        let a = score(&fis, &x);
        let b = score(&fis, &m);
        prop_assert!((a - lo).min(hi - a) >= -1e-12);
        prop_assert!((b - (lo + hi - a)).abs() < 1e-6, "{} vs {}", a, b);
    }
}
