use proptest::prelude::*;

use progex_core::expr::Mask;
use progex_core::loss::{weighted_f1, Loss};

fn case() -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<f64>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(0.01..1.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn f1_ignores_weight_scale((l, p, w) in case(), c in 1e-3..1e3f64) {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let (a, b) = (weighted_f1(&l, &p, &w).unwrap(), weighted_f1(&l, &p, &scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn f1_ignores_sample_order((l, p, w) in case(), rot in 0usize..60) {
        let n = l.len();
        let r = |v: &[bool]| (0..n).map(|i| v[(i + rot) % n]).collect::<Vec<_>>();
        let wr: Vec<f64> = (0..n).map(|i| w[(i + rot) % n]).collect();
        let (a, b) = (weighted_f1(&l, &p, &w).unwrap(), weighted_f1(&r(&l), &r(&p), &wr).unwrap());
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn named_losses_are_bounded((l, p, w) in case()) {
        let (lm, pm) = (Mask::from_bools(&l), Mask::from_bools(&p));
        let f1 = Loss::by_name("weighted-f1").unwrap().eval(&lm, &pm, &w);
        let zo = Loss::by_name("weighted-01").unwrap().eval(&lm, &pm, &w);
        prop_assert!((-1.0..=0.0).contains(&f1));
        prop_assert!((0.0..=1.0).contains(&zo));
        prop_assert_eq!(Loss::by_name("weighted-01").unwrap().eval(&lm, &lm, &w), 0.0);
    }
}

#[test]
fn hand_computed_weighted_example() {
    // TP 1.0, FN 0.5, FP 0: precision 1, recall 2/3
    let f1 = weighted_f1(&[true, true, false, false], &[true, false, false, false], &[1.0, 0.5, 1.0, 1.0]).unwrap();
    assert!((f1 - 0.8).abs() < 1e-12);
    let (l, p) = (Mask::from_bools(&[true, true, false, false]), Mask::from_bools(&[true, false, false, false]));
    let e = Loss::default().eval(&l, &p, &[1.0, 0.5, 1.0, 1.0]);
    assert!((e + 0.8).abs() < 1e-12);
    assert!((weighted_f1(&[true, true, false, false], &[true, false, true, false], &[1.0; 4]).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(weighted_f1(&[], &[], &[]).is_err());
    assert!(weighted_f1(&[true], &[true, false], &[1.0]).is_err());
    assert!(weighted_f1(&[true], &[true], &[0.0]).is_err());
    assert!(weighted_f1(&[true], &[true], &[-1.0]).is_err());
    assert!(Loss::by_name("hinge").is_err());
}
