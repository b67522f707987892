use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;

use dbayes::bayes::{make_state, multiplicand_gap, Orientation};
use dbayes::data::{
    self, class_counts, denormalize_pixel, make_folds, normalize, parse_idx_images,
    parse_idx_labels, write_idx_images, write_idx_labels, ImageSet, LabelSet, LabeledSet, PIXELS,
};
use dbayes::goldfix::{adapt_base, fixed_base, LogBase};
use dbayes::harness::cell_seed;
use dbayes::nn::{softmax_cross_entropy, Tensor};
use dbayes::rng::SplitMix64;
use dbayes::solution::{
    chain_eval_forward, chain_eval_reverse, eval_forward, eval_reverse, Angle, LogMode,
};

fn bytes(seed: u64, n: usize) -> Vec<u8> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.below(256) as u8).collect()
}

fn labels(seed: u64, n: usize, classes: u64) -> Vec<u8> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| rng.below(classes) as u8).collect()
}

fn mode_strategy() -> impl Strategy<Value = LogMode> {
    prop_oneof![
        Just(LogMode::FixedPoint),
        (1.05f64..20.0).prop_map(|b| LogMode::Explicit(LogBase::new(b).unwrap())),
        (0.05f64..0.95).prop_map(|b| LogMode::Explicit(LogBase::new(b).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idx_images_round_trip(count in 0usize..=1000, seed: u64) {
        let set = ImageSet::new(bytes(seed, count * PIXELS)).unwrap();
        let encoded = write_idx_images(&set);
        let parsed = parse_idx_images(&encoded).unwrap();
        prop_assert_eq!(&parsed, &set);
        prop_assert_eq!(write_idx_images(&parsed), encoded);
    }

    #[test]
    fn idx_labels_round_trip(count in 0usize..=1000, seed: u64) {
        let set = LabelSet::new(labels(seed, count, 10)).unwrap();
        let encoded = write_idx_labels(&set);
        prop_assert_eq!(parse_idx_labels(&encoded).unwrap(), set);
    }

    #[test]
    fn normalize_inverts(seed: u64) {
        let set = ImageSet::new(bytes(seed, 3 * PIXELS)).unwrap();
        let t = normalize(&set);
        let back: Vec<u8> = t.data().iter().map(|&x| denormalize_pixel(x)).collect();
        prop_assert_eq!(back.as_slice(), set.pixels());
        prop_assert!(t.data().iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn stratified_subset_keeps_proportions(n in 50usize..600, classes in 2u64..=10, seed: u64) {
        let l = labels(seed, n, classes);
        let set = LabeledSet::new(ImageSet::new(vec![0; n * PIXELS]).unwrap(), LabelSet::new(l).unwrap()).unwrap();
        let full = set.class_counts();
        for tenth in 1..=9 {
            let f = tenth as f64 / 10.0;
            let sub = data::stratified_subset(&set, f, seed ^ tenth).unwrap();
            prop_assert_eq!(sub.len(), (f * n as f64).round() as usize);
            let got = sub.class_counts();
            for c in 0..10 {
                let share = sub.len() as f64 * full[c] as f64 / n as f64;
                prop_assert!((got[c] as f64 - share).abs() < 1.0, "class {} got {} share {}", c, got[c], share);
            }
        }
    }

    #[test]
    fn folds_partition_and_balance(n in 40usize..400, k in 2usize..=5, seed: u64) {
        let l = labels(seed, n, 4);
        prop_assume!(class_counts(&l).iter().all(|&c| c == 0 || c >= k));
        let plan = make_folds(&l, k, seed).unwrap();
        let mut seen = vec![0; n];
        for f in 0..k {
            let (train, val) = plan.split(f);
            prop_assert_eq!(train.len() + val.len(), n);
            for &i in &val {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..4u8 {
            let per_fold: Vec<usize> = (0..k)
                .map(|f| (0..n).filter(|&i| l[i] == c && plan.assignments()[i] == f).count())
                .collect();
            let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn cell_seeds_distinct(seed: u64, a in (0usize..1 << 16, 0usize..1 << 16, 0usize..1 << 16),
                           b in (0usize..1 << 16, 0usize..1 << 16, 0usize..1 << 16)) {
        prop_assume!(a != b);
        prop_assert_ne!(cell_seed(seed, a.0, a.1, a.2), cell_seed(seed, b.0, b.1, b.2));
    }

    #[test]
    fn mirror_symmetry(t in 0.0f64..=1.0, mode in mode_strategy()) {
        let phi = Angle::new(t * FRAC_PI_2).unwrap();
        let f = eval_forward(phi, mode);
        let r = eval_reverse(phi.complement(), mode);
        match (f, r) {
            (Ok(f), Ok(r)) => prop_assert!((f - r).abs() <= 1e-12),
            (f, r) => prop_assert!(f.is_err() && r.is_err()),
        }
    }

    #[test]
    fn explicit_chain_stages_agree(p in 0.001f64..0.999, b in 1.01f64..50.0) {
        let mode = LogMode::Explicit(LogBase::new(b).unwrap());
        for t in [chain_eval_forward(p, mode).unwrap(), chain_eval_reverse(p, mode).unwrap()] {
            prop_assert!((t.stage_values[3] - t.stage_values[4]).abs() <= 1e-12);
            prop_assert!((t.stage_values[4] - t.stage_values[5]).abs() <= 1e-12);
        }
    }

    #[test]
    fn fixed_base_is_a_fixed_point(x in 0.01f64..=10.0) {
        prop_assume!(x != 1.0);
        let b = fixed_base(x).unwrap();
        prop_assert!((b.log(x).unwrap() - x).abs() <= 1e-10);
        let (once, n) = adapt_base(x, LogBase::new(3.0).unwrap(), 1.0, 1e-10, 4).unwrap();
        prop_assert!(n <= 1);
        prop_assert_eq!(once.ln_lambda().to_bits(), b.ln_lambda().to_bits());
    }

    #[test]
    fn softmax_gradient_rows_sum_to_zero(seed: u64) {
        let mut rng = SplitMix64::new(seed);
        let logits: Vec<f64> = (0..30).map(|_| rng.uniform(-20.0, 20.0)).collect();
        let labels: Vec<usize> = (0..3).map(|_| rng.below(10) as usize).collect();
        let (_, g) = softmax_cross_entropy(&Tensor::new(vec![3, 10], logits).unwrap(), &labels).unwrap();
        for row in g.data().chunks(10) {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}

#[test]
fn cell_seeds_distinct_exhaustively() {
    // 16 × 64 × 64 = 2^16 work items
    let mut seen = HashSet::new();
    for e in 0..16 {
        for a in 0..64 {
            for f in 0..64 {
                assert!(seen.insert(cell_seed(7, e, a, f)));
            }
        }
    }
}

#[test]
fn outer_equation_grid() {
    for i in 1..100 {
        for j in 1..100 {
            let s = make_state(i as f64 / 100.0, j as f64 / 100.0).unwrap();
            let zero = s.outer_residual().abs() <= 1e-12;
            assert_eq!(zero, i + j == 100, "pB={i}% pAgB={j}%");
            assert_eq!((s.product_identity() - 1.0).abs() <= 1e-12, zero);
        }
    }
}

#[test]
fn inner_residuals_agree_in_sign() {
    for i in 1..100 {
        for j in 1..100 {
            let s = make_state(i as f64 / 100.0, j as f64 / 100.0).unwrap();
            let f = s.inner_residual(Orientation::Forward);
            let r = s.inner_residual(Orientation::Reverse);
            if f.abs() <= 1e-12 || r.abs() <= 1e-12 {
                assert!(f.abs() <= 1e-12 && r.abs() <= 1e-12, "({i}, {j}): {f} {r}");
                assert_eq!(i, j);
            } else {
                assert!(f.signum() != r.signum(), "({i}, {j}): {f} {r}");
            }
        }
    }
}

#[test]
fn multiplicand_gap_has_one_root() {
    // bisection on the signed gap p − (1−p)/p over the bracket
    let signed = |p: f64| p - (1.0 - p) / p;
    let (mut lo, mut hi) = (0.61, 0.63);
    assert!(signed(lo) < 0.0 && signed(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if signed(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!(multiplicand_gap(root).unwrap() <= 1e-12);
    // signed gap is strictly increasing, so nothing outside the bracket vanishes
    for k in 1..1000 {
        let p = k as f64 / 1000.0;
        if !(0.61..=0.63).contains(&p) {
            assert!(multiplicand_gap(p).unwrap() > 1e-3, "{p}");
        }
    }
}

#[test]
fn golden_condition_vanishes_only_at_p1() {
    let g = |p: f64| (1.0 - p) - p * p;
    for k in 1..1000 {
        let p = k as f64 / 1000.0;
        if !(0.61..=0.63).contains(&p) {
            assert!(g(p).abs() > 1e-3, "{p}");
        }
    }
    let t = chain_eval_forward(0.618_033_988_749_894_8, LogMode::FixedPoint).unwrap();
    assert!(t.assumptions.golden_condition <= 1e-12);
}
