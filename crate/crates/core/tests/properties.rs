use proptest::prelude::*;
use scenario_cert::geometry::{clarkson_support_subsample, naive_support_subsample, Halfspace, Polytope};
use scenario_cert::scenario::{
    assemble, estimate_point_violation, estimate_set_violation, ThresholdConstraint, ThresholdSampler,
};
use scenario_cert::sampling::SeededStream;

fn random_sampler(seed: u64, d: usize, rows: usize) -> ThresholdSampler {
    let mut s = SeededStream::new(seed, "property-sampler", 0);
    let constraints = (0..rows)
        .map(|_| {
            let a: Vec<f64> = (0..d).map(|_| s.gaussian(0.0, 1.0).unwrap()).collect();
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            ThresholdConstraint { a, lo: 0.3 * norm, hi: 1.5 * norm }
        })
        .collect();
    ThresholdSampler { d, constraints }
}

fn unit_box(d: usize) -> Polytope {
    Polytope::from_box(&vec![-1.0; d], &vec![1.0; d]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clarkson_matches_naive(seed in any::<u64>(), d in 1usize..5, rows in 1usize..4, m in 1usize..12) {
        let sampler = random_sampler(seed, d, rows);
        let sfs = assemble(&unit_box(d), &sampler, m, seed).unwrap();
        prop_assert_eq!(
            clarkson_support_subsample(&sfs.assembled).unwrap(),
            naive_support_subsample(&sfs.assembled).unwrap()
        );
    }

    #[test]
    fn support_subsample_reproduces_the_set(seed in any::<u64>(), d in 1usize..4, m in 1usize..15) {
        let sampler = random_sampler(seed, d, 2);
        let sfs = assemble(&unit_box(d), &sampler, m, seed).unwrap();
        let support = sfs.support_subsample().unwrap();
        let mut kept = sfs.base.clone();
        for h in sfs.sampled() {
            if support.indices.contains(&h.sample.unwrap()) {
                kept.push(h.clone()).unwrap();
            }
        }
        let mut s = SeededStream::new(seed, "property-directions", 0);
        for _ in 0..8 {
            let dir: Vec<f64> = (0..d).map(|_| s.gaussian(0.0, 1.0).unwrap()).collect();
            let full = sfs.assembled.support_value(&dir).unwrap();
            let reduced = kept.support_value(&dir).unwrap();
            prop_assert!((full - reduced).abs() <= 1e-7, "{full} vs {reduced}");
        }
    }

    #[test]
    fn set_violation_dominates_point_violation(seed in any::<u64>(), d in 1usize..4, m in 1usize..20) {
        let sampler = random_sampler(seed, d, 2);
        let sfs = assemble(&unit_box(d), &sampler, m, seed).unwrap();
        let set = estimate_set_violation(&sfs, &sampler, 400, seed).unwrap();
        let point = estimate_point_violation(&sfs.interior.center, &sampler, 400, seed).unwrap();
        prop_assert!(set.hits >= point.hits);
    }

    #[test]
    fn more_samples_never_enlarge_the_set(seed in any::<u64>(), d in 1usize..4, m in 1usize..15) {
        let sampler = random_sampler(seed, d, 2);
        let small = assemble(&unit_box(d), &sampler, m, seed).unwrap();
        let large = assemble(&unit_box(d), &sampler, m + 5, seed).unwrap();
        let mut s = SeededStream::new(seed, "property-directions", 1);
        for _ in 0..6 {
            let dir: Vec<f64> = (0..d).map(|_| s.gaussian(0.0, 1.0).unwrap()).collect();
            prop_assert!(
                large.assembled.support_value(&dir).unwrap() <= small.assembled.support_value(&dir).unwrap() + 1e-9
            );
        }
    }

    #[test]
    fn violation_estimate_is_deterministic(seed in any::<u64>(), m in 1usize..10) {
        let sampler = random_sampler(seed, 2, 2);
        let sfs = assemble(&unit_box(2), &sampler, m, seed).unwrap();
        let a = estimate_set_violation(&sfs, &sampler, 2500, seed).unwrap();
        let b = estimate_set_violation(&sfs, &sampler, 2500, seed).unwrap();
        prop_assert_eq!(a.hits, b.hits);
    }
}

#[test]
fn halfspace_scaling_does_not_change_support() {
    let mut poly = unit_box(2);
    poly.push(Halfspace::sampled(vec![1.0, 1.0], 1.0, 1)).unwrap();
    poly.push(Halfspace::sampled(vec![2.0, 2.0], 2.0, 2)).unwrap();
    let support = clarkson_support_subsample(&poly).unwrap();
    assert_eq!(support.indices, vec![1]);
}
