use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structlearn::metrics::*;

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        for j in (0..scores.len()).filter(|&j| !labels[j]) {
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

fn precision_at_hits(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut hits, mut sum) = (0.0, 0.0);
    for (r, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1.0;
            sum += hits / (r + 1) as f64;
        }
    }
    sum / hits
}

#[test]
fn accuracy_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
    let pred: Vec<usize> = (0..100).map(|_| rng.random_range(0..4)).collect();
    let mask: Vec<usize> = (0..100).filter(|i| i % 3 != 0).collect();
    let hits = mask.iter().filter(|&&i| pred[i] == truth[i]).count();
    assert_eq!(
        accuracy(&pred, &truth, &mask).unwrap(),
        hits as f64 / mask.len() as f64
    );
    assert_eq!(accuracy(&truth, &truth, &mask).unwrap(), 1.0);
    assert!(accuracy(&pred, &truth, &[]).is_err());
}

#[test]
fn auc_edge_cases() {
    assert_eq!(
        roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(),
        1.0
    );
    assert_eq!(
        roc_auc(&[0.5; 6], &[true, false, true, false, true, false]).unwrap(),
        0.5
    );
    assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
}

#[test]
fn ap_edge_cases() {
    assert_eq!(
        average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(),
        1.0
    );
    let n = 7;
    let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
    let mut labels = vec![false; n];
    labels[n - 1] = true;
    assert!((average_precision(&scores, &labels).unwrap() - 1.0 / n as f64).abs() < 1e-15);
}

#[test]
fn auc_and_ap_match_oracles_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scores: Vec<f64> = (0..50).map(|_| rng.random_range(0..6) as f64).collect();
    let labels: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
    assert!((roc_auc(&scores, &labels).unwrap() - pairwise_auc(&scores, &labels)).abs() < 1e-12);
    assert!(
        (average_precision(&scores, &labels).unwrap() - precision_at_hits(&scores, &labels)).abs()
            < 1e-12
    );
}

#[test]
fn recall_examples() {
    let pos: HashSet<usize> = [1, 2, 3].into_iter().collect();
    assert!((recall_at_k(&[1, 9], &pos, 2) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(recall_at_k(&[5, 3, 4, 2, 1], &pos, 10), 1.0);
}

#[test]
fn ndcg_examples() {
    let pos: HashSet<usize> = [1, 2].into_iter().collect();
    assert!((ndcg_at_k(&[1, 9], &pos, 2) - 0.613147).abs() < 1e-6);
    assert_eq!(ndcg_at_k(&[2, 1], &pos, 2), 1.0);
    assert_eq!(ndcg_at_k(&[7, 8], &pos, 2), 0.0);
}

#[test]
fn wilcoxon_examples() {
    assert!(wilcoxon_signed_rank(&[0.5; 20]).unwrap() < 0.01);
    let sym = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
    assert!((wilcoxon_signed_rank(&sym).unwrap() - 1.0).abs() < 1e-12);
    assert!(wilcoxon_signed_rank(&[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 5.0]).is_err());
}

#[test]
fn mean_std_sample_denominator() {
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![(0u8..5).prop_map(f64::from), -10.0f64..10.0], n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(s, mut l)| {
                l[0] = true;
                l[1] = false;
                (s, l)
            })
    })
}

proptest! {
    #[test]
    fn auc_matches_pairs((s, l) in scored_labels()) {
        prop_assert!((roc_auc(&s, &l).unwrap() - pairwise_auc(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn ap_matches_precision_oracle((s, l) in scored_labels()) {
        prop_assert!((average_precision(&s, &l).unwrap() - precision_at_hits(&s, &l)).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_map((s, l) in scored_labels()) {
        let t: Vec<f64> = s.iter().map(|x| (0.3 * x).exp() + 2.0).collect();
        prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
    }

    #[test]
    fn recall_monotone_and_ndcg_bounded(
        ranked in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle(),
        pos in prop::collection::hash_set(0usize..30, 1..10),
    ) {
        let mut prev = 0.0;
        for k in 1..=30 {
            let r = recall_at_k(&ranked, &pos, k);
            prop_assert!(r >= prev);
            prev = r;
            let n = ndcg_at_k(&ranked, &pos, k);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        }
    }
}
