//! Classification, link-prediction and ranking metrics, plus the paired
//! significance test used in reports.

use std::collections::HashSet;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Fraction of `mask` nodes whose prediction equals the truth.
pub fn accuracy(pred: &[usize], truth: &[usize], mask: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if mask.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation mask".into()));
    }
    let mut correct = 0usize;
    for &i in mask {
        if i >= pred.len() {
            return Err(Error::OutOfRange {
                index: i,
                len: pred.len(),
            });
        }
        correct += usize::from(pred[i] == truth[i]);
    }
    Ok(correct as f64 / mask.len() as f64)
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(
            "both classes must be present".into(),
        ));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as `P(s⁺ > s⁻) + ½P(s⁺ = s⁻)`, from mid-ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (1-based start+1..=end) share their mean.
        let mid = (start + 1 + end) as f64 / 2.0;
        let hits = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += mid * hits as f64;
        start = end;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Average precision over the list sorted by descending score, ties kept in
/// index order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(ap / pos as f64)
}

/// `|positives ∩ topk[..k]| / |positives|`; zero when there are no positives.
pub fn recall_at_k(topk: &[usize], positives: &HashSet<usize>, k: usize) -> f64 {
    if positives.is_empty() {
        return 0.0;
    }
    let hits = topk
        .iter()
        .take(k)
        .filter(|i| positives.contains(i))
        .count();
    hits as f64 / positives.len() as f64
}

/// Binary-relevance NDCG@k with the ideal list holding
/// `min(k, |positives|)` hits.
pub fn ndcg_at_k(topk: &[usize], positives: &HashSet<usize>, k: usize) -> f64 {
    let ideal_hits = k.min(positives.len());
    if ideal_hits == 0 {
        return 0.0;
    }
    let disc = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = topk
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| positives.contains(i))
        .map(|(r, _)| disc(r))
        .sum();
    let idcg: f64 = (0..ideal_hits).map(disc).sum();
    dcg / idcg
}

/// Two-sided Wilcoxon signed-rank p-value under the normal approximation
/// with tie correction. Zero differences are dropped.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<f64> {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nz.len() < 6 {
        return Err(Error::InvalidArgument(format!(
            "need at least 6 non-zero differences, got {}",
            nz.len()
        )));
    }
    if nz.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("non-finite difference".into()));
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = nz.len();
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && nz[end].abs() == nz[start].abs() {
            end += 1;
        }
        let mid = (start + 1 + end) as f64 / 2.0;
        w_plus += mid * nz[start..end].iter().filter(|&&d| d > 0.0).count() as f64;
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0))
}

/// Sample mean and standard deviation (`n − 1` denominator; zero for `n < 2`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[usize]) -> HashSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn accuracy_extremes() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0], &[1, 2, 3], &[0, 2]).unwrap(), 0.0);
        assert!(accuracy(&[0], &[0], &[]).is_err());
    }

    #[test]
    fn auc_extremes() {
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &labels).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn ap_extremes() {
        assert_eq!(
            average_precision(&[3.0, 2.0, 1.0], &[true, true, false]).unwrap(),
            1.0
        );
        let ap = average_precision(&[3.0, 2.0, 1.0, 0.0], &[false, false, false, true]).unwrap();
        assert!((ap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn recall_cases() {
        assert!((recall_at_k(&[0, 9], &set(&[0, 1, 2]), 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&[3, 1, 2, 0], &set(&[0, 1]), 10), 1.0);
    }

    #[test]
    fn ndcg_hand_case() {
        let v = ndcg_at_k(&[5, 9], &set(&[5, 6]), 2);
        assert!((v - 0.613147).abs() < 1e-6, "{v}");
        assert_eq!(ndcg_at_k(&[1, 2], &set(&[1, 2, 3]), 2), 1.0);
        assert_eq!(ndcg_at_k(&[7, 8], &set(&[1]), 2), 0.0);
    }

    #[test]
    fn wilcoxon_extremes() {
        let all_pos: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
        assert!(wilcoxon_signed_rank(&all_pos).unwrap() < 0.01);
        let sym = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        assert!((wilcoxon_signed_rank(&sym).unwrap() - 1.0).abs() < 1e-12);
        assert!(wilcoxon_signed_rank(&[1.0, 0.0, 2.0]).is_err());
    }
}
