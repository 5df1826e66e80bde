//! Ranking and classification metrics plus the paired significance test.

use std::collections::HashSet;

use structlearn::metrics::{
    average_precision, ndcg_at_k, recall_at_k, roc_auc, wilcoxon_signed_rank,
};

fn main() -> structlearn::Result<()> {
    let scores = [0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2];
    let labels = [true, true, false, true, false, false, true, false];
    println!("auc {:.4}", roc_auc(&scores, &labels)?);
    println!("ap  {:.4}", average_precision(&scores, &labels)?);

    let ranked = [3, 7, 1, 9, 4];
    let relevant: HashSet<usize> = [1, 3, 5].into_iter().collect();
    for k in [1, 3, 5] {
        println!(
            "@{k}: recall {:.4}, ndcg {:.4}",
            recall_at_k(&ranked, &relevant, k),
            ndcg_at_k(&ranked, &relevant, k)
        );
    }

    let diffs = [
        0.021, 0.013, -0.004, 0.018, 0.009, 0.027, 0.011, -0.002, 0.016, 0.008,
    ];
    println!("wilcoxon p = {:.4}", wilcoxon_signed_rank(&diffs)?);
    Ok(())
}
