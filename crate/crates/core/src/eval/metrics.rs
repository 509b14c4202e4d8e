use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::math::dot_f32;
use crate::mf::EmbeddingMatrix;

fn hits(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> usize {
    ranked.iter().take(k).filter(|j| relevant.contains(j)).count()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

/// `|top-k ∩ relevant| / k`. Lists shorter than `k` still divide by `k`.
pub fn precision_at_k(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(hits(ranked, relevant, k) as f64 / k as f64)
}

/// `|top-k ∩ relevant| / |relevant|`.
pub fn recall_at_k(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::InvalidArgument("recall is undefined for an empty relevant set".into()));
    }
    Ok(hits(ranked, relevant, k) as f64 / relevant.len() as f64)
}

/// `(1/k) Σ_{i=1..k} recall@i` for one editor.
pub fn average_recall_at_k(ranked: &[usize], relevant: &HashSet<usize>, k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(Error::InvalidArgument("recall is undefined for an empty relevant set".into()));
    }
    let mut found = 0usize;
    let mut acc = 0.0;
    for i in 0..k {
        if ranked.get(i).is_some_and(|j| relevant.contains(j)) {
            found += 1;
        }
        acc += found as f64 / relevant.len() as f64;
    }
    Ok(acc / k as f64)
}

/// Mean of [`average_recall_at_k`] over editors given as `(ranked, relevant)`.
pub fn mean_average_recall(editors: &[(Vec<usize>, HashSet<usize>)], k: usize) -> Result<f64> {
    if editors.is_empty() {
        return Err(Error::EmptyInput("no editors"));
    }
    let mut total = 0.0;
    for (ranked, relevant) in editors {
        total += average_recall_at_k(ranked, relevant, k)?;
    }
    Ok(total / editors.len() as f64)
}

/// Mean over unordered pairs of `(1 − cos) / 2`, clamped to [0, 1]. Items
/// with a zero (or missing) content row are left out of the pairs.
pub fn intra_list_diversity(items: &[usize], content: &EmbeddingMatrix) -> Result<f64> {
    if items.len() < 2 {
        return Err(Error::InvalidArgument("diversity needs at least two items".into()));
    }
    let rows: Vec<(&[f32], f64)> = items
        .iter()
        .filter(|&&j| j < content.rows())
        .map(|&j| {
            let r = content.row(j);
            (r, dot_f32(r, r).sqrt())
        })
        .filter(|&(_, n)| n > 0.0)
        .collect();
    let dropped = items.len() - rows.len();
    if dropped > 0 {
        log::debug!("diversity: {dropped} items without content excluded");
    }
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("diversity undefined: fewer than two items with content".into()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let cos = dot_f32(rows[a].0, rows[b].0) / (rows[a].1 * rows[b].1);
            total += ((1.0 - cos) / 2.0).clamp(0.0, 1.0);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// `|∪ lists| / catalog_size`.
pub fn catalog_coverage(lists: &[Vec<usize>], catalog_size: usize) -> Result<f64> {
    if catalog_size == 0 {
        return Err(Error::InvalidArgument("catalog size must be at least 1".into()));
    }
    let union: HashSet<usize> = lists.iter().flatten().copied().collect();
    Ok(union.len() as f64 / catalog_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> HashSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn direct_counts() {
        // relevant {A=0, B=1}, ranked [A, X, B]
        let ranked = [0, 9, 1];
        assert!((precision_at_k(&ranked, &set(&[0, 1]), 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&ranked, &set(&[0, 1]), 3).unwrap(), 1.0);
    }

    #[test]
    fn exact_and_disjoint() {
        let ranked = [3, 4, 5, 6];
        assert_eq!(precision_at_k(&ranked, &set(&[3, 4]), 2).unwrap(), 1.0);
        assert_eq!(recall_at_k(&ranked, &set(&[3, 4]), 2).unwrap(), 1.0);
        assert_eq!(precision_at_k(&ranked, &set(&[1]), 4).unwrap(), 0.0);
        assert_eq!(recall_at_k(&ranked, &set(&[1]), 4).unwrap(), 0.0);
    }

    #[test]
    fn relevant_below_k() {
        assert_eq!(recall_at_k(&[1, 2, 3, 4], &set(&[4]), 3).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(recall_at_k(&[1], &set(&[]), 1).is_err());
        assert!(precision_at_k(&[1], &set(&[1]), 0).is_err());
        assert!(catalog_coverage(&[], 0).is_err());
    }

    #[test]
    fn average_recall_examples() {
        assert_eq!(average_recall_at_k(&[7, 1], &set(&[7]), 2).unwrap(), 1.0);
        assert_eq!(average_recall_at_k(&[1, 7], &set(&[7]), 2).unwrap(), 0.5);
    }

    fn content(rows: &[[f32; 2]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(
            (0..rows.len()).map(|k| format!("Q{k}")).collect(),
            2,
            rows.iter().flatten().copied().collect(),
        )
        .unwrap()
    }

    #[test]
    fn diversity_examples() {
        let c = content(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(intra_list_diversity(&[0, 1], &c).unwrap(), 0.0);
        assert_eq!(intra_list_diversity(&[0, 2], &c).unwrap(), 0.5);
        assert_eq!(intra_list_diversity(&[0, 3], &c).unwrap(), 1.0);
        assert_eq!(intra_list_diversity(&[0, 2, 4], &c).unwrap(), 0.5);
        assert!(intra_list_diversity(&[4, 4], &c).is_err());
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(catalog_coverage(&[vec![0, 1], vec![0, 1], vec![1, 0]], 10).unwrap(), 0.2);
        assert_eq!(catalog_coverage(&[vec![0, 1], vec![2]], 3).unwrap(), 1.0);
    }
}
