//! AUC and fold aggregation.

/// Rank-based AUC (Mann-Whitney U), tied scores counting one half.
/// `None` unless both labels occur.
pub fn auc(scores: &[(f64, u8)]) -> Option<f64> {
    let pos = scores.iter().filter(|s| s.1 == 1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, u8)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their average.
        let avg = (i + 1 + j) as f64 / 2.0;
        rank_sum += avg * sorted[i..j].iter().filter(|s| s.1 == 1).count() as f64;
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[(0.9, 1), (0.8, 0), (0.7, 1), (0.6, 0)]), Some(0.75));
        assert_eq!(auc(&[(0.9, 1), (0.1, 0)]), Some(1.0));
        assert_eq!(auc(&[(0.5, 1), (0.5, 0)]), Some(0.5));
        assert_eq!(auc(&[(0.5, 1), (0.7, 1)]), None);
    }

    #[test]
    fn auc_of_uninformative_scores_is_half() {
        // Deterministic interleaving: score independent of label.
        let s: Vec<(f64, u8)> = (0..2000).map(|i| ((i / 2) as f64, (i % 2) as u8)).collect();
        assert!((auc(&s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_std_basic() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[0.5]), Some((0.5, 0.0)));
        let (m, s) = mean_std(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
