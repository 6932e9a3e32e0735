use crate::error::{Error, Result};
use crate::pruning::LayerMask;

/// 1-based ranks; tied values share the average of their positions.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 values, got {}", a.len())));
    }
    let ra = rank_average(a);
    let rb = rank_average(b);
    let mean = (a.len() as f64 + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean).powi(2);
        vb += (y - mean).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Degenerate("all values tied".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Rank correlation between `|initial|` and `|final|` over the weights kept
/// by `mask`.
pub fn spearman_masked(initial: &[f64], final_: &[f64], mask: &LayerMask) -> Result<f64> {
    if initial.len() != mask.len() || final_.len() != mask.len() {
        return Err(Error::Shape("weights and mask differ in length".into()));
    }
    let kept = mask.kept_indices();
    if kept.len() < 2 {
        return Err(Error::Domain(format!("ticket of size {} has no rank order", kept.len())));
    }
    let a: Vec<f64> = kept.iter().map(|&i| initial[i].abs()).collect();
    let b: Vec<f64> = kept.iter().map(|&i| final_[i].abs()).collect();
    spearman(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_reversed() {
        let a = [0.1, 0.5, 0.2, 0.9];
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let rev = [0.9, 0.1, 0.5, 0.0];
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_example() {
        // d = (-2, 1, 1), Σd² = 6, ρ = 1 − 6·6/(3·8) = −0.5.
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(rank_average(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn masked_uses_magnitudes_of_survivors() {
        let mask = LayerMask::from_bools("l", vec![4], &[true, false, true, true]).unwrap();
        let init = [-1.0, 100.0, 2.0, -3.0];
        let fin = [0.5, -7.0, -1.0, 2.0];
        assert!((spearman_masked(&init, &fin, &mask).unwrap() - 1.0).abs() < 1e-15);
        let tiny = LayerMask::from_bools("l", vec![4], &[true, false, false, false]).unwrap();
        assert!(spearman_masked(&init, &fin, &tiny).is_err());
    }

    #[test]
    fn constant_input_is_degenerate() {
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
    }
}
