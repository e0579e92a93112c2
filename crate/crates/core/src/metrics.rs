//! Per-tree performance measures and their aggregation across replications.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::simgen::StructureSpec;
use crate::tree::TreeNode;

/// Split count per integer `x` bin.
pub type SplitHistogram = BTreeMap<i64, u64>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub split_count: usize,
    pub split_locations: Vec<f64>,
    /// Mean over all points of `(prediction - mu)^2`.
    pub mse_total: f64,
    /// Same, over points with `x <= break_x`.
    pub mse_lower: f64,
    /// Same, over points with `x > break_x`.
    pub mse_upper: f64,
    pub n_lower: usize,
    pub n_upper: usize,
}

/// Scores `tree` against the true means carried by `dataset`. Halves are
/// split at `break_x`; an empty half scores zero.
pub fn summarize_tree(tree: &TreeNode, dataset: &Dataset, break_x: f64) -> Result<ReplicationSummary> {
    let mu = dataset
        .mu()
        .ok_or_else(|| Error::InvalidState("dataset carries no true means".into()))?;
    let (mut lo, mut hi) = (0.0, 0.0);
    let (mut n_lo, mut n_hi) = (0usize, 0usize);
    for (&x, &m) in dataset.x().iter().zip(mu) {
        let d = tree.predict(x) - m;
        if x <= break_x {
            lo += d * d;
            n_lo += 1;
        } else {
            hi += d * d;
            n_hi += 1;
        }
    }
    let per = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    let split_locations = tree.sorted_thresholds();
    Ok(ReplicationSummary {
        split_count: split_locations.len(),
        split_locations,
        mse_total: (lo + hi) / dataset.len() as f64,
        mse_lower: per(lo, n_lo),
        mse_upper: per(hi, n_hi),
        n_lower: n_lo,
        n_upper: n_hi,
    })
}

/// Bins every split threshold to `floor(threshold)`. Thresholds outside
/// `(1, n)` are binned the same way.
pub fn histogram_splits(summaries: &[ReplicationSummary], n: usize) -> SplitHistogram {
    let mut hist = SplitHistogram::new();
    for t in summaries.iter().flat_map(|s| &s.split_locations) {
        let bin = t.floor() as i64;
        if !(1.0..n as f64).contains(t) {
            log::debug!("split threshold {t} outside (1, {n})");
        }
        *hist.entry(bin).or_insert(0) += 1;
    }
    hist
}

/// Number of `boundaries` with at least one threshold within `radius`.
pub fn jumps_recovered(thresholds: &[f64], boundaries: &[f64], radius: f64) -> usize {
    boundaries
        .iter()
        .filter(|&&b| thresholds.iter().any(|&t| (t - b).abs() <= radius))
        .count()
}

/// Mean and standard error of a sample; the standard error is zero for a
/// single value.
pub fn mean_se(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Jump-recovery rates before and after pruning, as fractions of the
/// boundaries averaged over replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRecovery {
    pub radius: f64,
    pub pre_prune_all: f64,
    pub post_prune_all: f64,
    pub pre_prune_lower: f64,
    pub post_prune_lower: f64,
    pub avg_pre_prune_splits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateReport {
    pub label: String,
    pub spec: StructureSpec,
    pub replications: usize,
    pub avg_splits: f64,
    pub avg_splits_se: f64,
    pub split_histogram: SplitHistogram,
    pub avg_mse_total: f64,
    pub avg_mse_total_se: f64,
    pub avg_mse_lower: f64,
    pub avg_mse_lower_se: f64,
    pub avg_mse_upper: f64,
    pub avg_mse_upper_se: f64,
    pub jump_recovery: Option<JumpRecovery>,
}

impl AggregateReport {
    /// Folds replication summaries in the order given.
    pub fn from_summaries(label: impl Into<String>, spec: StructureSpec, summaries: &[ReplicationSummary]) -> Self {
        let (avg_splits, avg_splits_se) = mean_se(summaries.iter().map(|s| s.split_count as f64));
        let (avg_mse_total, avg_mse_total_se) = mean_se(summaries.iter().map(|s| s.mse_total));
        let (avg_mse_lower, avg_mse_lower_se) = mean_se(summaries.iter().map(|s| s.mse_lower));
        let (avg_mse_upper, avg_mse_upper_se) = mean_se(summaries.iter().map(|s| s.mse_upper));
        AggregateReport {
            label: label.into(),
            spec,
            replications: summaries.len(),
            avg_splits,
            avg_splits_se,
            split_histogram: histogram_splits(summaries, spec.n),
            avg_mse_total,
            avg_mse_total_se,
            avg_mse_lower,
            avg_mse_lower_se,
            avg_mse_upper,
            avg_mse_upper_se,
            jump_recovery: None,
        }
    }

    /// Split count summed over bins `lo..=hi`.
    pub fn splits_in(&self, lo: i64, hi: i64) -> u64 {
        self.split_histogram.range(lo..=hi).map(|(_, c)| c).sum()
    }

    pub fn total_splits(&self) -> u64 {
        self.split_histogram.values().sum()
    }
}

/// Ratio of average total MSEs, heteroscedastic over compromise.
pub fn mse_ratio(het: &AggregateReport, compromise: &AggregateReport) -> Result<f64> {
    if het.replications != compromise.replications {
        return Err(Error::InvalidState(format!(
            "reports cover different replication counts ({} vs {})",
            het.replications, compromise.replications
        )));
    }
    if het.spec.mean != compromise.spec.mean {
        return Err(Error::InvalidState(
            "reports use different mean structures".into(),
        ));
    }
    if compromise.avg_mse_total == 0.0 {
        return Err(Error::InvalidState(
            "compromise structure has zero average MSE".into(),
        ));
    }
    Ok(het.avg_mse_total / compromise.avg_mse_total)
}

/// Variances of two estimators of the lower-half mean of flat data with
/// `n_half` points per half: the pooled mean of both halves and the mean of
/// the lower half alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleSplitVariances {
    pub pooled: f64,
    pub lower_only: f64,
}

pub fn single_split_variances(c1: f64, c2: f64, n_half: usize) -> SingleSplitVariances {
    let m = n_half as f64;
    SingleSplitVariances {
        pooled: (c1 * c1 + c2 * c2) / (4.0 * m),
        lower_only: c1 * c1 / m,
    }
}

/// True iff splitting flat data at the variance break makes the lower-half
/// mean more precise than pooling, i.e. `c2^2 > 3 c1^2`.
pub fn single_split_threshold(c1: f64, c2: f64) -> bool {
    c2 * c2 > 3.0 * c1 * c1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::MeanStructure;

    fn flat(y: Vec<f64>) -> Dataset {
        let n = y.len();
        let x = (1..=n).map(|i| i as f64).collect();
        Dataset::new(x, y).unwrap().with_mu(vec![0.0; n]).unwrap()
    }

    #[test]
    fn perfect_fit_scores_zero() {
        let x: Vec<f64> = (1..=1000).map(f64::from).collect();
        let s = StructureSpec::new(MeanStructure::Step, 1.0, 1.0);
        let mu: Vec<f64> = (1..=1000).map(|i| s.mu(i)).collect();
        let d = Dataset::new(x, mu.clone()).unwrap().with_mu(mu).unwrap();
        let tree = TreeNode::from_thresholds(&d, &s.jump_boundaries()).unwrap();
        let r = summarize_tree(&tree, &d, 500.0).unwrap();
        assert_eq!(r.mse_total, 0.0);
        assert_eq!(r.split_count, 9);
    }

    #[test]
    fn root_only_flat_is_mean_squared() {
        let y: Vec<f64> = (0..1000).map(|i| ((i * 37) % 11) as f64 - 4.0).collect();
        let ybar = y.iter().sum::<f64>() / 1000.0;
        let d = flat(y);
        let tree = TreeNode::from_thresholds(&d, &[]).unwrap();
        let r = summarize_tree(&tree, &d, 500.0).unwrap();
        assert!((r.mse_total - ybar * ybar).abs() < 1e-12);
        assert!((r.mse_lower - ybar * ybar).abs() < 1e-12);
        assert_eq!(r.split_count, 0);
    }

    #[test]
    fn single_split_on_step_closed_form() {
        let s = StructureSpec::new(MeanStructure::Step, 1.0, 1.0);
        let x: Vec<f64> = (1..=1000).map(f64::from).collect();
        let mu: Vec<f64> = (1..=1000).map(|i| s.mu(i)).collect();
        // Responses chosen so the leaf means are 2.5 and 8.
        let y: Vec<f64> = (1..=1000).map(|i| if i <= 500 { 2.5 } else { 8.0 }).collect();
        let d = Dataset::new(x, y).unwrap().with_mu(mu).unwrap();
        let tree = TreeNode::from_thresholds(&d, &[500.5]).unwrap();
        let r = summarize_tree(&tree, &d, 500.0).unwrap();
        // Segments 1..5 against 2.5: (2.25 + 0.25 + 0.25 + 2.25 + 6.25) / 5.
        assert!((r.mse_lower - 2.25).abs() < 1e-12);
        // Segments 6..10 against 8: (4 + 1 + 0 + 1 + 4) / 5.
        assert!((r.mse_upper - 2.0).abs() < 1e-12);
        assert!((r.mse_total - 2.125).abs() < 1e-12);
    }

    #[test]
    fn missing_mu_is_invalid_state() {
        let d = Dataset::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        let tree = TreeNode::from_thresholds(&d, &[]).unwrap();
        assert!(matches!(summarize_tree(&tree, &d, 1.0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn histogram_bins_by_floor() {
        let s = |t: Vec<f64>| ReplicationSummary {
            split_count: t.len(),
            split_locations: t,
            mse_total: 0.0,
            mse_lower: 0.0,
            mse_upper: 0.0,
            n_lower: 0,
            n_upper: 0,
        };
        let h = histogram_splits(&[s(vec![500.5, 7.5]), s(vec![500.5])], 1000);
        assert_eq!(h.get(&500), Some(&2));
        assert_eq!(h.get(&7), Some(&1));
        assert!(histogram_splits(&[s(vec![])], 1000).is_empty());
    }

    #[test]
    fn threshold_rule() {
        assert!(!single_split_threshold(1.0, 1.0));
        assert!(single_split_threshold(1.0, 2.0));
        assert!(!single_split_threshold(1.0, 3f64.sqrt()));
        let v = single_split_variances(1.0, 2.0, 500);
        assert!(v.lower_only < v.pooled);
        let v = single_split_variances(1.0, 1.5, 500);
        assert!(v.lower_only > v.pooled);
    }

    #[test]
    fn recovery_counts_within_radius() {
        let b = [100.5, 200.5, 300.5];
        assert_eq!(jumps_recovered(&[110.5, 250.0, 301.5], &b, 10.0), 2);
        assert_eq!(jumps_recovered(&[], &b, 10.0), 0);
    }

    #[test]
    fn ratio_checks_pairing() {
        let spec = StructureSpec::new(MeanStructure::Flat, 1.0, 1.0);
        let mut a = AggregateReport::from_summaries("a", spec, &[]);
        a.avg_mse_total = 2.0;
        let mut b = a.clone();
        b.avg_mse_total = 1.0;
        assert_eq!(mse_ratio(&a, &b).unwrap(), 2.0);
        b.avg_mse_total = 0.0;
        assert!(mse_ratio(&a, &b).is_err());
        b.avg_mse_total = 1.0;
        b.spec.mean = MeanStructure::Step;
        assert!(mse_ratio(&a, &b).is_err());
    }
}
