//! Cost-complexity pruning.
//!
//! [`cp_sequence`] builds the weakest-link path: starting from the full tree,
//! the internal node(s) with the smallest per-leaf SSE gain
//! `g(t) = (SSE(t) - SSE(T_t)) / (|leaves(T_t)| - 1)` are collapsed, and the
//! gain at which that happens becomes the next critical `alpha`. Every
//! subtree on the path minimizes `SSE + alpha * leaves` over its alpha
//! interval.
//!
//! [`cross_validate`] scores each subtree on the path by k-fold
//! cross-validation and [`select_subtree`] picks one with either the
//! minimum-error or the one-standard-error rule.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{grow, GrowthConfig, TreeNode};

/// Gains within this relative distance of the current alpha collapse
/// together.
const ALPHA_MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    #[default]
    MinCv,
    OneSe,
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRule::MinCv => "min",
            SelectionRule::OneSe => "1se",
        })
    }
}

impl FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" | "min_cv" => Ok(SelectionRule::MinCv),
            "1se" | "one_se" => Ok(SelectionRule::OneSe),
            other => Err(Error::Config(format!(
                "unknown prune rule {other:?} (expected `min` or `1se`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PruneConfig {
    pub n_folds: usize,
    pub rule: SelectionRule,
    pub fold_seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            n_folds: 10,
            rule: SelectionRule::MinCv,
            fold_seed: 0,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::invalid("at least two folds are required"));
        }
        if self.n_folds > n {
            return Err(Error::invalid(format!(
                "{} folds requested for {} points",
                self.n_folds, n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CpRow {
    /// Smallest complexity penalty at which this subtree is optimal.
    pub alpha: f64,
    pub n_leaves: usize,
    pub train_sse: f64,
    /// Mean held-out squared error per point.
    pub cv_error: Option<f64>,
    /// Standard error of the per-fold mean errors.
    pub cv_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpPath {
    pub rows: Vec<CpRow>,
    pub root_sse: f64,
    /// Alpha at which each internal node disappears from the path. Nodes
    /// removed along with a collapsing ancestor share the ancestor's alpha.
    #[serde(skip)]
    collapse_alpha: HashMap<u64, f64>,
}

impl CpPath {
    /// The alpha at which internal node `id` is pruned away.
    pub fn collapse_alpha(&self, id: u64) -> Option<f64> {
        self.collapse_alpha.get(&id).copied()
    }

    /// `alpha` of row `k` relative to the root SSE, the usual `cp` scale.
    pub fn relative_cp(&self, k: usize) -> f64 {
        if self.root_sse > 0.0 {
            self.rows[k].alpha / self.root_sse
        } else {
            0.0
        }
    }

    /// Subtree of `full` at row `k` of this path.
    pub fn subtree(&self, full: &TreeNode, k: usize) -> TreeNode {
        self.prune_at(full, self.rows[k].alpha)
    }

    /// Subtree of `full` for penalty `alpha`: every node whose collapse
    /// alpha is at most `alpha` becomes a leaf.
    pub fn prune_at(&self, full: &TreeNode, alpha: f64) -> TreeNode {
        full.collapse_where(&|n: &TreeNode| {
            self.collapse_alpha(n.id).is_some_and(|a| a <= alpha)
        })
    }

    pub fn has_cv(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.cv_error.is_some() && r.cv_se.is_some())
    }

    /// Penalties at which fold trees are evaluated for each row: geometric
    /// means of adjacent critical alphas, with `floor` standing in for a zero
    /// first alpha, and infinity for the root-only row.
    pub fn evaluation_alphas(&self, floor: f64) -> Vec<f64> {
        let m = self.rows.len();
        (0..m)
            .map(|k| {
                if k + 1 == m {
                    f64::INFINITY
                } else {
                    let lo = self.rows[k].alpha.max(floor);
                    (lo * self.rows[k + 1].alpha).sqrt()
                }
            })
            .collect()
    }
}

fn walk_gains(
    node: &TreeNode,
    collapsed: &HashMap<u64, f64>,
    gains: &mut Vec<(u64, f64)>,
) -> (usize, f64) {
    match &node.split {
        Some(s) if !collapsed.contains_key(&node.id) => {
            let (ll, ls) = walk_gains(&s.left, collapsed, gains);
            let (rl, rs) = walk_gains(&s.right, collapsed, gains);
            let leaves = ll + rl;
            let sse = ls + rs;
            gains.push((node.id, (node.node_sse - sse) / (leaves - 1) as f64));
            (leaves, sse)
        }
        _ => (1, node.node_sse),
    }
}

fn find(node: &TreeNode, id: u64) -> Option<&TreeNode> {
    if node.id == id {
        return Some(node);
    }
    let s = node.split.as_ref()?;
    // Heap numbering: walk down along the bits of `id`.
    let shift = match node.id.leading_zeros().checked_sub(id.leading_zeros()) {
        Some(0) | None => return None,
        Some(s) => s,
    };
    if (id >> (shift - 1)) & 1 == 0 {
        find(&s.left, id)
    } else {
        find(&s.right, id)
    }
}

/// Weakest-link pruning path of `full`, from the full tree (alpha 0) down to
/// the root alone.
pub fn cp_sequence(full: &TreeNode) -> CpPath {
    let mut collapsed: HashMap<u64, f64> = HashMap::new();
    let mut rows = Vec::new();
    let mut alpha = 0.0_f64;
    let mut gains = Vec::new();
    loop {
        gains.clear();
        let (leaves, sse) = walk_gains(full, &collapsed, &mut gains);
        let cutoff = alpha + ALPHA_MERGE_TOLERANCE * alpha.abs();
        let due: Vec<u64> = gains
            .iter()
            .filter(|&&(_, g)| g <= cutoff)
            .map(|&(id, _)| id)
            .collect();
        if !due.is_empty() {
            for id in due {
                if let Some(node) = find(full, id) {
                    node.visit(&mut |n| {
                        if n.split.is_some() {
                            collapsed.entry(n.id).or_insert(alpha);
                        }
                    });
                }
            }
            continue;
        }
        rows.push(CpRow {
            alpha,
            n_leaves: leaves,
            train_sse: sse,
            cv_error: None,
            cv_se: None,
        });
        match gains.iter().map(|&(_, g)| g).min_by(f64::total_cmp) {
            Some(g) => alpha = g,
            None => break,
        }
    }
    CpPath {
        rows,
        root_sse: full.node_sse,
        collapse_alpha: collapsed,
    }
}

/// Cost-complexity optimal subtree for `alpha`, computed bottom-up without
/// reference to the weakest-link path. Ties go to the smaller tree.
pub fn optimal_subtree(full: &TreeNode, alpha: f64) -> TreeNode {
    fn go(node: &TreeNode, alpha: f64) -> (TreeNode, f64) {
        let as_leaf = node.node_sse + alpha;
        let Some(s) = &node.split else {
            return (node.clone(), as_leaf);
        };
        let (l, lc) = go(&s.left, alpha);
        let (r, rc) = go(&s.right, alpha);
        let keep = lc + rc;
        if as_leaf <= keep + ALPHA_MERGE_TOLERANCE * as_leaf.abs() {
            (node.collapse_where(&|_| true), as_leaf)
        } else {
            let mut out = node.collapse_where(&|_| true);
            out.split = Some(crate::tree::Split {
                threshold: s.threshold,
                sse_reduction: s.sse_reduction,
                left: Box::new(l),
                right: Box::new(r),
            });
            (out, keep)
        }
    }
    go(full, alpha).0
}

/// Assigns each of `n` points to one of `k` folds: a balanced
/// `0, 1, .., k-1, 0, 1, ..` labelling, uniformly shuffled.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut folds: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    folds.shuffle(&mut rng);
    folds
}

/// Full tree for a dataset together with its cross-validated path.
#[derive(Clone, Debug, Serialize)]
pub struct CvFit {
    pub tree: TreeNode,
    pub path: CpPath,
}

/// Prediction at `x` from `tree` pruned at each of `alphas` (sorted
/// ascending), using `path` for the tree's collapse alphas.
fn predictions_along_path(tree: &TreeNode, path: &CpPath, x: f64, alphas: &[f64], out: &mut Vec<f64>) {
    // (collapse alpha, prediction) from root to leaf; alphas are
    // non-increasing with depth.
    let mut chain: Vec<(f64, f64)> = Vec::new();
    let mut node = tree;
    loop {
        match &node.split {
            Some(s) => {
                let a = path.collapse_alpha(node.id).unwrap_or(f64::NEG_INFINITY);
                chain.push((a, node.prediction));
                node = if x < s.threshold { &s.left } else { &s.right };
            }
            None => {
                chain.push((f64::NEG_INFINITY, node.prediction));
                break;
            }
        }
    }
    out.clear();
    out.extend(alphas.iter().map(|&alpha| {
        chain
            .iter()
            .find(|&&(a, _)| a <= alpha)
            .map(|&(_, p)| p)
            .unwrap_or(chain[chain.len() - 1].1)
    }));
}

/// Grows the full tree on `dataset` and fills the cross-validation columns
/// of its weakest-link path.
///
/// Each fold's tree is grown on the remaining points with the same growth
/// settings and evaluated at the path's evaluation alphas, rescaled by the
/// fraction of points the fold trained on.
pub fn cross_validate(
    dataset: &Dataset,
    growth: &GrowthConfig,
    prune: &PruneConfig,
) -> Result<CvFit> {
    growth.validate()?;
    prune.validate(dataset.len())?;
    let tree = grow(dataset, growth)?;
    let mut path = cp_sequence(&tree);
    let n = dataset.len();
    let k = prune.n_folds;
    let eval = path.evaluation_alphas(growth.cp * path.root_sse);
    let folds = assign_folds(n, k, prune.fold_seed);

    let per_fold: Vec<Result<(usize, Vec<f64>)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            let train_ds = dataset.subset(&train)?;
            let fold_tree = grow(&train_ds, growth)?;
            let fold_path = cp_sequence(&fold_tree);
            let scale = train.len() as f64 / n as f64;
            let alphas: Vec<f64> = eval.iter().map(|a| a * scale).collect();
            let mut sums = vec![0.0; alphas.len()];
            let mut preds = Vec::with_capacity(alphas.len());
            for &i in &test {
                predictions_along_path(&fold_tree, &fold_path, dataset.x()[i], &alphas, &mut preds);
                let y = dataset.y()[i];
                for (s, p) in sums.iter_mut().zip(&preds) {
                    *s += (y - p) * (y - p);
                }
            }
            Ok((test.len(), sums))
        })
        .collect();
    let per_fold = per_fold.into_iter().collect::<Result<Vec<_>>>()?;

    for (j, row) in path.rows.iter_mut().enumerate() {
        let total: f64 = per_fold.iter().map(|(_, s)| s[j]).sum();
        let fold_means: Vec<f64> = per_fold
            .iter()
            .map(|(m, s)| s[j] / *m as f64)
            .collect();
        let kf = fold_means.len() as f64;
        let mean = fold_means.iter().sum::<f64>() / kf;
        let var = fold_means.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (kf - 1.0);
        row.cv_error = Some(total / n as f64);
        row.cv_se = Some((var / kf).sqrt());
    }
    Ok(CvFit { tree, path })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Selection {
    /// Row of the path that was chosen.
    pub index: usize,
    pub alpha: f64,
    pub n_leaves: usize,
}

fn nearly_le(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * b.abs()
}

/// Chooses a row of a cross-validated path.
///
/// `MinCv` takes the smallest `cv_error`; `OneSe` takes the smallest tree
/// whose error is within one standard error of that minimum. Ties go to the
/// smaller tree.
pub fn select_subtree(path: &CpPath, rule: SelectionRule) -> Result<Selection> {
    if path.rows.is_empty() || !path.has_cv() {
        return Err(Error::InvalidState(
            "path has no cross-validation columns".into(),
        ));
    }
    let err = |k: usize| path.rows[k].cv_error.unwrap_or(f64::INFINITY);
    let min_err = (0..path.rows.len()).map(err).fold(f64::INFINITY, f64::min);
    // Rows run from most to fewest leaves, so the last qualifying row is the
    // smallest tree.
    let best = (0..path.rows.len())
        .rev()
        .find(|&k| nearly_le(err(k), min_err))
        .ok_or_else(|| Error::InvalidState("cross-validation errors are all NaN".into()))?;
    let index = match rule {
        SelectionRule::MinCv => best,
        SelectionRule::OneSe => {
            let limit = err(best) + path.rows[best].cv_se.unwrap_or(0.0);
            (0..path.rows.len())
                .rev()
                .find(|&k| nearly_le(err(k), limit))
                .unwrap_or(best)
        }
    };
    Ok(Selection {
        index,
        alpha: path.rows[index].alpha,
        n_leaves: path.rows[index].n_leaves,
    })
}

/// A grown, cross-validated and pruned tree.
#[derive(Clone, Debug, Serialize)]
pub struct PrunedFit {
    pub full: TreeNode,
    pub path: CpPath,
    pub selection: Selection,
    pub pruned: TreeNode,
}

pub fn fit_pruned(dataset: &Dataset, growth: &GrowthConfig, prune: &PruneConfig) -> Result<PrunedFit> {
    let CvFit { tree, path } = cross_validate(dataset, growth, prune)?;
    let selection = select_subtree(&path, prune.rule)?;
    let pruned = path.subtree(&tree, selection.index);
    Ok(PrunedFit {
        full: tree,
        path,
        selection,
        pruned,
    })
}
