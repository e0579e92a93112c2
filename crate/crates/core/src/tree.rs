//! Regression trees on a single numeric predictor.
//!
//! Splits are found by exhaustive search over the midpoints between
//! consecutive distinct `x` values, keeping the candidate with the largest
//! reduction in the sum of squared errors. Growth follows the usual
//! recursive-partitioning stopping rules: a node is split only if it holds
//! at least `minsplit` points, both children hold at least `minbucket`
//! points and the depth limit has not been reached. The complexity
//! parameter `cp` is applied according to [`CpRule`].

use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance (against the node SSE) under which two candidate
/// reductions are treated as tied. Ties go to the smaller threshold.
const TIE_TOLERANCE: f64 = 1e-12;

/// How `cp` limits growth. Both rules measure SSE gain against
/// `cp * SSE(root)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CpRule {
    /// rpart's rule: grow without the threshold, then collapse every subtree
    /// whose SSE gain per split is at most the threshold. A weak split
    /// survives when the splits beneath it make up for it.
    #[default]
    Subtree,
    /// Stop at any split whose own SSE reduction is below the threshold.
    PerSplit,
}

impl fmt::Display for CpRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CpRule::Subtree => "subtree",
            CpRule::PerSplit => "per_split",
        })
    }
}

impl FromStr for CpRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subtree" => Ok(CpRule::Subtree),
            "per_split" | "split" => Ok(CpRule::PerSplit),
            other => Err(Error::Config(format!(
                "unknown cp rule {other:?} (expected `subtree` or `per_split`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthConfig {
    /// Minimum SSE gain, as a fraction of the root SSE; see [`CpRule`].
    pub cp: f64,
    pub cp_rule: CpRule,
    /// Minimum number of points in a leaf.
    pub minbucket: usize,
    /// Minimum number of points a node needs before a split is attempted.
    pub minsplit: usize,
    /// Maximum depth of any node; the root has depth 0.
    pub max_depth: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            cp: 0.01,
            cp_rule: CpRule::Subtree,
            minbucket: 7,
            minsplit: 20,
            max_depth: 30,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cp) {
            return Err(Error::Config(format!("cp must lie in [0, 1], got {}", self.cp)));
        }
        if self.minbucket < 1 {
            return Err(Error::Config("minbucket must be at least 1".into()));
        }
        if self.minsplit < 2 {
            return Err(Error::Config("minsplit must be at least 2".into()));
        }
        // Node ids double per level and must fit in a u64.
        if self.max_depth > 62 {
            return Err(Error::Config("max_depth must be at most 62".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub sse_reduction: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Split {
    /// Points with `x < threshold` go left, all others right.
    pub threshold: f64,
    pub sse_reduction: f64,
    pub left: Box<TreeNode>,
    pub right: Box<TreeNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeNode {
    /// Heap-style node number: the root is 1 and the children of node `k`
    /// are `2k` and `2k + 1`. Ids survive pruning, so subtrees can be
    /// compared node for node.
    pub id: u64,
    pub depth: usize,
    pub count: usize,
    /// Mean of the node's training responses.
    pub prediction: f64,
    /// Sum of squared deviations of the node's training responses from
    /// `prediction`.
    pub node_sse: f64,
    /// Smallest and largest training `x` in the node.
    pub x_min: f64,
    pub x_max: f64,
    pub split: Option<Split>,
}

fn check_range(dataset: &Dataset, range: &Range<usize>) -> Result<()> {
    if range.start >= range.end {
        return Err(Error::invalid("empty index range"));
    }
    if range.end > dataset.len() {
        return Err(Error::invalid(format!(
            "index range {}..{} exceeds dataset size {}",
            range.start,
            range.end,
            dataset.len()
        )));
    }
    Ok(())
}

fn mean(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let first = y.iter().sum::<f64>() / n;
    // Second pass removes most of the rounding left by the first.
    first + y.iter().map(|v| v - first).sum::<f64>() / n
}

fn sse_about(y: &[f64], center: f64) -> f64 {
    y.iter().map(|v| (v - center) * (v - center)).sum()
}

/// Sum of squared deviations from the mean of `y` over `range`.
pub fn node_sse(dataset: &Dataset, range: Range<usize>) -> Result<f64> {
    check_range(dataset, &range)?;
    let y = &dataset.y()[range];
    Ok(sse_about(y, mean(y)))
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mut m = (lo + hi) / 2.0;
    if !m.is_finite() {
        m = lo / 2.0 + hi / 2.0;
    }
    // Adjacent floats: the midpoint may round down onto `lo`, which would
    // send `lo` to the right.
    if m <= lo {
        m = hi;
    }
    m
}

/// Finds the best split of the points in `range` (assumed sorted).
fn scan_split(
    x: &[f64],
    y: &[f64],
    center: f64,
    node_sse: f64,
    minbucket: usize,
) -> Option<SplitCandidate> {
    let n = x.len();
    let minbucket = minbucket.max(1);
    if n < 2 * minbucket {
        return None;
    }
    let tie = TIE_TOLERANCE * node_sse;
    let mut best: Option<SplitCandidate> = None;
    let mut left_dev = 0.0;
    for i in 0..n - 1 {
        left_dev += y[i] - center;
        let left_count = i + 1;
        let right_count = n - left_count;
        if left_count < minbucket {
            continue;
        }
        if right_count < minbucket {
            break;
        }
        if x[i] == x[i + 1] {
            continue;
        }
        // SSE(parent) - SSE(left) - SSE(right) = nL nR / n (meanL - meanR)^2,
        // written in terms of the centered left sum.
        let reduction =
            left_dev * left_dev * n as f64 / (left_count as f64 * right_count as f64);
        if best.is_none_or(|b| reduction > b.sse_reduction + tie) {
            best = Some(SplitCandidate {
                threshold: midpoint(x[i], x[i + 1]),
                sse_reduction: reduction,
                left_count,
                right_count,
            });
        }
    }
    best
}

/// Best SSE-reducing split of the points in `range`, honouring `minsplit`
/// and `minbucket`. Returns `None` when the range is smaller than
/// `minsplit` or no threshold leaves `minbucket` points on both sides. The
/// `cp` filter is not applied here.
pub fn best_split(
    dataset: &Dataset,
    range: Range<usize>,
    config: &GrowthConfig,
) -> Result<Option<SplitCandidate>> {
    check_range(dataset, &range)?;
    let x = &dataset.x()[range.clone()];
    if x.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("x is not sorted within the range"));
    }
    if range.len() < config.minsplit {
        return Ok(None);
    }
    let y = &dataset.y()[range];
    let center = mean(y);
    Ok(scan_split(x, y, center, sse_about(y, center), config.minbucket))
}

struct Grower<'a> {
    x: &'a [f64],
    y: &'a [f64],
    config: GrowthConfig,
    /// Splits reducing SSE by less than this are not made.
    min_reduction: f64,
    /// Nodes with SSE at or below this are not split.
    min_node_sse: f64,
}

impl Grower<'_> {
    fn node(&self, range: Range<usize>, depth: usize, id: u64) -> TreeNode {
        let x = &self.x[range.clone()];
        let y = &self.y[range.clone()];
        let prediction = mean(y);
        let node_sse = sse_about(y, prediction);
        let mut node = TreeNode {
            id,
            depth,
            count: y.len(),
            prediction,
            node_sse,
            x_min: x[0],
            x_max: x[x.len() - 1],
            split: None,
        };

        if y.len() < self.config.minsplit || depth >= self.config.max_depth {
            return node;
        }
        let constant = y.iter().all(|&v| v == y[0]);
        if constant || node_sse <= self.min_node_sse {
            return node;
        }
        let Some(cand) = scan_split(x, y, prediction, node_sse, self.config.minbucket) else {
            return node;
        };
        if cand.sse_reduction <= 0.0 || cand.sse_reduction < self.min_reduction {
            return node;
        }
        let mid = range.start + cand.left_count;
        let left = self.node(range.start..mid, depth + 1, 2 * id);
        let right = self.node(mid..range.end, depth + 1, 2 * id + 1);
        node.split = Some(Split {
            threshold: cand.threshold,
            sse_reduction: cand.sse_reduction,
            left: Box::new(left),
            right: Box::new(right),
        });
        node
    }
}

/// Grows the unpruned tree for `dataset`.
pub fn grow(dataset: &Dataset, config: &GrowthConfig) -> Result<TreeNode> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("cannot grow a tree on an empty dataset"));
    }
    let root_sse = node_sse(dataset, 0..dataset.len())?;
    let threshold = config.cp * root_sse;
    match config.cp_rule {
        CpRule::PerSplit => {
            let grower = Grower {
                x: dataset.x(),
                y: dataset.y(),
                config: *config,
                min_reduction: threshold,
                min_node_sse: 0.0,
            };
            Ok(grower.node(0..dataset.len(), 0, 1))
        }
        CpRule::Subtree => {
            // A subtree's gain per split never exceeds its root's SSE, so
            // nodes with SSE at or below the threshold would be collapsed
            // anyway and are not grown.
            let grower = Grower {
                x: dataset.x(),
                y: dataset.y(),
                config: *config,
                min_reduction: 0.0,
                min_node_sse: threshold,
            };
            let full = grower.node(0..dataset.len(), 0, 1);
            Ok(crate::prune::optimal_subtree(&full, threshold))
        }
    }
}

impl TreeNode {
    /// Builds a tree with splits at exactly the given thresholds, fitting the
    /// sample mean in each cell. Thresholds are placed by recursive bisection
    /// of the sorted threshold list.
    pub fn from_thresholds(dataset: &Dataset, thresholds: &[f64]) -> Result<TreeNode> {
        let mut t: Vec<f64> = thresholds.to_vec();
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("thresholds must be finite"));
        }
        t.sort_by(f64::total_cmp);
        t.dedup();
        fn build(x: &[f64], y: &[f64], t: &[f64], start: usize, depth: usize, id: u64) -> Result<TreeNode> {
            let prediction = mean(y);
            let mut node = TreeNode {
                id,
                depth,
                count: y.len(),
                prediction,
                node_sse: sse_about(y, prediction),
                x_min: x[0],
                x_max: x[x.len() - 1],
                split: None,
            };
            if t.is_empty() {
                return Ok(node);
            }
            let m = t.len() / 2;
            let threshold = t[m];
            let cut = x.partition_point(|&v| v < threshold);
            if cut == 0 || cut == x.len() {
                return Err(Error::invalid(format!(
                    "threshold {threshold} leaves an empty cell (node starting at index {start})"
                )));
            }
            let left = build(&x[..cut], &y[..cut], &t[..m], start, depth + 1, 2 * id)?;
            let right = build(&x[cut..], &y[cut..], &t[m + 1..], start + cut, depth + 1, 2 * id + 1)?;
            node.split = Some(Split {
                threshold,
                sse_reduction: node.node_sse - left.node_sse - right.node_sse,
                left: Box::new(left),
                right: Box::new(right),
            });
            Ok(node)
        }
        build(dataset.x(), dataset.y(), &t, 0, 0, 1)
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Prediction for `x`: descend left iff `x < threshold`.
    pub fn predict(&self, x: f64) -> f64 {
        self.leaf_for(x).prediction
    }

    pub fn leaf_for(&self, x: f64) -> &TreeNode {
        let mut node = self;
        while let Some(split) = &node.split {
            node = if x < split.threshold {
                &split.left
            } else {
                &split.right
            };
        }
        node
    }

    pub fn n_leaves(&self) -> usize {
        match &self.split {
            None => 1,
            Some(s) => s.left.n_leaves() + s.right.n_leaves(),
        }
    }

    pub fn n_splits(&self) -> usize {
        self.n_leaves() - 1
    }

    /// Sum of leaf SSEs: the training error of the tree.
    pub fn leaves_sse(&self) -> f64 {
        match &self.split {
            None => self.node_sse,
            Some(s) => s.left.leaves_sse() + s.right.leaves_sse(),
        }
    }

    /// Split thresholds in pre-order.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let Some(s) = &n.split {
                out.push(s.threshold);
            }
        });
        out
    }

    /// Split thresholds in increasing order.
    pub fn sorted_thresholds(&self) -> Vec<f64> {
        let mut t = self.thresholds();
        t.sort_by(f64::total_cmp);
        t
    }

    /// Ids of the internal nodes, in pre-order.
    pub fn internal_ids(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if n.split.is_some() {
                out.push(n.id);
            }
        });
        out
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a TreeNode, out: &mut Vec<&'a TreeNode>) {
            match &n.split {
                None => out.push(n),
                Some(s) => {
                    walk(&s.left, out);
                    walk(&s.right, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        if let Some(s) = &self.split {
            s.left.visit(f);
            s.right.visit(f);
        }
    }

    /// Copy of the tree with the listed nodes turned into leaves.
    pub fn collapse_where(&self, collapse: &impl Fn(&TreeNode) -> bool) -> TreeNode {
        let split = match &self.split {
            Some(s) if !collapse(self) => Some(Split {
                threshold: s.threshold,
                sse_reduction: s.sse_reduction,
                left: Box::new(s.left.collapse_where(collapse)),
                right: Box::new(s.right.collapse_where(collapse)),
            }),
            _ => None,
        };
        TreeNode {
            split,
            ..self.clone_shallow()
        }
    }

    fn clone_shallow(&self) -> TreeNode {
        TreeNode {
            id: self.id,
            depth: self.depth,
            count: self.count,
            prediction: self.prediction,
            node_sse: self.node_sse,
            x_min: self.x_min,
            x_max: self.x_max,
            split: None,
        }
    }

    /// Indented text rendering, one node per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        fn walk(n: &TreeNode, cond: &str, out: &mut String) {
            let indent = "  ".repeat(n.depth);
            let leaf = if n.is_leaf() { " *" } else { "" };
            let _ = writeln!(
                out,
                "{indent}{}) {cond} n={} sse={:.6} mean={:.6}{leaf}",
                n.id, n.count, n.node_sse, n.prediction
            );
            if let Some(s) = &n.split {
                walk(&s.left, &format!("x < {}", s.threshold), out);
                walk(&s.right, &format!("x >= {}", s.threshold), out);
            }
        }
        walk(self, "root", &mut out);
        out
    }
}
