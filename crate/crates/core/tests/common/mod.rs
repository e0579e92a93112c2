//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use hettree::tree::TreeNode;
use hettree::{Dataset, GrowthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sse(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|y| (y - m) * (y - m)).sum()
}

pub struct BruteSplit {
    pub threshold: f64,
    pub reduction: f64,
}

/// Tries every cut between distinct x values and recomputes both child SSEs
/// from scratch. Ties (within `1e-9` relative) go to the smaller threshold.
pub fn brute_best_split(x: &[f64], y: &[f64], minsplit: usize, minbucket: usize) -> Option<BruteSplit> {
    let n = x.len();
    if n < minsplit {
        return None;
    }
    let parent = sse(y);
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for cut in 1..n {
        if x[cut - 1] == x[cut] || cut < minbucket || n - cut < minbucket {
            continue;
        }
        let red = parent - sse(&y[..cut]) - sse(&y[cut..]);
        cands.push(((x[cut - 1] + x[cut]) / 2.0, red));
    }
    let max = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * parent.max(f64::MIN_POSITIVE);
    cands
        .into_iter()
        .find(|c| c.1 >= max - tol)
        .map(|(threshold, reduction)| BruteSplit { threshold, reduction })
}

/// Every subtree obtained by collapsing some set of internal nodes of `t`.
pub fn all_prunings(t: &TreeNode) -> Vec<TreeNode> {
    let mut leaf = t.clone();
    leaf.split = None;
    let mut out = vec![leaf];
    if let Some(s) = &t.split {
        for l in all_prunings(&s.left) {
            for r in all_prunings(&s.right) {
                let mut node = t.clone();
                let sp = node.split.as_mut().unwrap();
                *sp.left = l.clone();
                *sp.right = r;
                out.push(node);
            }
        }
    }
    out
}

/// Minimizer of `SSE + alpha * leaves` over all prunings, smallest tree on
/// ties.
pub fn brute_optimal(t: &TreeNode, alpha: f64) -> TreeNode {
    let cost = |s: &TreeNode| s.leaves_sse() + alpha * s.n_leaves() as f64;
    let all = all_prunings(t);
    let best = all.iter().map(cost).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs().max(1e-12);
    all.into_iter()
        .filter(|s| cost(s) <= best + tol)
        .min_by_key(|s| s.n_leaves())
        .unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, discrete: bool) -> Dataset {
    let mut x: Vec<f64> = (0..n)
        .map(|_| if discrete { rng.random_range(0..n as i32) as f64 } else { rng.random::<f64>() * 100.0 })
        .collect();
    x.sort_by(f64::total_cmp);
    let y = (0..n)
        .map(|_| if discrete { rng.random_range(-3..4) as f64 } else { rng.random::<f64>() * 10.0 - 5.0 })
        .collect();
    Dataset::new(x, y).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small unconstrained trees with at most eight leaves.
pub fn small_tree_config() -> GrowthConfig {
    GrowthConfig {
        cp: 0.0,
        minbucket: 2,
        minsplit: 4,
        max_depth: 3,
        ..GrowthConfig::default()
    }
}
