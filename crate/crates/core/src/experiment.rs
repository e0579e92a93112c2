//! Replicated simulation sweeps.
//!
//! A sweep expands a [`Scenario`] into a list of structures, draws one set of
//! baseline errors per replication, and for every structure realizes the
//! coupled dataset, grows and cross-validates a tree, prunes it, and scores
//! it against the true means. Replications run in parallel; results are
//! reduced in replication order so the output does not depend on
//! scheduling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{
    jumps_recovered, mean_se, mse_ratio, summarize_tree, AggregateReport, JumpRecovery,
    ReplicationSummary,
};
use crate::prune::{fit_pruned, PruneConfig};
use crate::simgen::{baseline_replication, compromise_sigma, realize_errors, MeanStructure, StructureSpec};
use crate::tree::{GrowthConfig, TreeNode};

/// Growth `cp` used when pruning alone is left to remove splits.
pub const LOW_CP: f64 = 1e-6;

/// A split within this many x-units of a jump counts as finding it.
pub const DEFAULT_JUMP_RADIUS: f64 = 10.0;

/// Longest sweep accepted from text.
const MAX_SWEEP_LEN: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Flat and step heteroscedastic structures with their compromise
    /// counterparts, over the c2 sweep.
    Table1,
    /// Same structures as `Table1`; the MSE ratio is the headline output.
    Table2,
    /// FH(c), SC(c) and SH(c) for c in {1, 5, 10} by default.
    FigSplits,
    /// Same structures as `Table2`, plotted as MSE by half.
    FigMse,
    /// Step mean with a noiseless lower half.
    ZeroVarianceLower,
    /// Growth with `cp` near zero, then the usual pruning.
    RegrowLowCp,
    /// One mean structure, `c1`, and each swept `c2`.
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Table1,
        Scenario::Table2,
        Scenario::FigSplits,
        Scenario::FigMse,
        Scenario::ZeroVarianceLower,
        Scenario::RegrowLowCp,
        Scenario::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Table1 => "table1",
            Scenario::Table2 => "table2",
            Scenario::FigSplits => "fig_splits",
            Scenario::FigMse => "fig_mse",
            Scenario::ZeroVarianceLower => "zero_variance_lower",
            Scenario::RegrowLowCp => "regrow_low_cp",
            Scenario::Custom => "custom",
        }
    }

    fn default_sweep(self) -> Vec<f64> {
        match self {
            Scenario::FigSplits => vec![1.0, 5.0, 10.0],
            _ => (1..=10).map(f64::from).collect(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// Parses a list of standard deviations: `sweep` (1 through 10), a single
/// number, a comma-separated list, or an inclusive integer range `a..b`.
/// Duplicates are dropped, keeping the first occurrence.
pub fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |msg: String| Error::Config(format!("invalid c2 sweep {text:?}: {msg}"));
    let values: Vec<f64> = if text == "sweep" {
        (1..=10).map(f64::from).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad("range start is not an integer".into()))?;
        let b: u64 = b.trim().parse().map_err(|_| bad("range end is not an integer".into()))?;
        if b < a {
            return Err(bad("range end precedes start".into()));
        }
        if b - a >= MAX_SWEEP_LEN as u64 {
            return Err(bad(format!("more than {MAX_SWEEP_LEN} values")));
        }
        (a..=b).map(|v| v as f64).collect()
    } else {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() > MAX_SWEEP_LEN {
            return Err(bad(format!("more than {MAX_SWEEP_LEN} values")));
        }
        parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("{:?} is not a number", p.trim())))
            })
            .collect::<Result<_>>()?
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(bad(format!("{v} is not a finite non-negative value")));
    }
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Mean structure for `custom` and `regrow_low_cp`; other scenarios fix
    /// their own. Defaults to flat for `custom` and step for
    /// `regrow_low_cp`.
    pub mean: Option<MeanStructure>,
    /// Lower-half standard deviation for `custom` and `regrow_low_cp`.
    pub c1: f64,
    /// Swept values; `None` uses the scenario's default.
    pub c2: Option<Vec<f64>>,
    pub n: usize,
    pub break_x: usize,
    pub segment_len: usize,
    pub replications: usize,
    pub seed: u64,
    pub growth: GrowthConfig,
    pub prune: PruneConfig,
    pub jump_radius: f64,
    pub dump_trees: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::Table1,
            mean: None,
            c1: 1.0,
            c2: None,
            n: 1000,
            break_x: 500,
            segment_len: 100,
            replications: 1000,
            seed: 1,
            growth: GrowthConfig::default(),
            prune: PruneConfig::default(),
            jump_radius: DEFAULT_JUMP_RADIUS,
            dump_trees: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.jump_radius.is_finite() && self.jump_radius >= 0.0) {
            return Err(Error::Config("jump radius must be finite and non-negative".into()));
        }
        if let Some(c2) = &self.c2 {
            if c2.is_empty() {
                return Err(Error::Config("c2 sweep is empty".into()));
            }
        }
        self.effective_growth().validate()?;
        self.prune
            .validate(self.n)
            .map_err(|e| Error::Config(e.to_string()))?;
        for job in self.plan()? {
            job.spec.validate()?;
        }
        Ok(())
    }

    /// Growth settings after scenario overrides.
    pub fn effective_growth(&self) -> GrowthConfig {
        match self.scenario {
            Scenario::RegrowLowCp => GrowthConfig {
                cp: LOW_CP,
                ..self.growth
            },
            _ => self.growth,
        }
    }

    fn sweep(&self) -> Vec<f64> {
        self.c2
            .clone()
            .unwrap_or_else(|| self.scenario.default_sweep())
    }

    fn spec(&self, mean: MeanStructure, c1: f64, c2: f64) -> StructureSpec {
        StructureSpec {
            mean,
            c1,
            c2,
            n: self.n,
            break_x: self.break_x,
            segment_len: self.segment_len,
        }
    }

    /// Expands the scenario into the list of structures to simulate.
    pub fn plan(&self) -> Result<Vec<StructureJob>> {
        let mut jobs = Vec::new();
        let sweep = self.sweep();
        let het_with_compromise = |jobs: &mut Vec<StructureJob>, mean: MeanStructure, c: f64| {
            let letter = mean.letter();
            let comp = compromise_sigma(c);
            jobs.push(StructureJob {
                label: format!("{letter}H({})", fmt_c(c)),
                spec: self.spec(mean, 1.0, c),
                sweep_value: c,
                role: Role::Heteroscedastic,
                paired_with: Some(jobs.len() + 1),
            });
            jobs.push(StructureJob {
                label: format!("{letter}C_comp({})", fmt_c(c)),
                spec: self.spec(mean, comp, comp),
                sweep_value: c,
                role: Role::Compromise,
                paired_with: None,
            });
        };
        match self.scenario {
            Scenario::Table1 | Scenario::Table2 | Scenario::FigMse => {
                for mean in [MeanStructure::Flat, MeanStructure::Step] {
                    for &c in &sweep {
                        het_with_compromise(&mut jobs, mean, c);
                    }
                }
            }
            Scenario::FigSplits => {
                for (mean, hetero) in [
                    (MeanStructure::Flat, true),
                    (MeanStructure::Step, false),
                    (MeanStructure::Step, true),
                ] {
                    for &c in &sweep {
                        let (c1, role) = if hetero { (1.0, Role::Heteroscedastic) } else { (c, Role::Homoscedastic) };
                        let spec = self.spec(mean, c1, c);
                        let kind = if hetero { 'H' } else { 'C' };
                        jobs.push(StructureJob {
                            label: format!("{}{kind}({})", mean.letter(), fmt_c(c)),
                            spec,
                            sweep_value: c,
                            role,
                            paired_with: None,
                        });
                    }
                }
            }
            Scenario::ZeroVarianceLower => {
                for &c in &sweep {
                    jobs.push(self.custom_job(MeanStructure::Step, 0.0, c));
                }
            }
            Scenario::RegrowLowCp => {
                let mean = self.mean.unwrap_or(MeanStructure::Step);
                for &c in &sweep {
                    jobs.push(self.custom_job(mean, self.c1, c));
                }
            }
            Scenario::Custom => {
                let mean = self.mean.unwrap_or(MeanStructure::Flat);
                for &c in &sweep {
                    if self.c1 == 1.0 && c != 1.0 {
                        het_with_compromise(&mut jobs, mean, c);
                    } else {
                        jobs.push(self.custom_job(mean, self.c1, c));
                    }
                }
            }
        }
        Ok(jobs)
    }

    fn custom_job(&self, mean: MeanStructure, c1: f64, c2: f64) -> StructureJob {
        let letter = mean.letter();
        let (label, role) = if c1 == c2 {
            (format!("{letter}C({})", fmt_c(c1)), Role::Homoscedastic)
        } else if c1 == 1.0 {
            (format!("{letter}H({})", fmt_c(c2)), Role::Heteroscedastic)
        } else {
            (
                format!("{letter}H({},{})", fmt_c(c1), fmt_c(c2)),
                Role::Heteroscedastic,
            )
        };
        StructureJob {
            label,
            spec: self.spec(mean, c1, c2),
            sweep_value: c2,
            role,
            paired_with: None,
        }
    }
}

/// Integers print bare; anything else with four decimals.
fn fmt_c(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c:.4}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Heteroscedastic,
    Homoscedastic,
    /// Homoscedastic with the average variance of a heteroscedastic partner.
    Compromise,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructureJob {
    pub label: String,
    pub spec: StructureSpec,
    /// The swept `c` this structure was derived from.
    pub sweep_value: f64,
    pub role: Role,
    /// Index of the compromise structure this one is compared against.
    pub paired_with: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub summary: ReplicationSummary,
    pub pre_prune_splits: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pairing {
    pub het: usize,
    pub compromise: usize,
    pub mse_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub jobs: Vec<StructureJob>,
    pub reports: Vec<AggregateReport>,
    pub pairs: Vec<Pairing>,
    /// Per-structure replication outcomes, kept only when `dump_trees` is set.
    #[serde(skip)]
    pub outcomes: Option<Vec<Vec<ReplicationOutcome>>>,
}

impl SweepReport {
    pub fn report(&self, label: &str) -> Option<&AggregateReport> {
        self.reports.iter().find(|r| r.label == label)
    }

    pub fn ratio_for(&self, het_label: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| self.reports[p.het].label == het_label)
            .map(|p| p.mse_ratio)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold seed used for replication `j`: shared across structures so folds
/// are coupled the same way the errors are.
pub fn fold_seed_for(base: u64, replication: usize) -> u64 {
    splitmix64(base ^ splitmix64(replication as u64))
}

/// Fits and scores every structure for one replication.
pub fn run_replication(
    config: &ExperimentConfig,
    jobs: &[StructureJob],
    replication: usize,
) -> Result<Vec<ReplicationOutcome>> {
    let errors = baseline_replication(config.seed, config.n, replication);
    let growth = config.effective_growth();
    let prune = PruneConfig {
        fold_seed: fold_seed_for(config.prune.fold_seed, replication),
        ..config.prune
    };
    jobs.iter()
        .map(|job| {
            let data = realize_errors(&errors, &job.spec)?;
            let fit = fit_pruned(&data, &growth, &prune)?;
            let summary = summarize_tree(&fit.pruned, &data, job.spec.break_x as f64)?;
            Ok(ReplicationOutcome {
                replication,
                summary,
                pre_prune_splits: fit.full.sorted_thresholds(),
                tree: config.dump_trees.then_some(fit.pruned),
            })
        })
        .collect()
}

fn jump_recovery(spec: &StructureSpec, outcomes: &[ReplicationOutcome], radius: f64) -> Option<JumpRecovery> {
    let all = spec.jump_boundaries();
    if all.is_empty() {
        return None;
    }
    let lower: Vec<f64> = all.iter().copied().filter(|&b| b < spec.break_x as f64).collect();
    let rate = |b: &[f64], pick: fn(&ReplicationOutcome) -> &[f64]| {
        if b.is_empty() {
            return 0.0;
        }
        mean_se(
            outcomes
                .iter()
                .map(|o| jumps_recovered(pick(o), b, radius) as f64 / b.len() as f64),
        )
        .0
    };
    fn pre(o: &ReplicationOutcome) -> &[f64] {
        &o.pre_prune_splits
    }
    fn post(o: &ReplicationOutcome) -> &[f64] {
        &o.summary.split_locations
    }
    Some(JumpRecovery {
        radius,
        pre_prune_all: rate(&all, pre),
        post_prune_all: rate(&all, post),
        pre_prune_lower: rate(&lower, pre),
        post_prune_lower: rate(&lower, post),
        avg_pre_prune_splits: mean_se(outcomes.iter().map(|o| o.pre_prune_splits.len() as f64)).0,
    })
}

/// Runs the replications listed in `order` (any permutation of a subset of
/// `0..replications`) and aggregates them in increasing replication order.
pub fn run_replications(config: &ExperimentConfig, order: &[usize]) -> Result<SweepReport> {
    config.validate()?;
    let jobs = config.plan()?;
    log::info!(
        "scenario {}: {} structures x {} replications",
        config.scenario,
        jobs.len(),
        order.len()
    );
    let mut per_rep: Vec<Vec<ReplicationOutcome>> = order
        .par_iter()
        .map(|&j| run_replication(config, &jobs, j))
        .collect::<Result<_>>()?;
    per_rep.sort_by_key(|outs| outs.first().map_or(0, |o| o.replication));

    // Transpose to per-structure lists.
    let mut by_job: Vec<Vec<ReplicationOutcome>> = vec![Vec::with_capacity(per_rep.len()); jobs.len()];
    for outs in per_rep {
        for (k, o) in outs.into_iter().enumerate() {
            by_job[k].push(o);
        }
    }

    let reports: Vec<AggregateReport> = jobs
        .iter()
        .zip(&by_job)
        .map(|(job, outs)| {
            let summaries: Vec<ReplicationSummary> = outs.iter().map(|o| o.summary.clone()).collect();
            let mut r = AggregateReport::from_summaries(job.label.clone(), job.spec, &summaries);
            r.jump_recovery = jump_recovery(&job.spec, outs, config.jump_radius);
            r
        })
        .collect();

    let pairs = jobs
        .iter()
        .enumerate()
        .filter_map(|(i, job)| job.paired_with.map(|c| (i, c)))
        .map(|(het, compromise)| {
            Ok(Pairing {
                het,
                compromise,
                mse_ratio: mse_ratio(&reports[het], &reports[compromise])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        config: config.clone(),
        jobs,
        reports,
        pairs,
        outcomes: config.dump_trees.then_some(by_job),
    })
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let order: Vec<usize> = (0..config.replications).collect();
    run_replications(config, &order)
}

/// Step mean with a noiseless lower half (`c1 = 0`) over the c2 sweep.
pub fn run_zero_variance_experiment(config: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep(&ExperimentConfig {
        scenario: Scenario::ZeroVarianceLower,
        ..config.clone()
    })
}

/// Grows with `cp` = [`LOW_CP`], then prunes as usual; the reports carry
/// jump recovery before and after pruning.
pub fn run_regrow_low_cp(config: &ExperimentConfig) -> Result<SweepReport> {
    run_sweep(&ExperimentConfig {
        scenario: Scenario::RegrowLowCp,
        ..config.clone()
    })
}
