//! Regression trees on one predictor, cost-complexity pruning with
//! cross-validation, and a Monte Carlo harness for studying how
//! non-constant error variance changes where trees split.
//!
//! ```
//! use hettree::{fit_pruned, Dataset, GrowthConfig, PruneConfig};
//!
//! let x: Vec<f64> = (1..=60).map(f64::from).collect();
//! let y: Vec<f64> = x.iter().map(|&v| if v <= 30.0 { 0.0 } else { 5.0 }).collect();
//! let data = Dataset::new(x, y).unwrap();
//! let fit = fit_pruned(&data, &GrowthConfig::default(), &PruneConfig::default()).unwrap();
//! assert_eq!(fit.pruned.thresholds(), vec![30.5]);
//! ```

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod prune;
pub mod simgen;
pub mod tree;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use experiment::{run_sweep, ExperimentConfig, Scenario, SweepReport};
pub use metrics::{AggregateReport, ReplicationSummary};
pub use prune::{cross_validate, cp_sequence, fit_pruned, select_subtree, CpPath, PruneConfig, SelectionRule};
pub use simgen::{MeanStructure, StructureSpec};
pub use tree::{best_split, grow, CpRule, GrowthConfig, TreeNode};
