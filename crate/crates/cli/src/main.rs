use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hettree::experiment::{parse_sweep, ExperimentConfig, Scenario};
use hettree::simgen::{baseline_replication, export_csv, realize_errors};
use hettree::tree::CpRule;
use hettree::{
    fit_pruned, output, Dataset, GrowthConfig, MeanStructure, PruneConfig, SelectionRule,
    StructureSpec,
};

#[derive(Parser)]
#[command(name = "hettree", version, about = "Regression trees under heteroscedastic noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated simulation and write tables and plots.
    Run(RunArgs),
    /// Grow, cross-validate and prune a tree on a CSV file with x,y columns.
    Fit(FitArgs),
    /// Write one simulated dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct TreeArgs {
    /// Minimum relative SSE reduction for a split to be kept during growth.
    #[arg(long, default_value_t = 0.01)]
    cp: f64,
    /// How cp limits growth: `subtree` (collapse weak subtrees, as rpart
    /// does) or `per_split`.
    #[arg(long, default_value = "subtree")]
    cp_rule: CpRule,
    #[arg(long, default_value_t = 7)]
    minbucket: usize,
    #[arg(long, default_value_t = 20)]
    minsplit: usize,
    #[arg(long, default_value_t = 30)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Subtree selection: `min` (minimum CV error) or `1se`.
    #[arg(long, default_value = "min")]
    prune_rule: SelectionRule,
    /// Seed for fold assignment.
    #[arg(long, default_value_t = 0)]
    fold_seed: u64,
}

impl TreeArgs {
    fn growth(&self) -> GrowthConfig {
        GrowthConfig {
            cp: self.cp,
            minbucket: self.minbucket,
            minsplit: self.minsplit,
            max_depth: self.max_depth,
            cp_rule: self.cp_rule,
        }
    }

    fn prune(&self) -> PruneConfig {
        PruneConfig {
            n_folds: self.folds,
            rule: self.prune_rule,
            fold_seed: self.fold_seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "table1")]
    scenario: Scenario,
    /// Mean structure for the `custom` and `regrow_low_cp` scenarios.
    #[arg(long)]
    mean: Option<MeanStructure>,
    /// Lower-half standard deviation for `custom` and `regrow_low_cp`.
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Upper-half standard deviation(s): a number, `a,b,c`, `a..b`, or `sweep`.
    #[arg(long)]
    c2: Option<String>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    tree: TreeArgs,
    /// Output directory.
    #[arg(long, env = "HETTREE_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Also write every pruned tree as JSON lines.
    #[arg(long)]
    dump_trees: bool,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with a header containing `x` and `y`; `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    tree: TreeArgs,
    /// Print the fit as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "step")]
    mean: MeanStructure,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replication index within the seed's stream.
    #[arg(long, default_value_t = 0)]
    replication: usize,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<()> {
    let c2 = args.c2.as_deref().map(parse_sweep).transpose()?;
    let config = ExperimentConfig {
        scenario: args.scenario,
        mean: args.mean,
        c1: args.c1,
        c2,
        replications: args.reps,
        seed: args.seed,
        growth: args.tree.growth(),
        prune: args.tree.prune(),
        dump_trees: args.dump_trees,
        ..ExperimentConfig::default()
    };
    let report = hettree::run_sweep(&config)?;
    let written = output::emit_outputs(&report, &args.out)?;

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{:<16} {:>10} {:>10} {:>10}", "structure", "splits", "mse", "ratio")?;
    for (i, r) in report.reports.iter().enumerate() {
        let ratio = report
            .pairs
            .iter()
            .find(|p| p.het == i)
            .map_or(String::new(), |p| format!("{:.3}", p.mse_ratio));
        writeln!(
            stdout,
            "{:<16} {:>10.3} {:>10.4} {:>10}",
            r.label, r.avg_splits, r.avg_mse_total, ratio
        )?;
    }
    log::info!("wrote {} files to {}", written.len(), args.out.display());
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let data = if args.input.as_os_str() == "-" {
        Dataset::read_csv(io::stdin().lock())?
    } else {
        let file = File::open(&args.input)
            .with_context(|| format!("cannot open {}", args.input.display()))?;
        Dataset::read_csv(BufReader::new(file))
            .with_context(|| format!("reading {}", args.input.display()))?
    };
    let fit = fit_pruned(&data, &args.tree.growth(), &args.tree.prune())?;
    let mut stdout = io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut stdout, &fit)?;
        writeln!(stdout)?;
        return Ok(());
    }
    writeln!(stdout, "n = {}, root SSE = {}", data.len(), fit.path.root_sse)?;
    writeln!(stdout, "\ncost-complexity path:")?;
    writeln!(
        stdout,
        "{:>4} {:>14} {:>10} {:>7} {:>14} {:>12} {:>12}",
        "row", "alpha", "rel_cp", "leaves", "train_sse", "cv_error", "cv_se"
    )?;
    for (k, row) in fit.path.rows.iter().enumerate() {
        let mark = if k == fit.selection.index { " <" } else { "" };
        writeln!(
            stdout,
            "{:>4} {:>14.6} {:>10.6} {:>7} {:>14.6} {:>12.6} {:>12.6}{mark}",
            k,
            row.alpha,
            fit.path.relative_cp(k),
            row.n_leaves,
            row.train_sse,
            row.cv_error.unwrap_or(f64::NAN),
            row.cv_se.unwrap_or(f64::NAN),
        )?;
    }
    writeln!(
        stdout,
        "\nselected row {} ({} rule): {} leaves",
        fit.selection.index, args.tree.prune_rule, fit.selection.n_leaves
    )?;
    writeln!(stdout, "\npruned tree:")?;
    write!(stdout, "{}", fit.pruned.render())?;
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let spec = StructureSpec::new(args.mean, args.c1, args.c2);
    spec.validate()?;
    let errors = baseline_replication(args.seed, spec.n, args.replication);
    let data = realize_errors(&errors, &spec)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            export_csv(&data, &spec, io::BufWriter::new(file))?;
        }
        None => export_csv(&data, &spec, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
