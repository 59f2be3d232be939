use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use asrank::data::{read_records, LabelMode};
use asrank::harness::config::{resolve_data_path, GammaSpec, DATA_DIR_VAR};
use asrank::harness::fuzz::theorem_fuzz;
use asrank::harness::runner::{load_model, read_summary, ttest_cells};
use asrank::harness::{predict, run_experiment, ConfigLayer, ExperimentConfig};
use asrank::pairs::Mode;

mod fetch;

#[derive(Parser)]
#[command(
    name = "asrank",
    version,
    about = "Active-sampling bipartite ranking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write curve and summary CSVs.
    Run(RunArgs),
    /// Welch t-test between two cells of a summary CSV.
    Ttest {
        summary: PathBuf,
        /// Cell as [dataset:]strategy[@gamma].
        cell_a: String,
        cell_b: String,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Score a LIBSVM file with a saved model, one score per line.
    Predict { model: PathBuf, data: PathBuf },
    /// Download a named dataset into the data directory.
    Fetch {
        name: String,
        /// TOML manifest replacing the built-in one.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Target directory; defaults to $ASRANK_DATA_DIR or ./data.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Check the pair/point objective bound on random problems.
    TheoremFuzz {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training data in LIBSVM format (repeatable).
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Held-out evaluation file; without it, k-fold cross validation is used.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated: random, soft-close, soft-correct, hard-close, hard-correct, wsvm.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    /// Comma-separated gamma values; `uniform` is accepted.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<String>>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(short = 'c', long = "c")]
    c: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// loss or half.
    #[arg(long)]
    tie_policy: Option<String>,
    /// plain or threshold.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Treat a multi-class file as one-vs-rest with this label positive.
    #[arg(long)]
    positive_label: Option<f64>,
    #[arg(long)]
    no_bias_correction: bool,
    /// strategy or uniform.
    #[arg(long)]
    initial_pool: Option<String>,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// Method compared against every other cell in the summary.
    #[arg(long)]
    reference: Option<String>,
    /// Record wall-clock seconds per iteration.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    no_save_models: bool,
}

impl RunArgs {
    fn layer(self) -> ConfigLayer {
        ConfigLayer {
            datasets: (!self.datasets.is_empty()).then_some(self.datasets),
            test: self.test,
            folds: self.folds,
            strategies: self.strategies,
            gammas: self
                .gammas
                .map(|g| g.into_iter().map(GammaSpec::Text).collect()),
            budget: self.budget,
            batch: self.batch,
            c: self.c,
            seeds: self.seeds,
            tie_policy: self.tie_policy,
            mode: self.mode,
            output: self.output,
            positive_label: self.positive_label,
            bias_correction: self.no_bias_correction.then_some(false),
            initial_pool: self.initial_pool,
            max_attempts: self.max_attempts,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            reference: self.reference,
            timing: self.timing.then_some(true),
            save_models: self.no_save_models.then_some(false),
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => ConfigLayer::load(p)?,
        None => ConfigLayer::default(),
    };
    let cfg = ExperimentConfig::from_layer(file.overlay(args.layer()))?;
    let out = run_experiment(&cfg)?;
    let mut stdout = io::stdout().lock();
    for r in &out.summary {
        writeln!(
            stdout,
            "{:<12} {:<13} gamma={:<8} auc={:.4} ± {:.4} (n={}){}",
            r.dataset,
            r.strategy,
            r.gamma,
            r.auc_mean,
            r.auc_std,
            r.n,
            if r.reference.is_empty() {
                String::new()
            } else {
                format!(" vs {}: {} (p={})", r.reference, r.verdict, r.t_pvalue)
            }
        )?;
    }
    eprintln!(
        "wrote {} and {}",
        out.curve_path.display(),
        out.summary_path.display()
    );
    Ok(())
}

fn cmd_predict(model: PathBuf, data: PathBuf) -> Result<()> {
    let model = load_model(&model).with_context(|| format!("loading model {}", model.display()))?;
    let records = read_records(&resolve_data_path(&data), None, LabelMode::Sign)?;
    let scores = predict(&model, &records)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for s in scores {
        writeln!(out, "{s}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_fetch(name: String, manifest: Option<PathBuf>, dir: Option<PathBuf>) -> Result<()> {
    let text = match manifest {
        Some(p) => std::fs::read_to_string(&p)?,
        None => fetch::BUILTIN_MANIFEST.to_string(),
    };
    let manifest = fetch::parse_manifest(&text)?;
    let dir = dir
        .or_else(|| std::env::var_os(DATA_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    let (path, sums) = fetch::fetch(&manifest, &name, &dir)?;
    for (src, sum) in manifest[&name].files.iter().zip(&sums) {
        eprintln!("{sum}  {}", src.url);
    }
    println!("{}", path.display());
    Ok(())
}

fn cmd_fuzz(trials: usize, seed: u64) -> Result<()> {
    let mut failed = false;
    for mode in [Mode::Plain, Mode::Threshold] {
        let r = theorem_fuzz(trials, seed, mode)?;
        println!(
            "{mode}: {} trials, {} violations, max lhs-rhs {:e}",
            r.trials,
            r.violations.len(),
            r.max_gap
        );
        for (trial, check) in &r.violations {
            println!("  trial {trial}: lhs {} > rhs {}", check.lhs, check.rhs);
        }
        failed |= !r.violations.is_empty();
    }
    if failed {
        bail!("bound violated");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Ttest {
            summary,
            cell_a,
            cell_b,
            level,
        } => read_summary(&summary)
            .and_then(|rows| ttest_cells(&rows, &cell_a, &cell_b, level))
            .map(|(t, verdict)| {
                println!("{verdict} (t={}, df={}, p={})", t.t, t.df, t.p_value);
            })
            .map_err(Into::into),
        Command::Predict { model, data } => cmd_predict(model, data),
        Command::Fetch {
            name,
            manifest,
            dir,
        } => cmd_fetch(name, manifest, dir),
        Command::TheoremFuzz { trials, seed } => cmd_fuzz(trials, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = matches!(
                e.downcast_ref::<asrank::Error>(),
                Some(asrank::Error::Config(_))
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
