use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sosr_cli::bench::{db_auroc_correlation, render_table, run_bench, BenchmarkSpec};
use sosr_cli::commands::{cmd_generate, cmd_run, CustomDataset, GenerateArgs, RunArgs};
use sosr_cli::{CliError, CliResult};
use sosr_core::datagen::{Generator, GeneratorParams};
use sosr_core::Baseline;

#[derive(Debug, Parser)]
#[command(
    name = "sosr",
    version,
    about = "Streaming open-set recognition experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic datasets as CSV files plus a manifest.json.
    Generate {
        /// Generator family (isoGauss or hyperCube); both when omitted.
        #[arg(long)]
        generator: Option<Generator>,
        /// Suite group such as D5-D8; all groups when omitted.
        #[arg(long)]
        group: Option<String>,
        /// Master seed from which every dataset seed is derived.
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Name of a single custom dataset; requires the explicit parameters below.
        #[arg(long, requires_all = ["instances", "classes", "features"])]
        name: Option<String>,
        /// Number of instances of a custom dataset.
        #[arg(long)]
        instances: Option<usize>,
        /// Number of classes of a custom dataset.
        #[arg(long)]
        classes: Option<usize>,
        /// Number of features of a custom dataset.
        #[arg(long)]
        features: Option<usize>,
        /// Per-class standard deviation of a custom isoGauss dataset.
        #[arg(long, default_value_t = 1.0)]
        std_dev: f64,
        /// Vertex offset of a custom hyperCube dataset.
        #[arg(long, default_value_t = 1.0)]
        class_sep: f64,
        /// Seed of a custom dataset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one baseline on one dataset and write its per-instance log and report.
    Run {
        /// Dataset CSV (numeric feature columns, label in the last column).
        dataset: PathBuf,
        /// Fraction of classes held out as unknown.
        #[arg(long)]
        beta: f64,
        /// static, incremental or sosr.
        #[arg(long, default_value = "sosr")]
        baseline: Baseline,
        /// Run seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed entropy threshold; the Youden-optimal one is used when omitted.
        #[arg(long)]
        gamma_h: Option<f64>,
        /// SGD learning rate.
        #[arg(long, default_value_t = 0.01)]
        learning_rate: f64,
        /// Passes over the training partition during warm-up.
        #[arg(long, default_value_t = 1)]
        warmup_epochs: usize,
        /// Directory for the run CSV and JSON report; only stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run the full benchmark matrix and write results.csv and summary.csv.
    Bench {
        /// Dataset files or directories of CSV files.
        datasets: Vec<PathBuf>,
        /// JSON benchmark spec; replaces the dataset and output arguments.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory.
        #[arg(long, short, default_value = "bench-out")]
        out: PathBuf,
        /// Master seed for run seeds.
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, short, default_value_t = 0)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate {
            generator,
            group,
            master_seed,
            out,
            name,
            instances,
            classes,
            features,
            std_dev,
            class_sep,
            seed,
        } => {
            let custom = name.map(|name| CustomDataset {
                name,
                params: GeneratorParams {
                    n_instances: instances.unwrap_or_default(),
                    n_classes: classes.unwrap_or_default(),
                    n_features: features.unwrap_or_default(),
                    std_dev,
                    class_sep,
                    seed,
                },
            });
            let manifest = cmd_generate(&GenerateArgs {
                generator,
                group,
                master_seed,
                out_dir: out,
                custom,
            })?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Run {
            dataset,
            beta,
            baseline,
            seed,
            gamma_h,
            learning_rate,
            warmup_epochs,
            out,
        } => {
            let report = cmd_run(&RunArgs {
                dataset,
                beta,
                baseline,
                seed,
                gamma_h,
                learning_rate,
                warmup_epochs,
                out_dir: out,
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench {
            datasets,
            spec,
            out,
            master_seed,
            jobs,
        } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<BenchmarkSpec>(&text)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
                }
                None if datasets.is_empty() => {
                    return Err(CliError::Usage("no datasets given".into()))
                }
                None => BenchmarkSpec::new(datasets, out, master_seed),
            };
            let outcome = run_bench(&spec, jobs)?;
            print!("{}", render_table(&outcome.summary));
            for &beta in &spec.betas {
                if let Some(rho) = db_auroc_correlation(&outcome.rows, beta) {
                    println!("spearman(db_index, auroc) at beta={beta}: {rho:.3}");
                }
            }
            println!("results: {}", outcome.results_path.display());
            println!("summary: {}", outcome.summary_path.display());
            let failed = outcome.failures();
            if failed > 0 {
                for r in outcome.rows.iter() {
                    if let Err(e) = &r.outcome {
                        eprintln!("{} beta={} {}: {e}", r.dataset, r.beta, r.baseline);
                    }
                }
                return Err(CliError::Partial {
                    failed,
                    total: outcome.rows.len(),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
