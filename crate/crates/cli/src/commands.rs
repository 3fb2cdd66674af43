use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sosr_core::datagen::{
    self, save_csv, Generator, GeneratorParams, SuiteEntry, SuiteGroup, SUITE_GROUPS,
};
use sosr_core::framework::run_experiment;
use sosr_core::metrics::evaluate;
use sosr_core::{Baseline, ExperimentConfig, MetricsReport};

use crate::bench::create;
use crate::error::{CliError, CliResult};

/// A single dataset outside the suite table.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomDataset {
    pub name: String,
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateArgs {
    /// `None` generates both families.
    pub generator: Option<Generator>,
    /// Suite group label such as `D5-D8`; `None` generates all groups.
    pub group: Option<String>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Overrides the suite table with explicit parameters.
    pub custom: Option<CustomDataset>,
}

/// Writes one CSV per dataset plus `manifest.json`, and returns the manifest.
pub fn cmd_generate(args: &GenerateArgs) -> CliResult<Vec<SuiteEntry>> {
    let entries = match &args.custom {
        Some(custom) => {
            let generator = args.generator.ok_or_else(|| {
                CliError::Usage("explicit parameters need a single generator".into())
            })?;
            custom.params.validate(generator)?;
            vec![SuiteEntry {
                name: custom.name.clone(),
                generator,
                group: "custom".into(),
                params: custom.params.clone(),
            }]
        }
        None => {
            let groups: Vec<&SuiteGroup> = match &args.group {
                Some(label) => vec![SuiteGroup::find(label)
                    .ok_or_else(|| CliError::Usage(format!("unknown group {label}")))?],
                None => SUITE_GROUPS.iter().collect(),
            };
            let families = match args.generator {
                Some(g) => vec![g],
                None => Generator::ALL.to_vec(),
            };
            families
                .iter()
                .flat_map(|&f| {
                    groups
                        .iter()
                        .flat_map(move |g| datagen::suite_group(f, g, args.master_seed))
                })
                .collect()
        }
    };
    fs::create_dir_all(&args.out_dir)?;
    for entry in &entries {
        let ds = entry.generate()?;
        save_csv(&ds, args.out_dir.join(format!("{}.csv", entry.name)))?;
    }
    write_json(&args.out_dir.join("manifest.json"), &entries)?;
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArgs {
    pub dataset: PathBuf,
    pub beta: f64,
    pub baseline: Baseline,
    pub seed: u64,
    pub gamma_h: Option<f64>,
    pub learning_rate: f64,
    pub warmup_epochs: usize,
    /// Directory for the per-instance CSV and the JSON report.
    pub out_dir: Option<PathBuf>,
}

/// JSON report of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub beta: f64,
    pub baseline: Baseline,
    pub seed: u64,
    pub n_known: usize,
    pub known_classes: Vec<usize>,
    pub unknown_classes: Vec<usize>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

pub fn run_file_stem(dataset: &str, beta: f64, baseline: Baseline, seed: u64) -> String {
    format!("{dataset}_beta{beta}_{baseline}_seed{seed}")
}

pub fn cmd_run(args: &RunArgs) -> CliResult<RunReport> {
    let mut config = ExperimentConfig::new(args.beta, args.seed, args.baseline);
    config.gamma_h = args.gamma_h;
    config.learning_rate = args.learning_rate;
    config.warmup_epochs = args.warmup_epochs;
    config.validate()?;
    let dataset = datagen::load_csv(&args.dataset)?;
    let exp = run_experiment(&dataset, &config)?;
    let metrics = evaluate(&exp.record, &exp.split.stream)?;
    let report = RunReport {
        dataset: dataset.name.clone(),
        beta: args.beta,
        baseline: args.baseline,
        seed: args.seed,
        n_known: exp.space.n_known(),
        known_classes: exp.space.kc_ids.clone(),
        unknown_classes: exp.space.uc_ids.clone(),
        metrics,
    };
    if let Some(dir) = &args.out_dir {
        write_run(dir, &report, &exp.record)?;
    }
    Ok(report)
}

fn write_run(dir: &Path, report: &RunReport, record: &sosr_core::RunRecord) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let stem = run_file_stem(&report.dataset, report.beta, report.baseline, report.seed);
    record.write_csv(create(&dir.join(format!("{stem}.csv")))?)?;
    write_json(&dir.join(format!("{stem}.json")), report)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
