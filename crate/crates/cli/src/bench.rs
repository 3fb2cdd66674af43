//! The benchmark matrix: datasets × β × seeds × baselines, run in parallel
//! and written out in a canonical order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sosr_core::datagen::{load_csv, Generator};
use sosr_core::metrics::aggregate::MeanStd;
use sosr_core::metrics::{aggregate, evaluate, spearman, ScoredRun, SummaryRow};
use sosr_core::{seed, Baseline, Dataset, ExperimentConfig, MetricsReport};

use crate::error::{CliError, CliResult};

pub const SYNTHETIC_BETAS: [f64; 5] = [0.1, 0.25, 0.4, 0.6, 0.75];
pub const REAL_BETAS: [f64; 4] = [0.1, 0.25, 0.5, 0.7];
pub const SEEDS_PER_REAL_DATASET: usize = 5;

fn default_betas() -> Vec<f64> {
    SYNTHETIC_BETAS.to_vec()
}

fn default_real_betas() -> Vec<f64> {
    REAL_BETAS.to_vec()
}

fn default_baselines() -> Vec<Baseline> {
    Baseline::ALL.to_vec()
}

fn default_seeds() -> usize {
    SEEDS_PER_REAL_DATASET
}

fn default_lr() -> f64 {
    0.01
}

fn default_epochs() -> usize {
    1
}

/// Benchmark description; also the schema of the optional JSON spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    #[serde(default)]
    pub master_seed: u64,
    /// β values for synthetic datasets.
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// β values for any other (real) dataset.
    #[serde(default = "default_real_betas")]
    pub real_betas: Vec<f64>,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<Baseline>,
    /// Dataset CSV files, or directories whose `*.csv` files are all used.
    pub datasets: Vec<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds_per_real_dataset: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub warmup_epochs: usize,
}

impl BenchmarkSpec {
    pub fn new(datasets: Vec<PathBuf>, out_dir: PathBuf, master_seed: u64) -> Self {
        Self {
            master_seed,
            betas: default_betas(),
            real_betas: default_real_betas(),
            baselines: default_baselines(),
            datasets,
            out_dir,
            seeds_per_real_dataset: default_seeds(),
            learning_rate: default_lr(),
            warmup_epochs: default_epochs(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        for &b in self.betas.iter().chain(&self.real_betas) {
            if !(b > 0.0 && b < 1.0) {
                return Err(CliError::Usage(format!("beta {b} is outside (0,1)")));
            }
        }
        if self.baselines.is_empty() {
            return Err(CliError::Usage("no baselines selected".into()));
        }
        if self.seeds_per_real_dataset == 0 {
            return Err(CliError::Usage(
                "seeds_per_real_dataset must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Where a dataset sits in the benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    /// Generator family for synthetic suite files, `None` for anything else.
    pub generator: Option<Generator>,
}

impl DatasetEntry {
    pub fn from_path(path: &Path) -> Self {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self {
            generator: synthetic_family(&name),
            name,
            path: path.to_path_buf(),
        }
    }

    /// Aggregation group: the generator family, or the dataset itself.
    pub fn group(&self) -> String {
        match self.generator {
            Some(g) => g.to_string(),
            None => self.name.clone(),
        }
    }
}

/// `isoGauss_D07` → `IsoGauss`; anything else is not a suite file.
pub fn synthetic_family(name: &str) -> Option<Generator> {
    let (family, index) = name.split_once("_D")?;
    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Generator::ALL.into_iter().find(|g| g.as_str() == family)
}

/// Expands directories into their CSV files, sorted by name.
pub fn discover(paths: &[PathBuf]) -> CliResult<Vec<DatasetEntry>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in
                fs::read_dir(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
            {
                let path = entry.map_err(|e| CliError::Data(e.to_string()))?.path();
                if path.extension().is_some_and(|e| e == "csv") {
                    files.push(path);
                }
            }
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::Data(format!("{} does not exist", p.display())));
        }
    }
    let mut entries: Vec<DatasetEntry> = files.iter().map(|p| DatasetEntry::from_path(p)).collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.path.cmp(&b.path)));
    entries.dedup_by(|a, b| a.path == b.path);
    Ok(entries)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub group: String,
    pub dataset: String,
    pub beta: f64,
    pub baseline: Baseline,
    pub seed: u64,
    pub outcome: Result<MetricsReport, String>,
}

impl ResultRow {
    fn sort_key(&self) -> (&str, &str, u64, Baseline, u64) {
        (
            &self.group,
            &self.dataset,
            self.beta.to_bits(),
            self.baseline,
            self.seed,
        )
    }
}

/// Seed of one run. Synthetic suite files get one seed per dataset; other
/// datasets get `seeds_per_real_dataset` seeds.
pub fn run_seeds(spec: &BenchmarkSpec, entry: &DatasetEntry) -> Vec<u64> {
    let base = seed::derive_str(spec.master_seed, &entry.name);
    match entry.generator {
        Some(_) => vec![base],
        None => (0..spec.seeds_per_real_dataset as u64)
            .map(|i| seed::derive(base, i))
            .collect(),
    }
}

#[derive(Debug, Clone)]
struct Task {
    dataset: usize,
    beta: f64,
    seed: u64,
    baseline: Baseline,
}

/// Runs one experiment and scores it.
pub fn run_one(dataset: &Dataset, config: &ExperimentConfig) -> sosr_core::Result<MetricsReport> {
    let exp = sosr_core::framework::run_experiment(dataset, config)?;
    evaluate(&exp.record, &exp.split.stream)
}

/// Runs the full matrix with at most `jobs` worker threads (0 = all cores).
/// The returned rows are sorted canonically, independent of scheduling.
pub fn run_matrix(spec: &BenchmarkSpec, jobs: usize) -> CliResult<Vec<ResultRow>> {
    spec.validate()?;
    let entries = discover(&spec.datasets)?;
    if entries.is_empty() {
        return Err(CliError::Usage("no datasets found".into()));
    }
    let loaded: Vec<Result<Dataset, String>> = entries
        .iter()
        .map(|e| load_csv(&e.path).map_err(|err| err.to_string()))
        .collect();

    let mut tasks = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let betas = if entry.generator.is_some() {
            &spec.betas
        } else {
            &spec.real_betas
        };
        for &beta in betas {
            for seed in run_seeds(spec, entry) {
                for &baseline in &spec.baselines {
                    tasks.push(Task {
                        dataset: i,
                        beta,
                        seed,
                        baseline,
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let entry = &entries[t.dataset];
                let outcome = match &loaded[t.dataset] {
                    Err(e) => Err(e.clone()),
                    Ok(ds) => {
                        let mut config = ExperimentConfig::new(t.beta, t.seed, t.baseline);
                        config.learning_rate = spec.learning_rate;
                        config.warmup_epochs = spec.warmup_epochs;
                        run_one(ds, &config).map_err(|e| e.to_string())
                    }
                };
                ResultRow {
                    group: entry.group(),
                    dataset: entry.name.clone(),
                    beta: t.beta,
                    baseline: t.baseline,
                    seed: t.seed,
                    outcome,
                }
            })
            .collect()
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "generator",
        "dataset",
        "beta",
        "baseline",
        "seed",
        "kc_acc",
        "uc_acc",
        "open_f1",
        "auroc",
        "threshold",
        "db_index",
        "error",
    ])?;
    for r in rows {
        let mut rec = vec![
            r.group.clone(),
            r.dataset.clone(),
            r.beta.to_string(),
            r.baseline.to_string(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(m) => rec.extend([
                opt(m.kc_acc),
                opt(m.uc_acc),
                m.open_f1.to_string(),
                opt(m.auroc),
                opt(m.chosen_threshold),
                opt(m.db_index),
                String::new(),
            ]),
            Err(e) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn scored_runs(rows: &[ResultRow]) -> Vec<ScoredRun> {
    rows.iter()
        .filter_map(|r| {
            r.outcome.as_ref().ok().map(|m| ScoredRun {
                group: r.group.clone(),
                dataset: r.dataset.clone(),
                beta: r.beta,
                baseline: r.baseline,
                seed: r.seed,
                report: m.clone(),
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "group",
        "beta",
        "baseline",
        "n_runs",
        "kc_acc_mean",
        "kc_acc_std",
        "uc_acc_mean",
        "uc_acc_std",
        "open_f1_mean",
        "open_f1_std",
        "auroc_mean",
        "auroc_std",
        "db_index_mean",
        "db_index_std",
        "kc_acc_sig",
        "uc_acc_sig",
        "open_f1_sig",
    ])?;
    let ms = |m: Option<MeanStd>| -> [String; 2] {
        match m {
            Some(m) => [m.mean.to_string(), m.std.to_string()],
            None => [String::new(), String::new()],
        }
    };
    let flag = |f: Option<bool>| f.map(|b| b.to_string()).unwrap_or_default();
    for s in summary {
        let mut rec = vec![
            s.group.clone(),
            s.beta.to_string(),
            s.baseline.to_string(),
            s.n_runs.to_string(),
        ];
        for m in [s.kc_acc, s.uc_acc, s.open_f1, s.auroc, s.db_index] {
            rec.extend(ms(m));
        }
        rec.extend([flag(s.kc_acc_sig), flag(s.uc_acc_sig), flag(s.open_f1_sig)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Spearman correlation between sosr D-B index and AUROC over all datasets
/// at one β.
pub fn db_auroc_correlation(rows: &[ResultRow], beta: f64) -> Option<f64> {
    let (db, auc): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.baseline == Baseline::Sosr && r.beta == beta)
        .filter_map(|r| {
            let m = r.outcome.as_ref().ok()?;
            Some((m.db_index?, m.auroc?))
        })
        .unzip();
    spearman(&db, &auc)
}

/// Human-readable table: one block per group, β rows, one line per baseline.
/// `*` marks a significant difference from sosr.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let cell = |m: Option<MeanStd>, sig: Option<bool>| match m {
        Some(m) => format!(
            "{:.2} ± {:.2}{}",
            m.mean,
            m.std,
            if sig == Some(true) { "*" } else { " " }
        ),
        None => "-".to_string(),
    };
    let mut last_group = None;
    for s in summary {
        if last_group != Some(&s.group) {
            out.push_str(&format!(
                "\n{}\n{:<6} {:<12} {:>14} {:>14} {:>14} {:>14}\n",
                s.group, "beta", "baseline", "KC-Acc", "UC-Acc", "F1", "AUC"
            ));
            last_group = Some(&s.group);
        }
        out.push_str(&format!(
            "{:<6} {:<12} {:>14} {:>14} {:>14} {:>14}\n",
            s.beta,
            s.baseline.as_str(),
            cell(s.kc_acc, s.kc_acc_sig),
            cell(s.uc_acc, s.uc_acc_sig),
            cell(s.open_f1, s.open_f1_sig),
            cell(s.auroc, None),
        ));
    }
    out
}

/// Outcome of a full benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub results_path: PathBuf,
    pub summary_path: PathBuf,
}

impl BenchOutcome {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }
}

pub fn run_bench(spec: &BenchmarkSpec, jobs: usize) -> CliResult<BenchOutcome> {
    let rows = run_matrix(spec, jobs)?;
    let summary = aggregate(&scored_runs(&rows));
    fs::create_dir_all(&spec.out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", spec.out_dir.display())))?;
    let results_path = spec.out_dir.join("results.csv");
    let summary_path = spec.out_dir.join("summary.csv");
    write_results(&rows, create(&results_path)?)?;
    write_summary(&summary, create(&summary_path)?)?;
    Ok(BenchOutcome {
        rows,
        summary,
        results_path,
        summary_path,
    })
}

pub(crate) fn create(path: &Path) -> CliResult<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_detection() {
        assert_eq!(synthetic_family("isoGauss_D07"), Some(Generator::IsoGauss));
        assert_eq!(
            synthetic_family("hyperCube_D18"),
            Some(Generator::HyperCube)
        );
        assert_eq!(synthetic_family("insects"), None);
        assert_eq!(synthetic_family("isoGauss_Dx"), None);
        assert_eq!(synthetic_family("other_D01"), None);
    }

    #[test]
    fn spec_json_defaults() {
        let spec: BenchmarkSpec =
            serde_json::from_str(r#"{"datasets": ["data"], "out_dir": "out"}"#).unwrap();
        assert_eq!(spec.betas, SYNTHETIC_BETAS.to_vec());
        assert_eq!(spec.real_betas, REAL_BETAS.to_vec());
        assert_eq!(spec.baselines, Baseline::ALL.to_vec());
        assert_eq!(spec.seeds_per_real_dataset, 5);
        assert_eq!(spec.master_seed, 0);
        let bad = BenchmarkSpec {
            betas: vec![1.5],
            ..spec
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seeds_per_dataset_kind() {
        let spec = BenchmarkSpec::new(vec![], PathBuf::from("x"), 3);
        let syn = DatasetEntry::from_path(Path::new("d/isoGauss_D01.csv"));
        let real = DatasetEntry::from_path(Path::new("d/insects.csv"));
        assert_eq!(run_seeds(&spec, &syn).len(), 1);
        let seeds = run_seeds(&spec, &real);
        assert_eq!(seeds.len(), 5);
        assert_eq!(real.group(), "insects");
        assert_eq!(syn.group(), "isoGauss");
    }
}
