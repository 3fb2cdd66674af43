//! The streaming pipeline and its two single-classifier baselines, evaluated
//! test-then-train: every instance is predicted first, then its true label is
//! revealed and the models learn from it.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierState;
use crate::clustering::ClusterState;
use crate::datagen::{assemble_stream, StreamSplit};
use crate::detector;
use crate::domain::{
    label_space_partition, Baseline, Dataset, ExperimentConfig, Instance, Label, LabelSpace,
};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// What happens to instances flagged unknown in online mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ConsolidationPolicy {
    /// Flagged instances are predicted unknown and never learned.
    #[default]
    Disabled,
    /// Flagged instances are buffered (oldest dropped beyond `capacity`);
    /// once `min_count` are held they become a new known class, learned by
    /// the classifier and seeded as a new centroid at the buffer mean.
    BufferThreshold { capacity: usize, min_count: usize },
}

impl ConsolidationPolicy {
    pub fn reference() -> Self {
        ConsolidationPolicy::BufferThreshold {
            capacity: 100,
            min_count: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub classifier: ClassifierState,
    pub clusters: ClusterState,
}

/// Trains the classifier for `warmup_epochs` shuffled passes over `train` and
/// seeds one cluster per known class.
pub fn warm_up(
    train: &[Instance],
    n_known: usize,
    config: &ExperimentConfig,
    rng: &mut Rng,
) -> Result<Models> {
    if train.is_empty() {
        return Err(Error::DegenerateWarmup("empty training partition".into()));
    }
    let dim = train[0].features.len();
    let mut present = vec![false; n_known];
    for inst in train {
        match inst.label {
            Label::Known(c) if c < n_known => present[c] = true,
            other => {
                return Err(Error::DegenerateWarmup(format!(
                    "training instance {} has label {other} outside the {n_known} known classes",
                    inst.index
                )))
            }
        }
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(Error::DegenerateWarmup(format!(
            "known class {missing} has no training instance"
        )));
    }

    let mut classifier = ClassifierState::new(
        dim,
        (0..n_known).map(Label::Known).collect(),
        config.learning_rate,
    )?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.warmup_epochs {
        order.shuffle(rng);
        for &i in &order {
            classifier.learn(&train[i].features, train[i].label)?;
        }
    }
    let points: Vec<&[f64]> = train.iter().map(|i| i.features.as_slice()).collect();
    let clusters = ClusterState::warmup_init(
        &points,
        n_known,
        rng,
        config.lloyd_max_iters,
        config.lloyd_tol,
    )?;
    Ok(Models {
        classifier,
        clusters,
    })
}

/// Outcome of scoring one instance with the clustering + classifier pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SosrPrediction {
    /// Classifier argmax, regardless of the detector.
    pub closed_set: Label,
    pub entropy: f64,
    /// Final decision when a threshold is set; `None` in post-hoc mode.
    pub predicted: Option<Label>,
}

/// Scores `x` against the centroids and the classifier. With a threshold,
/// `H >= gamma_h` predicts `Unknown`, otherwise the classifier's label.
pub fn process_instance_sosr(
    models: &Models,
    x: &[f64],
    gamma_h: Option<f64>,
) -> Result<SosrPrediction> {
    let entropy = detector::score(x, &models.clusters)?.entropy;
    let closed_set = models.classifier.predict(x)?;
    let predicted = gamma_h.map(|g| {
        if detector::is_unknown(entropy, g) {
            Label::Unknown
        } else {
            closed_set
        }
    });
    Ok(SosrPrediction {
        closed_set,
        entropy,
        predicted,
    })
}

/// Learning step after the true label of `x` is revealed.
///
/// * static: nothing.
/// * incremental: registers `Unknown` as a class on first sight, then learns.
/// * sosr: known labels update both classifier and centroids; unknown labels
///   change nothing.
pub fn verify_and_update(
    models: &mut Models,
    x: &[f64],
    true_label: Label,
    baseline: Baseline,
) -> Result<()> {
    match baseline {
        Baseline::Static => Ok(()),
        Baseline::Incremental => {
            if !models.classifier.is_registered(true_label) {
                models.classifier.add_class(true_label)?;
            }
            models.classifier.learn(x, true_label)
        }
        Baseline::Sosr => match true_label {
            Label::Known(_) => {
                models.classifier.learn(x, true_label)?;
                models.clusters.update(x)?;
                Ok(())
            }
            Label::Unknown => Ok(()),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub t: usize,
    pub true_label: Label,
    /// Classifier argmax at prediction time.
    pub closed_pred: Label,
    /// Detector entropy; present only for the sosr baseline.
    pub entropy: Option<f64>,
}

/// Per-instance log of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// Number of known classes at warm-up; labels `Known(i)` with
    /// `i >= n_known` are consolidated unknown classes.
    pub n_known: usize,
    pub rows: Vec<RunRow>,
    /// Centroids after the stream (sosr only).
    pub final_clusters: Option<ClusterState>,
}

impl RunRecord {
    pub fn has_entropy(&self) -> bool {
        self.rows.iter().any(|r| r.entropy.is_some())
    }

    /// Writes `t,true_label,closed_pred,entropy`; entropy is empty when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }
}

pub fn write_rows<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "true_label", "closed_pred", "entropy"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.true_label.to_string(),
            r.closed_pred.to_string(),
            r.entropy.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<RunRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        if record.len() != 4 {
            return Err(bad("field count"));
        }
        let t = record[0].parse().map_err(|_| bad("t"))?;
        let true_label = record[1].parse().map_err(|_| bad("true_label"))?;
        let closed_pred = record[2].parse().map_err(|_| bad("closed_pred"))?;
        let entropy = match record[3].trim() {
            "" => None,
            h => Some(h.parse::<f64>().map_err(|_| bad("entropy"))?),
        };
        rows.push(RunRow {
            t,
            true_label,
            closed_pred,
            entropy,
        });
    }
    Ok(rows)
}

/// A warmed-up baseline consuming a stream one instance at a time.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub models: Models,
    baseline: Baseline,
    gamma_h: Option<f64>,
    policy: ConsolidationPolicy,
    buffer: std::collections::VecDeque<Vec<f64>>,
    next_class: usize,
}

impl Pipeline {
    pub fn new(
        models: Models,
        baseline: Baseline,
        gamma_h: Option<f64>,
        policy: ConsolidationPolicy,
    ) -> Self {
        let next_class = models
            .classifier
            .classes()
            .iter()
            .filter_map(|l| match l {
                Label::Known(c) => Some(c + 1),
                Label::Unknown => None,
            })
            .max()
            .unwrap_or(0);
        Self {
            models,
            baseline,
            gamma_h,
            policy,
            buffer: Default::default(),
            next_class,
        }
    }

    /// Predicts `x` and returns the logged closed-set label and entropy. In
    /// online sosr mode with consolidation enabled this may also create a
    /// new class.
    pub fn predict(&mut self, x: &[f64]) -> Result<(Label, Option<f64>)> {
        match self.baseline {
            Baseline::Static | Baseline::Incremental => {
                Ok((self.models.classifier.predict(x)?, None))
            }
            Baseline::Sosr => {
                let p = process_instance_sosr(&self.models, x, self.gamma_h)?;
                if p.predicted == Some(Label::Unknown) {
                    self.consider_consolidation(x)?;
                }
                Ok((p.closed_set, Some(p.entropy)))
            }
        }
    }

    pub fn verify(&mut self, x: &[f64], true_label: Label) -> Result<()> {
        verify_and_update(&mut self.models, x, true_label, self.baseline)
    }

    fn consider_consolidation(&mut self, x: &[f64]) -> Result<Option<Label>> {
        let ConsolidationPolicy::BufferThreshold {
            capacity,
            min_count,
        } = self.policy
        else {
            return Ok(None);
        };
        self.buffer.push_back(x.to_vec());
        while self.buffer.len() > capacity.max(1) {
            self.buffer.pop_front();
        }
        if self.buffer.len() < min_count.max(1) {
            return Ok(None);
        }
        let label = Label::Known(self.next_class);
        self.next_class += 1;
        self.models.classifier.add_class(label)?;
        let dim = x.len();
        let mut mean = vec![0.0; dim];
        for b in &self.buffer {
            self.models.classifier.learn(b, label)?;
            for (m, v) in mean.iter_mut().zip(b) {
                *m += v;
            }
        }
        let n = self.buffer.len();
        mean.iter_mut().for_each(|m| *m /= n as f64);
        self.models.clusters.add_centroid(mean, n as u64)?;
        self.buffer.clear();
        Ok(Some(label))
    }
}

/// Warm-up followed by test-then-train over `stream`, without consolidation.
pub fn run_stream(
    train: &[Instance],
    stream: &[Instance],
    n_known: usize,
    config: &ExperimentConfig,
) -> Result<RunRecord> {
    run_stream_with_policy(
        train,
        stream,
        n_known,
        config,
        ConsolidationPolicy::Disabled,
    )
}

pub fn run_stream_with_policy(
    train: &[Instance],
    stream: &[Instance],
    n_known: usize,
    config: &ExperimentConfig,
    policy: ConsolidationPolicy,
) -> Result<RunRecord> {
    config.validate()?;
    if stream.is_empty() {
        return Err(Error::InsufficientData("empty stream".into()));
    }
    let mut rng = seed::rng(seed::derive(config.seed, SEED_TAG_WARMUP));
    let models = warm_up(train, n_known, config, &mut rng)?;
    let mut pipeline = Pipeline::new(models, config.baseline, config.gamma_h, policy);
    let mut rows = Vec::with_capacity(stream.len());
    for (t, inst) in stream.iter().enumerate() {
        let (closed_pred, entropy) = pipeline.predict(&inst.features)?;
        rows.push(RunRow {
            t,
            true_label: inst.label,
            closed_pred,
            entropy,
        });
        pipeline.verify(&inst.features, inst.label)?;
    }
    let final_clusters =
        (config.baseline == Baseline::Sosr).then(|| pipeline.models.clusters.clone());
    Ok(RunRecord {
        config: config.clone(),
        n_known,
        rows,
        final_clusters,
    })
}

pub const SEED_TAG_PARTITION: u64 = 1;
pub const SEED_TAG_STREAM: u64 = 2;
pub const SEED_TAG_WARMUP: u64 = 3;

/// Everything produced by one experiment on a dataset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub space: LabelSpace,
    pub split: StreamSplit,
    pub record: RunRecord,
}

/// Partitions the label space, assembles the stream and runs one baseline.
/// All randomness derives from `config.seed`, so the three baselines see the
/// same partition, stream and warm-up order for a given seed.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let mut rng = seed::rng(seed::derive(config.seed, SEED_TAG_PARTITION));
    let space = label_space_partition(dataset.n_classes, config.beta, &mut rng)?;
    let split = assemble_stream(dataset, &space, seed::derive(config.seed, SEED_TAG_STREAM))?;
    let record = run_stream(&split.train, &split.stream, space.n_known(), config)?;
    Ok(Experiment {
        space,
        split,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(features: Vec<f64>, label: Label, index: usize) -> Instance {
        Instance {
            features,
            label,
            index,
        }
    }

    fn blobs() -> Vec<Instance> {
        let mut v = Vec::new();
        for i in 0..20 {
            let j = i as f64 * 0.05;
            v.push(inst(vec![-5.0 + j, j], Label::Known(0), v.len()));
            v.push(inst(vec![5.0 - j, j], Label::Known(1), v.len()));
        }
        v
    }

    #[test]
    fn warm_up_errors() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        assert!(warm_up(&[], 2, &cfg, &mut seed::rng(0)).is_err());
        let only0: Vec<Instance> = blobs()
            .into_iter()
            .filter(|i| i.label == Label::Known(0))
            .collect();
        assert!(matches!(
            warm_up(&only0, 2, &cfg, &mut seed::rng(0)),
            Err(Error::DegenerateWarmup(_))
        ));
        let mut bad = blobs();
        bad[0].label = Label::Unknown;
        assert!(warm_up(&bad, 2, &cfg, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn warm_up_builds_one_cluster_per_class() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        let m = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        assert_eq!(m.clusters.n_clusters(), 2);
        assert_eq!(m.classifier.n_classes(), 2);
    }

    #[test]
    fn sosr_prediction_modes() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        let m = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        let c0 = m.clusters.centroids()[0].clone();
        let p = process_instance_sosr(&m, &c0, Some(0.5)).unwrap();
        assert_eq!(p.entropy, 0.0);
        assert_eq!(p.predicted, Some(p.closed_set));
        let c1 = &m.clusters.centroids()[1];
        let mid: Vec<f64> = c0.iter().zip(c1).map(|(a, b)| (a + b) / 2.0).collect();
        let p = process_instance_sosr(&m, &mid, Some(0.9)).unwrap();
        assert!((p.entropy - 1.0).abs() < 1e-12);
        assert_eq!(p.predicted, Some(Label::Unknown));
        assert_eq!(
            process_instance_sosr(&m, &mid, None).unwrap().predicted,
            None
        );
    }

    #[test]
    fn static_weights_are_frozen() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Static);
        let mut m = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        let before = m.clone();
        for i in blobs() {
            verify_and_update(&mut m, &i.features, i.label, Baseline::Static).unwrap();
        }
        verify_and_update(&mut m, &[0.0, 9.0], Label::Unknown, Baseline::Static).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn incremental_registers_unknown_on_first_sight() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Incremental);
        let mut m = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        let script = [
            (vec![-5.0, 0.0], Label::Known(0)),
            (vec![0.0, 9.0], Label::Unknown),
            (vec![5.0, 0.0], Label::Known(1)),
        ];
        verify_and_update(&mut m, &script[0].0, script[0].1, Baseline::Incremental).unwrap();
        assert!(!m.classifier.is_registered(Label::Unknown));
        verify_and_update(&mut m, &script[1].0, script[1].1, Baseline::Incremental).unwrap();
        assert!(m.classifier.is_registered(Label::Unknown));
        assert_eq!(m.classifier.n_classes(), 3);
        verify_and_update(&mut m, &script[2].0, script[2].1, Baseline::Incremental).unwrap();
        assert_eq!(m.classifier.n_classes(), 3);
    }

    #[test]
    fn sosr_ignores_unknown_truth_and_tracks_counts() {
        let train = blobs();
        let stream = vec![
            inst(vec![-4.0, 0.5], Label::Known(0), 0),
            inst(vec![0.0, 30.0], Label::Unknown, 1),
            inst(vec![4.0, 0.5], Label::Known(1), 2),
            inst(vec![0.0, -30.0], Label::Unknown, 3),
        ];
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        let rec = run_stream(&train, &stream, 2, &cfg).unwrap();
        let clusters = rec.final_clusters.as_ref().unwrap();
        assert_eq!(
            clusters.counts().iter().sum::<u64>(),
            train.len() as u64 + 2
        );
        assert!(rec.rows.iter().all(|r| r.entropy.is_some()));
        assert_eq!(rec.rows.len(), 4);
    }

    #[test]
    fn record_invariants_and_determinism() {
        let train = blobs();
        let stream: Vec<Instance> = blobs().into_iter().take(10).collect();
        for b in Baseline::ALL {
            let cfg = ExperimentConfig::new(0.2, 5, b);
            let a = run_stream(&train, &stream, 2, &cfg).unwrap();
            let again = run_stream(&train, &stream, 2, &cfg).unwrap();
            assert_eq!(a, again);
            assert_eq!(a.rows.len(), stream.len());
            assert!(a.rows.iter().enumerate().all(|(t, r)| r.t == t));
            assert_eq!(a.has_entropy(), b == Baseline::Sosr);
            assert_eq!(a.final_clusters.is_some(), b == Baseline::Sosr);
        }
        let cfg = ExperimentConfig::new(0.2, 5, Baseline::Sosr);
        assert!(run_stream(&train, &[], 2, &cfg).is_err());
    }

    #[test]
    fn rows_csv_round_trip() {
        let rows = vec![
            RunRow {
                t: 0,
                true_label: Label::Known(1),
                closed_pred: Label::Known(0),
                entropy: Some(0.123456789012345),
            },
            RunRow {
                t: 1,
                true_label: Label::Unknown,
                closed_pred: Label::Unknown,
                entropy: None,
            },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,true_label,closed_pred,entropy\n"));
        assert!(text.contains("1,unknown,unknown,\n"));
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn buffer_consolidation_creates_a_class() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        let models = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        let policy = ConsolidationPolicy::BufferThreshold {
            capacity: 4,
            min_count: 3,
        };
        let mut p = Pipeline::new(models, Baseline::Sosr, Some(0.5), policy);
        for k in 0..3 {
            p.predict(&[0.1 * k as f64, 40.0]).unwrap();
        }
        assert_eq!(p.models.classifier.n_classes(), 3);
        assert!(p.models.classifier.is_registered(Label::Known(2)));
        assert_eq!(p.models.clusters.n_clusters(), 3);
        // the new centroid absorbs nearby points, so they look known now
        let (closed, h) = p.predict(&[0.1, 40.0]).unwrap();
        assert_eq!(closed, Label::Known(2));
        assert!(h.unwrap() < 0.5);
    }

    #[test]
    fn disabled_policy_never_changes_models() {
        let cfg = ExperimentConfig::new(0.2, 0, Baseline::Sosr);
        let models = warm_up(&blobs(), 2, &cfg, &mut seed::rng(0)).unwrap();
        let mut p = Pipeline::new(
            models.clone(),
            Baseline::Sosr,
            Some(0.5),
            ConsolidationPolicy::Disabled,
        );
        for k in 0..100 {
            p.predict(&[0.1 * k as f64, 40.0]).unwrap();
        }
        assert_eq!(p.models, models);
    }
}
