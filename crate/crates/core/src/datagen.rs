//! Synthetic dataset generators, CSV ingestion and stream assembly.
//!
//! Two generator families are provided:
//!
//! * `isoGauss`: class centers uniform in `[-10, 10]^d`, isotropic Gaussian
//!   noise with a configurable standard deviation.
//! * `hyperCube`: class centers on distinct vertices of `{-1, +1}^d` scaled
//!   by a separation factor, unit Gaussian noise. All features informative.
//!
//! Both split instances as evenly as possible over classes and are fully
//! determined by their seed.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Instance, Label, LabelSpace};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Half-width of the box isoGauss centers are drawn from.
pub const ISO_GAUSS_BOX: f64 = 10.0;
pub const TRAIN_FRACTION: f64 = 0.8;
pub const UNKNOWN_SAMPLE_FRACTION: f64 = 0.1;
pub const MIN_KNOWN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "isoGauss")]
    IsoGauss,
    #[serde(rename = "hyperCube")]
    HyperCube,
}

impl Generator {
    pub const ALL: [Generator; 2] = [Generator::IsoGauss, Generator::HyperCube];

    pub fn as_str(self) -> &'static str {
        match self {
            Generator::IsoGauss => "isoGauss",
            Generator::HyperCube => "hyperCube",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "isogauss" => Ok(Generator::IsoGauss),
            "hypercube" => Ok(Generator::HyperCube),
            other => Err(Error::InvalidParameter(format!(
                "unknown generator {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_instances: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Per-coordinate noise std for isoGauss.
    pub std_dev: f64,
    /// Vertex scale for hyperCube.
    pub class_sep: f64,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn validate(&self, generator: Generator) -> Result<()> {
        if self.n_classes < 2 || self.n_features == 0 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes and 1 feature, got {} and {}",
                self.n_classes, self.n_features
            )));
        }
        if self.n_instances < 10 * self.n_classes {
            return Err(Error::InvalidParameter(format!(
                "{} instances is fewer than 10 per class for {} classes",
                self.n_instances, self.n_classes
            )));
        }
        match generator {
            Generator::IsoGauss if !(self.std_dev > 0.0 && self.std_dev.is_finite()) => Err(
                Error::InvalidParameter(format!("std_dev must be positive, got {}", self.std_dev)),
            ),
            Generator::HyperCube if !(self.class_sep > 0.0 && self.class_sep.is_finite()) => {
                Err(Error::InvalidParameter(format!(
                    "class_sep must be positive, got {}",
                    self.class_sep
                )))
            }
            Generator::HyperCube if !hypercube_has_room(self.n_features, self.n_classes) => {
                Err(Error::InvalidParameter(format!(
                    "2^{} vertices cannot host {} classes",
                    self.n_features, self.n_classes
                )))
            }
            _ => Ok(()),
        }
    }
}

fn hypercube_has_room(dim: usize, n_classes: usize) -> bool {
    dim >= usize::BITS as usize - 1 || (1usize << dim) >= n_classes
}

/// One column of the synthetic benchmark parameter table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteGroup {
    pub label: &'static str,
    /// 1-based index of the first dataset in the group.
    pub first: usize,
    pub len: usize,
    pub n_instances: usize,
    pub n_classes: usize,
    pub n_features: usize,
    pub std_dev: f64,
    pub class_sep: f64,
}

pub const SUITE_GROUPS: [SuiteGroup; 6] = [
    SuiteGroup {
        label: "D1-D4",
        first: 1,
        len: 4,
        n_instances: 1000,
        n_classes: 5,
        n_features: 3,
        std_dev: 0.75,
        class_sep: 1.4,
    },
    SuiteGroup {
        label: "D5-D8",
        first: 5,
        len: 4,
        n_instances: 2000,
        n_classes: 8,
        n_features: 4,
        std_dev: 1.0,
        class_sep: 1.2,
    },
    SuiteGroup {
        label: "D9-D11",
        first: 9,
        len: 3,
        n_instances: 3000,
        n_classes: 10,
        n_features: 6,
        std_dev: 1.25,
        class_sep: 1.0,
    },
    SuiteGroup {
        label: "D12-D14",
        first: 12,
        len: 3,
        n_instances: 5000,
        n_classes: 12,
        n_features: 8,
        std_dev: 1.5,
        class_sep: 0.8,
    },
    SuiteGroup {
        label: "D15-D17",
        first: 15,
        len: 3,
        n_instances: 7500,
        n_classes: 15,
        n_features: 10,
        std_dev: 1.75,
        class_sep: 0.6,
    },
    SuiteGroup {
        label: "D18-D20",
        first: 18,
        len: 3,
        n_instances: 10000,
        n_classes: 20,
        n_features: 12,
        std_dev: 2.0,
        class_sep: 0.4,
    },
];

impl SuiteGroup {
    pub fn find(label: &str) -> Option<&'static SuiteGroup> {
        let norm = |s: &str| s.to_ascii_uppercase().replace('D', "");
        SUITE_GROUPS.iter().find(|g| norm(g.label) == norm(label))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> {
        self.first..self.first + self.len
    }
}

/// A named, seeded synthetic dataset of the benchmark suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub generator: Generator,
    pub group: String,
    pub params: GeneratorParams,
}

impl SuiteEntry {
    pub fn generate(&self) -> Result<Dataset> {
        let mut ds = generate(self.generator, &self.params)?;
        ds.name = self.name.clone();
        Ok(ds)
    }
}

pub fn dataset_name(generator: Generator, index: usize) -> String {
    format!("{}_D{index:02}", generator.as_str())
}

/// The suite entries of one generator family and group, each seeded from the
/// master seed and its own name.
pub fn suite_group(generator: Generator, group: &SuiteGroup, master_seed: u64) -> Vec<SuiteEntry> {
    group
        .indices()
        .map(|i| {
            let name = dataset_name(generator, i);
            SuiteEntry {
                params: GeneratorParams {
                    n_instances: group.n_instances,
                    n_classes: group.n_classes,
                    n_features: group.n_features,
                    std_dev: group.std_dev,
                    class_sep: group.class_sep,
                    seed: seed::derive_str(master_seed, &name),
                },
                name,
                generator,
                group: group.label.to_string(),
            }
        })
        .collect()
}

/// The full 40-dataset synthetic suite (20 per family).
pub fn suite(master_seed: u64) -> Vec<SuiteEntry> {
    Generator::ALL
        .iter()
        .flat_map(|&g| {
            SUITE_GROUPS
                .iter()
                .flat_map(move |grp| suite_group(g, grp, master_seed))
        })
        .collect()
}

pub fn generate(generator: Generator, params: &GeneratorParams) -> Result<Dataset> {
    match generator {
        Generator::IsoGauss => gen_iso_gauss(params),
        Generator::HyperCube => gen_hypercube(params),
    }
}

pub fn gen_iso_gauss(params: &GeneratorParams) -> Result<Dataset> {
    params.validate(Generator::IsoGauss)?;
    let mut rng = seed::rng(params.seed);
    let centers: Vec<Vec<f64>> = (0..params.n_classes)
        .map(|_| {
            (0..params.n_features)
                .map(|_| rng.random_range(-ISO_GAUSS_BOX..=ISO_GAUSS_BOX))
                .collect()
        })
        .collect();
    let noise =
        Normal::new(0.0, params.std_dev).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    assemble(params, &centers, noise, &mut rng, Generator::IsoGauss)
}

pub fn gen_hypercube(params: &GeneratorParams) -> Result<Dataset> {
    params.validate(Generator::HyperCube)?;
    let mut rng = seed::rng(params.seed);
    let d = params.n_features;
    let mut seen = BTreeSet::new();
    let mut centers = Vec::with_capacity(params.n_classes);
    while centers.len() < params.n_classes {
        let vertex: Vec<bool> = (0..d).map(|_| rng.random::<bool>()).collect();
        if seen.insert(vertex.clone()) {
            centers.push(
                vertex
                    .into_iter()
                    .map(|up| {
                        if up {
                            params.class_sep
                        } else {
                            -params.class_sep
                        }
                    })
                    .collect(),
            );
        }
    }
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    assemble(params, &centers, noise, &mut rng, Generator::HyperCube)
}

/// Draws `center + noise` instances with an even class split, shuffles them
/// and renumbers classes by first appearance.
fn assemble(
    params: &GeneratorParams,
    centers: &[Vec<f64>],
    noise: Normal<f64>,
    rng: &mut Rng,
    generator: Generator,
) -> Result<Dataset> {
    let k = params.n_classes;
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(params.n_instances);
    for (c, center) in centers.iter().enumerate() {
        let n = params.n_instances / k + usize::from(c < params.n_instances % k);
        for _ in 0..n {
            rows.push((center.iter().map(|m| m + noise.sample(rng)).collect(), c));
        }
    }
    rows.shuffle(rng);
    let mut remap = HashMap::new();
    let instances = rows
        .into_iter()
        .enumerate()
        .map(|(index, (features, c))| {
            let next = remap.len();
            let id = *remap.entry(c).or_insert(next);
            Instance {
                features,
                label: Label::Known(id),
                index,
            }
        })
        .collect();
    Dataset::new(generator.as_str(), k, params.n_features, instances)
}

/// Reads a dataset whose last column is a class label and every other column
/// numeric. Labels become dense ids in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let file = std::fs::File::open(path)?;
    read_csv(file, name)
}

pub fn read_csv<R: std::io::Read>(input: R, name: impl Into<String>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least one feature column and a label column".into(),
        });
    }
    let dim = width - 1;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut instances = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut features = Vec::with_capacity(dim);
        for (col, cell) in record.iter().take(dim).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {col}: {cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {col}: non-finite value {cell:?}"),
                });
            }
            features.push(v);
        }
        let label = record.get(dim).unwrap_or_default().to_string();
        let next = ids.len();
        let id = *ids.entry(label).or_insert(next);
        let index = instances.len();
        instances.push(Instance {
            features,
            label: Label::Known(id),
            index,
        });
    }
    if ids.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("need at least 2 classes, found {}", ids.len()),
        });
    }
    Dataset::new(name, ids.len(), dim, instances)
}

/// Writes `f0,...,f{d-1},label` with shortest round-trip decimal features.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dataset.dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for inst in &dataset.instances {
        let mut row: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
        row.push(match inst.label {
            Label::Known(c) => c.to_string(),
            Label::Unknown => "unknown".into(),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, std::io::BufWriter::new(file))
}

/// The training partition and the interleaved test stream of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSplit {
    pub train: Vec<Instance>,
    pub stream: Vec<Instance>,
}

fn round_half_up(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 0.5).floor() as usize
}

/// Stratified 80/20 split of every known class; the stream is the known test
/// part plus 10% of each unknown class (relabeled `Unknown`), shuffled.
/// Instances keep their dataset `index`.
pub fn assemble_stream(dataset: &Dataset, space: &LabelSpace, seed: u64) -> Result<StreamSplit> {
    let mut rng = seed::rng(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_classes];
    for (i, inst) in dataset.instances.iter().enumerate() {
        if let Label::Known(c) = inst.label {
            by_class[c].push(i);
        }
    }
    let mut train = Vec::new();
    let mut stream = Vec::new();
    for (raw, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(&mut rng);
        let label = space.map(raw);
        let take = |idx: &[usize]| -> Vec<Instance> {
            idx.iter()
                .map(|&i| Instance {
                    features: dataset.instances[i].features.clone(),
                    label,
                    index: dataset.instances[i].index,
                })
                .collect()
        };
        if space.is_known(raw) {
            if members.len() < MIN_KNOWN_CLASS_SIZE {
                return Err(Error::InsufficientData(format!(
                    "known class {raw} has {} instances (need {MIN_KNOWN_CLASS_SIZE})",
                    members.len()
                )));
            }
            let n_train = round_half_up(members.len(), TRAIN_FRACTION);
            train.extend(take(&members[..n_train]));
            stream.extend(take(&members[n_train..]));
        } else if !members.is_empty() {
            let n = round_half_up(members.len(), UNKNOWN_SAMPLE_FRACTION).max(1);
            stream.extend(take(&members[..n]));
        }
    }
    stream.shuffle(&mut rng);
    Ok(StreamSplit { train, stream })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::label_space_partition;

    fn params(n: usize, k: usize, d: usize) -> GeneratorParams {
        GeneratorParams {
            n_instances: n,
            n_classes: k,
            n_features: d,
            std_dev: 0.75,
            class_sep: 1.4,
            seed: 42,
        }
    }

    #[test]
    fn suite_layout() {
        let s = suite(1);
        assert_eq!(s.len(), 40);
        assert_eq!(SUITE_GROUPS.iter().map(|g| g.len).sum::<usize>(), 20);
        let d1 = &s[0];
        assert_eq!(d1.name, "isoGauss_D01");
        assert_eq!(
            (
                d1.params.n_instances,
                d1.params.n_classes,
                d1.params.n_features
            ),
            (1000, 5, 3)
        );
        assert_eq!(d1.params.std_dev, 0.75);
        let d18 = s.iter().find(|e| e.name == "hyperCube_D18").unwrap();
        assert_eq!(
            (
                d18.params.n_instances,
                d18.params.n_classes,
                d18.params.n_features
            ),
            (10000, 20, 12)
        );
        assert_eq!(d18.params.class_sep, 0.4);
        let seeds: BTreeSet<u64> = s.iter().map(|e| e.params.seed).collect();
        assert_eq!(seeds.len(), 40);
        assert_eq!(SuiteGroup::find("d9-11").unwrap().first, 9);
    }

    #[test]
    fn iso_gauss_shape_and_split() {
        let ds = gen_iso_gauss(&params(1003, 5, 3)).unwrap();
        assert_eq!(ds.instances.len(), 1003);
        assert_eq!(ds.dim, 3);
        let mut counts = ds.class_counts();
        counts.sort_unstable();
        assert_eq!(counts, vec![200, 200, 201, 201, 201]);
        // renumbered by first appearance
        assert_eq!(ds.instances[0].label, Label::Known(0));
    }

    #[test]
    fn iso_gauss_zero_noise_limit() {
        let mut p = params(100, 4, 2);
        p.std_dev = 1e-300;
        let ds = gen_iso_gauss(&p).unwrap();
        let mut first: HashMap<Label, &Vec<f64>> = HashMap::new();
        for inst in &ds.instances {
            let f = first.entry(inst.label).or_insert(&inst.features);
            for (a, b) in f.iter().zip(&inst.features) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for g in Generator::ALL {
            let a = generate(g, &params(200, 4, 3)).unwrap();
            let b = generate(g, &params(200, 4, 3)).unwrap();
            assert_eq!(a, b);
            let mut p = params(200, 4, 3);
            p.seed = 43;
            assert_ne!(a, generate(g, &p).unwrap());
        }
    }

    #[test]
    fn hypercube_needs_enough_vertices() {
        let mut p = params(200, 9, 3);
        assert!(gen_hypercube(&p).is_err());
        p.n_classes = 8;
        let ds = gen_hypercube(&p).unwrap();
        assert_eq!(ds.n_classes, 8);
    }

    #[test]
    fn params_validation() {
        assert!(gen_iso_gauss(&params(40, 5, 3)).is_err());
        let mut p = params(100, 5, 3);
        p.std_dev = 0.0;
        assert!(gen_iso_gauss(&p).is_err());
        p.class_sep = -1.0;
        assert!(gen_hypercube(&p).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = gen_hypercube(&params(60, 3, 2)).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(&buf[..], ds.name.clone()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_toy_file() {
        let text = "a,b,label\n1.5,-2,cat\n0,3.25,dog\n";
        let ds = read_csv(text.as_bytes(), "toy").unwrap();
        assert_eq!(ds.instances.len(), 2);
        assert_eq!(ds.n_classes, 2);
        assert_eq!(ds.instances[0].features, vec![1.5, -2.0]);
        assert_eq!(ds.instances[1].label, Label::Known(1));
    }

    #[test]
    fn csv_errors_name_the_row() {
        let nan = "a,b,label\n1,2,x\n3,NaN,y\n";
        assert!(matches!(
            read_csv(nan.as_bytes(), "t"),
            Err(Error::Parse { line: 3, .. })
        ));
        let text = "a,b,label\n1,2,x\n3,oops,y\n";
        assert!(matches!(
            read_csv(text.as_bytes(), "t"),
            Err(Error::Parse { line: 3, .. })
        ));
        let ragged = "a,b,label\n1,2,x\n3,y\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), "t"),
            Err(Error::Parse { line: 3, .. })
        ));
        let one_class = "a,label\n1,x\n2,x\n";
        assert!(read_csv(one_class.as_bytes(), "t").is_err());
    }

    fn grid_dataset(k: usize, per_class: usize) -> Dataset {
        let instances = (0..k * per_class)
            .map(|i| Instance {
                features: vec![i as f64],
                label: Label::Known(i % k),
                index: i,
            })
            .collect();
        Dataset::new("grid", k, 1, instances).unwrap()
    }

    #[test]
    fn stream_protocol_counts() {
        let ds = grid_dataset(10, 100);
        let space = label_space_partition(10, 0.2, &mut seed::rng(3)).unwrap();
        let split = assemble_stream(&ds, &space, 9).unwrap();
        assert_eq!(split.train.len(), 640);
        assert_eq!(split.stream.len(), 180);
        let n_uc = split
            .stream
            .iter()
            .filter(|i| i.label == Label::Unknown)
            .count();
        assert_eq!(n_uc, 20);
        assert!(split
            .train
            .iter()
            .all(|i| matches!(i.label, Label::Known(c) if c < 8)));
        assert!(split
            .stream
            .iter()
            .all(|i| i.label == Label::Unknown || matches!(i.label, Label::Known(c) if c < 8)));
        // disjoint: features are unique per instance in the grid dataset
        let train: BTreeSet<u64> = split
            .train
            .iter()
            .map(|i| i.features[0].to_bits())
            .collect();
        assert!(split
            .stream
            .iter()
            .all(|i| !train.contains(&i.features[0].to_bits())));
        assert_eq!(split, assemble_stream(&ds, &space, 9).unwrap());
        assert_ne!(
            split.stream,
            assemble_stream(&ds, &space, 10).unwrap().stream
        );
    }

    #[test]
    fn tiny_known_class_is_rejected() {
        let ds = grid_dataset(4, 4);
        let space = LabelSpace::from_ids(vec![0, 1, 2], vec![3]);
        assert!(matches!(
            assemble_stream(&ds, &space, 0),
            Err(Error::InsufficientData(_))
        ));
    }
}
