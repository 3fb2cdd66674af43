use std::collections::HashSet;

use sosr_core::datagen::{assemble_stream, load_csv, read_csv, suite, write_csv, SuiteGroup};
use sosr_core::domain::{label_space_partition, LabelSpace};
use sosr_core::framework::run_experiment;
use sosr_core::metrics::evaluate;
use sosr_core::seed::rng;
use sosr_core::{Baseline, Dataset, Error, ExperimentConfig, Instance, Label};

fn grid_dataset(n_classes: usize, per_class: usize) -> Dataset {
    let instances = (0..n_classes * per_class)
        .map(|i| Instance {
            features: vec![(i % n_classes) as f64 * 10.0, (i / n_classes) as f64 * 0.01],
            label: Label::Known(i % n_classes),
            index: i,
        })
        .collect();
    Dataset::new("grid", n_classes, 2, instances).unwrap()
}

#[test]
fn stream_sizes_follow_the_protocol() {
    let ds = grid_dataset(10, 100);
    let space = label_space_partition(10, 0.2, &mut rng(3)).unwrap();
    assert_eq!(space.uc_ids.len(), 2);
    let split = assemble_stream(&ds, &space, 4).unwrap();
    assert_eq!(split.train.len(), 640);
    assert_eq!(split.stream.len(), 180);
    assert_eq!(
        split.stream.iter().filter(|i| i.label.is_unknown()).count(),
        20
    );

    let train_ids: HashSet<usize> = split.train.iter().map(|i| i.index).collect();
    assert!(split.stream.iter().all(|i| !train_ids.contains(&i.index)));
    assert!(split.stream.iter().all(|i| match i.label {
        Label::Known(c) => c < space.n_known(),
        Label::Unknown => true,
    }));
    assert_eq!(assemble_stream(&ds, &space, 4).unwrap(), split);
}

#[test]
fn tiny_known_class_is_rejected() {
    let ds = grid_dataset(3, 4);
    let space = LabelSpace::from_ids(vec![0, 1], vec![2]);
    assert!(assemble_stream(&ds, &space, 0).is_err());
}

#[test]
fn baselines_share_partition_and_stream() {
    let ds = suite(9)[0].generate().unwrap();
    let runs: Vec<_> = Baseline::ALL
        .iter()
        .map(|&b| run_experiment(&ds, &ExperimentConfig::new(0.25, 77, b)).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.space, runs[0].space);
        assert_eq!(r.split, runs[0].split);
    }
    let stat = evaluate(&runs[0].record, &runs[0].split.stream).unwrap();
    assert_eq!(stat.uc_acc, Some(0.0));
    assert!(stat.auroc.is_none() && stat.chosen_threshold.is_none());
    let sosr = evaluate(&runs[2].record, &runs[2].split.stream).unwrap();
    assert!(sosr.auroc.is_some() && sosr.chosen_threshold.is_some() && sosr.db_index.is_some());
    let counts: u64 = runs[2]
        .record
        .final_clusters
        .as_ref()
        .unwrap()
        .counts()
        .iter()
        .sum();
    let kc_stream = runs[2]
        .split
        .stream
        .iter()
        .filter(|i| !i.label.is_unknown())
        .count();
    assert_eq!(counts as usize, runs[2].split.train.len() + kc_stream);
}

#[test]
fn fixed_threshold_of_one_rarely_flags() {
    let ds = suite(9)[4].generate().unwrap();
    let mut cfg = ExperimentConfig::new(0.25, 5, Baseline::Sosr);
    cfg.gamma_h = Some(1.0);
    let exp = run_experiment(&ds, &cfg).unwrap();
    let report = evaluate(&exp.record, &exp.split.stream).unwrap();
    assert_eq!(report.chosen_threshold, Some(1.0));
    let reaching = exp
        .record
        .rows
        .iter()
        .filter(|r| r.entropy.unwrap() >= 1.0)
        .count();
    let flagged = report.uc_acc.unwrap() * report.n_uc as f64;
    assert!(flagged <= reaching as f64);
}

#[test]
fn infeasible_beta_is_reported() {
    let ds = suite(9)[0].generate().unwrap();
    let err = run_experiment(&ds, &ExperimentConfig::new(0.75, 1, Baseline::Sosr)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleBeta { .. }));
}

#[test]
fn suite_matches_the_parameter_table() {
    let entries = suite(0);
    assert_eq!(entries.len(), 40);
    let d1 = &entries[0];
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
    let d18 = entries.iter().find(|e| e.name == "hyperCube_D18").unwrap();
    assert_eq!(
        (
            d18.params.n_instances,
            d18.params.n_classes,
            d18.params.n_features
        ),
        (10000, 20, 12)
    );
    assert_eq!(d18.params.class_sep, 0.4);
    let seeds: HashSet<u64> = entries.iter().map(|e| e.params.seed).collect();
    assert_eq!(seeds.len(), 40);
    assert_eq!(SuiteGroup::find("D5-D8").unwrap().len, 4);
    assert_eq!(suite(0), entries);
}

#[test]
fn csv_round_trip_preserves_values() {
    let ds = suite(2)[0].generate().unwrap();
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf).unwrap();
    let back = read_csv(&buf[..], ds.name.clone()).unwrap();
    assert_eq!(back.instances.len(), ds.instances.len());
    assert_eq!(back.dim, 3);
    // labels are re-numbered by first appearance, features are exact
    for (a, b) in ds.instances.iter().zip(&back.instances) {
        assert_eq!(a.features, b.features);
    }
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("f0,f1,f2,label\n"));
}

#[test]
fn csv_errors_name_the_row() {
    let bad = "f0,label\n1.0,a\nNaN,b\n";
    match read_csv(bad.as_bytes(), "bad") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(read_csv("f0,label\n1.0,a\nx,b\n".as_bytes(), "bad").is_err());
    assert!(read_csv("f0,label\n1.0,a\n2.0\n".as_bytes(), "bad").is_err());
    assert!(read_csv("f0,label\n1.0,a\n2.0,a\n".as_bytes(), "bad").is_err());
    let toy = read_csv("f0,f1,label\n1.5,2,cat\n-3,4e-2,dog\n".as_bytes(), "toy").unwrap();
    assert_eq!(toy.n_classes, 2);
    assert_eq!(toy.instances[1].features, vec![-3.0, 0.04]);
}

/// Set SOSR_INSECTS to the insects CSV to check its shape.
#[test]
fn insects_shape() {
    let Some(path) = std::env::var_os("SOSR_INSECTS") else {
        eprintln!("SOSR_INSECTS not set; skipping");
        return;
    };
    let ds = load_csv(path).unwrap();
    assert_eq!((ds.instances.len(), ds.n_classes, ds.dim), (52_848, 6, 33));
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.csv");
    let ds = grid_dataset(3, 10);
    sosr_core::datagen::save_csv(&ds, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.name, "toy");
    assert_eq!(back.instances.len(), 30);
    assert_eq!(back.class_counts(), vec![10, 10, 10]);
    assert!(load_csv(dir.path().join("missing.csv")).is_err());
}
