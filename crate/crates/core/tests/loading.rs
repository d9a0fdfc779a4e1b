use std::io::Write;

use stn_insight::trajectory::{load_dataset, TrajectoryError};
use stn_insight::{Sense, SpaceKind};

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn two_files_two_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.tsv", "1\t3\t0,0\n1\t1\t1,1\n2\t2\t0,0\n");
    let b = write(&dir, "b.tsv", "1\t5\t2,2\n");
    let ds = load_dataset(
        &[(a, "algo_1".to_string()), (b, "algo_2".to_string())],
        Sense::Minimize,
        SpaceKind::Continuous,
    )
    .unwrap();
    assert_eq!(ds.algorithms.len(), 2);
    assert_eq!(ds.algorithms[0].trajectories.len(), 2);
    assert_eq!(ds.best_global_fitness(), 1.0);
}

#[test]
fn duplicate_names() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.tsv", "1\t3\t0,0\n");
    let err = load_dataset(
        &[(a.clone(), "x".to_string()), (a, "x".to_string())],
        Sense::Minimize,
        SpaceKind::Continuous,
    )
    .unwrap_err();
    assert!(matches!(err, TrajectoryError::DuplicateAlgorithm(_)));
}

#[test]
fn discrete_and_continuous_mix() {
    let dir = tempfile::tempdir().unwrap();
    let cont = write(&dir, "c.tsv", "1\t3\t0.5,0.25\n");
    let disc = write(&dir, "d.tsv", "1\t3\tTFFT\n");
    for space in [SpaceKind::Continuous, SpaceKind::Discrete] {
        let err = load_dataset(
            &[(cont.clone(), "c".to_string()), (disc.clone(), "d".to_string())],
            Sense::Minimize,
            space,
        )
        .unwrap_err();
        assert!(matches!(err, TrajectoryError::SpaceKindLine { .. }), "{space:?}: {err}");
    }
}

#[test]
fn dimension_across_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(&dir, "a.tsv", "1\t3\t0,0\n");
    let b = write(&dir, "b.tsv", "1\t3\t0,0,0\n");
    let err = load_dataset(
        &[(a, "a".to_string()), (b, "b".to_string())],
        Sense::Minimize,
        SpaceKind::Continuous,
    )
    .unwrap_err();
    assert!(matches!(err, TrajectoryError::DimensionAcrossFiles { .. }));
}

#[test]
fn gzip_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.tsv.gz");
    let mut enc = flate2_writer(&path);
    enc.write_all(b"1\t3\t0,0\n1\t2\t1,0\n").unwrap();
    enc.finish().unwrap();
    let ds = load_dataset(&[(path, "a".to_string())], Sense::Minimize, SpaceKind::Continuous).unwrap();
    assert_eq!(ds.algorithms[0].trajectories[0].steps.len(), 2);
}

fn flate2_writer(path: &std::path::Path) -> flate2::write::GzEncoder<std::fs::File> {
    flate2::write::GzEncoder::new(std::fs::File::create(path).unwrap(), flate2::Compression::default())
}

#[test]
fn missing_file_names_path() {
    let err = load_dataset(
        &[("/nonexistent/run.tsv", "a".to_string())],
        Sense::Minimize,
        SpaceKind::Continuous,
    )
    .unwrap_err();
    assert!(err.to_string().contains("/nonexistent/run.tsv"));
}
