//! The two CSV tables attached to the plotting prompts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{ClusteringParameter, ParameterUpdate, UpdateValue};
use crate::features::{format_fitness, AlgorithmFeatures};
use crate::partition::PartitionConfig;

pub const FEATURES_HEADER: [&str; 3] = ["algorithm", "best_performance", "average_performance"];
pub const CONFIG_HEADER: [&str; 4] = ["configuration", "cluster_size", "volume_size", "cluster_number"];
pub const OLD_CONFIGURATION: &str = "old_configuration";
pub const NEW_CONFIGURATION: &str = "new_configuration";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("CSV is empty")]
    Empty,
    #[error("CSV is missing column `{0}`")]
    MissingColumn(String),
    #[error("CSV has unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("row {row}: `{value}` in column `{column}` is not a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("no algorithms to tabulate")]
    NoAlgorithms,
    #[error("a new configuration needs parameter suggestions from the clustering prompt")]
    MissingSuggestions,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturesRow {
    pub algorithm: String,
    pub best_performance: f64,
    pub average_performance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturesCsv {
    pub rows: Vec<FeaturesRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub configuration: String,
    pub cluster_size: f64,
    pub volume_size: f64,
    pub cluster_number: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigCsv {
    pub rows: Vec<ConfigRow>,
}

/// Generic parsed table: header plus string cells.
fn read_table(text: &str, expected: &[&str]) -> Result<Vec<csv::StringRecord>, TableError> {
    if text.trim().is_empty() {
        return Err(TableError::Empty);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    for column in expected {
        if !headers.iter().any(|h| h == *column) {
            return Err(TableError::MissingColumn(column.to_string()));
        }
    }
    if let Some(extra) = headers.iter().find(|h| !expected.contains(h)) {
        return Err(TableError::UnexpectedColumn(extra.to_string()));
    }
    // Reorder every record into `expected` order.
    let order: Vec<usize> = expected
        .iter()
        .map(|c| headers.iter().position(|h| h == *c).unwrap_or(0))
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(order.iter().map(|&i| record.get(i).unwrap_or("")).collect());
    }
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    Ok(rows)
}

fn number(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64, TableError> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| TableError::NotNumeric {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

/// Same precision as the fitness sentences of the winner prompt.
fn round3(v: f64) -> f64 {
    format_fitness(v).parse().unwrap_or(v)
}

impl FeaturesCsv {
    pub fn from_features(features: &[AlgorithmFeatures]) -> Result<Self, TableError> {
        if features.is_empty() {
            return Err(TableError::NoAlgorithms);
        }
        Ok(FeaturesCsv {
            rows: features
                .iter()
                .map(|f| FeaturesRow {
                    algorithm: f.algorithm.clone(),
                    best_performance: round3(f.best_fitness),
                    average_performance: round3(f.avg_fitness),
                })
                .collect(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let records = read_table(text, &FEATURES_HEADER)?;
        let mut rows = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            rows.push(FeaturesRow {
                algorithm: r.get(0).unwrap_or("").to_string(),
                best_performance: number(r, 1, i + 1, FEATURES_HEADER[1])?,
                average_performance: number(r, 2, i + 1, FEATURES_HEADER[2])?,
            });
        }
        Ok(FeaturesCsv { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(FEATURES_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.write_record([
                row.algorithm.clone(),
                row.best_performance.to_string(),
                row.average_performance.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

impl ConfigRow {
    fn from_config(name: &str, config: &PartitionConfig) -> Self {
        ConfigRow {
            configuration: name.to_string(),
            cluster_size: config.cluster_size_pct,
            volume_size: config.volume_size_pct,
            cluster_number: config.cluster_number as f64,
        }
    }
}

/// Applies suggested parameter values to a configuration; parameters that
/// were not suggested keep their old value.
pub fn apply_updates(old: &PartitionConfig, updates: &[ParameterUpdate]) -> PartitionConfig {
    let mut new = *old;
    for update in updates {
        match (update.parameter, &update.value) {
            (ClusteringParameter::ClusterSize, UpdateValue::Number(v)) => new.cluster_size_pct = *v,
            (ClusteringParameter::VolumeSize, UpdateValue::Number(v)) => new.volume_size_pct = *v,
            (ClusteringParameter::ClusterNumber, UpdateValue::Number(v)) => {
                new.cluster_number = v.round().max(0.0) as usize
            }
            (ClusteringParameter::DistanceMeasure, UpdateValue::Measure(m)) => new.measure = *m,
            _ => {}
        }
    }
    new
}

impl ConfigCsv {
    /// Old configuration row, plus the suggested one when `updates` is given.
    pub fn from_configs(
        old: &PartitionConfig,
        updates: Option<&[ParameterUpdate]>,
    ) -> Result<Self, TableError> {
        let updates = updates.ok_or(TableError::MissingSuggestions)?;
        let new = apply_updates(old, updates);
        Ok(ConfigCsv {
            rows: vec![
                ConfigRow::from_config(OLD_CONFIGURATION, old),
                ConfigRow::from_config(NEW_CONFIGURATION, &new),
            ],
        })
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let records = read_table(text, &CONFIG_HEADER)?;
        let mut rows = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            rows.push(ConfigRow {
                configuration: r.get(0).unwrap_or("").to_string(),
                cluster_size: number(r, 1, i + 1, CONFIG_HEADER[1])?,
                volume_size: number(r, 2, i + 1, CONFIG_HEADER[2])?,
                cluster_number: number(r, 3, i + 1, CONFIG_HEADER[3])?,
            });
        }
        let names: Vec<&str> = rows.iter().map(|r| r.configuration.as_str()).collect();
        if names != [OLD_CONFIGURATION, NEW_CONFIGURATION] {
            return Err(TableError::Shape {
                expected: format!("rows `{OLD_CONFIGURATION}` and `{NEW_CONFIGURATION}`"),
                found: names.join(", "),
            });
        }
        Ok(ConfigCsv { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CONFIG_HEADER).expect("in-memory write");
        for row in &self.rows {
            w.write_record([
                row.configuration.clone(),
                row.cluster_size.to_string(),
                row.volume_size.to_string(),
                row.cluster_number.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// Task C tables for one analysis: features of every algorithm and the
/// old/new clustering configuration.
pub fn emit_task_c_csvs(
    features: &[AlgorithmFeatures],
    old_config: &PartitionConfig,
    new_updates: Option<&[ParameterUpdate]>,
) -> Result<(FeaturesCsv, ConfigCsv), TableError> {
    Ok((
        FeaturesCsv::from_features(features)?,
        ConfigCsv::from_configs(old_config, new_updates)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::DistanceMeasure;
    use proptest::prelude::*;

    fn feature(name: &str, best: f64, avg: f64) -> AlgorithmFeatures {
        AlgorithmFeatures {
            algorithm: name.into(),
            total_best_global_fitness: 0,
            connectivity: 0.0,
            avg_fitness: avg,
            trajectory_count: 1,
            best_fitness: best,
        }
    }

    fn old() -> PartitionConfig {
        PartitionConfig {
            cluster_size_pct: 5.0,
            volume_size_pct: 5.0,
            measure: DistanceMeasure::Euclidean,
            cluster_number: 400,
        }
    }

    #[test]
    fn two_feature_rows() {
        let csv = FeaturesCsv::from_features(&[feature("a", 1.0, 2.0), feature("b", 3.0, 4.0)]).unwrap();
        let text = csv.to_csv();
        assert_eq!(text, "algorithm,best_performance,average_performance\na,1,2\nb,3,4\n");
    }

    #[test]
    fn carry_over_unsuggested() {
        let updates = [ParameterUpdate {
            parameter: ClusteringParameter::ClusterNumber,
            value: UpdateValue::Number(350.0),
        }];
        let csv = ConfigCsv::from_configs(&old(), Some(&updates)).unwrap();
        assert_eq!(
            csv.rows[1],
            ConfigRow {
                configuration: NEW_CONFIGURATION.into(),
                cluster_size: 5.0,
                volume_size: 5.0,
                cluster_number: 350.0
            }
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(FeaturesCsv::from_features(&[]), Err(TableError::NoAlgorithms)));
        assert!(matches!(
            ConfigCsv::from_configs(&old(), None),
            Err(TableError::MissingSuggestions)
        ));
        assert!(matches!(FeaturesCsv::parse(""), Err(TableError::Empty)));
        match FeaturesCsv::parse("algorithm,best_performance\na,1\n") {
            Err(TableError::MissingColumn(c)) => assert_eq!(c, "average_performance"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            FeaturesCsv::parse("algorithm,best_performance,average_performance\na,x,1\n"),
            Err(TableError::NotNumeric { .. })
        ));
        assert!(matches!(
            ConfigCsv::parse("configuration,cluster_size,volume_size,cluster_number\nold_configuration,1,2,3\n"),
            Err(TableError::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn features_roundtrip(rows in prop::collection::vec(("[a-z_][a-z0-9_ ,]{0,8}", -1e9f64..1e9, -1e9f64..1e9), 1..6)) {
            let csv = FeaturesCsv {
                rows: rows.into_iter().map(|(a, b, c)| FeaturesRow { algorithm: a.trim().to_string(), best_performance: b, average_performance: c }).collect(),
            };
            prop_assert_eq!(FeaturesCsv::parse(&csv.to_csv()).unwrap(), csv);
        }
    }
}
