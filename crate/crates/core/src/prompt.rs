//! Prompt templates for the three analysis tasks.
//!
//! Tasks A and B share one layout of tagged blocks, each tag on its own line
//! and blocks separated by a blank line:
//!
//! ```text
//! [CONTEXT]
//! ...
//!
//! [RULES]                  (task B: [PARAMETERS DEFINITIONS])
//! 1. ...
//!
//! [DATA]
//! ...
//!
//! [QUERIES]
//! ...
//! ```
//!
//! Task C consists of two fixed plotting instructions, each with one CSV
//! attachment. Attachments are inlined into the text sent to the model as
//! fenced `csv` blocks (see [`RenderedPrompt::wire_text`]).

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{format_connectivity, format_fitness, AlgorithmFeatures};
use crate::partition::{ClusterLimits, PartitionConfig};
use crate::tables::{ConfigCsv, FeaturesCsv, TableError};
use crate::trajectory::Sense;

pub const TAG_CONTEXT: &str = "[CONTEXT]";
pub const TAG_RULES: &str = "[RULES]";
pub const TAG_PARAMETERS: &str = "[PARAMETERS DEFINITIONS]";
pub const TAG_DATA: &str = "[DATA]";
pub const TAG_QUERIES: &str = "[QUERIES]";

/// The instruction that fixes the answer format for parameter suggestions.
pub const PARAMETER_FORMAT_INSTRUCTION: &str =
    "The new numerical values must be presented in the format: [name_parameter=new_value].";

/// Static texts of the templates. Editable; bump `version` when changing them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateAssets {
    pub version: String,
    pub context_text: String,
    pub task_a_rules: [String; 3],
    pub task_b_parameter_definitions: [String; 4],
    pub task_a_queries: String,
    pub task_b_queries: String,
    pub task_c_prompts: [String; 2],
}

impl Default for TemplateAssets {
    fn default() -> Self {
        TemplateAssets {
            version: "1".into(),
            context_text: "STNWeb is a web tool that draws Search Trajectory Networks (STNs). An STN is a \
directed graph describing how one or more optimization algorithms move through the search space of \
a single problem instance. A node is a location of the search space: one solution, or a group of \
solutions merged by agglomerative clustering. An edge links two locations visited one after the \
other by a trajectory, and a trajectory is the record of one run of one algorithm. Every algorithm \
is drawn in its own color. Yellow squares mark where trajectories begin. Trajectories finish at \
dark grey triangles, or at red dots when the final location holds the best fitness found in the \
comparison. Pale grey nodes are locations reached by trajectories of two or more algorithms. \
Bigger nodes are crossed by more trajectories."
                .into(),
            task_a_rules: [
                "The more nodes point to nodes of the best fitness (this does not assume that it represents the global optimum), the higher the algorithm's quality because it can obtain a better result.".into(),
                "The algorithm that has more inter-trajectory connectivity is likely to be more robust. If and only if it finds nodes of the best fitness.".into(),
                "For a minimization problem, indicating that an algorithm is superior involves favoring a smaller average fitness value. Whereas in the case of maximization, declaring an algorithm as better necessitates a higher average fitness value.".into(),
            ],
            task_b_parameter_definitions: [
                "Cluster size (percentage): Maximal cluster size in terms of the percentage of all solutions a cluster contains.".into(),
                "Volume size (percentage): Maximal cluster size in terms of the percentage of the covered search space volume spanned by the solutions a cluster contains.".into(),
                "Distance measure: A function that measures the distance between solutions, influencing the creation of clusters. Possible values: Hamming, Euclidean, Manhattan.".into(),
                "Cluster number: Number of clusters obtained for these solutions (from lowest to highest partitioning). The maximum number implies no partitioning, while lower values result in increased partitioning. Good results are obtained when the cluster number is above the minimum value but far from the maximum.".into(),
            ],
            task_a_queries: "Apply the rules to the data and decide whether one of the compared algorithms \
is the clear winner. State the winner in the format: [winner=algorithm_name]. If the algorithms show \
similar values for all features, state [draw] instead. Write nothing else inside or next to the square \
brackets."
                .into(),
            task_b_queries: format!(
                "Using the parameter definitions and the data, suggest new values for the parameters of \
the agglomerative clustering algorithm that would make the STN graphic easier to interpret. Refer to \
the parameters as cluster_size, volume_size, distance_measure and cluster_number. {PARAMETER_FORMAT_INSTRUCTION}"
            ),
            task_c_prompts: [
                "Generate a grouped bar plot, considering both the best-performance (in sky blue) and the average-performance (in orange).".into(),
                "Generate a grouped bar plot with the X-axis representing the old_configuration and new_configuration, and the Y-axis representing cluster-size (in sky blue), volume-size (in orange), and cluster-number (in purple).".into(),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptTask {
    A,
    B,
    C1,
    C2,
}

impl PromptTask {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptTask::A => "A",
            PromptTask::B => "B",
            PromptTask::C1 => "C1",
            PromptTask::C2 => "C2",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub task: PromptTask,
    pub text: String,
    pub attachments: Vec<Attachment>,
}

impl RenderedPrompt {
    /// The exact user message sent to the model.
    pub fn wire_text(&self) -> String {
        let mut out = self.text.clone();
        for a in &self.attachments {
            let _ = write!(out, "\n\n{}:\n```csv\n{}", a.name, a.content);
            if !a.content.ends_with('\n') {
                out.push('\n');
            }
            out.push_str("```\n");
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("the winner prompt compares at least 2 algorithms, got {0}")]
    TooFewAlgorithms(usize),
    #[error("cluster limits are inconsistent: {0}")]
    InconsistentLimits(String),
    #[error("{name}: {source}")]
    Table {
        name: &'static str,
        #[source]
        source: TableError,
    },
}

fn block(out: &mut String, tag: &str, body: &str) {
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(tag);
    out.push('\n');
    out.push_str(body);
    if !body.ends_with('\n') {
        out.push('\n');
    }
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}\n", i + 1))
        .collect()
}

/// The three data sentences for one algorithm.
pub fn feature_sentences(f: &AlgorithmFeatures) -> [String; 3] {
    [
        format!(
            "{} has {} nodes pointing to nodes with the best fitness.",
            f.algorithm, f.total_best_global_fitness
        ),
        format!(
            "{} has {} connectivity among all the nodes.",
            f.algorithm,
            format_connectivity(f.connectivity)
        ),
        format!(
            "{} has an average fitness of {} across {} trajectories.",
            f.algorithm,
            format_fitness(f.avg_fitness),
            f.trajectory_count
        ),
    ]
}

pub fn task_a_data(features: &[AlgorithmFeatures], sense: Sense) -> String {
    let mut out = format!("The algorithms were compared on a {} problem.\n", sense.as_str());
    for f in features {
        for sentence in feature_sentences(f) {
            out.push_str(&sentence);
            out.push('\n');
        }
    }
    out
}

pub fn render_task_a(
    assets: &TemplateAssets,
    features: &[AlgorithmFeatures],
    sense: Sense,
) -> Result<RenderedPrompt, PromptError> {
    if features.len() < 2 {
        return Err(PromptError::TooFewAlgorithms(features.len()));
    }
    let mut text = String::new();
    block(&mut text, TAG_CONTEXT, &assets.context_text);
    block(&mut text, TAG_RULES, &numbered(&assets.task_a_rules));
    block(&mut text, TAG_DATA, &task_a_data(features, sense));
    block(&mut text, TAG_QUERIES, &assets.task_a_queries);
    Ok(RenderedPrompt {
        task: PromptTask::A,
        text,
        attachments: Vec::new(),
    })
}

/// The clustering parameter block, e.g. `- cluster size: 5%`.
pub fn task_b_data(config: &PartitionConfig, limits: &ClusterLimits) -> String {
    format!(
        "These are the parameters of the agglomerative clustering algorithm:\n\
         - cluster size: {}%\n\
         - volume size: {}%\n\
         - distance measure: {}\n\
         - cluster number: {}\n\
         These are the resulting limits:\n\
         - minimum possible number of clusters: {}\n\
         - maximum possible number of clusters: {}\n",
        config.cluster_size_pct,
        config.volume_size_pct,
        config.measure,
        config.cluster_number,
        limits.min_clusters,
        limits.max_clusters
    )
}

pub fn render_task_b(
    assets: &TemplateAssets,
    config: &PartitionConfig,
    limits: &ClusterLimits,
) -> Result<RenderedPrompt, PromptError> {
    if limits.min_clusters < 1 || limits.min_clusters > limits.max_clusters {
        return Err(PromptError::InconsistentLimits(format!(
            "minimum {} and maximum {}",
            limits.min_clusters, limits.max_clusters
        )));
    }
    if !limits.contains(config.cluster_number) {
        return Err(PromptError::InconsistentLimits(format!(
            "cluster number {} lies outside [{}, {}]",
            config.cluster_number, limits.min_clusters, limits.max_clusters
        )));
    }
    let mut text = String::new();
    block(&mut text, TAG_CONTEXT, &assets.context_text);
    block(&mut text, TAG_PARAMETERS, &numbered(&assets.task_b_parameter_definitions));
    block(&mut text, TAG_DATA, &task_b_data(config, limits));
    block(&mut text, TAG_QUERIES, &assets.task_b_queries);
    Ok(RenderedPrompt {
        task: PromptTask::B,
        text,
        attachments: Vec::new(),
    })
}

pub const FEATURES_CSV_NAME: &str = "features.csv";
pub const CONFIG_CSV_NAME: &str = "config.csv";

/// The two plotting prompts, after checking that both CSVs have the expected shape.
pub fn render_task_c(
    assets: &TemplateAssets,
    features_csv: &str,
    config_csv: &str,
) -> Result<(RenderedPrompt, RenderedPrompt), PromptError> {
    FeaturesCsv::parse(features_csv).map_err(|source| PromptError::Table {
        name: FEATURES_CSV_NAME,
        source,
    })?;
    ConfigCsv::parse(config_csv).map_err(|source| PromptError::Table {
        name: CONFIG_CSV_NAME,
        source,
    })?;
    let prompt = |task, text: &str, name: &str, content: &str| RenderedPrompt {
        task,
        text: text.to_string(),
        attachments: vec![Attachment {
            name: name.to_string(),
            content: content.to_string(),
        }],
    };
    Ok((
        prompt(PromptTask::C1, &assets.task_c_prompts[0], FEATURES_CSV_NAME, features_csv),
        prompt(PromptTask::C2, &assets.task_c_prompts[1], CONFIG_CSV_NAME, config_csv),
    ))
}

/// Body of the `[DATA]` block of a rendered A/B prompt.
pub fn data_block(text: &str) -> Option<&str> {
    let start = text.find(&format!("{TAG_DATA}\n"))? + TAG_DATA.len() + 1;
    let end = text[start..].find(&format!("\n{TAG_QUERIES}\n"))? + start;
    Some(&text[start..end])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::DistanceMeasure;

    fn algo(name: &str, count: usize, conn: f64, avg: f64, m: usize) -> AlgorithmFeatures {
        AlgorithmFeatures {
            algorithm: name.into(),
            total_best_global_fitness: count,
            connectivity: conn,
            avg_fitness: avg,
            trajectory_count: m,
            best_fitness: avg,
        }
    }

    fn golden_config() -> (PartitionConfig, ClusterLimits) {
        (
            PartitionConfig {
                cluster_size_pct: 5.0,
                volume_size_pct: 5.0,
                measure: DistanceMeasure::Euclidean,
                cluster_number: 400,
            },
            ClusterLimits {
                min_clusters: 207,
                max_clusters: 574,
            },
        )
    }

    #[test]
    fn feature_sentence_texts() {
        let [a, b, c] = feature_sentences(&algo("algo_2", 1, 28.0 / 45.0, 78.081, 10));
        assert_eq!(a, "algo_2 has 1 nodes pointing to nodes with the best fitness.");
        assert_eq!(b, "algo_2 has 0.62 connectivity among all the nodes.");
        assert_eq!(c, "algo_2 has an average fitness of 78.081 across 10 trajectories.");
    }

    #[test]
    fn task_a_layout() {
        let assets = TemplateAssets::default();
        let p = render_task_a(
            &assets,
            &[algo("algo_1", 0, 0.0, 120.5, 10), algo("algo_2", 1, 0.6222, 78.081, 10)],
            Sense::Minimize,
        )
        .unwrap();
        let tags: Vec<usize> = [TAG_CONTEXT, TAG_RULES, TAG_DATA, TAG_QUERIES]
            .iter()
            .map(|t| {
                assert_eq!(p.text.matches(t).count(), 1, "{t}");
                p.text.find(t).unwrap()
            })
            .collect();
        assert!(tags.windows(2).all(|w| w[0] < w[1]));
        assert!(p.text.contains("[winner=algorithm_name]"));
        assert!(p.text.contains("[draw]"));
        assert!(p.attachments.is_empty());
        let data = data_block(&p.text).unwrap();
        assert!(data.starts_with("The algorithms were compared on a minimization problem.\n"));
        assert_eq!(data.lines().count(), 7);
    }

    #[test]
    fn task_a_needs_two() {
        assert!(matches!(
            render_task_a(&TemplateAssets::default(), &[algo("x", 0, 0.0, 1.0, 1)], Sense::Minimize),
            Err(PromptError::TooFewAlgorithms(1))
        ));
    }

    #[test]
    fn task_b_block() {
        let (config, limits) = golden_config();
        let expected = "These are the parameters of the agglomerative clustering algorithm:\n\
- cluster size: 5%\n\
- volume size: 5%\n\
- distance measure: Euclidean\n\
- cluster number: 400\n\
These are the resulting limits:\n\
- minimum possible number of clusters: 207\n\
- maximum possible number of clusters: 574\n";
        assert_eq!(task_b_data(&config, &limits), expected);
        let p = render_task_b(&TemplateAssets::default(), &config, &limits).unwrap();
        assert_eq!(data_block(&p.text).unwrap(), expected);
        assert!(p.text.contains(TAG_PARAMETERS));
        assert!(!p.text.contains(TAG_RULES));
        let queries = &p.text[p.text.find(TAG_QUERIES).unwrap()..];
        assert!(queries.contains(PARAMETER_FORMAT_INSTRUCTION));
    }

    #[test]
    fn task_b_substitutions() {
        let (mut config, _) = golden_config();
        config.measure = DistanceMeasure::Hamming;
        config.cluster_number = 1;
        let one = ClusterLimits {
            min_clusters: 1,
            max_clusters: 1,
        };
        let data = task_b_data(&config, &one);
        assert!(data.contains("- distance measure: Hamming\n"));
        assert!(data.contains("- minimum possible number of clusters: 1\n"));
        assert!(data.contains("- maximum possible number of clusters: 1\n"));
        config.cluster_size_pct = 2.5;
        assert!(task_b_data(&config, &one).contains("- cluster size: 2.5%\n"));
    }

    #[test]
    fn task_b_inconsistent_limits() {
        let (config, _) = golden_config();
        let bad = ClusterLimits {
            min_clusters: 500,
            max_clusters: 400,
        };
        assert!(render_task_b(&TemplateAssets::default(), &config, &bad).is_err());
        let narrow = ClusterLimits {
            min_clusters: 1,
            max_clusters: 300,
        };
        assert!(render_task_b(&TemplateAssets::default(), &config, &narrow).is_err());
    }

    #[test]
    fn task_c_prompts() {
        let features = "algorithm,best_performance,average_performance\na,1,2\nb,3,4\n";
        let config = "configuration,cluster_size,volume_size,cluster_number\nold_configuration,5,5,400\nnew_configuration,5,5,350\n";
        let (c1, c2) = render_task_c(&TemplateAssets::default(), features, config).unwrap();
        assert_eq!(c1.attachments.len(), 1);
        assert_eq!(c2.attachments.len(), 1);
        assert_eq!(c1.text, "Generate a grouped bar plot, considering both the best-performance (in sky blue) and the average-performance (in orange).");
        assert!(c2.text.contains("cluster-number (in purple)"));
        let wire = c1.wire_text();
        assert!(wire.starts_with(&c1.text));
        assert!(wire.contains("```csv\nalgorithm,best_performance,average_performance\n"));
        assert!(wire.ends_with("```\n"));
    }

    #[test]
    fn task_c_rejects_bad_csv() {
        let config = "configuration,cluster_size,volume_size,cluster_number\nold_configuration,5,5,400\nnew_configuration,5,5,350\n";
        let err = render_task_c(&TemplateAssets::default(), "algorithm,best_performance\na,1\n", config).unwrap_err();
        assert!(err.to_string().contains("average_performance"));
        assert!(render_task_c(&TemplateAssets::default(), "", config).is_err());
    }
}
