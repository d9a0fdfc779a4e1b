//! LLM-assisted analysis of optimization algorithm behavior.
//!
//! The pipeline reads raw trajectory logs ([`trajectory`]), optionally groups
//! solutions into locations ([`partition`]), builds the Search Trajectory
//! Network ([`stn`]), extracts per-algorithm features ([`features`]), renders
//! the prompts ([`prompt`]), queries a chat-completion endpoint ([`llm`]),
//! scores the answers ([`evaluation`]) and writes tables, plots and reports
//! ([`tables`], [`report`]).

pub mod evaluation;
pub mod export;
pub mod features;
pub mod llm;
pub mod partition;
pub mod prompt;
pub mod report;
pub mod stn;
pub mod synthetic;
pub mod tables;
pub mod trajectory;

pub use evaluation::{
    expected_label, parse_parameter_updates, parse_winner, run_trials, ClusteringParameter,
    Difficulty, Expected, ParameterUpdate, PromptCase, ScoreCard, UpdateValue, Verdict,
};
pub use export::{export_graph, GraphFormat};
pub use features::{extract_all, AlgorithmFeatures, FitnessSource};
pub use llm::{Completer, LlmClient, LlmConfig, LlmError, LlmReply};
pub use partition::{
    cluster_limits, distance, partition, ClusterLimits, DistanceMeasure, Hierarchy,
    PartitionConfig, PartitionResult,
};
pub use prompt::{render_task_a, render_task_b, render_task_c, RenderedPrompt, TemplateAssets};
pub use report::{assemble_report, render_grouped_bar, Report, ReportArtifacts, ReportFormat};
pub use stn::{build_stn, LocationId, Stn, StnEdge, StnNode};
pub use tables::{emit_task_c_csvs, ConfigCsv, FeaturesCsv};
pub use trajectory::{
    load_dataset, parse_trajectory_file, AlgorithmRuns, Dataset, Sense, SolutionPoint, SpaceKind,
    Step, Trajectory,
};
