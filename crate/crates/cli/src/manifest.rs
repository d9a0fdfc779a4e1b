//! Run manifest and the analysis it describes.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use stn_insight::partition::Hierarchy;
use stn_insight::{
    build_stn, extract_all, load_dataset, AlgorithmFeatures, ClusterLimits, Dataset, DistanceMeasure,
    FitnessSource, LlmConfig, PartitionConfig, PartitionResult, Sense, SpaceKind, Stn, TemplateAssets,
};

use crate::error::CliError;

pub const DEFAULT_OUTPUT_DIR: &str = "stn-out";

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    pub sense: Option<String>,
    pub space: Option<String>,
    pub partition: Option<PartitionSpec>,
    pub llm: Option<LlmConfig>,
    pub output_dir: Option<PathBuf>,
    pub fitness_source: Option<FitnessSource>,
    /// Optional TOML/JSON file overriding the prompt texts.
    pub templates: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub cluster_size_pct: Option<f64>,
    pub volume_size_pct: Option<f64>,
    pub measure: Option<String>,
    /// Omitted: every distinct solution is its own node.
    pub cluster_number: Option<usize>,
}

/// Reads TOML or JSON, chosen by extension (TOML when unknown).
pub fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Dataset and clustering flags; each one overrides the manifest.
#[derive(Args, Clone, Debug, Default)]
pub struct DataArgs {
    /// Run manifest (TOML or JSON).
    #[arg(long, short = 'm')]
    pub manifest: Option<PathBuf>,
    /// Trajectory file as NAME=PATH; repeat per algorithm. Replaces the manifest inputs.
    #[arg(long = "input", value_name = "NAME=PATH")]
    pub inputs: Vec<String>,
    #[arg(long)]
    pub sense: Option<String>,
    /// `continuous` or `discrete`.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub cluster_size: Option<f64>,
    #[arg(long)]
    pub volume_size: Option<f64>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub cluster_number: Option<usize>,
    /// Average fitness over trajectory `best` (default) or `final` values.
    #[arg(long)]
    pub fitness_source: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

/// Endpoint flags; each one overrides the manifest `[llm]` table.
#[derive(Args, Clone, Debug, Default)]
pub struct LlmArgs {
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    /// Refuse any endpoint that is not a stub or a loopback address.
    #[arg(long)]
    pub offline: bool,
}

/// Manifest merged with command-line overrides, paths resolved.
#[derive(Clone, Debug)]
pub struct Settings {
    pub inputs: Vec<(PathBuf, String)>,
    pub sense: Option<Sense>,
    pub space: SpaceKind,
    pub partition: PartitionSpec,
    pub llm: LlmConfig,
    pub output_dir: PathBuf,
    pub fitness_source: FitnessSource,
    pub templates: TemplateAssets,
}

fn parse_flag<T: std::str::FromStr<Err = String>>(raw: &str) -> Result<T, CliError> {
    raw.parse::<T>().map_err(CliError::Input)
}

impl Settings {
    pub fn resolve(data: &DataArgs, llm: Option<&LlmArgs>) -> Result<Self, CliError> {
        let (manifest, base) = match &data.manifest {
            Some(path) => (
                read_structured::<Manifest>(path)?,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => (Manifest::default(), PathBuf::new()),
        };
        let inputs = if data.inputs.is_empty() {
            manifest
                .inputs
                .iter()
                .map(|i| (base.join(&i.path), i.name.clone()))
                .collect()
        } else {
            data.inputs
                .iter()
                .map(|raw| {
                    raw.split_once('=')
                        .filter(|(n, p)| !n.is_empty() && !p.is_empty())
                        .map(|(n, p)| (PathBuf::from(p), n.to_string()))
                        .ok_or_else(|| CliError::input(format!("--input expects NAME=PATH, got `{raw}`")))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let sense = data.sense.as_deref().or(manifest.sense.as_deref());
        let space = data.space.as_deref().or(manifest.space.as_deref()).unwrap_or("continuous");
        let mut partition = manifest.partition.clone().unwrap_or_default();
        if data.cluster_size.is_some() {
            partition.cluster_size_pct = data.cluster_size;
        }
        if data.volume_size.is_some() {
            partition.volume_size_pct = data.volume_size;
        }
        if data.measure.is_some() {
            partition.measure = data.measure.clone();
        }
        if data.cluster_number.is_some() {
            partition.cluster_number = data.cluster_number;
        }
        let fitness_source = match data.fitness_source.as_deref() {
            Some("best") => FitnessSource::Best,
            Some("final") => FitnessSource::Final,
            Some(other) => {
                return Err(CliError::input(format!(
                    "--fitness-source is `best` or `final`, got `{other}`"
                )))
            }
            None => manifest.fitness_source.unwrap_or_default(),
        };
        let output_dir = match (&data.output, &manifest.output_dir) {
            (Some(dir), _) => dir.clone(),
            (None, Some(dir)) => base.join(dir),
            (None, None) => PathBuf::from(DEFAULT_OUTPUT_DIR),
        };
        let templates = match &manifest.templates {
            Some(path) => read_structured(&base.join(path))?,
            None => TemplateAssets::default(),
        };
        let mut config = manifest.llm.clone().unwrap_or_default();
        if let Some(args) = llm {
            apply_llm_args(&mut config, args);
        }
        Ok(Settings {
            inputs,
            sense: sense.map(parse_flag).transpose()?,
            space: parse_flag(space)?,
            partition,
            llm: config,
            output_dir,
            fitness_source,
            templates,
        })
    }

    pub fn partition_config(&self, max_clusters: Option<usize>) -> Result<PartitionConfig, CliError> {
        let measure = match &self.partition.measure {
            Some(m) => parse_flag::<DistanceMeasure>(m)?,
            None if self.space == SpaceKind::Discrete => DistanceMeasure::Hamming,
            None => DistanceMeasure::Euclidean,
        };
        Ok(PartitionConfig {
            cluster_size_pct: self.partition.cluster_size_pct.unwrap_or(5.0),
            volume_size_pct: self.partition.volume_size_pct.unwrap_or(5.0),
            measure,
            cluster_number: self.partition.cluster_number.or(max_clusters).unwrap_or(1),
        })
    }

    pub fn ensure_output_dir(&self) -> Result<&Path, CliError> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| CliError::write(&self.output_dir, e))?;
        Ok(&self.output_dir)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

pub fn apply_llm_args(config: &mut LlmConfig, args: &LlmArgs) {
    if let Some(v) = &args.endpoint {
        config.endpoint_url = v.clone();
    }
    if let Some(v) = &args.model {
        config.model_id = v.clone();
    }
    if let Some(v) = &args.api_key_env {
        config.api_key_env = Some(v.clone()).filter(|s| !s.is_empty());
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        config.max_tokens = v;
    }
    if let Some(v) = args.timeout {
        config.timeout_secs = v;
    }
    if let Some(v) = args.retries {
        config.retries = v;
    }
    if args.requests_per_minute.is_some() {
        config.requests_per_minute = args.requests_per_minute;
    }
}

/// Everything derived from the trajectory files.
pub struct Analysis {
    pub dataset: Dataset,
    pub config: PartitionConfig,
    pub limits: ClusterLimits,
    pub partition: PartitionResult,
    pub stn: Stn,
    pub features: Vec<AlgorithmFeatures>,
}

impl Analysis {
    pub fn run(settings: &Settings) -> Result<Self, CliError> {
        if settings.inputs.is_empty() {
            return Err(CliError::input("no trajectory files given (manifest `inputs` or --input)"));
        }
        let sense = settings
            .sense
            .ok_or_else(|| CliError::input("the optimization sense is required (--sense or `sense`)"))?;
        let dataset = load_dataset(&settings.inputs, sense, settings.space)?;
        let solutions = dataset.distinct_solutions();
        let probe = settings.partition_config(None)?;
        probe.validate()?;
        let hierarchy = Hierarchy::build(
            &solutions,
            probe.cluster_size_pct,
            probe.volume_size_pct,
            probe.measure,
        )?;
        let limits = hierarchy.limits();
        let config = settings.partition_config(Some(limits.max_clusters))?;
        config.validate()?;
        let partition = hierarchy.cut(config.cluster_number)?;
        let stn = build_stn(&dataset, Some(&partition)).map_err(|e| CliError::Internal(e.to_string()))?;
        let features = extract_all(&dataset, &stn, settings.fitness_source);
        Ok(Analysis {
            dataset,
            config,
            limits,
            partition,
            stn,
            features,
        })
    }
}
