use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Deserialize;
use stn_insight::evaluation::{human_scores, run_trials_parallel, scorecards_csv, CaseTask, TrialAbort};
use stn_insight::llm::{append_transcript, TokenBucket, TranscriptEntry};
use stn_insight::prompt::{PromptTask, CONFIG_CSV_NAME, FEATURES_CSV_NAME};
use stn_insight::report::{BarChart, Exchange};
use stn_insight::synthetic::{random_dataset, SyntheticSpec};
use stn_insight::tables::{emit_task_c_csvs, FeaturesCsv};
use stn_insight::trajectory::write_trajectories;
use stn_insight::{
    assemble_report, expected_label, export_graph, parse_parameter_updates, parse_winner, render_task_a,
    render_task_b, render_task_c, run_trials, AlgorithmFeatures, ClusterLimits, Completer, Difficulty,
    Expected, GraphFormat, LlmClient, LlmConfig, PartitionConfig, PromptCase, RenderedPrompt, ReportArtifacts,
    ReportFormat, ScoreCard, Sense, TemplateAssets, Verdict,
};

use crate::error::CliError;
use crate::manifest::{read_structured, Analysis, LlmArgs, Settings};

pub const TRANSCRIPT_FILE: &str = "transcripts.jsonl";
pub const SCORECARDS_CSV: &str = "scorecards.csv";
pub const SCORECARDS_JSON: &str = "scorecards.json";
pub const FEATURES_PLOT: &str = "plot_features.svg";
pub const CONFIG_PLOT: &str = "plot_config.svg";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TaskArg {
    A,
    B,
    C,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn analyze(settings: &Settings) -> Result<(), CliError> {
    let analysis = Analysis::run(settings)?;
    settings.ensure_output_dir()?;
    let features = FeaturesCsv::from_features(&analysis.features)?;
    write(&settings.output(FEATURES_CSV_NAME), features.to_csv())?;
    write(&settings.output("stn.dot"), export_graph(&analysis.stn, GraphFormat::Dot))?;
    write(&settings.output("stn.graphml"), export_graph(&analysis.stn, GraphFormat::GraphMl))?;
    write(&settings.output("partition.csv"), analysis.partition.to_csv())?;
    for f in &analysis.features {
        for sentence in stn_insight::prompt::feature_sentences(f) {
            println!("{sentence}");
        }
    }
    println!(
        "{} locations, {} edges; cluster number {} within [{}, {}]",
        analysis.stn.nodes.len(),
        analysis.stn.edges.len(),
        analysis.config.cluster_number,
        analysis.limits.min_clusters,
        analysis.limits.max_clusters
    );
    println!("wrote artifacts to {}", settings.output_dir.display());
    Ok(())
}

/// Rendered prompts for `task`, labelled with their file suffix.
fn render(settings: &Settings, task: TaskArg, suggestions: Option<&Path>) -> Result<Vec<RenderedPrompt>, CliError> {
    let analysis = Analysis::run(settings)?;
    let sense = analysis.dataset.sense;
    let assets = &settings.templates;
    match task {
        TaskArg::A => Ok(vec![render_task_a(assets, &analysis.features, sense)?]),
        TaskArg::B => Ok(vec![render_task_b(assets, &analysis.config, &analysis.limits)?]),
        TaskArg::C => {
            let path = suggestions
                .map(Path::to_path_buf)
                .unwrap_or_else(|| settings.output("reply_B.txt"));
            let reply = read(&path).map_err(|e| {
                CliError::input(format!("{e}; the plotting prompts need the parameter suggestions (run `ask --task b` first or pass --suggestions)"))
            })?;
            let updates = match parse_parameter_updates(&reply) {
                Verdict::ParameterUpdates { updates } => updates,
                other => {
                    return Err(CliError::input(format!(
                        "{}: no usable parameter suggestions ({other})",
                        path.display()
                    )))
                }
            };
            let (features, config) = emit_task_c_csvs(&analysis.features, &analysis.config, Some(&updates))?;
            let (features, config) = (features.to_csv(), config.to_csv());
            settings.ensure_output_dir()?;
            write(&settings.output(FEATURES_CSV_NAME), &features)?;
            write(&settings.output(CONFIG_CSV_NAME), &config)?;
            let (c1, c2) = render_task_c(assets, &features, &config)?;
            Ok(vec![c1, c2])
        }
    }
}

fn write_exchange(settings: &Settings, exchange: &Exchange) -> Result<(), CliError> {
    let task = exchange.prompt.task.as_str();
    write(&settings.output(&format!("exchange_{task}.json")), to_json(exchange))
}

pub fn prompt(settings: &Settings, task: TaskArg, suggestions: Option<&Path>, dump: bool) -> Result<(), CliError> {
    let prompts = render(settings, task, suggestions)?;
    settings.ensure_output_dir()?;
    for p in prompts {
        let text = p.wire_text();
        if dump {
            print!("{text}");
        }
        let path = settings.output(&format!("prompt_{}.txt", p.task.as_str()));
        write(&path, &text)?;
        write_exchange(
            settings,
            &Exchange {
                prompt: p,
                reply: None,
                verdict: None,
            },
        )?;
        if !dump {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn check_offline(config: &LlmConfig, offline: bool) -> Result<(), CliError> {
    if offline && !config.is_offline_safe() {
        return Err(CliError::Endpoint(format!(
            "offline mode refuses non-local endpoint `{}`",
            config.endpoint_url
        )));
    }
    Ok(())
}

fn verdict_for(task: PromptTask, reply: &str) -> Option<Verdict> {
    match task {
        PromptTask::A => Some(parse_winner(reply)),
        PromptTask::B => Some(parse_parameter_updates(reply)),
        PromptTask::C1 | PromptTask::C2 => None,
    }
}

pub fn ask(
    settings: &Settings,
    task: TaskArg,
    suggestions: Option<&Path>,
    dump: bool,
    offline: bool,
) -> Result<(), CliError> {
    check_offline(&settings.llm, offline)?;
    let client = LlmClient::new(settings.llm.clone())?;
    let prompts = render(settings, task, suggestions)?;
    settings.ensure_output_dir()?;
    let transcript = settings.output(TRANSCRIPT_FILE);
    for p in prompts {
        let name = p.task.as_str();
        let wire = p.wire_text();
        if dump {
            print!("{wire}");
        }
        write(&settings.output(&format!("prompt_{name}.txt")), &wire)?;
        let started = Instant::now();
        let result = client.complete(&p);
        let entry = TranscriptEntry {
            task: name.to_string(),
            model_id: client.model_id().to_string(),
            prompt: wire,
            reply: result.as_ref().ok().map(|r| r.text.clone()),
            error: result.as_ref().err().map(|e| e.to_string()),
            latency_secs: started.elapsed().as_secs_f64(),
        };
        append_transcript(&transcript, &entry).map_err(|e| CliError::write(&transcript, e))?;
        let reply = result?;
        write(&settings.output(&format!("reply_{name}.txt")), &reply.text)?;
        let verdict = verdict_for(p.task, &reply.text);
        if let Some(v) = &verdict {
            write(&settings.output(&format!("verdict_{name}.json")), to_json(v))?;
            println!("{name}: {v}");
        } else {
            println!("{name}: reply saved");
        }
        write_exchange(
            settings,
            &Exchange {
                prompt: p,
                reply: Some(reply.text),
                verdict,
            },
        )?;
    }
    Ok(())
}

/// One evaluation case as stored on disk.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub id: String,
    pub task: CaseTask,
    pub difficulty: Difficulty,
    pub sense: Option<Sense>,
    pub features: Option<Vec<AlgorithmFeatures>>,
    pub config: Option<PartitionConfig>,
    pub limits: Option<ClusterLimits>,
    pub expected: Option<Expected>,
}

impl CaseFile {
    pub fn into_case(self, assets: &TemplateAssets) -> Result<PromptCase, CliError> {
        let missing = |what: &str| CliError::input(format!("case `{}` needs `{what}`", self.id));
        let (prompt, expected) = match self.task {
            CaseTask::A => {
                let features = self.features.as_ref().ok_or_else(|| missing("features"))?;
                let sense = self.sense.ok_or_else(|| missing("sense"))?;
                let expected = self.expected.clone().unwrap_or_else(|| Expected::Verdict {
                    verdict: expected_label(features, sense),
                });
                (render_task_a(assets, features, sense)?, expected)
            }
            CaseTask::B => {
                let config = self.config.as_ref().ok_or_else(|| missing("config"))?;
                let limits = self.limits.ok_or_else(|| missing("limits"))?;
                let expected = self.expected.clone().unwrap_or(Expected::ValidUpdates { limits });
                (render_task_b(assets, config, &limits)?, expected)
            }
        };
        Ok(PromptCase {
            id: self.id,
            task: self.task,
            difficulty: self.difficulty,
            prompt,
            expected,
        })
    }
}

/// Case files of a directory in name order (`.toml` and `.json`).
pub fn load_cases(dir: &Path, assets: &TemplateAssets) -> Result<Vec<PromptCase>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::read(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e, "toml" | "json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::input(format!("{}: no case files", dir.display())));
    }
    let mut cases = Vec::with_capacity(paths.len());
    for path in paths {
        let file: CaseFile = read_structured(&path)?;
        cases.push(file.into_case(assets)?);
    }
    let mut seen = std::collections::BTreeSet::new();
    for c in &cases {
        if !seen.insert(&c.id) {
            return Err(CliError::input(format!("case id `{}` appears twice", c.id)));
        }
    }
    Ok(cases)
}

pub struct EvaluateOptions<'a> {
    pub cases: &'a Path,
    pub trials: usize,
    pub models: &'a [String],
    pub votes: Option<&'a Path>,
    pub repetitions: Option<usize>,
    pub parallel: bool,
}

pub fn evaluate(settings: &Settings, opts: &EvaluateOptions, llm: &LlmArgs) -> Result<(), CliError> {
    check_offline(&settings.llm, llm.offline)?;
    if opts.trials == 0 {
        return Err(CliError::input("--trials must be at least 1"));
    }
    let cases = load_cases(opts.cases, &settings.templates)?;
    let models: Vec<String> = if opts.models.is_empty() {
        vec![settings.llm.model_id.clone()]
    } else {
        opts.models.to_vec()
    };
    let bucket = settings.llm.requests_per_minute.map(|n| Arc::new(TokenBucket::per_minute(n)));
    let mut cards: Vec<ScoreCard> = Vec::new();
    let mut failure: Option<TrialAbort> = None;
    'models: for model in &models {
        let mut config = settings.llm.clone();
        config.model_id = model.clone();
        let mut client = LlmClient::new(config)?;
        if let Some(b) = &bucket {
            client = client.with_bucket(b.clone());
        }
        for case in &cases {
            let outcome = if opts.parallel {
                run_trials_parallel(case, &client, opts.trials)
            } else {
                run_trials(case, &client, opts.trials)
            };
            match outcome {
                Ok(card) => cards.push(card),
                Err(abort) => {
                    cards.push((*abort.card).clone());
                    failure = Some(abort);
                    break 'models;
                }
            }
        }
    }
    if let Some(votes) = opts.votes {
        let text = read(votes)?;
        let scores = human_scores(&text, &models, opts.repetitions.unwrap_or(opts.trials))
            .map_err(|e| CliError::input(format!("{}: {e}", votes.display())))?;
        for card in &mut cards {
            card.human_score = scores.get(&card.case_id).and_then(|m| m.get(&card.model_id)).copied();
        }
    }
    settings.ensure_output_dir()?;
    write(&settings.output(SCORECARDS_CSV), scorecards_csv(&cards))?;
    write(&settings.output(SCORECARDS_JSON), to_json(&cards))?;
    for card in &cards {
        println!(
            "{} {} {}: {}/{} correct, system score {:.2}{}",
            card.model_id,
            card.case_id,
            card.difficulty,
            card.corrects(),
            card.planned_trials,
            card.system_score,
            card.human_score.map(|h| format!(", human score {h:.2}")).unwrap_or_default()
        );
    }
    match failure {
        Some(abort) => Err(CliError::Endpoint(abort.to_string())),
        None => Ok(()),
    }
}

pub fn render_csv(csv: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = read(csv)?;
    let svg = BarChart::from_csv(&text)
        .and_then(|c| c.to_svg())
        .map_err(|e| CliError::input(format!("{}: {e}", csv.display())))?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| csv.with_extension("svg"));
    write(&out, svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn load_exchange(path: &Path) -> Result<Option<Exchange>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = read(path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Builds plots and the Markdown and HTML reports from whatever the output
/// directory holds.
pub fn render_report(settings: &Settings) -> Result<(), CliError> {
    let dir = settings.ensure_output_dir()?;
    let mut artifacts = ReportArtifacts::default();
    for (task, slot) in [("A", 0), ("B", 1), ("C1", 2), ("C2", 2)] {
        if let Some(ex) = load_exchange(&dir.join(format!("exchange_{task}.json")))? {
            match slot {
                0 => artifacts.task_a.push(ex),
                1 => artifacts.task_b.push(ex),
                _ => artifacts.task_c.push(ex),
            }
        }
    }
    let plots = [
        (FEATURES_CSV_NAME, FEATURES_PLOT, "Best and average performance per algorithm"),
        (CONFIG_CSV_NAME, CONFIG_PLOT, "Old and new clustering configuration"),
    ];
    for (csv, svg, caption) in plots {
        let path = dir.join(csv);
        if !path.exists() {
            continue;
        }
        let chart = BarChart::from_csv(&read(&path)?)
            .and_then(|c| c.to_svg())
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        write(&dir.join(svg), &chart)?;
        artifacts.plots.push((caption.to_string(), chart));
    }
    let cards_path = dir.join(SCORECARDS_JSON);
    if cards_path.exists() {
        artifacts.scorecards = serde_json::from_str(&read(&cards_path)?)
            .map_err(|e| CliError::input(format!("{}: {e}", cards_path.display())))?;
    }
    let md = assemble_report(&artifacts, ReportFormat::Markdown);
    let html = assemble_report(&artifacts, ReportFormat::Html);
    write(&dir.join("report.md"), &md.text)?;
    write(&dir.join("report.html"), &html.text)?;
    println!("wrote {} and {}", dir.join("report.md").display(), dir.join("report.html").display());
    Ok(())
}

pub fn export(settings: &Settings, format: GraphFormat, out: Option<&Path>) -> Result<(), CliError> {
    let analysis = Analysis::run(settings)?;
    let text = export_graph(&analysis.stn, format);
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn synth(seed: u64, spec: &SyntheticSpec, out: &Path) -> Result<(), CliError> {
    let dataset = random_dataset(seed, spec);
    std::fs::create_dir_all(out).map_err(|e| CliError::write(out, e))?;
    let mut manifest = format!(
        "sense = \"{}\"\nspace = \"continuous\"\noutput_dir = \"out\"\n",
        dataset.sense.as_str()
    );
    for algo in &dataset.algorithms {
        let file = format!("{}.tsv", algo.name);
        write(&out.join(&file), write_trajectories(algo))?;
        manifest.push_str(&format!("\n[[inputs]]\nname = \"{}\"\npath = \"{file}\"\n", algo.name));
    }
    write(&out.join("manifest.toml"), manifest)?;
    println!(
        "wrote {} algorithms, {} trajectories to {}",
        dataset.algorithms.len(),
        dataset.trajectory_count(),
        out.display()
    );
    Ok(())
}
