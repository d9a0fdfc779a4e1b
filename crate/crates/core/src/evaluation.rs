//! Response grammars, the rule-based labeling oracle, and trial scoring.
//!
//! Winner answers must contain exactly one declaration token, either
//! `[winner=<name>]` or `[draw]`, with nothing attached to it. Parameter
//! answers use `[<parameter>=<value>]` tokens. Violations are returned as
//! data ([`Verdict::FormatViolation`]); the parsers never fail.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::AlgorithmFeatures;
use crate::llm::{Completer, LlmError, LlmReply};
use crate::partition::{ClusterLimits, DistanceMeasure};
use crate::prompt::RenderedPrompt;
use crate::trajectory::Sense;

/// Relative difference below which two feature values count as similar.
pub const SIMILARITY_THRESHOLD: f64 = 0.01;

/// Upper bound for suggested cluster numbers, as a fraction of the maximum.
pub const CLUSTER_NUMBER_CEILING: f64 = 0.9;

pub const DEFAULT_TRIALS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringParameter {
    ClusterSize,
    VolumeSize,
    DistanceMeasure,
    ClusterNumber,
}

impl ClusteringParameter {
    pub const ALL: [ClusteringParameter; 4] = [
        ClusteringParameter::ClusterSize,
        ClusteringParameter::VolumeSize,
        ClusteringParameter::DistanceMeasure,
        ClusteringParameter::ClusterNumber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClusteringParameter::ClusterSize => "cluster_size",
            ClusteringParameter::VolumeSize => "volume_size",
            ClusteringParameter::DistanceMeasure => "distance_measure",
            ClusteringParameter::ClusterNumber => "cluster_number",
        }
    }

    /// Accepts `cluster_number`, `cluster number`, `Cluster-Number`, ...
    pub fn from_name(name: &str) -> Option<Self> {
        let normalized: String = name
            .trim()
            .chars()
            .map(|c| match c {
                ' ' | '-' => '_',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        Self::ALL.into_iter().find(|p| p.name() == normalized)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateValue {
    Number(f64),
    Measure(DistanceMeasure),
}

impl fmt::Display for UpdateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateValue::Number(v) => write!(f, "{v}"),
            UpdateValue::Measure(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterUpdate {
    pub parameter: ClusteringParameter,
    pub value: UpdateValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Winner { name: String },
    Draw,
    ParameterUpdates { updates: Vec<ParameterUpdate> },
    FormatViolation { reason: String },
}

impl Verdict {
    fn violation(reason: impl Into<String>) -> Self {
        Verdict::FormatViolation {
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Winner { name } => write!(f, "[winner={name}]"),
            Verdict::Draw => f.write_str("[draw]"),
            Verdict::ParameterUpdates { updates } => {
                for (i, u) in updates.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "[{}={}]", u.parameter.name(), u.value)?;
                }
                Ok(())
            }
            Verdict::FormatViolation { reason } => write!(f, "format violation: {reason}"),
        }
    }
}

/// A `[...]` token: byte offsets of the brackets and the inner text.
struct Token<'a> {
    end: usize,
    inner: &'a str,
}

fn bracket_tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match c {
            '[' => open = Some(i),
            ']' => {
                if let Some(start) = open.take() {
                    out.push(Token {
                        end: i + 1,
                        inner: &text[start + 1..i],
                    });
                }
            }
            _ => {}
        }
    }
    out
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '[' | ']' | '(' | ')' | ',' | '=' | ':' | ';'))
}

enum Declaration {
    Winner(String),
    Draw,
    Malformed(String),
}

fn classify(inner: &str) -> Option<Declaration> {
    let lower = inner.trim().to_ascii_lowercase();
    if inner == "draw" {
        return Some(Declaration::Draw);
    }
    if lower == "draw" {
        return Some(Declaration::Malformed(format!("`[{inner}]` should be written `[draw]`")));
    }
    if let Some(name) = inner.strip_prefix("winner=") {
        return Some(if valid_name(name) {
            Declaration::Winner(name.to_string())
        } else {
            Declaration::Malformed(format!("`[{inner}]` does not name a single algorithm"))
        });
    }
    if lower.starts_with("winner") {
        return Some(Declaration::Malformed(format!(
            "`[{inner}]` deviates from `[winner=algorithm_name]`"
        )));
    }
    None
}

/// Parses a winner-determination answer.
pub fn parse_winner(text: &str) -> Verdict {
    let mut decided: Option<Verdict> = None;
    for token in bracket_tokens(text) {
        let Some(decl) = classify(token.inner) else {
            continue;
        };
        let verdict = match decl {
            Declaration::Malformed(reason) => return Verdict::violation(reason),
            Declaration::Draw => Verdict::Draw,
            Declaration::Winner(name) => {
                let after = text[token.end..].trim_start_matches([' ', '\t']);
                if after.starts_with('(') {
                    return Verdict::violation(format!(
                        "winner declaration `[{}]` is followed by a parenthetical",
                        token.inner
                    ));
                }
                Verdict::Winner { name }
            }
        };
        match &decided {
            None => decided = Some(verdict),
            Some(previous) if *previous == verdict => {}
            Some(previous) => {
                return Verdict::violation(format!(
                    "conflicting declarations {previous} and {verdict}"
                ))
            }
        }
    }
    decided.unwrap_or_else(|| Verdict::violation("no [winner=...] or [draw] declaration found"))
}

fn parse_update_value(parameter: ClusteringParameter, raw: &str) -> Option<UpdateValue> {
    let raw = raw.trim();
    match parameter {
        ClusteringParameter::DistanceMeasure => raw.parse().ok().map(UpdateValue::Measure),
        _ => raw
            .trim_end_matches('%')
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(UpdateValue::Number),
    }
}

/// Finds `name:` / `name =` style mentions of a known parameter outside brackets.
fn unbracketed_assignment(text: &str) -> Option<String> {
    let mut masked = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' => {
                depth += 1;
                masked.push(' ');
            }
            ']' => {
                depth = depth.saturating_sub(1);
                masked.push(' ');
            }
            _ if depth > 0 => masked.push(' '),
            _ => masked.push(c.to_ascii_lowercase()),
        }
    }
    for p in ClusteringParameter::ALL {
        for spelling in [p.name().to_string(), p.name().replace('_', " ")] {
            let mut from = 0;
            while let Some(pos) = masked[from..].find(&spelling) {
                let at = from + pos + spelling.len();
                let rest = masked[at..].trim_start_matches([' ', '*', '`', '"']);
                if let Some(value) = rest.strip_prefix(':').or_else(|| rest.strip_prefix('=')) {
                    let value = value.trim_start_matches([' ', '*', '`', '"']);
                    if value.starts_with(|c: char| c.is_ascii_digit()) || parse_update_value(p, value.split_whitespace().next().unwrap_or("")).is_some() {
                        return Some(format!("`{spelling}` is assigned outside the [name=value] format"));
                    }
                }
                from = at;
            }
        }
    }
    None
}

/// Parses a parameter-suggestion answer.
pub fn parse_parameter_updates(text: &str) -> Verdict {
    let mut updates: Vec<ParameterUpdate> = Vec::new();
    for token in bracket_tokens(text) {
        let inner = token.inner;
        if let Some((name, value)) = inner.split_once('=') {
            let Some(parameter) = ClusteringParameter::from_name(name) else {
                continue;
            };
            match parse_update_value(parameter, value) {
                Some(value) => {
                    if let Some(existing) = updates.iter().find(|u| u.parameter == parameter) {
                        if existing.value != value {
                            return Verdict::violation(format!(
                                "`{}` is suggested twice with different values",
                                parameter.name()
                            ));
                        }
                    } else {
                        updates.push(ParameterUpdate { parameter, value });
                    }
                }
                None => {
                    return Verdict::violation(format!("`[{inner}]` carries an invalid value"));
                }
            }
        } else if let Some((name, _)) = inner.split_once(':') {
            if ClusteringParameter::from_name(name).is_some() {
                return Verdict::violation(format!("`[{inner}]` uses ':' instead of '='"));
            }
        }
    }
    if updates.is_empty() {
        let reason = unbracketed_assignment(text)
            .unwrap_or_else(|| "no [name_parameter=new_value] suggestion found".to_string());
        return Verdict::violation(reason);
    }
    Verdict::ParameterUpdates { updates }
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn similar(a: f64, b: f64) -> bool {
    relative_difference(a, b) < SIMILARITY_THRESHOLD
}

/// Deterministic label for a winner-determination case.
///
/// Precedence: best-fitness count (higher wins), then average fitness under
/// `sense`, then connectivity among algorithms that reach the best fitness.
/// Values within [`SIMILARITY_THRESHOLD`] relative difference tie; a tie that
/// survives every stage is a draw.
pub fn expected_label(features: &[AlgorithmFeatures], sense: Sense) -> Verdict {
    if features.is_empty() {
        return Verdict::Draw;
    }
    let top = features
        .iter()
        .map(|f| f.total_best_global_fitness)
        .max()
        .unwrap_or(0);
    let mut tied: Vec<&AlgorithmFeatures> = features
        .iter()
        .filter(|f| f.total_best_global_fitness == top)
        .collect();
    if tied.len() == 1 {
        return Verdict::Winner {
            name: tied[0].algorithm.clone(),
        };
    }

    let best_avg = tied
        .iter()
        .map(|f| f.avg_fitness)
        .reduce(|a, b| sense.best_of(a, b))
        .unwrap_or(f64::NAN);
    tied.retain(|f| similar(f.avg_fitness, best_avg));
    if tied.len() == 1 {
        return Verdict::Winner {
            name: tied[0].algorithm.clone(),
        };
    }

    if top == 0 {
        return Verdict::Draw;
    }
    let best_conn = tied
        .iter()
        .map(|f| f.connectivity)
        .fold(f64::NEG_INFINITY, f64::max);
    tied.retain(|f| similar(f.connectivity, best_conn));
    if tied.len() == 1 {
        Verdict::Winner {
            name: tied[0].algorithm.clone(),
        }
    } else {
        Verdict::Draw
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseTask {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "Easy",
            Difficulty::Hard => "Hard",
        })
    }
}

/// What counts as a correct answer for a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expected {
    /// Winner determination: the reply must match this verdict.
    Verdict { verdict: Verdict },
    /// Parameter suggestion: well-formed updates inside the admissible ranges.
    ValidUpdates { limits: ClusterLimits },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptCase {
    pub id: String,
    pub task: CaseTask,
    pub difficulty: Difficulty,
    pub prompt: RenderedPrompt,
    pub expected: Expected,
}

/// True when every suggested value is admissible.
pub fn updates_admissible(updates: &[ParameterUpdate], limits: &ClusterLimits) -> bool {
    updates.iter().all(|u| match (u.parameter, &u.value) {
        (ClusteringParameter::ClusterSize | ClusteringParameter::VolumeSize, UpdateValue::Number(v)) => {
            *v > 0.0 && *v <= 100.0
        }
        (ClusteringParameter::ClusterNumber, UpdateValue::Number(v)) => {
            v.fract() == 0.0
                && *v > limits.min_clusters as f64
                && *v < CLUSTER_NUMBER_CEILING * limits.max_clusters as f64
        }
        (ClusteringParameter::DistanceMeasure, UpdateValue::Measure(_)) => true,
        _ => false,
    })
}

/// Parses a reply for `case` and decides whether it is correct.
pub fn judge(case: &PromptCase, reply: &str) -> (Verdict, bool) {
    match (&case.task, &case.expected) {
        (CaseTask::A, Expected::Verdict { verdict }) => {
            let parsed = parse_winner(reply);
            let correct = parsed == *verdict;
            (parsed, correct)
        }
        (CaseTask::B, Expected::ValidUpdates { limits }) => {
            let parsed = parse_parameter_updates(reply);
            let correct = matches!(&parsed, Verdict::ParameterUpdates { updates } if updates_admissible(updates, limits));
            (parsed, correct)
        }
        (CaseTask::A, _) => (parse_winner(reply), false),
        (CaseTask::B, _) => (parse_parameter_updates(reply), false),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub reply: LlmReply,
    pub verdict: Verdict,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub model_id: String,
    pub case_id: String,
    pub task: CaseTask,
    pub difficulty: Difficulty,
    pub planned_trials: usize,
    pub trials: Vec<Trial>,
    pub system_score: f64,
    pub human_score: Option<f64>,
    /// Set when a fatal endpoint error cut the trials short.
    pub aborted: Option<String>,
}

impl ScoreCard {
    pub fn corrects(&self) -> usize {
        self.trials.iter().filter(|t| t.correct).count()
    }
}

/// Correct trials over planned trials.
pub fn system_score(corrects: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        corrects as f64 / trials as f64
    }
}

#[derive(Debug, Error)]
#[error("trials for case `{case_id}` aborted: {source}")]
pub struct TrialAbort {
    pub case_id: String,
    #[source]
    pub source: LlmError,
    pub card: Box<ScoreCard>,
}

fn card(case: &PromptCase, model: &str, n: usize, trials: Vec<Trial>, aborted: Option<String>) -> ScoreCard {
    let corrects = trials.iter().filter(|t| t.correct).count();
    ScoreCard {
        model_id: model.to_string(),
        case_id: case.id.clone(),
        task: case.task,
        difficulty: case.difficulty,
        planned_trials: n,
        system_score: system_score(corrects, n),
        trials,
        human_score: None,
        aborted,
    }
}

/// Runs `n` sequential completions of `case` and scores them.
pub fn run_trials(
    case: &PromptCase,
    completer: &dyn Completer,
    n: usize,
) -> Result<ScoreCard, TrialAbort> {
    let n = n.max(1);
    let mut trials = Vec::with_capacity(n);
    for index in 0..n {
        match completer.complete(&case.prompt) {
            Ok(reply) => {
                let (verdict, correct) = judge(case, &reply.text);
                trials.push(Trial {
                    index,
                    reply,
                    verdict,
                    correct,
                });
            }
            Err(source) => {
                let partial = card(case, completer.model_id(), n, trials, Some(source.to_string()));
                return Err(TrialAbort {
                    case_id: case.id.clone(),
                    source,
                    card: Box::new(partial),
                });
            }
        }
    }
    Ok(card(case, completer.model_id(), n, trials, None))
}

/// Like [`run_trials`] but issues the completions concurrently. Results are
/// ordered by trial index regardless of completion order; on failure the
/// trials that finished before the first failing index are kept.
pub fn run_trials_parallel(
    case: &PromptCase,
    completer: &dyn Completer,
    n: usize,
) -> Result<ScoreCard, TrialAbort> {
    let n = n.max(1);
    let results: Vec<Result<LlmReply, LlmError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|_| scope.spawn(|| completer.complete(&case.prompt)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("completion thread panicked"))
            .collect()
    });
    let mut trials = Vec::with_capacity(n);
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(reply) => {
                let (verdict, correct) = judge(case, &reply.text);
                trials.push(Trial {
                    index,
                    reply,
                    verdict,
                    correct,
                });
            }
            Err(source) => {
                let partial = card(case, completer.model_id(), n, trials, Some(source.to_string()));
                return Err(TrialAbort {
                    case_id: case.id.clone(),
                    source,
                    card: Box::new(partial),
                });
            }
        }
    }
    Ok(card(case, completer.model_id(), n, trials, None))
}

#[derive(Debug, Error, PartialEq)]
pub enum VoteError {
    #[error("votes CSV: {0}")]
    Csv(String),
    #[error("line {line}: unknown model `{model}`")]
    UnknownModel { line: usize, model: String },
    #[error("line {line}: repetition {repetition} is outside 1..={max}")]
    BadRepetition {
        line: usize,
        repetition: usize,
        max: usize,
    },
    #[error("case `{case_id}` repetition {repetition} has two winners: `{first}` and `{second}`")]
    DuplicateWinner {
        case_id: String,
        repetition: usize,
        first: String,
        second: String,
    },
}

#[derive(Debug, Deserialize)]
struct VoteRow {
    #[allow(dead_code)]
    evaluator: String,
    case_id: String,
    repetition: usize,
    winning_model: String,
}

/// Human scores per case and model: wins over repetitions.
///
/// Votes CSV columns: `evaluator,case_id,repetition,winning_model`. Each
/// repetition of a case has at most one winning model; identical duplicate
/// rows (for example from several evaluators agreeing) count once.
pub fn human_scores(
    votes_csv: &str,
    model_ids: &[String],
    repetitions: usize,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>, VoteError> {
    let known: BTreeSet<&str> = model_ids.iter().map(String::as_str).collect();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(votes_csv.as_bytes());
    let mut winners: BTreeMap<(String, usize), String> = BTreeMap::new();
    let mut cases: BTreeSet<String> = BTreeSet::new();
    for (i, row) in reader.deserialize::<VoteRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| VoteError::Csv(e.to_string()))?;
        if !known.contains(row.winning_model.as_str()) {
            return Err(VoteError::UnknownModel {
                line,
                model: row.winning_model,
            });
        }
        if row.repetition < 1 || row.repetition > repetitions {
            return Err(VoteError::BadRepetition {
                line,
                repetition: row.repetition,
                max: repetitions,
            });
        }
        cases.insert(row.case_id.clone());
        let key = (row.case_id.clone(), row.repetition);
        if let Some(first) = winners.get(&key) {
            if *first != row.winning_model {
                return Err(VoteError::DuplicateWinner {
                    case_id: row.case_id,
                    repetition: row.repetition,
                    first: first.clone(),
                    second: row.winning_model,
                });
            }
        } else {
            winners.insert(key, row.winning_model);
        }
    }
    let mut out = BTreeMap::new();
    for case in cases {
        let scores: BTreeMap<String, f64> = model_ids
            .iter()
            .map(|m| {
                let wins = winners
                    .iter()
                    .filter(|((c, _), w)| *c == case && *w == m)
                    .count();
                (m.clone(), wins as f64 / repetitions as f64)
            })
            .collect();
        out.insert(case, scores);
    }
    Ok(out)
}

/// Scorecards as CSV: `task,prompt_type,model,system_score,human_score`.
/// `prompt_type` is `<n>/<difficulty>` with `n` the case's position within its task.
pub fn scorecards_csv(cards: &[ScoreCard]) -> String {
    let mut order: BTreeMap<CaseTask, Vec<&str>> = BTreeMap::new();
    for c in cards {
        let ids = order.entry(c.task).or_default();
        if !ids.contains(&c.case_id.as_str()) {
            ids.push(&c.case_id);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "prompt_type", "model", "system_score", "human_score"])
        .expect("in-memory write");
    for c in cards {
        let position = order[&c.task]
            .iter()
            .position(|id| *id == c.case_id)
            .unwrap_or(0)
            + 1;
        w.write_record([
            format!("{:?}", c.task),
            format!("{position}/{}", c.difficulty),
            c.model_id.clone(),
            c.system_score.to_string(),
            c.human_score.map(|h| h.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}
