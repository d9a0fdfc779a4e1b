//! Raw trajectory logs and the in-memory run model.
//!
//! Input files are UTF-8 TSV with one search step per line:
//!
//! ```text
//! run<TAB>fitness<TAB>solution
//! ```
//!
//! Continuous solutions are comma-separated reals, discrete solutions are
//! opaque tokens (which therefore may not contain commas). Empty lines and
//! lines starting with `#` are skipped. Files ending in `.gz` are
//! decompressed transparently.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used when comparing non-integer fitness values.
pub const FITNESS_TOLERANCE: f64 = 1e-9;

/// Fitness equality: exact for integer-valued fitness, absolute 1e-9 otherwise.
pub fn fitness_eq(a: f64, b: f64) -> bool {
    if a.fract() == 0.0 && b.fract() == 0.0 {
        a == b
    } else {
        (a - b).abs() <= FITNESS_TOLERANCE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }

    /// The better of the two values.
    pub fn best_of(self, a: f64, b: f64) -> f64 {
        if self.better(b, a) {
            b
        } else {
            a
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Minimize => "minimization",
            Sense::Maximize => "maximization",
        }
    }
}

impl std::str::FromStr for Sense {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimize" | "minimization" => Ok(Sense::Minimize),
            "max" | "maximize" | "maximization" => Ok(Sense::Maximize),
            other => Err(format!("unknown optimization sense `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Discrete,
    Continuous,
}

impl std::str::FromStr for SpaceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "discrete" => Ok(SpaceKind::Discrete),
            "continuous" => Ok(SpaceKind::Continuous),
            other => Err(format!("unknown search space kind `{other}`")),
        }
    }
}

/// A point of the search space as recorded in a trajectory log.
///
/// Equality and hashing on continuous points are bitwise on the coordinates
/// (with `-0.0` folded onto `0.0`), so two log lines carrying the same text
/// always land on the same point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SolutionPoint {
    Discrete(String),
    Continuous(Vec<f64>),
}

impl SolutionPoint {
    pub fn kind(&self) -> SpaceKind {
        match self {
            SolutionPoint::Discrete(_) => SpaceKind::Discrete,
            SolutionPoint::Continuous(_) => SpaceKind::Continuous,
        }
    }

    /// Coordinate count for continuous points, signature length for discrete ones.
    pub fn dimension(&self) -> usize {
        match self {
            SolutionPoint::Discrete(s) => s.chars().count(),
            SolutionPoint::Continuous(v) => v.len(),
        }
    }

    fn canonical_bits(x: f64) -> u64 {
        if x == 0.0 {
            0
        } else {
            x.to_bits()
        }
    }
}

impl PartialEq for SolutionPoint {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SolutionPoint::Discrete(a), SolutionPoint::Discrete(b)) => a == b,
            (SolutionPoint::Continuous(a), SolutionPoint::Continuous(b)) => {
                a.len() == b.len()
                    && a.iter()
                        .zip(b)
                        .all(|(x, y)| Self::canonical_bits(*x) == Self::canonical_bits(*y))
            }
            _ => false,
        }
    }
}

impl Eq for SolutionPoint {}

impl Hash for SolutionPoint {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            SolutionPoint::Discrete(s) => {
                0u8.hash(state);
                s.hash(state);
            }
            SolutionPoint::Continuous(v) => {
                1u8.hash(state);
                v.len().hash(state);
                for x in v {
                    Self::canonical_bits(*x).hash(state);
                }
            }
        }
    }
}

impl fmt::Display for SolutionPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionPoint::Discrete(s) => f.write_str(s),
            SolutionPoint::Continuous(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub fitness: f64,
    pub solution: SolutionPoint,
}

/// One run of one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub run_id: u32,
    pub steps: Vec<Step>,
    pub best_fitness: f64,
    pub final_fitness: f64,
}

impl Trajectory {
    /// Builds a trajectory and derives its best and final fitness.
    ///
    /// Panics if `steps` is empty; the parser never produces such runs.
    pub fn new(run_id: u32, steps: Vec<Step>, sense: Sense) -> Self {
        assert!(!steps.is_empty(), "trajectory {run_id} has no steps");
        let best_fitness = steps
            .iter()
            .map(|s| s.fitness)
            .reduce(|a, b| sense.best_of(a, b))
            .unwrap_or(f64::NAN);
        let final_fitness = steps[steps.len() - 1].fitness;
        Trajectory {
            run_id,
            steps,
            best_fitness,
            final_fitness,
        }
    }
}

/// All runs of a single algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRuns {
    pub name: String,
    pub trajectories: Vec<Trajectory>,
}

impl AlgorithmRuns {
    /// Best trajectory fitness of this algorithm.
    pub fn best_fitness(&self, sense: Sense) -> f64 {
        self.trajectories
            .iter()
            .map(|t| t.best_fitness)
            .reduce(|a, b| sense.best_of(a, b))
            .unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub algorithms: Vec<AlgorithmRuns>,
    pub sense: Sense,
    pub space: SpaceKind,
}

impl Dataset {
    /// Validates and assembles a dataset from already parsed runs.
    pub fn new(
        algorithms: Vec<AlgorithmRuns>,
        sense: Sense,
        space: SpaceKind,
    ) -> Result<Self, TrajectoryError> {
        if algorithms.is_empty() {
            return Err(TrajectoryError::NoAlgorithms);
        }
        let mut names = HashSet::new();
        let mut dimension: Option<(usize, &str)> = None;
        for algo in &algorithms {
            if !names.insert(algo.name.as_str()) {
                return Err(TrajectoryError::DuplicateAlgorithm(algo.name.clone()));
            }
            if algo.trajectories.is_empty() {
                return Err(TrajectoryError::NoTrajectories(algo.name.clone()));
            }
            for step in algo.trajectories.iter().flat_map(|t| &t.steps) {
                if step.solution.kind() != space {
                    return Err(TrajectoryError::SpaceMismatch {
                        algorithm: algo.name.clone(),
                        expected: space,
                    });
                }
                if space == SpaceKind::Continuous {
                    let d = step.solution.dimension();
                    match dimension {
                        None => dimension = Some((d, algo.name.as_str())),
                        Some((expected, first)) if expected != d => {
                            return Err(TrajectoryError::DimensionAcrossFiles {
                                algorithm: algo.name.clone(),
                                found: d,
                                expected,
                                first: first.to_string(),
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(Dataset {
            algorithms,
            sense,
            space,
        })
    }

    /// Optimum of all trajectory bests across every algorithm.
    pub fn best_global_fitness(&self) -> f64 {
        self.algorithms
            .iter()
            .map(|a| a.best_fitness(self.sense))
            .reduce(|a, b| self.sense.best_of(a, b))
            .unwrap_or(f64::NAN)
    }

    /// Distinct solutions in first-appearance order (algorithm, run, step).
    pub fn distinct_solutions(&self) -> Vec<SolutionPoint> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for step in self
            .algorithms
            .iter()
            .flat_map(|a| &a.trajectories)
            .flat_map(|t| &t.steps)
        {
            if seen.insert(&step.solution) {
                out.push(step.solution.clone());
            }
        }
        out
    }

    pub fn trajectory_count(&self) -> usize {
        self.algorithms.iter().map(|a| a.trajectories.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {reason}")]
    MalformedLine {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("{0}: no trajectory steps found")]
    EmptyFile(String),
    #[error("{origin}:{line}: solution has dimension {found}, expected {expected}")]
    InconsistentDimension {
        origin: String,
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("algorithm `{algorithm}` has dimension {found}, but `{first}` has dimension {expected}")]
    DimensionAcrossFiles {
        algorithm: String,
        found: usize,
        expected: usize,
        first: String,
    },
    #[error("{origin}:{line}: solution looks {found:?} but the dataset is {expected:?}")]
    SpaceKindLine {
        origin: String,
        line: usize,
        found: SpaceKind,
        expected: SpaceKind,
    },
    #[error("algorithm `{algorithm}` does not match the {expected:?} search space")]
    SpaceMismatch {
        algorithm: String,
        expected: SpaceKind,
    },
    #[error("algorithm name `{0}` appears more than once")]
    DuplicateAlgorithm(String),
    #[error("algorithm `{0}` has no trajectories")]
    NoTrajectories(String),
    #[error("dataset needs at least one input file")]
    NoAlgorithms,
}

/// Parsing context shared by every file of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputFormat {
    pub sense: Sense,
    pub space: SpaceKind,
}

fn read_text(path: &Path) -> Result<String, TrajectoryError> {
    let io_err = |source| TrajectoryError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut text = String::new();
    if path.extension().is_some_and(|e| e == "gz") {
        flate2::read::GzDecoder::new(file)
            .read_to_string(&mut text)
            .map_err(io_err)?;
    } else {
        std::io::BufReader::new(file)
            .read_to_string(&mut text)
            .map_err(io_err)?;
    }
    Ok(text)
}

pub fn parse_trajectory_file(
    path: &Path,
    algorithm_name: &str,
    format: InputFormat,
) -> Result<AlgorithmRuns, TrajectoryError> {
    let text = read_text(path)?;
    parse_trajectory_str(&text, &path.display().to_string(), algorithm_name, format)
}

fn parse_solution(
    token: &str,
    space: SpaceKind,
    origin: &str,
    line: usize,
) -> Result<SolutionPoint, TrajectoryError> {
    let malformed = |reason: String| TrajectoryError::MalformedLine {
        origin: origin.to_string(),
        line,
        reason,
    };
    if token.is_empty() {
        return Err(malformed("empty solution".into()));
    }
    match space {
        SpaceKind::Discrete => {
            if token.contains(',') {
                return Err(TrajectoryError::SpaceKindLine {
                    origin: origin.to_string(),
                    line,
                    found: SpaceKind::Continuous,
                    expected: SpaceKind::Discrete,
                });
            }
            Ok(SolutionPoint::Discrete(token.to_string()))
        }
        SpaceKind::Continuous => {
            let mut coords = Vec::new();
            for part in token.split(',') {
                let x: f64 = part.trim().parse().map_err(|_| {
                    if coords.is_empty() && !token.contains(',') {
                        TrajectoryError::SpaceKindLine {
                            origin: origin.to_string(),
                            line,
                            found: SpaceKind::Discrete,
                            expected: SpaceKind::Continuous,
                        }
                    } else {
                        malformed(format!("coordinate `{part}` is not a number"))
                    }
                })?;
                if !x.is_finite() {
                    return Err(malformed(format!("coordinate `{part}` is not finite")));
                }
                coords.push(x);
            }
            Ok(SolutionPoint::Continuous(coords))
        }
    }
}

/// Parses the text of one trajectory file. `origin` is used in error messages.
pub fn parse_trajectory_str(
    text: &str,
    origin: &str,
    algorithm_name: &str,
    format: InputFormat,
) -> Result<AlgorithmRuns, TrajectoryError> {
    let mut runs: BTreeMap<u32, Vec<Step>> = BTreeMap::new();
    let mut dimension: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| TrajectoryError::MalformedLine {
            origin: origin.to_string(),
            line,
            reason,
        };
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let run_id: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("run id `{}` is not a positive integer", fields[0])))?;
        if run_id == 0 {
            return Err(malformed("run ids start at 1".into()));
        }
        let fitness: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| malformed(format!("fitness `{}` is not a number", fields[1])))?;
        if !fitness.is_finite() {
            return Err(malformed(format!("fitness `{}` is not finite", fields[1])));
        }
        let solution = parse_solution(fields[2].trim(), format.space, origin, line)?;
        if format.space == SpaceKind::Continuous {
            let d = solution.dimension();
            match dimension {
                None => dimension = Some(d),
                Some(expected) if expected != d => {
                    return Err(TrajectoryError::InconsistentDimension {
                        origin: origin.to_string(),
                        line,
                        found: d,
                        expected,
                    })
                }
                _ => {}
            }
        }
        runs.entry(run_id)
            .or_default()
            .push(Step { fitness, solution });
    }

    if runs.is_empty() {
        return Err(TrajectoryError::EmptyFile(origin.to_string()));
    }
    let trajectories = runs
        .into_iter()
        .map(|(run_id, steps)| Trajectory::new(run_id, steps, format.sense))
        .collect();
    Ok(AlgorithmRuns {
        name: algorithm_name.to_string(),
        trajectories,
    })
}

/// Loads several trajectory files into one validated dataset.
pub fn load_dataset<P: AsRef<Path>>(
    inputs: &[(P, String)],
    sense: Sense,
    space: SpaceKind,
) -> Result<Dataset, TrajectoryError> {
    if inputs.is_empty() {
        return Err(TrajectoryError::NoAlgorithms);
    }
    let mut seen = HashSet::new();
    for (_, name) in inputs {
        if !seen.insert(name.as_str()) {
            return Err(TrajectoryError::DuplicateAlgorithm(name.clone()));
        }
    }
    let format = InputFormat { sense, space };
    let algorithms = inputs
        .iter()
        .map(|(path, name)| parse_trajectory_file(path.as_ref(), name, format))
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(algorithms, sense, space)
}

/// Serializes runs back into the TSV input format.
pub fn write_trajectories(runs: &AlgorithmRuns) -> String {
    let mut out = String::new();
    for t in &runs.trajectories {
        for s in &t.steps {
            out.push_str(&format!("{}\t{}\t{}\n", t.run_id, s.fitness, s.solution));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CONT_MIN: InputFormat = InputFormat {
        sense: Sense::Minimize,
        space: SpaceKind::Continuous,
    };

    #[test]
    fn two_step_run() {
        let runs = parse_trajectory_str("1\t5.0\t0.1,0.2\n1\t3.0\t0.0,0.0\n", "t", "a", CONT_MIN).unwrap();
        assert_eq!(runs.trajectories.len(), 1);
        let t = &runs.trajectories[0];
        assert_eq!(t.steps.len(), 2);
        assert_eq!(t.best_fitness, 3.0);
        assert_eq!(t.final_fitness, 3.0);
    }

    #[test]
    fn groups_ten_runs() {
        let mut text = String::new();
        for run in 1..=10 {
            for step in 0..3 {
                text.push_str(&format!("{run}\t{}\t{step},{run}\n", 10 - step));
            }
        }
        let runs = parse_trajectory_str(&text, "t", "a", CONT_MIN).unwrap();
        assert_eq!(runs.trajectories.len(), 10);
        assert!(runs.trajectories.iter().all(|t| t.steps.len() == 3));
    }

    #[test]
    fn interleaved_runs_keep_line_order() {
        let text = "2\t9\t1,1\n1\t8\t0,0\n2\t7\t2,2\n1\t6\t3,3\n";
        let runs = parse_trajectory_str(text, "t", "a", CONT_MIN).unwrap();
        let fits: Vec<Vec<f64>> = runs
            .trajectories
            .iter()
            .map(|t| t.steps.iter().map(|s| s.fitness).collect())
            .collect();
        assert_eq!(fits, vec![vec![8.0, 6.0], vec![9.0, 7.0]]);
    }

    #[test]
    fn non_numeric_fitness_reports_line() {
        let err = parse_trajectory_str("1\t1\t0,0\n1\tabc\t0,0\n", "f.tsv", "a", CONT_MIN).unwrap_err();
        match err {
            TrajectoryError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(
            parse_trajectory_str("\n# only a comment\n", "f", "a", CONT_MIN),
            Err(TrajectoryError::EmptyFile(_))
        ));
    }

    #[test]
    fn dimension_change_rejected() {
        let err = parse_trajectory_str("1\t1\t0,0\n1\t1\t0,0,0\n", "f", "a", CONT_MIN).unwrap_err();
        assert!(matches!(err, TrajectoryError::InconsistentDimension { line: 2, .. }));
    }

    #[test]
    fn maximize_best() {
        let fmt = InputFormat {
            sense: Sense::Maximize,
            space: SpaceKind::Discrete,
        };
        let runs = parse_trajectory_str("1\t1\tab\n1\t4\tac\n1\t2\tad\n", "f", "a", fmt).unwrap();
        assert_eq!(runs.trajectories[0].best_fitness, 4.0);
        assert_eq!(runs.trajectories[0].final_fitness, 2.0);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let discrete = InputFormat {
            sense: Sense::Minimize,
            space: SpaceKind::Discrete,
        };
        assert!(matches!(
            parse_trajectory_str("1\t1\t0.5,0.5\n", "f", "a", discrete),
            Err(TrajectoryError::SpaceKindLine { .. })
        ));
        assert!(matches!(
            parse_trajectory_str("1\t1\tabc\n", "f", "a", CONT_MIN),
            Err(TrajectoryError::SpaceKindLine { .. })
        ));
    }

    #[test]
    fn fitness_tolerance() {
        assert!(fitness_eq(3.0, 3.0 + 1e-12));
        assert!(!fitness_eq(3.0, 3.0 + 1e-6));
        assert!(!fitness_eq(3.0, 4.0));
        assert!(fitness_eq(0.1 + 0.2, 0.3));
    }

    #[test]
    fn zero_signs_are_one_point() {
        assert_eq!(
            SolutionPoint::Continuous(vec![0.0, 1.0]),
            SolutionPoint::Continuous(vec![-0.0, 1.0])
        );
    }

    fn arb_runs() -> impl Strategy<Value = Vec<(u32, f64, Vec<f64>)>> {
        prop::collection::vec(
            (1u32..6, -1e6f64..1e6, prop::collection::vec(-100f64..100.0, 3)),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn parse_write_parse_roundtrip(lines in arb_runs()) {
            let mut text = String::new();
            for (run, fit, sol) in &lines {
                let sol: Vec<String> = sol.iter().map(|x| x.to_string()).collect();
                text.push_str(&format!("{run}\t{fit}\t{}\n", sol.join(",")));
            }
            let first = parse_trajectory_str(&text, "p", "a", CONT_MIN).unwrap();
            let again = parse_trajectory_str(&write_trajectories(&first), "p", "a", CONT_MIN).unwrap();
            prop_assert_eq!(&first, &again);

            let distinct: HashSet<u32> = lines.iter().map(|l| l.0).collect();
            prop_assert_eq!(first.trajectories.len(), distinct.len());
            for t in &first.trajectories {
                prop_assert!(t.steps.iter().all(|s| t.best_fitness <= s.fitness));
            }
        }
    }
}
