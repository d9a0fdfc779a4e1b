//! Constrained complete-linkage agglomerative clustering of solutions.
//!
//! Clustering starts from one singleton cluster per distinct solution and
//! repeatedly merges the closest pair of clusters (complete linkage) whose
//! union keeps both limits:
//!
//! * cluster size: members / all distinct solutions, as a percentage;
//! * volume size: spanned volume of the members / spanned volume of all
//!   solutions, as a percentage.
//!
//! For continuous points the spanned volume is the axis-aligned bounding box
//! restricted to the dimensions in which the whole dataset varies. For
//! discrete signatures it is the number of positions in which the members
//! disagree, relative to the positions in which the dataset disagrees.
//!
//! Merging stops when no admissible pair is left; the cluster count at that
//! point is the minimum reachable number of clusters. Any cluster count between
//! that minimum and the number of distinct solutions is obtained by replaying
//! the recorded merge sequence, so partitions at different counts are nested.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::SolutionPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceMeasure {
    Hamming,
    Euclidean,
    Manhattan,
}

impl fmt::Display for DistanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMeasure::Hamming => "Hamming",
            DistanceMeasure::Euclidean => "Euclidean",
            DistanceMeasure::Manhattan => "Manhattan",
        })
    }
}

impl std::str::FromStr for DistanceMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hamming" => Ok(DistanceMeasure::Hamming),
            "euclidean" => Ok(DistanceMeasure::Euclidean),
            "manhattan" => Ok(DistanceMeasure::Manhattan),
            other => Err(format!("unknown distance measure `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub cluster_size_pct: f64,
    pub volume_size_pct: f64,
    pub measure: DistanceMeasure,
    pub cluster_number: usize,
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), PartitionError> {
        for (name, value) in [
            ("cluster size", self.cluster_size_pct),
            ("volume size", self.volume_size_pct),
        ] {
            if !(value > 0.0 && value <= 100.0) {
                return Err(PartitionError::InvalidPercentage { name, value });
            }
        }
        if self.cluster_number == 0 {
            return Err(PartitionError::ZeroClusters);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLimits {
    pub min_clusters: usize,
    pub max_clusters: usize,
}

impl ClusterLimits {
    pub fn contains(&self, k: usize) -> bool {
        (self.min_clusters..=self.max_clusters).contains(&k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionResult {
    /// Distinct solutions in first-appearance order.
    pub solutions: Vec<SolutionPoint>,
    /// Cluster id of `solutions[i]`.
    pub cluster_of: Vec<usize>,
    pub cluster_count: usize,
    /// Medoid of each cluster.
    pub representatives: Vec<SolutionPoint>,
    index: HashMap<SolutionPoint, usize>,
}

impl PartitionResult {
    /// Cluster id for a solution, if it was part of the partitioned set.
    pub fn cluster(&self, solution: &SolutionPoint) -> Option<usize> {
        self.index.get(solution).map(|&i| self.cluster_of[i])
    }

    /// Each solution as its own cluster.
    pub fn identity(solutions: &[SolutionPoint]) -> Self {
        let solutions = dedup(solutions);
        let cluster_of: Vec<usize> = (0..solutions.len()).collect();
        Self::assemble(solutions.clone(), cluster_of, solutions)
    }

    fn assemble(
        solutions: Vec<SolutionPoint>,
        cluster_of: Vec<usize>,
        representatives: Vec<SolutionPoint>,
    ) -> Self {
        let index = solutions
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        PartitionResult {
            cluster_count: representatives.len(),
            solutions,
            cluster_of,
            representatives,
            index,
        }
    }

    /// Members of each cluster as indices into `solutions`.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, &c) in self.cluster_of.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// CSV `solution_index,cluster_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("solution_index,cluster_id\n");
        for (i, c) in self.cluster_of.iter().enumerate() {
            out.push_str(&format!("{i},{c}\n"));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("no solutions to partition")]
    Empty,
    #[error("{name} must lie in (0, 100], got {value}")]
    InvalidPercentage { name: &'static str, value: f64 },
    #[error("cluster number must be at least 1")]
    ZeroClusters,
    #[error("{measure} distance cannot compare these solutions: {reason}")]
    Incompatible {
        measure: DistanceMeasure,
        reason: String,
    },
    #[error("cluster number {requested} is outside the reachable range [{}, {}]", limits.min_clusters, limits.max_clusters)]
    OutOfLimits {
        requested: usize,
        limits: ClusterLimits,
    },
}

pub fn distance(
    a: &SolutionPoint,
    b: &SolutionPoint,
    measure: DistanceMeasure,
) -> Result<f64, PartitionError> {
    let incompatible = |reason: String| PartitionError::Incompatible { measure, reason };
    match (measure, a, b) {
        (DistanceMeasure::Hamming, SolutionPoint::Discrete(x), SolutionPoint::Discrete(y)) => {
            let (xl, yl) = (x.chars().count(), y.chars().count());
            if xl != yl {
                return Err(incompatible(format!("signature lengths {xl} and {yl} differ")));
            }
            Ok(x.chars().zip(y.chars()).filter(|(p, q)| p != q).count() as f64)
        }
        (DistanceMeasure::Hamming, _, _) => {
            Err(incompatible("Hamming distance needs discrete signatures".into()))
        }
        (_, SolutionPoint::Continuous(x), SolutionPoint::Continuous(y)) => {
            if x.len() != y.len() {
                return Err(incompatible(format!(
                    "dimensions {} and {} differ",
                    x.len(),
                    y.len()
                )));
            }
            let diffs = x.iter().zip(y).map(|(p, q)| (p - q).abs());
            Ok(match measure {
                DistanceMeasure::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
                _ => diffs.sum(),
            })
        }
        _ => Err(incompatible(format!("{measure} distance needs continuous vectors"))),
    }
}

fn dedup(solutions: &[SolutionPoint]) -> Vec<SolutionPoint> {
    let mut seen = std::collections::HashSet::new();
    solutions
        .iter()
        .filter(|s| seen.insert(*s))
        .cloned()
        .collect()
}

/// Extent of a cluster, used for the volume limit.
#[derive(Clone, Debug)]
enum Span {
    /// Per-dimension (min, max).
    Box(Vec<(f64, f64)>),
    /// Per-position: the shared character, or `None` once members disagree.
    Positions(Vec<Option<char>>),
}

impl Span {
    fn of(point: &SolutionPoint) -> Span {
        match point {
            SolutionPoint::Continuous(v) => Span::Box(v.iter().map(|&x| (x, x)).collect()),
            SolutionPoint::Discrete(s) => Span::Positions(s.chars().map(Some).collect()),
        }
    }

    fn union(&self, other: &Span) -> Span {
        match (self, other) {
            (Span::Box(a), Span::Box(b)) => Span::Box(
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p.0.min(q.0), p.1.max(q.1)))
                    .collect(),
            ),
            (Span::Positions(a), Span::Positions(b)) => Span::Positions(
                a.iter()
                    .zip(b)
                    .map(|(p, q)| if p == q { *p } else { None })
                    .collect(),
            ),
            _ => unreachable!("span kinds are uniform within one partitioning run"),
        }
    }

    /// Volume relative to `whole`, in percent.
    fn volume_pct(&self, whole: &Span) -> f64 {
        match (self, whole) {
            (Span::Box(part), Span::Box(all)) => {
                let mut ratio = 1.0;
                for (p, a) in part.iter().zip(all) {
                    let full = a.1 - a.0;
                    if full > 0.0 {
                        ratio *= (p.1 - p.0) / full;
                    }
                }
                ratio * 100.0
            }
            (Span::Positions(part), Span::Positions(all)) => {
                let varying = all.iter().filter(|c| c.is_none()).count();
                if varying == 0 {
                    return 100.0;
                }
                let own = part.iter().filter(|c| c.is_none()).count();
                own as f64 / varying as f64 * 100.0
            }
            _ => unreachable!("span kinds are uniform within one partitioning run"),
        }
    }
}

/// The full constrained merge sequence for one set of solutions.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    solutions: Vec<SolutionPoint>,
    measure: DistanceMeasure,
    /// (kept cluster, absorbed cluster, linkage distance), indices are the
    /// smallest member index of each cluster.
    merges: Vec<(usize, usize, f64)>,
}

impl Hierarchy {
    /// Runs constrained complete-linkage clustering to exhaustion.
    pub fn build(
        solutions: &[SolutionPoint],
        cluster_size_pct: f64,
        volume_size_pct: f64,
        measure: DistanceMeasure,
    ) -> Result<Self, PartitionError> {
        let solutions = dedup(solutions);
        let n = solutions.len();
        if n == 0 {
            return Err(PartitionError::Empty);
        }

        // Condensed pairwise distance matrix, updated in place with complete
        // linkage: d(i ∪ j, k) = max(d(i, k), d(j, k)).
        let mut dist = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(&solutions[i], &solutions[j], measure)?;
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        if n == 1 {
            return Ok(Hierarchy {
                solutions,
                measure,
                merges: Vec::new(),
            });
        }

        let mut spans: Vec<Span> = solutions.iter().map(Span::of).collect();
        let whole = spans
            .iter()
            .skip(1)
            .fold(spans[0].clone(), |acc, s| acc.union(s));
        let mut sizes = vec![1usize; n];
        let mut active: Vec<usize> = (0..n).collect();
        let mut merges = Vec::new();
        let size_cap = cluster_size_pct / 100.0 * n as f64;

        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for (ai, &i) in active.iter().enumerate() {
                for &j in &active[ai + 1..] {
                    let d = dist[i * n + j];
                    if best.is_some_and(|(_, _, bd)| d >= bd) {
                        continue;
                    }
                    if (sizes[i] + sizes[j]) as f64 > size_cap + 1e-9 {
                        continue;
                    }
                    if spans[i].union(&spans[j]).volume_pct(&whole) > volume_size_pct + 1e-9 {
                        continue;
                    }
                    best = Some((i, j, d));
                }
            }
            let Some((i, j, d)) = best else { break };
            for &k in &active {
                if k != i && k != j {
                    let merged = dist[i * n + k].max(dist[j * n + k]);
                    dist[i * n + k] = merged;
                    dist[k * n + i] = merged;
                }
            }
            spans[i] = spans[i].union(&spans[j]);
            sizes[i] += sizes[j];
            active.retain(|&k| k != j);
            merges.push((i, j, d));
        }

        Ok(Hierarchy {
            solutions,
            measure,
            merges,
        })
    }

    pub fn limits(&self) -> ClusterLimits {
        ClusterLimits {
            min_clusters: self.solutions.len() - self.merges.len(),
            max_clusters: self.solutions.len(),
        }
    }

    pub fn solutions(&self) -> &[SolutionPoint] {
        &self.solutions
    }

    /// Partition with exactly `k` clusters.
    pub fn cut(&self, k: usize) -> Result<PartitionResult, PartitionError> {
        let limits = self.limits();
        if !limits.contains(k) {
            return Err(PartitionError::OutOfLimits {
                requested: k,
                limits,
            });
        }
        let n = self.solutions.len();
        // Union-find over the first n - k merges.
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(keep, absorb, _) in &self.merges[..n - k] {
            let (a, b) = (root(&mut parent, keep), root(&mut parent, absorb));
            parent[b] = a;
        }
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let mut cluster_of = Vec::with_capacity(n);
        for i in 0..n {
            let r = root(&mut parent, i);
            let next = ids.len();
            cluster_of.push(*ids.entry(r).or_insert(next));
        }

        let mut members = vec![Vec::new(); k];
        for (i, &c) in cluster_of.iter().enumerate() {
            members[c].push(i);
        }
        let mut representatives = Vec::with_capacity(k);
        for group in &members {
            let mut best = (f64::INFINITY, group[0]);
            for &cand in group {
                let mut total = 0.0;
                for &other in group {
                    total += distance(&self.solutions[cand], &self.solutions[other], self.measure)?;
                }
                if total < best.0 {
                    best = (total, cand);
                }
            }
            representatives.push(self.solutions[best.1].clone());
        }
        Ok(PartitionResult::assemble(
            self.solutions.clone(),
            cluster_of,
            representatives,
        ))
    }
}

/// Reachable cluster counts for these solutions under the given limits.
pub fn cluster_limits(
    solutions: &[SolutionPoint],
    config: &PartitionConfig,
) -> Result<ClusterLimits, PartitionError> {
    config.validate()?;
    Ok(Hierarchy::build(
        solutions,
        config.cluster_size_pct,
        config.volume_size_pct,
        config.measure,
    )?
    .limits())
}

pub fn partition(
    solutions: &[SolutionPoint],
    config: &PartitionConfig,
) -> Result<PartitionResult, PartitionError> {
    config.validate()?;
    Hierarchy::build(
        solutions,
        config.cluster_size_pct,
        config.volume_size_pct,
        config.measure,
    )?
    .cut(config.cluster_number)
}

/// Per-cluster size and volume percentages, in cluster id order.
pub fn cluster_shares(result: &PartitionResult) -> Vec<(f64, f64)> {
    if result.solutions.is_empty() {
        return Vec::new();
    }
    let spans: Vec<Span> = result.solutions.iter().map(Span::of).collect();
    let whole = spans
        .iter()
        .skip(1)
        .fold(spans[0].clone(), |acc, s| acc.union(s));
    let n = result.solutions.len() as f64;
    result
        .members()
        .iter()
        .map(|group| {
            let span = group
                .iter()
                .skip(1)
                .fold(spans[group[0]].clone(), |acc, &i| acc.union(&spans[i]));
            (group.len() as f64 / n * 100.0, span.volume_pct(&whole))
        })
        .collect()
}
