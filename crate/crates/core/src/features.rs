//! Per-algorithm features fed into the winner-determination prompt.
//!
//! * total best global fitness: trajectories whose best fitness equals the
//!   best fitness over all algorithms;
//! * connectivity: fraction of trajectory pairs of the same algorithm that
//!   share at least one STN location;
//! * average fitness: mean of the trajectory bests (or, optionally, of the
//!   final step of every trajectory).

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::stn::Stn;
use crate::trajectory::{fitness_eq, AlgorithmRuns, Dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmFeatures {
    pub algorithm: String,
    pub total_best_global_fitness: usize,
    pub connectivity: f64,
    pub avg_fitness: f64,
    pub trajectory_count: usize,
    /// Best trajectory fitness of the algorithm.
    pub best_fitness: f64,
}

/// Which per-trajectory value the average fitness is taken over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessSource {
    #[default]
    Best,
    Final,
}

pub fn total_best_global_fitness(algo: &AlgorithmRuns, best_global: f64) -> usize {
    algo.trajectories
        .iter()
        .filter(|t| fitness_eq(t.best_fitness, best_global))
        .count()
}

/// Overlapping pairs over all pairs. A single trajectory yields 0.
pub fn connectivity<T: Eq + Hash>(location_sets: &[HashSet<T>]) -> f64 {
    let m = location_sets.len();
    if m < 2 {
        return 0.0;
    }
    let mut overlapping = 0usize;
    for i in 0..m {
        for j in (i + 1)..m {
            let (small, large) = if location_sets[i].len() <= location_sets[j].len() {
                (&location_sets[i], &location_sets[j])
            } else {
                (&location_sets[j], &location_sets[i])
            };
            if small.iter().any(|l| large.contains(l)) {
                overlapping += 1;
            }
        }
    }
    overlapping as f64 / (m * (m - 1) / 2) as f64
}

pub fn avg_fitness(algo: &AlgorithmRuns, source: FitnessSource) -> f64 {
    let total: f64 = algo
        .trajectories
        .iter()
        .map(|t| match source {
            FitnessSource::Best => t.best_fitness,
            FitnessSource::Final => t.final_fitness,
        })
        .sum();
    total / algo.trajectories.len() as f64
}

/// Features of every algorithm, in dataset order. `stn` must come from `dataset`.
pub fn extract_all(dataset: &Dataset, stn: &Stn, source: FitnessSource) -> Vec<AlgorithmFeatures> {
    let best_global = stn.best_global_fitness;
    dataset
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, algo)| AlgorithmFeatures {
            algorithm: algo.name.clone(),
            total_best_global_fitness: total_best_global_fitness(algo, best_global),
            connectivity: connectivity(&stn.location_sets(a)),
            avg_fitness: avg_fitness(algo, source),
            trajectory_count: algo.trajectories.len(),
            best_fitness: algo.best_fitness(dataset.sense),
        })
        .collect()
}

/// Rounding used when features are written into prompt text.
pub fn format_connectivity(c: f64) -> String {
    format!("{c:.2}")
}

pub fn format_fitness(f: f64) -> String {
    format!("{f:.3}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Sense, SolutionPoint, Step, Trajectory};

    fn runs(bests: &[f64]) -> AlgorithmRuns {
        AlgorithmRuns {
            name: "a".into(),
            trajectories: bests
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    Trajectory::new(
                        i as u32 + 1,
                        vec![
                            Step {
                                fitness: b + 10.0,
                                solution: SolutionPoint::Discrete("x".into()),
                            },
                            Step {
                                fitness: b,
                                solution: SolutionPoint::Discrete("y".into()),
                            },
                        ],
                        Sense::Minimize,
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn eq1_tolerance_count() {
        let a = runs(&[3.0, 5.0, 3.0 + 1e-12]);
        assert_eq!(total_best_global_fitness(&a, 3.0), 2);
    }

    #[test]
    fn eq1_all_attain() {
        assert_eq!(total_best_global_fitness(&runs(&[1.5; 6]), 1.5), 6);
    }

    #[test]
    fn avg_of_bests() {
        assert_eq!(avg_fitness(&runs(&[1.0, 2.0, 3.0, 4.0]), FitnessSource::Best), 2.5);
        assert_eq!(avg_fitness(&runs(&[7.25; 3]), FitnessSource::Best), 7.25);
    }

    #[test]
    fn avg_of_final_steps() {
        let mut a = runs(&[1.0, 2.0]);
        a.trajectories[0].steps.push(Step {
            fitness: 9.0,
            solution: SolutionPoint::Discrete("z".into()),
        });
        a.trajectories[0] = Trajectory::new(1, a.trajectories[0].steps.clone(), Sense::Minimize);
        assert_eq!(avg_fitness(&a, FitnessSource::Final), 5.5);
        assert_eq!(avg_fitness(&a, FitnessSource::Best), 1.5);
    }

    #[test]
    fn connectivity_conventions() {
        let one: Vec<HashSet<u32>> = vec![[1, 2].into()];
        assert_eq!(connectivity(&one), 0.0);
        let common: Vec<HashSet<u32>> = (0..5).map(|i| [0, i + 10].into()).collect();
        assert_eq!(connectivity(&common), 1.0);
        let disjoint: Vec<HashSet<u32>> = (0..5).map(|i| [i].into()).collect();
        assert_eq!(connectivity(&disjoint), 0.0);
    }

    #[test]
    fn twenty_eight_of_forty_five() {
        // Trajectories 0..7 meet at location 100 (21 pairs), trajectory 7
        // meets 0..6 at 200 (6 pairs), 8 and 9 meet at 300 (1 pair).
        let mut sets: Vec<HashSet<u32>> = (0..10).map(|i| [i].into()).collect();
        for s in sets.iter_mut().take(7) {
            s.insert(100);
        }
        for s in sets.iter_mut().take(6) {
            s.insert(200);
        }
        sets[7].insert(200);
        sets[8].insert(300);
        sets[9].insert(300);
        let c = connectivity(&sets);
        assert_eq!(c, 28.0 / 45.0);
        assert_eq!(format_connectivity(c), "0.62");
    }

    #[test]
    fn rounding() {
        assert_eq!(format_fitness(78.081), "78.081");
        assert_eq!(format_fitness(780.81 / 10.0), "78.081");
        assert_eq!(format_connectivity(1.0), "1.00");
    }
}
