//! Seeded random trajectory datasets for tests, benchmarks and demos.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::trajectory::{AlgorithmRuns, Dataset, Sense, SolutionPoint, SpaceKind, Step, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub algorithms: usize,
    pub max_trajectories: usize,
    pub max_steps: usize,
    pub dimension: usize,
    /// Coordinates are drawn from `0..grid` so that trajectories meet.
    pub grid: u32,
    pub sense: Sense,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            algorithms: 2,
            max_trajectories: 10,
            max_steps: 50,
            dimension: 2,
            grid: 6,
            sense: Sense::Minimize,
        }
    }
}

/// A continuous dataset on an integer grid with integer-valued fitness.
pub fn random_dataset(seed: u64, spec: &SyntheticSpec) -> Dataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let algorithms = (0..spec.algorithms.max(1))
        .map(|a| {
            let runs = rng.gen_range(1..=spec.max_trajectories.max(1));
            let trajectories = (0..runs)
                .map(|r| {
                    let len = rng.gen_range(1..=spec.max_steps.max(1));
                    let steps = (0..len)
                        .map(|_| {
                            let point: Vec<f64> = (0..spec.dimension.max(1))
                                .map(|_| rng.gen_range(0..spec.grid.max(1)) as f64)
                                .collect();
                            // Fitness is a function of the point, so revisits agree.
                            let fitness = point.iter().map(|x| x * x).sum::<f64>();
                            Step {
                                fitness,
                                solution: SolutionPoint::Continuous(point),
                            }
                        })
                        .collect();
                    Trajectory::new(r as u32 + 1, steps, spec.sense)
                })
                .collect();
            AlgorithmRuns {
                name: format!("algo_{}", a + 1),
                trajectories,
            }
        })
        .collect();
    Dataset::new(algorithms, spec.sense, SpaceKind::Continuous).expect("generated dataset is consistent")
}

/// `n` random continuous points with `dim` coordinates in `[0, 1)`.
pub fn random_points(seed: u64, n: usize, dim: usize) -> Vec<SolutionPoint> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| SolutionPoint::Continuous((0..dim).map(|_| rng.gen::<f64>()).collect()))
        .collect()
}
