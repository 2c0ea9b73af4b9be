//! DE/best/1/bin differential evolution over a box.
//!
//! Random draws come from one seeded ChaCha8 stream in a fixed order:
//!
//! 1. initialisation: individual by individual, coordinates in order;
//! 2. per generation, per target index `j` in order: `r1`, `r2` (rejection
//!    sampled), then `j_rand`, then one uniform per coordinate for crossover.
//!
//! All trial vectors of a generation are built from the generation-G
//! population before any fitness is evaluated, so evaluations can run in
//! parallel without changing results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_POPULATION_SIZE: usize = 15;
pub const DEFAULT_MAX_GENERATIONS: usize = 100;
pub const DEFAULT_SCALE_FACTOR: f64 = 0.5;
pub const DEFAULT_CROSSOVER_RATE: f64 = 0.9;

/// Smallest population that can supply a best vector plus two distinct others.
pub const MIN_POPULATION_SIZE: usize = 4;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let bounds = Self { lower, upper };
        bounds.validate()?;
        Ok(bounds)
    }

    /// `[lo, hi]^dimension`.
    pub fn uniform(dimension: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dimension], vec![hi; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::InvalidConfig(format!(
                "lower bound has {} coordinates, upper bound has {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.lower.is_empty() {
            return Err(Error::InvalidConfig(
                "search space needs at least one dimension".into(),
            ));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "bounds for coordinate {i} must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub bounds: Bounds,
    pub population_size: usize,
    /// Mutation scale F in [0, 1].
    pub scale_factor: f64,
    /// Binomial crossover probability CPr in [0, 1].
    pub crossover_rate: f64,
    pub max_generations: usize,
    pub seed: u64,
}

impl DeConfig {
    /// Default settings (NP 15, F 0.5, CPr 0.9, 100 generations, seed 0) over `bounds`.
    pub fn new(bounds: Bounds) -> Self {
        Self {
            bounds,
            population_size: DEFAULT_POPULATION_SIZE,
            scale_factor: DEFAULT_SCALE_FACTOR,
            crossover_rate: DEFAULT_CROSSOVER_RATE,
            max_generations: DEFAULT_MAX_GENERATIONS,
            seed: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.population_size < MIN_POPULATION_SIZE {
            return Err(Error::InvalidConfig(format!(
                "population size must be at least {MIN_POPULATION_SIZE}, got {}",
                self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.scale_factor) {
            return Err(Error::InvalidConfig(format!(
                "scale factor must lie in [0, 1], got {}",
                self.scale_factor
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::InvalidConfig(format!(
                "crossover rate must lie in [0, 1], got {}",
                self.crossover_rate
            )));
        }
        if self.max_generations == 0 {
            return Err(Error::InvalidConfig(
                "max_generations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    pub generation: usize,
    pub population: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
    pub best_index: usize,
}

impl DeState {
    pub fn best(&self) -> &[f64] {
        &self.population[self.best_index]
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness[self.best_index]
    }

    fn record(&self) -> GenerationRecord {
        GenerationRecord {
            generation: self.generation,
            best_fitness: self.best_fitness(),
            best_vector: self.best().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub best_vector: Vec<f64>,
}

/// Best-so-far record per generation, generation 0 first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeHistory {
    pub records: Vec<GenerationRecord>,
}

impl DeHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_fitness(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.best_fitness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub history: DeHistory,
}

/// A mutant vector together with the difference-pair indices that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mutant {
    pub vector: Vec<f64>,
    pub r1: usize,
    pub r2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Survivor {
    Target,
    Trial,
}

fn checked(value: f64, point: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteFitness {
            value,
            point: point.to_vec(),
        })
    }
}

fn evaluate_all<F>(objective: &F, points: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    points
        .par_iter()
        .map(|x| checked(objective(x), x))
        .collect()
}

/// Index of the lowest fitness; the earliest index wins ties.
fn argmin(fitness: &[f64]) -> usize {
    fitness
        .iter()
        .enumerate()
        .fold(0, |best, (i, &f)| if f < fitness[best] { i } else { best })
}

/// Draws the initial population uniformly inside the box and evaluates it.
pub fn init_population<F, R>(config: &DeConfig, objective: &F, rng: &mut R) -> Result<DeState>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    config.validate()?;
    let Bounds { lower, upper } = &config.bounds;
    let population: Vec<Vec<f64>> = (0..config.population_size)
        .map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect()
        })
        .collect();
    let fitness = evaluate_all(objective, &population)?;
    let best_index = argmin(&fitness);
    Ok(DeState {
        generation: 0,
        population,
        fitness,
        best_index,
    })
}

/// `x_best + F (x_r1 − x_r2)` with `r1`, `r2` and the best index pairwise
/// distinct, clipped into the box.
///
/// `r1` or `r2` may coincide with the target index.
pub fn mutate<R>(state: &DeState, scale_factor: f64, bounds: &Bounds, rng: &mut R) -> Mutant
where
    R: Rng + ?Sized,
{
    let np = state.population.len();
    let best = state.best_index;
    let r1 = loop {
        let r = rng.random_range(0..np);
        if r != best {
            break r;
        }
    };
    let r2 = loop {
        let r = rng.random_range(0..np);
        if r != best && r != r1 {
            break r;
        }
    };
    let (xb, x1, x2) = (
        &state.population[best],
        &state.population[r1],
        &state.population[r2],
    );
    let mut vector: Vec<f64> = xb
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(b, (a, c))| b + scale_factor * (a - c))
        .collect();
    bounds.clip(&mut vector);
    Mutant { vector, r1, r2 }
}

/// Binomial crossover. Coordinate `j_rand` always comes from the mutant; any
/// other coordinate does when its uniform draw falls below `crossover_rate`.
/// One uniform is drawn per coordinate, including `j_rand`.
pub fn crossover<R>(target: &[f64], mutant: &[f64], crossover_rate: f64, rng: &mut R) -> Vec<f64>
where
    R: Rng + ?Sized,
{
    assert_eq!(
        target.len(),
        mutant.len(),
        "target and mutant differ in length"
    );
    let j_rand = rng.random_range(0..target.len());
    target
        .iter()
        .zip(mutant)
        .enumerate()
        .map(|(i, (&t, &m))| {
            let u = rng.random::<f64>();
            if i == j_rand || u < crossover_rate {
                m
            } else {
                t
            }
        })
        .collect()
}

/// Greedy selection; a tie keeps the trial.
pub fn select(target_fitness: f64, trial_fitness: f64) -> Result<Survivor> {
    for value in [target_fitness, trial_fitness] {
        if !value.is_finite() {
            return Err(Error::NonFiniteFitness {
                value,
                point: Vec::new(),
            });
        }
    }
    Ok(if trial_fitness <= target_fitness {
        Survivor::Trial
    } else {
        Survivor::Target
    })
}

/// Advances one generation: builds every trial from the current population,
/// evaluates them, then replaces targets that lost.
pub fn next_generation<F, R>(
    state: &DeState,
    config: &DeConfig,
    objective: &F,
    rng: &mut R,
) -> Result<DeState>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let trials: Vec<Vec<f64>> = state
        .population
        .iter()
        .map(|target| {
            let mutant = mutate(state, config.scale_factor, &config.bounds, rng);
            crossover(target, &mutant.vector, config.crossover_rate, rng)
        })
        .collect();
    let trial_fitness = evaluate_all(objective, &trials)?;

    let mut population = state.population.clone();
    let mut fitness = state.fitness.clone();
    for (j, (trial, trial_fit)) in trials.into_iter().zip(trial_fitness).enumerate() {
        if select(fitness[j], trial_fit)? == Survivor::Trial {
            population[j] = trial;
            fitness[j] = trial_fit;
        }
    }
    let best_index = argmin(&fitness);
    Ok(DeState {
        generation: state.generation + 1,
        population,
        fitness,
        best_index,
    })
}

/// Minimises `objective` over the configured box for `max_generations`
/// generations. The history holds `max_generations + 1` records.
pub fn optimize<F>(objective: F, config: &DeConfig) -> Result<DeOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = init_population(config, &objective, &mut rng)?;
    let mut history = DeHistory {
        records: Vec::with_capacity(config.max_generations + 1),
    };
    history.records.push(state.record());
    for _ in 0..config.max_generations {
        state = next_generation(&state, config, &objective, &mut rng)?;
        history.records.push(state.record());
    }
    Ok(DeOutcome {
        best: state.best().to_vec(),
        best_fitness: state.best_fitness(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn unit_config(dim: usize) -> DeConfig {
        DeConfig::new(Bounds::uniform(dim, 0.0, 1.0).unwrap())
    }

    fn fixed_state(population: Vec<Vec<f64>>, best_index: usize) -> DeState {
        let fitness = population.iter().map(|x| sphere(x)).collect();
        DeState {
            generation: 0,
            population,
            fitness,
            best_index,
        }
    }

    #[test]
    fn init_respects_bounds_and_seed() {
        let config = unit_config(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = init_population(&config, &sphere, &mut rng).unwrap();
        assert_eq!(state.population.len(), 15);
        assert!(state.population.iter().all(|x| config.bounds.contains(x)));
        assert_eq!(
            state.best_fitness(),
            state.fitness.iter().cloned().fold(f64::INFINITY, f64::min)
        );
        let mut again = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(
            init_population(&config, &sphere, &mut again).unwrap(),
            state
        );
    }

    #[test]
    fn config_validation() {
        assert!(Bounds::new(vec![1.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Bounds::new(vec![], vec![]).is_err());
        let mut c = unit_config(2);
        c.population_size = 3;
        assert!(c.validate().is_err());
        let mut c = unit_config(2);
        c.scale_factor = 1.5;
        assert!(c.validate().is_err());
        let mut c = unit_config(2);
        c.crossover_rate = -0.1;
        assert!(c.validate().is_err());
        let mut c = unit_config(2);
        c.max_generations = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mutation_arithmetic() {
        let pop = vec![
            vec![0.5, 0.5, 0.5],
            vec![0.6, 0.4, 0.5],
            vec![0.4, 0.6, 0.5],
            vec![0.9, 0.9, 0.9],
        ];
        let state = fixed_state(pop, 0);
        let bounds = Bounds::uniform(3, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = 0;
        for _ in 0..200 {
            let m = mutate(&state, 0.5, &bounds, &mut rng);
            let expected = match (m.r1, m.r2) {
                (1, 2) => [0.6, 0.4, 0.5],
                (2, 1) => [0.4, 0.6, 0.5],
                _ => continue,
            };
            hits += 1;
            for (a, b) in m.vector.iter().zip(expected) {
                assert!((a - b).abs() < 1e-15, "{:?}", m.vector);
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn zero_scale_returns_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let config = unit_config(4);
        let state = init_population(&config, &sphere, &mut rng).unwrap();
        let m = mutate(&state, 0.0, &config.bounds, &mut rng);
        assert_eq!(m.vector, state.best());
    }

    #[test]
    fn mutant_is_clipped() {
        let pop = vec![vec![0.9], vec![1.0], vec![0.2], vec![1.0]];
        let state = fixed_state(pop, 0);
        let bounds = Bounds::uniform(1, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let m = mutate(&state, 0.5, &bounds, &mut rng);
            // r1=1, r2=2 gives 0.9 + 0.5*0.8 = 1.3 before clipping
            if (m.r1, m.r2) == (1, 2) {
                assert_eq!(m.vector, vec![1.0]);
            }
            assert!(bounds.contains(&m.vector));
        }
    }

    #[test]
    fn mutation_indices_are_distinct() {
        let config = unit_config(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut state = init_population(&config, &sphere, &mut rng).unwrap();
        for best in 0..config.population_size {
            state.best_index = best;
            for _ in 0..200 {
                let m = mutate(&state, 0.5, &config.bounds, &mut rng);
                assert_ne!(m.r1, m.r2);
                assert_ne!(m.r1, best);
                assert_ne!(m.r2, best);
            }
        }
    }

    #[test]
    fn crossover_extremes() {
        let target = [0.0; 5];
        let mutant = [1.0; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(crossover(&target, &mutant, 1.0, &mut rng), mutant);
            let trial = crossover(&target, &mutant, 0.0, &mut rng);
            assert_eq!(trial.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(crossover(&[0.3], &[0.7], 0.0, &mut rng), vec![0.7]);
        }
    }

    #[test]
    fn selection_rule() {
        assert_eq!(select(0.5, 0.3).unwrap(), Survivor::Trial);
        assert_eq!(select(0.3, 0.5).unwrap(), Survivor::Target);
        assert_eq!(select(0.4, 0.4).unwrap(), Survivor::Trial);
        assert!(select(f64::NAN, 0.1).is_err());
        assert!(select(0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn sphere_converges() {
        let mut config = DeConfig::new(Bounds::uniform(3, -5.0, 5.0).unwrap());
        config.seed = 42;
        let out = optimize(sphere, &config).unwrap();
        assert!(out.best_fitness <= 1e-3, "{}", out.best_fitness);
        assert_eq!(out.history.len(), 101);
    }

    #[test]
    fn constant_objective_is_flat() {
        let config = unit_config(3);
        let out = optimize(|_: &[f64]| 2.5, &config).unwrap();
        assert_eq!(out.best_fitness, 2.5);
        assert!(out.history.best_fitness().all(|f| f == 2.5));
    }

    #[test]
    fn repeat_runs_are_identical() {
        let mut config = DeConfig::new(Bounds::uniform(3, -5.0, 5.0).unwrap());
        config.seed = 9;
        let a = optimize(sphere, &config).unwrap();
        let b = optimize(sphere, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_candidate_is_feasible() {
        let mut config = DeConfig::new(Bounds::new(vec![-1.0, 2.0], vec![0.5, 3.0]).unwrap());
        config.scale_factor = 1.0;
        config.max_generations = 30;
        let seen = Mutex::new(Vec::new());
        let bounds = config.bounds.clone();
        optimize(
            |x: &[f64]| {
                seen.lock().unwrap().push(x.to_vec());
                (x[0] - 3.0).powi(2) + x[1]
            },
            &config,
        )
        .unwrap();
        let seen = seen.into_inner().unwrap();
        assert_eq!(seen.len(), 15 * 31);
        assert!(seen.iter().all(|x| bounds.contains(x)));
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let config = unit_config(2);
        let err =
            optimize(|x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 0.0 }, &config).unwrap_err();
        assert!(matches!(err, Error::NonFiniteFitness { .. }));
    }
}
