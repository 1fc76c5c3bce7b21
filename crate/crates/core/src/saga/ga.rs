//! The generational loop.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::operators::{adaptive_probability, crossover, finite_fitness, mutation, selection};
use super::space::{ParameterCombination, ParameterSpace};
use crate::seed::{rng_for, tag};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SagaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub pc_min: f64,
    pub pc_max: f64,
    pub pm_min: f64,
    pub pm_max: f64,
    pub accuracy_threshold: f64,
    pub seed: u64,
}

impl Default for SagaConfig {
    fn default() -> Self {
        SagaConfig {
            population_size: 20,
            max_generations: 15,
            pc_min: 0.6,
            pc_max: 0.9,
            pm_min: 0.05,
            pm_max: 0.25,
            accuracy_threshold: 0.8,
            seed: 0,
        }
    }
}

impl SagaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !(unit(self.pc_min) && unit(self.pc_max) && self.pc_min < self.pc_max) {
            return Err(Error::Config(format!(
                "crossover bounds [{}, {}] must satisfy 0 < min < max <= 1",
                self.pc_min, self.pc_max
            )));
        }
        if !(unit(self.pm_min) && unit(self.pm_max) && self.pm_min < self.pm_max) {
            return Err(Error::Config(format!(
                "mutation bounds [{}, {}] must satisfy 0 < min < max <= 1",
                self.pm_min, self.pm_max
            )));
        }
        if self.population_size < 4 || self.population_size % 2 == 1 {
            return Err(Error::Config(format!(
                "population size {} must be even and at least 4",
                self.population_size
            )));
        }
        if self.accuracy_threshold.is_nan() {
            return Err(Error::Config("accuracy threshold is NaN".into()));
        }
        Ok(())
    }
}

/// What happened to one mating pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub f_pair: f64,
    pub pc: f64,
    pub crossed: bool,
    pub pm: f64,
    pub mutated: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub population: Vec<ParameterCombination>,
    #[serde(with = "crate::score::vec")]
    pub accuracies: Vec<f64>,
    pub f_max_cur: f64,
    pub f_avg_cur: f64,
    #[serde(with = "crate::score")]
    pub best_so_far: f64,
    /// Breeding that produced the next generation; empty for the last one.
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SagaResult {
    pub best: ParameterCombination,
    #[serde(with = "crate::score")]
    pub f_max: f64,
    pub history: Vec<GenerationRecord>,
    /// Distinct combinations passed to the objective.
    pub evaluations: usize,
}

fn key(v: &ParameterCombination) -> Vec<u64> {
    v.values.iter().map(|(_, x)| x.to_bits()).collect()
}

/// Maximises `objective` over `space`.
///
/// The first population is `seeds` (in order, truncated to the population
/// size) filled up with uniform draws. Each generation is evaluated, the
/// best individual ever seen is kept, and the loop stops once that best
/// exceeds the threshold or `max_generations` breeding rounds have run.
/// Identical combinations are evaluated once. An objective error scores the
/// individual as `-inf`.
pub fn run_saga<F>(
    objective: F,
    space: &ParameterSpace,
    cfg: &SagaConfig,
    seeds: &[ParameterCombination],
) -> Result<SagaResult>
where
    F: Fn(&ParameterCombination) -> Result<f64> + Sync,
{
    cfg.validate()?;
    space.validate()?;
    let n = cfg.population_size;
    let mut population = Vec::with_capacity(n);
    for s in seeds.iter().take(n) {
        let c = space.combination(space.vector(s)?);
        if !space.contains(&c) {
            return Err(Error::Config(format!("seed individual {:?} lies outside the space", s.values)));
        }
        population.push(c);
    }
    let mut rng = rng_for(cfg.seed, &[tag::SAGA_INIT]);
    while population.len() < n {
        population.push(space.random(&mut rng));
    }

    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut history = Vec::new();
    let mut best: Option<(ParameterCombination, f64)> = None;
    let mut generation = 0;
    loop {
        let mut fresh: Vec<&ParameterCombination> = Vec::new();
        for c in &population {
            if !memo.contains_key(&key(c)) && !fresh.iter().any(|f| key(f) == key(c)) {
                fresh.push(c);
            }
        }
        let scored: Vec<f64> = fresh
            .par_iter()
            .map(|c| {
                objective(c).unwrap_or_else(|e| {
                    warn!(generation, error = %e, "objective failed; scoring -inf");
                    f64::NEG_INFINITY
                })
            })
            .collect();
        for (c, a) in fresh.iter().zip(scored) {
            memo.insert(key(c), a);
        }
        let accuracies: Vec<f64> = population.iter().map(|c| memo[&key(c)]).collect();

        for (c, &a) in population.iter().zip(&accuracies) {
            if best.as_ref().is_none_or(|(_, b)| a > *b) {
                best = Some((c.clone(), a));
            }
        }
        let fitness = finite_fitness(&accuracies);
        let f_max_cur = fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f_avg_cur = fitness.iter().sum::<f64>() / n as f64;
        let best_so_far = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
        debug!(generation, f_max_cur, f_avg_cur, best_so_far, "generation evaluated");
        let mut record = GenerationRecord {
            generation,
            population: population.clone(),
            accuracies: accuracies.clone(),
            f_max_cur,
            f_avg_cur,
            best_so_far,
            pairs: Vec::new(),
        };
        if best_so_far > cfg.accuracy_threshold || generation >= cfg.max_generations {
            history.push(record);
            break;
        }

        generation += 1;
        let mut rng = rng_for(cfg.seed, &[tag::SAGA_GENERATION, generation as u64]);
        let pool = selection(&population, &accuracies, &mut rng)?;
        let pool_fitness: Vec<f64> = pool.iter().map(|c| fitness[position(&population, c)]).collect();
        let mut next = Vec::with_capacity(n);
        for (pair, f) in pool.chunks(2).zip(pool_fitness.chunks(2)) {
            let f_pair = (f[0] + f[1]) / 2.0;
            let pc = adaptive_probability(f_pair, f_max_cur, f_avg_cur, cfg.pc_min, cfg.pc_max);
            let pm = adaptive_probability(f_pair, f_max_cur, f_avg_cur, cfg.pm_min, cfg.pm_max);
            let crossed = rng.random::<f64>() < pc;
            let (mut c1, mut c2) = if crossed {
                crossover(&pair[0], &pair[1], &mut rng)
            } else {
                (pair[0].clone(), pair[1].clone())
            };
            let mut mutated = [false; 2];
            for (child, flag) in [&mut c1, &mut c2].into_iter().zip(&mut mutated) {
                if rng.random::<f64>() < pm {
                    *child = mutation(child, space, &mut rng)?;
                    *flag = true;
                }
            }
            record.pairs.push(PairRecord {
                f_pair,
                pc,
                crossed,
                pm,
                mutated,
            });
            next.push(c1);
            next.push(c2);
        }
        history.push(record);
        population = next;
    }

    let (best, f_max) = best.expect("population is never empty");
    Ok(SagaResult {
        best,
        f_max,
        history,
        evaluations: memo.len(),
    })
}

fn position(population: &[ParameterCombination], c: &ParameterCombination) -> usize {
    population.iter().position(|p| p == c).expect("pool members come from the population")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saga::ParameterBounds;

    fn space(n: usize) -> ParameterSpace {
        ParameterSpace::new(
            (0..n)
                .map(|i| ParameterBounds {
                    id: format!("x{i}"),
                    lower: 0.0,
                    upper: 1.0,
                    initial: 0.5,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stops_immediately_when_threshold_is_trivial() {
        let cfg = SagaConfig {
            accuracy_threshold: f64::NEG_INFINITY,
            ..SagaConfig::default()
        };
        let r = run_saga(|_| Ok(0.0), &space(3), &cfg, &[]).unwrap();
        assert_eq!(r.history.len(), 1);
        assert!(r.history[0].pairs.is_empty());
    }

    #[test]
    fn runs_all_generations_and_stays_in_bounds() {
        let cfg = SagaConfig {
            accuracy_threshold: 2.0,
            max_generations: 5,
            ..SagaConfig::default()
        };
        let s = space(3);
        let r = run_saga(|c| Ok(-c.values.iter().map(|v| v.1).sum::<f64>()), &s, &cfg, &[]).unwrap();
        assert_eq!(r.history.len(), 6);
        for g in &r.history {
            assert_eq!(g.population.len(), cfg.population_size);
            assert!(g.population.iter().all(|c| s.contains(c)));
            assert!(g.f_max_cur >= g.f_avg_cur);
        }
        assert!(r.history.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
        assert!(r.evaluations <= cfg.population_size * (cfg.max_generations + 1));
    }

    #[test]
    fn failing_objective_scores_negative_infinity() {
        let cfg = SagaConfig {
            max_generations: 2,
            ..SagaConfig::default()
        };
        let r = run_saga(
            |c| {
                if c.values[0].1 > 0.5 {
                    Err(Error::Infeasible("gridlock".into()))
                } else {
                    Ok(0.1)
                }
            },
            &space(2),
            &cfg,
            &[],
        )
        .unwrap();
        assert_eq!(r.f_max, 0.1);
        assert!(r.history[0].accuracies.contains(&f64::NEG_INFINITY));
    }

    #[test]
    fn seeds_lead_the_first_population() {
        let s = space(2);
        let mut seed = s.initial();
        seed.set("x1", 0.25);
        let cfg = SagaConfig {
            max_generations: 0,
            ..SagaConfig::default()
        };
        let r = run_saga(|_| Ok(0.0), &s, &cfg, std::slice::from_ref(&seed)).unwrap();
        assert_eq!(r.history[0].population[0], seed);
    }
}
