//! Selection, crossover, mutation and the fitness-adaptive probabilities.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;

use super::space::{ParameterCombination, ParameterSpace};
use crate::{Error, Result};

/// Added on top of the shift that lifts the weakest individual to zero, so
/// it keeps a small chance of being drawn.
const FITNESS_FLOOR: f64 = 1e-6;

/// Roulette-wheel probabilities. Accuracy may be negative, so when the
/// minimum is not positive all values are shifted up by `-min + floor`.
/// Non-finite accuracies count as the worst finite one.
pub fn selection_probabilities(accuracies: &[f64]) -> Result<Vec<f64>> {
    if accuracies.is_empty() {
        return Err(Error::Degenerate("selection from an empty population".into()));
    }
    let f = finite_fitness(accuracies);
    let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = if min <= 0.0 { FITNESS_FLOOR - min } else { 0.0 };
    let w: Vec<f64> = f.iter().map(|x| x + shift).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate(format!("total fitness {total} cannot be normalised")));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Replaces non-finite values by the smallest finite one (0 if none).
pub(crate) fn finite_fitness(accuracies: &[f64]) -> Vec<f64> {
    let worst = accuracies
        .iter()
        .filter(|a| a.is_finite())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    accuracies.iter().map(|&a| if a.is_finite() { a } else { worst }).collect()
}

/// Draws a mating pool of the same size as `population`, with replacement.
pub fn selection<R: Rng + ?Sized>(
    population: &[ParameterCombination],
    accuracies: &[f64],
    rng: &mut R,
) -> Result<Vec<ParameterCombination>> {
    if population.len() != accuracies.len() {
        return Err(Error::SizeMismatch(format!(
            "{} individuals but {} accuracies",
            population.len(),
            accuracies.len()
        )));
    }
    let probs = selection_probabilities(accuracies)?;
    let wheel = WeightedIndex::new(&probs).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok((0..population.len()).map(|_| population[wheel.sample(rng)].clone()).collect())
}

/// Probability for a pair with mean fitness `f_pair`: `p_max` at or below
/// the generation average, falling linearly to `p_min` at the generation
/// maximum. A uniform generation (max = avg) gets `p_max`.
pub fn adaptive_probability(f_pair: f64, f_max_cur: f64, f_avg_cur: f64, p_min: f64, p_max: f64) -> f64 {
    let spread = f_max_cur - f_avg_cur;
    if f_pair <= f_avg_cur || spread <= 0.0 {
        return p_max;
    }
    let p = p_max - (p_max - p_min) * (f_pair - f_avg_cur) / spread;
    p.clamp(p_min, p_max)
}

/// Single-point crossover: genes before `cut` stay, the rest swap.
pub fn crossover_at(
    pa: &ParameterCombination,
    pb: &ParameterCombination,
    cut: usize,
) -> (ParameterCombination, ParameterCombination) {
    let mut c1 = pa.clone();
    let mut c2 = pb.clone();
    for i in cut.min(pa.len())..pa.len() {
        std::mem::swap(&mut c1.values[i].1, &mut c2.values[i].1);
    }
    (c1, c2)
}

/// Crossover with a uniformly drawn interior cut. A one-parameter pair has
/// no interior cut and is copied.
pub fn crossover<R: Rng + ?Sized>(
    pa: &ParameterCombination,
    pb: &ParameterCombination,
    rng: &mut R,
) -> (ParameterCombination, ParameterCombination) {
    if pa.len() < 2 {
        return (pa.clone(), pb.clone());
    }
    crossover_at(pa, pb, rng.random_range(1..pa.len()))
}

/// Resamples two distinct parameters uniformly within their bounds (one if
/// the space has a single parameter).
pub fn mutation<R: Rng + ?Sized>(
    c: &ParameterCombination,
    space: &ParameterSpace,
    rng: &mut R,
) -> Result<ParameterCombination> {
    let mut values = space.vector(c)?;
    let n = values.len();
    for i in index::sample(rng, n, n.min(2)) {
        let p = &space.entries[i];
        values[i] = rng.random_range(p.lower..=p.upper);
    }
    Ok(space.combination(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saga::ParameterBounds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn combo(v: &[f64]) -> ParameterCombination {
        ParameterCombination {
            values: v.iter().enumerate().map(|(i, &x)| (format!("p{i}"), x)).collect(),
        }
    }

    #[test]
    fn probabilities_follow_fitness() {
        let p = selection_probabilities(&[0.2, 0.3, 0.5]).unwrap();
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let u = selection_probabilities(&[-0.4; 4]).unwrap();
        assert!(u.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        let n = selection_probabilities(&[0.5, f64::NEG_INFINITY, -0.5]).unwrap();
        assert!(n[0] > n[1] && (n[1] - n[2]).abs() < 1e-15);
    }

    #[test]
    fn adaptive_bounds() {
        assert_eq!(adaptive_probability(0.3, 0.9, 0.5, 0.6, 0.9), 0.9);
        assert!((adaptive_probability(0.9, 0.9, 0.5, 0.6, 0.9) - 0.6).abs() < 1e-12);
        assert!((adaptive_probability(0.7, 0.9, 0.5, 0.6, 0.9) - 0.75).abs() < 1e-12);
        assert_eq!(adaptive_probability(0.5, 0.5, 0.5, 0.6, 0.9), 0.9);
    }

    #[test]
    fn cut_after_first() {
        let (c1, c2) = crossover_at(&combo(&[1.0, 2.0, 3.0]), &combo(&[4.0, 5.0, 6.0]), 1);
        assert_eq!(c1, combo(&[1.0, 5.0, 6.0]));
        assert_eq!(c2, combo(&[4.0, 2.0, 3.0]));
    }

    #[test]
    fn mutation_changes_two_genes() {
        let space = ParameterSpace::new(
            (0..5)
                .map(|i| ParameterBounds {
                    id: format!("p{i}"),
                    lower: 0.0,
                    upper: 1.0,
                    initial: 0.5,
                })
                .collect(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = space.initial();
        for _ in 0..100 {
            let m = mutation(&c, &space, &mut rng).unwrap();
            let changed = c.values.iter().zip(&m.values).filter(|(a, b)| a.1 != b.1).count();
            assert_eq!(changed, 2);
            assert!(space.contains(&m));
        }
    }
}
