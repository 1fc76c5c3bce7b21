use avcal::saga::{
    adaptive_probability, crossover, mutation, run_saga, selection, selection_probabilities, ParameterBounds,
    ParameterCombination, ParameterSpace, SagaConfig,
};
use avcal::seed::rng_for;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn space(n: usize) -> ParameterSpace {
    ParameterSpace::new(
        (0..n)
            .map(|i| ParameterBounds {
                id: format!("x{i}"),
                lower: -1.0,
                upper: 1.0,
                initial: 0.5,
            })
            .collect(),
    )
    .unwrap()
}

fn combo(v: &[f64]) -> ParameterCombination {
    ParameterCombination {
        values: v.iter().enumerate().map(|(i, &x)| (format!("x{i}"), x)).collect(),
    }
}

#[test]
fn selection_frequencies_follow_fitness() {
    let acc = [0.1, 0.2, 0.3, 0.4];
    let pop: Vec<ParameterCombination> = (0..4).map(|i| combo(&[i as f64])).collect();
    let probs = selection_probabilities(&acc).unwrap();
    let mut counts = [0.0; 4];
    let mut rng = rng_for(3, &[1]);
    let draws = 5000;
    for _ in 0..draws {
        for c in selection(&pop, &acc, &mut rng).unwrap() {
            counts[c.values[0].1 as usize] += 1.0;
        }
    }
    let n = (draws * 4) as f64;
    let chi2: f64 = counts.iter().zip(&probs).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square {chi2}, p = {p}, counts {counts:?}");
}

#[test]
fn mutated_genes_are_uniform() {
    let sp = space(5);
    let base = combo(&[0.5; 5]);
    let mut rng = rng_for(4, &[1]);
    let mut drawn = Vec::new();
    for _ in 0..4000 {
        let m = mutation(&base, &sp, &mut rng).unwrap();
        let changed: Vec<f64> = m.values.iter().map(|(_, v)| *v).filter(|v| *v != 0.5).collect();
        assert_eq!(changed.len(), 2);
        drawn.extend(changed);
    }
    drawn.sort_by(f64::total_cmp);
    let n = drawn.len() as f64;
    let d = drawn
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x + 1.0) / 2.0;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.6276 / n.sqrt(), "D = {d}");
}

/// Smooth objective with its maximum 1 at the centre of the box.
fn bowl(c: &ParameterCombination) -> avcal::Result<f64> {
    Ok(1.0 - c.values.iter().map(|(_, x)| (x - 0.2).powi(2)).sum::<f64>() / c.len() as f64)
}

#[test]
fn convex_objective_is_solved() {
    let sp = space(4);
    let mut solved = 0;
    for seed in 1..=10 {
        let cfg = SagaConfig {
            seed,
            accuracy_threshold: 0.95,
            ..SagaConfig::default()
        };
        let r = run_saga(bowl, &sp, &cfg, &[]).unwrap();
        assert!(r.history.len() <= cfg.max_generations + 1);
        assert!(r.evaluations <= cfg.population_size * (cfg.max_generations + 1));
        if r.f_max >= 0.95 {
            solved += 1;
        }
    }
    assert!(solved >= 8, "{solved}/10");
}

#[test]
fn runs_are_reproducible() {
    let sp = space(3);
    let cfg = SagaConfig {
        seed: 42,
        accuracy_threshold: 2.0,
        max_generations: 5,
        ..SagaConfig::default()
    };
    let a = run_saga(bowl, &sp, &cfg, &[sp.initial()]).unwrap();
    let b = run_saga(bowl, &sp, &cfg, &[sp.initial()]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), 6);
    assert_eq!(a.history[0].population[0], sp.initial());
    assert!(a.history.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
}

proptest! {
    #[test]
    fn adaptive_probability_is_bounded_and_non_increasing(
        avg in 0.0f64..0.5,
        spread in 0.0f64..0.5,
        f1 in 0.0f64..1.0,
        f2 in 0.0f64..1.0,
    ) {
        let max = avg + spread;
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let (lo, hi) = (lo.min(max), hi.min(max));
        let p_lo = adaptive_probability(lo, max, avg, 0.6, 0.9);
        let p_hi = adaptive_probability(hi, max, avg, 0.6, 0.9);
        prop_assert!((0.6..=0.9).contains(&p_lo) && (0.6..=0.9).contains(&p_hi));
        prop_assert!(p_hi <= p_lo);
    }

    #[test]
    fn crossover_only_exchanges_genes(
        a in prop::collection::vec(-1.0f64..1.0, 1..8),
        seed in any::<u64>(),
    ) {
        let b: Vec<f64> = a.iter().map(|x| -x - 2.0).collect();
        let (pa, pb) = (combo(&a), combo(&b));
        let (c1, c2) = crossover(&pa, &pb, &mut rng_for(seed, &[]));
        let mut swapped = false;
        for i in 0..a.len() {
            let (x, y) = (c1.values[i].1, c2.values[i].1);
            prop_assert!((x == a[i] && y == b[i]) || (x == b[i] && y == a[i]));
            // One cut: once swapped, swapped to the end.
            if x == b[i] {
                swapped = true;
            } else {
                prop_assert!(!swapped);
            }
        }
        if a.len() > 1 {
            prop_assert_eq!(c1.values[0].1, a[0]);
        }
    }

    #[test]
    fn mutation_stays_in_bounds(v in prop::collection::vec(-1.0f64..1.0, 1..6), seed in any::<u64>()) {
        let sp = space(v.len());
        let m = mutation(&combo(&v), &sp, &mut rng_for(seed, &[])).unwrap();
        prop_assert!(sp.contains(&m));
        let changed = m.values.iter().zip(&v).filter(|((_, x), y)| x != *y).count();
        prop_assert!(changed <= v.len().min(2));
    }
}
