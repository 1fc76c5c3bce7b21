use avcal::doe::{build_orthogonal_array, level_value, map_levels_to_values, range_analysis};
use avcal::saga::{ParameterBounds, ParameterSpace};
use avcal::Error;
use proptest::prelude::*;

/// Every ordered level pair in every column pair, counted directly.
fn pair_counts_balanced(m: &[Vec<usize>], s: usize) -> bool {
    let n = m[0].len();
    let expected = m.len() / (s * s);
    for a in 0..n {
        for b in a + 1..n {
            let mut counts = vec![0usize; s * s];
            for row in m {
                counts[row[a] * s + row[b]] += 1;
            }
            if counts.iter().any(|&c| c != expected) {
                return false;
            }
        }
    }
    true
}

#[test]
fn every_supported_array_is_orthogonal() {
    for (s, max_k) in [(2usize, 7u32), (3, 4), (4, 3), (5, 3)] {
        let max_factors = (s.pow(max_k) - 1) / (s - 1);
        let sizes: Vec<usize> = (2..=max_factors.min(40)).chain([max_factors]).collect();
        for n in sizes {
            let oa = build_orthogonal_array(s, n).unwrap();
            assert_eq!(oa.factors, n);
            assert!(oa.matrix.iter().all(|r| r.len() == n && r.iter().all(|&l| l < s)));
            assert!(pair_counts_balanced(&oa.matrix, s), "s={s} n={n}");
        }
        assert!(matches!(build_orthogonal_array(s, max_factors + 1), Err(Error::Capacity(_))));
    }
}

#[test]
fn sixty_four_run_arrays() {
    for n in [12, 20] {
        let oa = build_orthogonal_array(4, n).unwrap();
        assert_eq!(oa.runs, 64);
        assert!(pair_counts_balanced(&oa.matrix, 4));
    }
    assert_eq!(build_orthogonal_array(3, 4).unwrap().runs, 9);
    assert_eq!(build_orthogonal_array(4, 5).unwrap().runs, 16);
    assert_eq!(build_orthogonal_array(2, 15).unwrap().runs, 16);
}

#[test]
fn unsupported_levels_are_rejected() {
    for s in [0, 1, 6, 7] {
        assert!(build_orthogonal_array(s, 3).is_err());
    }
}

proptest! {
    #[test]
    fn levels_span_the_bounds(lower in -100.0f64..100.0, width in 0.001f64..100.0, l in 2usize..6) {
        let upper = lower + width;
        let vals: Vec<f64> = (0..l).map(|k| level_value(lower, upper, k, l).unwrap()).collect();
        prop_assert_eq!(vals[0], lower);
        prop_assert_eq!(vals[l - 1], upper);
        prop_assert!(vals.windows(2).all(|w| w[1] > w[0]));
        for k in 0..l {
            let expected = lower + k as f64 * width / (l - 1) as f64;
            prop_assert!((vals[k] - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn mapped_cases_follow_the_array(l in 2usize..6, n in 2usize..6) {
        let space = ParameterSpace::new(
            (0..n)
                .map(|i| ParameterBounds {
                    id: format!("p{i}"),
                    lower: i as f64,
                    upper: i as f64 + 1.0,
                    initial: i as f64 + 0.5,
                })
                .collect(),
        )
        .unwrap();
        let oa = build_orthogonal_array(l, n).unwrap();
        let cases = map_levels_to_values(&oa, &space).unwrap();
        prop_assert_eq!(cases.len(), oa.runs);
        for (i, c) in cases.iter().enumerate() {
            prop_assert_eq!(c.case_id, i + 1);
            prop_assert_eq!(&c.levels, &oa.matrix[i]);
            for (j, (id, v)) in c.values.values.iter().enumerate() {
                prop_assert_eq!(id, &format!("p{j}"));
                prop_assert_eq!(*v, level_value(j as f64, j as f64 + 1.0, oa.matrix[i][j], l).unwrap());
            }
        }
    }

    #[test]
    fn range_analysis_matches_group_by(
        geometry in prop_oneof![Just((3usize, 4usize)), Just((4, 5)), Just((2, 7))],
        seed in prop::collection::vec(-1.0f64..1.0, 16),
        k in 1usize..4,
    ) {
        let (s, n) = geometry;
        let oa = build_orthogonal_array(s, n).unwrap();
        let acc = &seed[..oa.runs];
        let ra = range_analysis(&oa, acc, k).unwrap();
        for j in 0..n {
            let mut means = vec![];
            for level in 0..s {
                let xs: Vec<f64> = (0..oa.runs).filter(|&r| oa.matrix[r][j] == level).map(|r| acc[r]).collect();
                means.push(xs.iter().sum::<f64>() / xs.len() as f64);
            }
            for level in 0..s {
                prop_assert!((ra.level_means[j][level] - means[level]).abs() < 1e-12);
            }
            let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!((ra.ranges[j] - (hi - lo)).abs() < 1e-12);
            prop_assert_eq!(means[ra.best_levels[j]], hi);
        }
        prop_assert!(ra.ranking.windows(2).all(|w| ra.ranges[w[0]] >= ra.ranges[w[1]]));
        prop_assert_eq!(&ra.critical_set[..], &ra.ranking[..k]);
    }
}
