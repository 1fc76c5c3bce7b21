//! Range analysis: rank factors by the spread of their level-mean accuracy.

use serde::{Deserialize, Serialize};

use super::array::OrthogonalArray;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeAnalysisResult {
    /// `[factor][level]` mean accuracy.
    pub level_means: Vec<Vec<f64>>,
    /// Max minus min level mean per factor.
    pub ranges: Vec<f64>,
    /// Factor indices by decreasing range; ties keep index order.
    pub ranking: Vec<usize>,
    /// First `K` entries of `ranking`.
    pub critical_set: Vec<usize>,
    /// Level with the highest mean per factor; ties go to the lower level.
    pub best_levels: Vec<usize>,
}

pub fn range_analysis(oa: &OrthogonalArray, accuracies: &[f64], k: usize) -> Result<RangeAnalysisResult> {
    if accuracies.len() != oa.runs {
        return Err(Error::SizeMismatch(format!(
            "{} accuracies for {} runs",
            accuracies.len(),
            oa.runs
        )));
    }
    if k > oa.factors {
        return Err(Error::SizeMismatch(format!("K = {k} exceeds {} factors", oa.factors)));
    }
    if let Some(bad) = accuracies.iter().find(|a| !a.is_finite()) {
        return Err(Error::Degenerate(format!("accuracy {bad} is not finite")));
    }
    let s = oa.levels;
    let level_means: Vec<Vec<f64>> = (0..oa.factors)
        .map(|j| {
            let mut sum = vec![0.0; s];
            let mut n = vec![0usize; s];
            for (row, a) in oa.matrix.iter().zip(accuracies) {
                sum[row[j]] += a;
                n[row[j]] += 1;
            }
            sum.iter().zip(&n).map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect()
        })
        .collect();
    let ranges: Vec<f64> = level_means
        .iter()
        .map(|m| {
            let finite = m.iter().filter(|x| x.is_finite());
            let hi = finite.clone().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lo = finite.fold(f64::INFINITY, |a, &b| a.min(b));
            hi - lo
        })
        .collect();
    let mut ranking: Vec<usize> = (0..oa.factors).collect();
    ranking.sort_by(|&a, &b| ranges[b].total_cmp(&ranges[a]));
    let best_levels = level_means
        .iter()
        .map(|m| {
            let mut best = 0;
            for (l, &x) in m.iter().enumerate() {
                if x > m[best] {
                    best = l;
                }
            }
            best
        })
        .collect();
    Ok(RangeAnalysisResult {
        critical_set: ranking[..k].to_vec(),
        level_means,
        ranges,
        ranking,
        best_levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::build_orthogonal_array;

    #[test]
    fn constant_accuracy() {
        let oa = build_orthogonal_array(3, 4).unwrap();
        let r = range_analysis(&oa, &[0.7; 9], 2).unwrap();
        assert!(r.ranges.iter().all(|&x| x == 0.0));
        assert_eq!(r.ranking, vec![0, 1, 2, 3]);
        assert_eq!(r.best_levels, vec![0; 4]);
        assert_eq!(r.critical_set, vec![0, 1]);
    }

    #[test]
    fn first_factor_dominates() {
        let oa = build_orthogonal_array(2, 3).unwrap();
        let r = range_analysis(&oa, &[0.5, 0.5, 0.9, 0.9], 1).unwrap();
        assert!((r.ranges[0] - 0.4).abs() < 1e-12);
        assert_eq!(r.ranges[1], 0.0);
        assert_eq!(r.ranges[2], 0.0);
        assert_eq!(r.ranking[0], 0);
        assert_eq!(r.best_levels[0], 1);
    }

    #[test]
    fn size_checks() {
        let oa = build_orthogonal_array(2, 3).unwrap();
        assert!(range_analysis(&oa, &[0.5; 3], 1).is_err());
        assert!(range_analysis(&oa, &[0.5; 4], 4).is_err());
        assert!(range_analysis(&oa, &[0.5, 0.5, f64::NAN, 0.5], 1).is_err());
    }
}
