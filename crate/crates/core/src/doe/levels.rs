//! Uniform level grids over parameter bounds.

use serde::{Deserialize, Serialize};

use super::array::OrthogonalArray;
use crate::saga::{ParameterCombination, ParameterSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    /// 1-based run number.
    pub case_id: usize,
    pub levels: Vec<usize>,
    pub values: ParameterCombination,
}

/// Value of level `k` (0-based) out of `l` on `[lower, upper]`. The end
/// levels hit the bounds exactly.
pub fn level_value(lower: f64, upper: f64, k: usize, l: usize) -> Result<f64> {
    if l == 1 {
        return if lower == upper {
            Ok(lower)
        } else {
            Err(Error::Degenerate("a single level cannot span a non-empty range".into()))
        };
    }
    if k == 0 {
        Ok(lower)
    } else if k + 1 == l {
        Ok(upper)
    } else {
        Ok(lower + k as f64 * (upper - lower) / (l - 1) as f64)
    }
}

pub fn map_levels_to_values(oa: &OrthogonalArray, space: &ParameterSpace) -> Result<Vec<TestCase>> {
    if oa.factors != space.len() {
        return Err(Error::SizeMismatch(format!(
            "array has {} factors but the space has {} parameters",
            oa.factors,
            space.len()
        )));
    }
    oa.matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let values = space
                .entries
                .iter()
                .zip(row)
                .map(|(p, &k)| Ok((p.id.clone(), level_value(p.lower, p.upper, k, oa.levels)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(TestCase {
                case_id: i + 1,
                levels: row.clone(),
                values: ParameterCombination { values },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_spacing() {
        let v: Vec<f64> = (0..4).map(|k| level_value(0.0, 3.0, k, 4).unwrap()).collect();
        assert_eq!(v, [0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_level() {
        assert_eq!(level_value(2.0, 2.0, 0, 1).unwrap(), 2.0);
        assert!(level_value(1.0, 2.0, 0, 1).is_err());
    }

    #[test]
    fn endpoints_are_exact() {
        let (lo, hi) = (0.1 * 3.0, 0.7 * 3.0);
        assert_eq!(level_value(lo, hi, 0, 3).unwrap(), lo);
        assert_eq!(level_value(lo, hi, 2, 3).unwrap(), hi);
    }
}
