//! Strength-2 orthogonal arrays from the Rao–Hamming construction.
//!
//! For `s^k` runs the rows are all vectors `u` in GF(s)^k and the columns
//! are the projective points `c` (nonzero vectors whose last nonzero
//! coordinate is 1); entry (u, c) is the dot product u·c. This gives
//! `(s^k - 1)/(s - 1)` columns, any two of which are orthogonal.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::galois::GaloisField;
use crate::{Error, Result};

/// Largest supported exponent per level count.
fn max_power(s: usize) -> u32 {
    match s {
        2 => 7,
        3 => 4,
        4 | 5 => 3,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrthogonalArray {
    pub runs: usize,
    pub factors: usize,
    pub levels: usize,
    /// `runs × factors`, entries in `0..levels`.
    pub matrix: Vec<Vec<usize>>,
}

fn columns_for(s: usize, k: u32) -> usize {
    (s.pow(k) - 1) / (s - 1)
}

/// Smallest `L_{s^k}(s^m)` with `m >= n_factors`, truncated to its first
/// `n_factors` columns.
pub fn build_orthogonal_array(s: usize, n_factors: usize) -> Result<OrthogonalArray> {
    let field = GaloisField::new(s)
        .ok_or_else(|| Error::Config(format!("levels must be 2, 3, 4 or 5 (got {s})")))?;
    if n_factors == 0 {
        return Err(Error::Config("an orthogonal array needs at least one factor".into()));
    }
    let kmax = max_power(s);
    let k = (2..=kmax).find(|&k| columns_for(s, k) >= n_factors).ok_or_else(|| {
        Error::Capacity(format!(
            "{n_factors} factors at {s} levels; the largest supported array L{}({s}^{}) has {} columns",
            s.pow(kmax),
            columns_for(s, kmax),
            columns_for(s, kmax)
        ))
    })?;
    let runs = s.pow(k);
    let digits = |mut x: usize| -> Vec<usize> {
        // least significant digit first
        (0..k)
            .map(|_| {
                let d = x % s;
                x /= s;
                d
            })
            .collect()
    };
    let cols: Vec<Vec<usize>> = (1..runs)
        .map(digits)
        .filter(|c| c.iter().rposition(|&d| d != 0).is_some_and(|i| c[i] == 1))
        .take(n_factors)
        .collect();
    let matrix = (0..runs)
        .map(|r| {
            // row vectors in lexicographic order, first coordinate most significant
            let mut u = digits(r);
            u.reverse();
            cols.iter().map(|c| field.dot(&u, c)).collect()
        })
        .collect();
    Ok(OrthogonalArray {
        runs,
        factors: n_factors,
        levels: s,
        matrix,
    })
}

impl OrthogonalArray {
    pub fn column(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.matrix.iter().map(move |row| row[j])
    }

    /// Every ordered level pair appears `runs / s²` times in every column
    /// pair, and every level `runs / s` times in every column.
    pub fn is_orthogonal(&self) -> bool {
        let s = self.levels;
        let balanced = (0..self.factors).all(|j| {
            let mut n = vec![0; s];
            self.column(j).for_each(|l| n[l] += 1);
            n.iter().all(|&c| c * s == self.runs)
        });
        balanced
            && (0..self.factors).all(|a| {
                (a + 1..self.factors).all(|b| {
                    let mut n = vec![0; s * s];
                    for row in &self.matrix {
                        n[row[a] * s + row[b]] += 1;
                    }
                    n.iter().all(|&c| c * s * s == self.runs)
                })
            })
    }

    /// `run,f1,f2,...` with 1-based levels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["run".to_string()];
        header.extend((1..=self.factors).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for (i, row) in self.matrix.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(|l| (l + 1).to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<array csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l4_matches_standard_table() {
        let oa = build_orthogonal_array(2, 3).unwrap();
        assert_eq!(oa.matrix, vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    }

    #[test]
    fn sizes() {
        assert_eq!(build_orthogonal_array(4, 12).unwrap().runs, 64);
        assert_eq!(build_orthogonal_array(4, 20).unwrap().runs, 64);
        assert_eq!(build_orthogonal_array(4, 5).unwrap().runs, 16);
        assert_eq!(build_orthogonal_array(3, 4).unwrap().runs, 9);
        assert_eq!(build_orthogonal_array(2, 15).unwrap().runs, 16);
    }

    #[test]
    fn capacity_and_level_errors() {
        assert!(matches!(build_orthogonal_array(4, 22), Err(Error::Capacity(_))));
        assert!(matches!(build_orthogonal_array(6, 3), Err(Error::Config(_))));
    }
}
