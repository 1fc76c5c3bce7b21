//! Overlap between two identified parameter sets.

use std::collections::BTreeSet;

use crate::{Error, Result};

/// `|A ∩ B| / K` for two sets of `K` parameter ids.
pub fn jaccard_similarity<S: AsRef<str>>(a: &[S], b: &[S], k: usize) -> Result<f64> {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    if k == 0 || a.len() != k || b.len() != k {
        return Err(Error::SizeMismatch(format!(
            "similarity needs two sets of {k} distinct ids, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.intersection(&b).count() as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_sized() {
        let a = ["x", "y", "z"];
        let b = ["y", "z", "w"];
        assert_eq!(jaccard_similarity(&a, &b, 3).unwrap(), jaccard_similarity(&b, &a, 3).unwrap());
        assert!(jaccard_similarity(&a, &b[..2], 3).is_err());
        assert!(jaccard_similarity(&["x", "x"], &["x", "y"], 2).is_err());
    }
}
