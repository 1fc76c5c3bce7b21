//! Box-bounded parameter spaces and concrete assignments over them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub id: String,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

/// Ordered list of parameters. The order defines crossover cut points and
/// array columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub entries: Vec<ParameterBounds>,
}

/// Values keyed by parameter id, in the order of the space they came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterCombination {
    pub values: Vec<(String, f64)>,
}

impl ParameterSpace {
    pub fn new(entries: Vec<ParameterBounds>) -> Result<Self> {
        let space = ParameterSpace { entries };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.entries.iter().enumerate() {
            if !(p.lower.is_finite() && p.upper.is_finite() && p.initial.is_finite()) {
                return Err(Error::Config(format!("parameter {}: bounds must be finite", p.id)));
            }
            if p.lower >= p.upper {
                return Err(Error::Config(format!(
                    "parameter {}: lower bound {} is not below upper bound {}",
                    p.id, p.lower, p.upper
                )));
            }
            if !(p.lower..=p.upper).contains(&p.initial) {
                return Err(Error::Config(format!(
                    "parameter {}: initial value {} outside [{}, {}]",
                    p.id, p.initial, p.lower, p.upper
                )));
            }
            if self.entries[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::Config(format!("parameter {} listed twice", p.id)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|p| p.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ParameterBounds> {
        self.entries.iter().find(|p| p.id == id)
    }

    /// Subspace with the given ids, in the order given.
    pub fn restrict<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let entries = ids
            .iter()
            .map(|id| {
                self.get(id.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownParameter(id.as_ref().to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(ParameterSpace { entries })
    }

    pub fn initial(&self) -> ParameterCombination {
        self.combination(self.entries.iter().map(|p| p.initial).collect())
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterCombination {
        self.combination(self.entries.iter().map(|p| rng.random_range(p.lower..=p.upper)).collect())
    }

    pub(crate) fn combination(&self, values: Vec<f64>) -> ParameterCombination {
        ParameterCombination {
            values: self.entries.iter().map(|p| p.id.clone()).zip(values).collect(),
        }
    }

    /// Values of `c` aligned with this space's order.
    pub(crate) fn vector(&self, c: &ParameterCombination) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|p| c.get(&p.id).ok_or_else(|| Error::UnknownParameter(p.id.clone())))
            .collect()
    }

    pub fn contains(&self, c: &ParameterCombination) -> bool {
        c.len() == self.len()
            && self
                .entries
                .iter()
                .all(|p| c.get(&p.id).is_some_and(|v| (p.lower..=p.upper).contains(&v)))
    }
}

impl ParameterCombination {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == id).map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sets `id`, appending it if absent.
    pub fn set(&mut self, id: &str, value: f64) {
        match self.values.iter_mut().find(|(k, _)| k == id) {
            Some(slot) => slot.1 = value,
            None => self.values.push((id.to_string(), value)),
        }
    }

    /// `self` with every value of `other` applied on top.
    pub fn overlay(&self, other: &ParameterCombination) -> ParameterCombination {
        let mut out = self.clone();
        for (k, v) in &other.values {
            out.set(k, *v);
        }
        out
    }
}
