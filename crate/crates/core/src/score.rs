//! Serde helpers for accuracies, which are `-inf` for infeasible runs.
//! JSON has no infinities, so `-inf` is written as `null` and read back.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn encode(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn decode(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NEG_INFINITY)
}

pub(crate) fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    encode(*x).serialize(s)
}

pub(crate) fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Option::<f64>::deserialize(d).map(decode)
}

pub(crate) mod vec {
    use super::*;

    pub(crate) fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|x| encode(*x)))
    }

    pub(crate) fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(decode).collect())
    }
}
