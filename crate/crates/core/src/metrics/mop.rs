//! MoP extraction and the relative-error objective.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::fielddata::{Actor, EventSet, FieldDataset};
use crate::roadsim::DetectionRange;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MopId {
    /// Mean subject speed, km/h.
    AvgSubjectSpeed,
    /// Mean density in the detection window over all roads, veh/km/lane.
    AvgDensity,
    /// Mean density in the detection window while the subject is on one road.
    RoadDensity(String),
    /// Per-vehicle mean time headway of surrounding followers, averaged over
    /// vehicles, s.
    SurroundingHeadway,
    /// Mean time headway of the subject, s.
    SubjectHeadway,
    /// Mean lane-change distance of the subject, m.
    SubjectLcDistance,
    /// Per-vehicle mean lane-change distance of surrounding vehicles,
    /// averaged over vehicles, m.
    SurroundingLcDistance,
    /// Number of cut-ins in front of the subject.
    CutInCount,
}

impl MopId {
    pub fn units(&self) -> &'static str {
        match self {
            MopId::AvgSubjectSpeed => "km/h",
            MopId::AvgDensity | MopId::RoadDensity(_) => "veh/km/lane",
            MopId::SurroundingHeadway | MopId::SubjectHeadway => "s",
            MopId::SubjectLcDistance | MopId::SurroundingLcDistance => "m",
            MopId::CutInCount => "count",
        }
    }

    /// The MoPs computed from traffic-level data by default.
    pub fn traffic_defaults() -> Vec<MopId> {
        vec![MopId::AvgSubjectSpeed, MopId::AvgDensity]
    }

    /// The MoPs computed from interaction events by default.
    pub fn vehicle_defaults() -> Vec<MopId> {
        vec![
            MopId::SurroundingHeadway,
            MopId::SubjectLcDistance,
            MopId::SurroundingLcDistance,
            MopId::CutInCount,
        ]
    }
}

impl fmt::Display for MopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MopId::AvgSubjectSpeed => f.write_str("avg_subject_speed"),
            MopId::AvgDensity => f.write_str("avg_density"),
            MopId::RoadDensity(road) => write!(f, "density@{road}"),
            MopId::SurroundingHeadway => f.write_str("surrounding_headway"),
            MopId::SubjectHeadway => f.write_str("subject_headway"),
            MopId::SubjectLcDistance => f.write_str("subject_lc_distance"),
            MopId::SurroundingLcDistance => f.write_str("surrounding_lc_distance"),
            MopId::CutInCount => f.write_str("cutin_count"),
        }
    }
}

impl FromStr for MopId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "avg_subject_speed" => MopId::AvgSubjectSpeed,
            "avg_density" => MopId::AvgDensity,
            "surrounding_headway" => MopId::SurroundingHeadway,
            "subject_headway" => MopId::SubjectHeadway,
            "subject_lc_distance" => MopId::SubjectLcDistance,
            "surrounding_lc_distance" => MopId::SurroundingLcDistance,
            "cutin_count" => MopId::CutInCount,
            _ => match s.strip_prefix("density@") {
                Some(road) if !road.is_empty() => MopId::RoadDensity(road.to_string()),
                _ => return Err(Error::Config(format!("unknown measure `{s}`"))),
            },
        })
    }
}

impl Serialize for MopId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MopId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MopEntry {
    pub id: MopId,
    /// `None` when nothing was observed.
    pub value: Option<f64>,
    pub units: String,
}

/// Named measures in insertion order; ids are unique.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MopVector {
    pub entries: Vec<MopEntry>,
}

impl MopVector {
    pub fn new() -> Self {
        MopVector::default()
    }

    /// Insert or replace.
    pub fn set(&mut self, id: MopId, value: Option<f64>) {
        let value = value.filter(|v| v.is_finite());
        match self.entries.iter_mut().find(|e| e.id == id) {
            Some(e) => e.value = value,
            None => self.entries.push(MopEntry {
                units: id.units().to_string(),
                id,
                value,
            }),
        }
    }

    pub fn get(&self, id: &MopId) -> Option<f64> {
        self.entries.iter().find(|e| &e.id == id).and_then(|e| e.value)
    }

    pub fn contains(&self, id: &MopId) -> bool {
        self.entries.iter().any(|e| &e.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &MopId> {
        self.entries.iter().map(|e| &e.id)
    }

    /// Keep only `ids`, in that order; absent ones become missing entries.
    pub fn select(&self, ids: &[MopId]) -> MopVector {
        let mut out = MopVector::new();
        for id in ids {
            out.set(id.clone(), self.get(id));
        }
        out
    }

    pub fn merge(&mut self, other: &MopVector) {
        for e in &other.entries {
            self.set(e.id.clone(), e.value);
        }
    }

    /// Entry-wise mean over replications, ignoring missing values.
    pub fn mean(vectors: &[MopVector]) -> MopVector {
        let mut out = MopVector::new();
        for v in vectors {
            for e in &v.entries {
                if !out.contains(&e.id) {
                    let vals: Vec<f64> = vectors.iter().filter_map(|w| w.get(&e.id)).collect();
                    let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
                    out.set(e.id.clone(), mean);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default)]
    pub detection_range: DetectionRange,
    /// Lane count per road name; roads not listed use the highest lane id
    /// seen on them.
    #[serde(default)]
    pub lanes: BTreeMap<String, u32>,
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Vehicles in the detection window per km and lane, one value per record.
pub(crate) fn record_densities(d: &FieldDataset, cfg: &MetricConfig) -> Vec<f64> {
    let mut observed: BTreeMap<&str, u32> = BTreeMap::new();
    for r in &d.records {
        let m = r
            .surrounding
            .iter()
            .map(|s| s.lane_id)
            .chain(std::iter::once(r.subject.lane_id))
            .max()
            .unwrap_or(1);
        let e = observed.entry(r.road_name.as_str()).or_insert(1);
        *e = (*e).max(m);
    }
    let window_km = cfg.detection_range.length() / 1000.0;
    d.records
        .iter()
        .map(|r| {
            let lanes = cfg
                .lanes
                .get(&r.road_name)
                .copied()
                .unwrap_or_else(|| observed[r.road_name.as_str()]);
            (1 + r.surrounding.len()) as f64 / (window_km * f64::from(lanes))
        })
        .collect()
}

/// Mean subject speed, mean density, and mean density per road.
pub fn compute_traffic_mops(d: &FieldDataset, cfg: &MetricConfig) -> Result<MopVector> {
    if d.is_empty() {
        return Err(Error::Degenerate("no detection records to compute traffic measures from".into()));
    }
    let dens = record_densities(d, cfg);
    let mut out = MopVector::new();
    out.set(MopId::AvgSubjectSpeed, mean(d.records.iter().map(|r| r.subject.speed_kmh)));
    out.set(MopId::AvgDensity, mean(dens.iter().copied()));
    let mut roads: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (r, k) in d.records.iter().zip(&dens) {
        roads.entry(&r.road_name).or_default().push(*k);
    }
    for (road, ks) in roads {
        out.set(MopId::RoadDensity(road.to_string()), mean(ks));
    }
    Ok(out)
}

/// Averages per vehicle first, then over vehicles.
fn per_vehicle_mean<'a>(samples: impl Iterator<Item = (&'a str, f64)>) -> Option<f64> {
    let mut by: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (id, x) in samples {
        let e = by.entry(id).or_insert((0.0, 0));
        e.0 += x;
        e.1 += 1;
    }
    mean(by.values().map(|(s, n)| s / *n as f64))
}

fn vehicle_id(a: &Actor) -> Option<&str> {
    match a {
        Actor::Vehicle(id) => Some(id),
        Actor::Subject => None,
    }
}

/// Interaction MoPs; measures without observations are reported missing.
pub fn compute_vehicle_mops(events: &EventSet) -> MopVector {
    let mut out = MopVector::new();
    out.set(
        MopId::SurroundingHeadway,
        per_vehicle_mean(events.episodes.iter().filter_map(|e| {
            vehicle_id(&e.follower).map(|id| e.headway_series.iter().map(move |h| (id, *h)))
        }).flatten()),
    );
    out.set(
        MopId::SubjectHeadway,
        mean(
            events
                .episodes
                .iter()
                .filter(|e| e.follower == Actor::Subject)
                .flat_map(|e| e.headway_series.iter().copied()),
        ),
    );
    out.set(
        MopId::SubjectLcDistance,
        mean(
            events
                .lane_changes
                .iter()
                .filter(|e| e.actor == Actor::Subject)
                .filter_map(|e| e.lc_distance),
        ),
    );
    out.set(
        MopId::SurroundingLcDistance,
        per_vehicle_mean(
            events
                .lane_changes
                .iter()
                .filter_map(|e| Some((vehicle_id(&e.actor)?, e.lc_distance?))),
        ),
    );
    out.set(MopId::CutInCount, Some(events.cut_ins.len() as f64));
    out
}

/// Sum of relative errors over the measures present in `field`.
///
/// A measure missing from the field data is skipped. A measure observed in
/// the field but missing from the simulation counts as a full relative
/// error of 1, so that a parameter set cannot improve its score by
/// suppressing an interaction altogether.
pub fn goodness_of_fit(field: &MopVector, sim: &MopVector) -> Result<f64> {
    let mut f = 0.0;
    for e in &field.entries {
        let Some(x) = e.value else {
            tracing::warn!(measure = %e.id, "measure missing from field data; excluded from fit");
            continue;
        };
        if x == 0.0 {
            return Err(Error::ZeroFieldValue(e.id.to_string()));
        }
        f += match sim.get(&e.id) {
            Some(y) => (x - y).abs() / x.abs(),
            None => {
                tracing::debug!(measure = %e.id, "measure missing from simulation; counted as full error");
                1.0
            }
        };
    }
    Ok(f)
}

/// `1 - goodness_of_fit`; negative when the fit error exceeds 1.
pub fn accuracy(field: &MopVector, sim: &MopVector) -> Result<f64> {
    Ok(1.0 - goodness_of_fit(field, sim)?)
}
