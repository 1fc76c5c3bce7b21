//! Road network: directed links joined at junctions, entrance routes and the
//! subject vehicle's route.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_LANE_WIDTH: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    /// Reported as "Road name" by the detector; defaults to the link id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_name: Option<String>,
    /// Upstream junction.
    pub from: String,
    /// Downstream junction.
    pub to: String,
    /// m
    pub length: f64,
    pub lane_count: u32,
    pub speed_limit_kmh: f64,
}

impl Link {
    pub fn road_name(&self) -> &str {
        self.road_name.as_deref().unwrap_or(&self.id)
    }

    pub fn speed_limit_ms(&self) -> f64 {
        self.speed_limit_kmh / 3.6
    }
}

/// Vehicles enter at the start of the first link of `route` and leave the
/// network at the end of its last link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entrance {
    pub id: String,
    pub route: Vec<String>,
    #[serde(default = "default_class")]
    pub class: String,
}

fn default_class() -> String {
    "background".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub links: Vec<Link>,
    pub entrances: Vec<Entrance>,
    pub subject_route: Vec<String>,
    #[serde(default = "default_lane_width")]
    pub lane_width: f64,
}

fn default_lane_width() -> f64 {
    DEFAULT_LANE_WIDTH
}

impl RoadNetwork {
    /// A straight corridor of `n_links` equal links `L1..Ln`. Entrance `Ek`
    /// feeds the start of `Lk` and its vehicles travel `route_span` links
    /// (truncated at the corridor end). The subject drives the full corridor.
    pub fn corridor(
        n_links: usize,
        link_length: f64,
        lane_count: u32,
        speed_limit_kmh: f64,
        route_span: usize,
    ) -> Self {
        let links: Vec<Link> = (0..n_links)
            .map(|i| Link {
                id: format!("L{}", i + 1),
                road_name: None,
                from: format!("J{i}"),
                to: format!("J{}", i + 1),
                length: link_length,
                lane_count,
                speed_limit_kmh,
            })
            .collect();
        let span = route_span.max(1);
        let entrances = (0..n_links)
            .map(|i| Entrance {
                id: format!("E{}", i + 1),
                route: links[i..(i + span).min(n_links)]
                    .iter()
                    .map(|l| l.id.clone())
                    .collect(),
                class: default_class(),
            })
            .collect();
        let subject_route = links.iter().map(|l| l.id.clone()).collect();
        RoadNetwork {
            links,
            entrances,
            subject_route,
            lane_width: DEFAULT_LANE_WIDTH,
        }
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for link in &self.links {
            if !seen.insert(link.id.as_str()) {
                return Err(Error::Config(format!("duplicate link id `{}`", link.id)));
            }
            if !(link.length > 0.0) {
                return Err(Error::Config(format!("link `{}` must have length > 0", link.id)));
            }
            if link.lane_count < 1 {
                return Err(Error::Config(format!("link `{}` needs at least one lane", link.id)));
            }
            if !(link.speed_limit_kmh > 0.0) {
                return Err(Error::Config(format!(
                    "link `{}` must have a positive speed limit",
                    link.id
                )));
            }
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::Config("lane_width must be positive".into()));
        }
        self.check_route("subject_route", &self.subject_route)?;
        let mut route_links = HashSet::new();
        for id in &self.subject_route {
            if !route_links.insert(id) {
                return Err(Error::Config(format!(
                    "subject_route visits link `{id}` twice"
                )));
            }
        }
        let mut entrance_ids = HashSet::new();
        for e in &self.entrances {
            if !entrance_ids.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate entrance id `{}`", e.id)));
            }
            self.check_route(&format!("entrance `{}`", e.id), &e.route)?;
        }
        Ok(())
    }

    fn check_route(&self, what: &str, route: &[String]) -> Result<()> {
        if route.is_empty() {
            return Err(Error::Config(format!("{what}: route is empty")));
        }
        let mut prev: Option<&Link> = None;
        for id in route {
            let link = self
                .links
                .iter()
                .find(|l| &l.id == id)
                .ok_or_else(|| Error::Config(format!("{what}: unknown link `{id}`")))?;
            if let Some(p) = prev {
                if p.to != link.from {
                    return Err(Error::Config(format!(
                        "{what}: links `{}` and `{}` do not share a junction",
                        p.id, link.id
                    )));
                }
            }
            prev = Some(link);
        }
        Ok(())
    }
}

/// Index-based view of a validated network used inside the simulator.
#[derive(Debug, Clone)]
pub(crate) struct CompiledNetwork {
    pub links: Vec<Link>,
    pub lane_width: f64,
    pub entrance_routes: Vec<Vec<usize>>,
    pub subject_route: Vec<usize>,
    /// Arc-length offset of each link along the subject route, if on it.
    pub route_offset: Vec<Option<f64>>,
    /// Links whose downstream junction is this link's upstream junction.
    pub predecessors: Vec<Vec<usize>>,
}

impl CompiledNetwork {
    pub fn compile(net: &RoadNetwork) -> Result<Self> {
        net.validate()?;
        let index: HashMap<&str, usize> = net
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        let resolve = |route: &[String]| -> Vec<usize> { route.iter().map(|id| index[id.as_str()]).collect() };
        let subject_route = resolve(&net.subject_route);
        let mut route_offset = vec![None; net.links.len()];
        let mut acc = 0.0;
        for &l in &subject_route {
            route_offset[l] = Some(acc);
            acc += net.links[l].length;
        }
        let predecessors = net
            .links
            .iter()
            .map(|link| {
                net.links
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.to == link.from)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Ok(CompiledNetwork {
            links: net.links.clone(),
            lane_width: net.lane_width,
            entrance_routes: net.entrances.iter().map(|e| resolve(&e.route)).collect(),
            subject_route,
            route_offset,
            predecessors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corridor_is_valid() {
        let net = RoadNetwork::corridor(4, 500.0, 2, 80.0, 2);
        net.validate().unwrap();
        assert_eq!(net.entrances[3].route, vec!["L4".to_string()]);
        assert_eq!(net.entrances[0].route, vec!["L1".to_string(), "L2".to_string()]);
        let c = CompiledNetwork::compile(&net).unwrap();
        assert_eq!(c.route_offset[2], Some(1000.0));
        assert_eq!(c.predecessors[1], vec![0]);
        assert!(c.predecessors[0].is_empty());
    }

    #[test]
    fn disconnected_route_is_rejected() {
        let mut net = RoadNetwork::corridor(3, 500.0, 2, 80.0, 1);
        net.subject_route = vec!["L1".into(), "L3".into()];
        assert!(matches!(net.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_link_is_rejected() {
        let mut net = RoadNetwork::corridor(2, 500.0, 2, 80.0, 1);
        net.entrances[0].route = vec!["nope".into()];
        assert!(net.validate().is_err());
    }

    #[test]
    fn bad_link_geometry_is_rejected() {
        let mut net = RoadNetwork::corridor(2, 500.0, 2, 80.0, 1);
        net.links[1].lane_count = 0;
        assert!(net.validate().is_err());
        let mut net = RoadNetwork::corridor(2, 500.0, 2, 80.0, 1);
        net.links[0].length = 0.0;
        assert!(net.validate().is_err());
    }
}
