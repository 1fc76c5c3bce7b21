//! Evaluation errors between field and simulated data, as fractions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mop::{compute_traffic_mops, compute_vehicle_mops, MetricConfig, MopId};
use crate::fielddata::{EventSet, FieldDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutinErrorParams {
    pub delta_lb: f64,
    pub delta_ub: f64,
}

impl Default for CutinErrorParams {
    fn default() -> Self {
        CutinErrorParams {
            delta_lb: 0.0,
            delta_ub: 1.0,
        }
    }
}

impl CutinErrorParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta_lb < self.delta_ub {
            Ok(())
        } else {
            Err(Error::Config("cut-in error needs delta_lb < delta_ub".into()))
        }
    }
}

/// Piecewise-linear membership of the cut-in count difference.
pub fn cutin_error(n_real: f64, n_sim: f64, p: &CutinErrorParams) -> f64 {
    let dn = (n_real - n_sim).abs();
    if dn <= p.delta_lb {
        0.0
    } else if dn >= p.delta_ub {
        1.0
    } else {
        (dn - p.delta_lb) / (p.delta_ub - p.delta_lb)
    }
}

/// Every error as a fraction; `None` where it could not be computed, with
/// the reason in `errors`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MoeReport {
    pub e_t_sub: Option<f64>,
    pub e_t_bg: Option<f64>,
    pub e_d_sub: Option<f64>,
    pub e_d_bg: Option<f64>,
    pub e_cutin: Option<f64>,
    pub e_v: Option<f64>,
    pub e_rho: Option<f64>,
    /// Volume is estimated as density times mean observed speed.
    pub e_vol: Option<f64>,
    pub e_dynamics: Option<f64>,
    /// Sum of the five vehicle-level errors; `None` if any is missing.
    pub e_veh: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<String, String>,
}

impl MoeReport {
    /// (name, value) pairs in a fixed order.
    pub fn values(&self) -> [(&'static str, Option<f64>); 10] {
        [
            ("e_t_sub", self.e_t_sub),
            ("e_t_bg", self.e_t_bg),
            ("e_d_sub", self.e_d_sub),
            ("e_d_bg", self.e_d_bg),
            ("e_cutin", self.e_cutin),
            ("e_v", self.e_v),
            ("e_rho", self.e_rho),
            ("e_vol", self.e_vol),
            ("e_dynamics", self.e_dynamics),
            ("e_veh", self.e_veh),
        ]
    }
}

/// Traffic speed, density and volume over the sampled data.
struct TrafficSample {
    speed: Option<f64>,
    density: Option<f64>,
    subject_speed: Option<f64>,
}

fn traffic_sample(d: &FieldDataset, cfg: &MetricConfig) -> TrafficSample {
    let (mut s, mut n) = (0.0, 0usize);
    for r in &d.records {
        s += r.subject.speed_kmh;
        n += 1;
        for o in &r.surrounding {
            s += o.speed_kmh;
            n += 1;
        }
    }
    let mops = compute_traffic_mops(d, cfg).ok();
    TrafficSample {
        speed: (n > 0).then(|| s / n as f64),
        density: mops.as_ref().and_then(|m| m.get(&MopId::AvgDensity)),
        subject_speed: mops.as_ref().and_then(|m| m.get(&MopId::AvgSubjectSpeed)),
    }
}

fn rel_err(name: &str, real: Option<f64>, sim: Option<f64>, errors: &mut BTreeMap<String, String>) -> Option<f64> {
    match (real, sim) {
        (Some(0.0), _) => {
            errors.insert(name.into(), "field value is zero".into());
            None
        }
        (Some(r), Some(s)) => Some((r - s).abs() / r.abs()),
        (None, _) => {
            errors.insert(name.into(), "not observed in field data".into());
            None
        }
        (Some(_), None) => {
            errors.insert(name.into(), "not observed in simulated data".into());
            None
        }
    }
}

pub fn evaluate_moes(
    field: (&FieldDataset, &EventSet),
    sim: (&FieldDataset, &EventSet),
    p: &CutinErrorParams,
    cfg: &MetricConfig,
) -> MoeReport {
    let mut errors = BTreeMap::new();
    let fv = compute_vehicle_mops(field.1);
    let sv = compute_vehicle_mops(sim.1);
    let mut pair = |name: &str, id: MopId| rel_err(name, fv.get(&id), sv.get(&id), &mut errors);
    let e_t_sub = pair("e_t_sub", MopId::SubjectHeadway);
    let e_t_bg = pair("e_t_bg", MopId::SurroundingHeadway);
    let e_d_sub = pair("e_d_sub", MopId::SubjectLcDistance);
    let e_d_bg = pair("e_d_bg", MopId::SurroundingLcDistance);
    let e_cutin = Some(cutin_error(field.1.cut_ins.len() as f64, sim.1.cut_ins.len() as f64, p));

    let ft = traffic_sample(field.0, cfg);
    let st = traffic_sample(sim.0, cfg);
    let e_v = rel_err("e_v", ft.speed, st.speed, &mut errors);
    let e_rho = rel_err("e_rho", ft.density, st.density, &mut errors);
    let volume = |t: &TrafficSample| Some(t.density? * t.speed?);
    let e_vol = rel_err("e_vol", volume(&ft), volume(&st), &mut errors);
    let e_dynamics = rel_err("e_dynamics", ft.subject_speed, st.subject_speed, &mut errors);

    let e_veh = (|| Some(e_t_sub? + e_t_bg? + e_d_sub? + e_d_bg? + e_cutin?))();
    MoeReport {
        e_t_sub,
        e_t_bg,
        e_d_sub,
        e_d_bg,
        e_cutin,
        e_v,
        e_rho,
        e_vol,
        e_dynamics,
        e_veh,
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutin_membership() {
        let p = CutinErrorParams::default();
        assert_eq!(cutin_error(3.0, 3.0, &p), 0.0);
        assert_eq!(cutin_error(2.0, 3.0, &p), 1.0);
        assert_eq!(cutin_error(0.5, 0.0, &p), 0.5);
        assert_eq!(cutin_error(0.0, 3.0, &p), 1.0);
    }

    #[test]
    fn cutin_params_must_be_ordered() {
        assert!(CutinErrorParams { delta_lb: 1.0, delta_ub: 1.0 }.validate().is_err());
    }
}
