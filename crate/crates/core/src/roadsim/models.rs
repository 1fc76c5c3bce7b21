//! Car-following models: IDM, Gipps, full velocity difference, Krauss and
//! Wiedemann 99.
//!
//! Every model returns a longitudinal acceleration for one follower given an
//! optional leader. The result is clamped from below so that an explicit
//! speed update over `dt` never produces a negative speed.

use serde::{Deserialize, Serialize};

use super::vehicle::{VehicleState, DEFAULT_VEHICLE_LENGTH};
use crate::{Error, Result};

/// Leader as seen by the follower. `gap` is bumper to bumper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leader {
    pub gap: f64,
    pub speed: f64,
    pub accel: f64,
    pub length: f64,
}

impl Leader {
    pub fn new(gap: f64, speed: f64) -> Self {
        Leader {
            gap,
            speed,
            accel: 0.0,
            length: DEFAULT_VEHICLE_LENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub a_max: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub time_gap: f64,
    pub s0: f64,
    pub delta: f64,
    pub v0: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            a_max: 1.4,
            b: 2.0,
            time_gap: 1.5,
            s0: 2.0,
            delta: 4.0,
            v0: 80.0 / 3.6,
        }
    }
}

impl IdmParams {
    /// Desired dynamic gap s*(v, Δv), Δv = v - v_leader.
    pub fn desired_gap(&self, v: f64, approach_rate: f64) -> f64 {
        self.s0
            + (v * self.time_gap + v * approach_rate / (2.0 * (self.a_max * self.b).sqrt())).max(0.0)
    }

    pub fn acceleration(&self, v: f64, leader: Option<&Leader>) -> f64 {
        let free = 1.0 - (v / self.v0).powf(self.delta);
        let interaction = leader.map_or(0.0, |l| {
            let s_star = self.desired_gap(v, v - l.speed);
            (s_star / l.gap).powi(2)
        });
        self.a_max * (free - interaction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GippsParams {
    pub accel_max: f64,
    /// Negative.
    pub decel_max: f64,
    /// Effective size of the leader: its length plus a standstill margin.
    pub leader_eff_length: f64,
    /// Follower's estimate of the leader's maximum deceleration, negative.
    pub leader_decel_est: f64,
    pub v_desired: f64,
    pub tau: f64,
}

impl Default for GippsParams {
    fn default() -> Self {
        GippsParams {
            accel_max: 1.7,
            decel_max: -3.4,
            leader_eff_length: 6.5,
            leader_decel_est: -3.2,
            v_desired: 80.0 / 3.6,
            tau: 0.67,
        }
    }
}

impl GippsParams {
    /// Speed the follower adopts one reaction time ahead.
    pub fn target_speed(&self, v: f64, leader: Option<&Leader>) -> f64 {
        let ratio = v / self.v_desired;
        let v_acc = v + 2.5 * self.accel_max * self.tau * (1.0 - ratio) * (0.025 + ratio).max(0.0).sqrt();
        let v_safe = leader.map_or(f64::INFINITY, |l| {
            let b = self.decel_max;
            let space = l.gap + l.length - self.leader_eff_length;
            let disc = b * b * self.tau * self.tau
                - b * (2.0 * space - v * self.tau - l.speed * l.speed / self.leader_decel_est);
            b * self.tau + disc.max(0.0).sqrt()
        });
        v_acc.min(v_safe).max(0.0)
    }

    pub fn acceleration(&self, v: f64, leader: Option<&Leader>) -> f64 {
        (self.target_speed(v, leader) - v) / self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FvdParams {
    pub alpha: f64,
    pub lambda0: f64,
    #[serde(rename = "V0")]
    pub v0: f64,
    /// Interaction length of the optimal-velocity function.
    pub b_len: f64,
    /// Form factor.
    pub beta: f64,
    /// Relative-speed term is active only below this gap.
    #[serde(rename = "Sc")]
    pub sc: f64,
}

impl Default for FvdParams {
    fn default() -> Self {
        FvdParams {
            alpha: 0.41,
            lambda0: 0.5,
            v0: 80.0 / 3.6,
            b_len: 15.0,
            beta: 1.5,
            sc: 100.0,
        }
    }
}

impl FvdParams {
    /// Optimal velocity, normalised so that V(0) = 0 and V(∞) = V0.
    pub fn optimal_velocity(&self, gap: f64) -> f64 {
        let tb = self.beta.tanh();
        self.v0 * ((gap / self.b_len - self.beta).tanh() + tb) / (1.0 + tb)
    }

    pub fn acceleration(&self, v: f64, leader: Option<&Leader>) -> f64 {
        match leader {
            None => self.alpha * (self.v0 - v),
            Some(l) => {
                let lambda = if l.gap <= self.sc { self.lambda0 } else { 0.0 };
                self.alpha * (self.optimal_velocity(l.gap) - v) + lambda * (l.speed - v)
            }
        }
    }
}

/// Krauss without the stochastic dawdling term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KraussParams {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub v_max: f64,
}

impl Default for KraussParams {
    fn default() -> Self {
        KraussParams {
            a: 2.6,
            b: 4.5,
            tau: 1.0,
            v_max: 80.0 / 3.6,
        }
    }
}

impl KraussParams {
    pub fn safe_speed(&self, v: f64, leader: &Leader) -> f64 {
        let vl = leader.speed;
        vl + (leader.gap - vl * self.tau) / ((v + vl) / (2.0 * self.b) + self.tau)
    }

    pub fn acceleration(&self, v: f64, leader: Option<&Leader>, dt: f64) -> f64 {
        let v_safe = leader.map_or(f64::INFINITY, |l| self.safe_speed(v, l));
        let v_next = (v + self.a * dt).min(self.v_max).min(v_safe).max(0.0);
        (v_next - v) / dt
    }
}

/// Wiedemann 99 thresholds. `v_desired` is the driver's desired speed, which
/// the model needs but does not list among CC0–CC9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "UPPERCASE")]
pub struct W99Params {
    pub cc0: f64,
    pub cc1: f64,
    pub cc2: f64,
    pub cc3: f64,
    pub cc4: f64,
    pub cc5: f64,
    pub cc6: f64,
    pub cc7: f64,
    pub cc8: f64,
    pub cc9: f64,
    #[serde(rename = "v_desired")]
    pub v_desired: f64,
}

impl Default for W99Params {
    fn default() -> Self {
        W99Params {
            cc0: 1.5,
            cc1: 0.9,
            cc2: 4.0,
            cc3: -8.0,
            cc4: -0.35,
            cc5: 0.35,
            cc6: 11.44,
            cc7: 0.25,
            cc8: 3.5,
            cc9: 1.5,
            v_desired: 80.0 / 3.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W99Regime {
    Free,
    Approaching,
    Following,
    Emergency,
}

const W99_REFERENCE_SPEED: f64 = 80.0 / 3.6;

impl W99Params {
    /// Regime and acceleration. `prev_accel` is the follower's acceleration in
    /// the previous step, which the following regime keeps (oscillation).
    pub fn evaluate(&self, v: f64, prev_accel: f64, leader: Option<&Leader>) -> (W99Regime, f64) {
        let a_free_max = self.cc8 + (self.cc9 - self.cc8) * v.min(W99_REFERENCE_SPEED) / W99_REFERENCE_SPEED;
        let to_desired = self.v_desired - v;
        let Some(l) = leader else {
            return (W99Regime::Free, a_free_max.min(to_desired));
        };
        let dx = l.gap;
        // positive when the leader pulls away
        let dv = l.speed - v;
        let sdxc = if l.speed <= 0.0 {
            self.cc0
        } else {
            let v_slower = if dv >= 0.0 || l.accel < -1.0 { v } else { l.speed };
            self.cc0 + self.cc1 * v_slower
        };
        let sdxo = sdxc + self.cc2;
        let sdxv = sdxo + self.cc3 * (dv - self.cc4);
        let sdv = self.cc6 * dx * dx / 10_000.0;
        let sdvc = if l.speed > 0.0 { self.cc4 - sdv } else { 0.0 };
        let sdvo = if v > self.cc5 { sdv + self.cc5 } else { sdv };

        if dv < sdvo && dx <= sdxc {
            let mut a = 0.0_f64;
            if v > 0.0 {
                if dv < 0.0 {
                    a = if dx > self.cc0 {
                        (l.accel + dv * dv / (self.cc0 - dx)).min(prev_accel)
                    } else {
                        (l.accel + 0.5 * (dv - sdvo)).min(prev_accel)
                    };
                }
                a = if a > -self.cc7 {
                    -self.cc7
                } else {
                    a.max(-10.0 + 0.5 * v.sqrt())
                };
            }
            (W99Regime::Emergency, a)
        } else if dv < sdvc && dx < sdxv {
            let denom = (sdxc - 0.1 - dx).min(-0.1);
            (W99Regime::Approaching, (0.5 * dv * dv / denom).max(-10.0))
        } else if dv < sdvo && dx < sdxo {
            let a = if prev_accel <= 0.0 {
                prev_accel.min(-self.cc7)
            } else {
                prev_accel.max(self.cc7).min(to_desired)
            };
            (W99Regime::Following, a)
        } else {
            let a = if dx > sdxc {
                let a = if dx < sdxo {
                    (dv * dv / (sdxo - dx)).min(a_free_max)
                } else {
                    a_free_max
                };
                a.min(to_desired)
            } else {
                0.0
            };
            (W99Regime::Free, a)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum CarFollowingParams {
    #[serde(rename = "IDM")]
    Idm(IdmParams),
    Gipps(GippsParams),
    #[serde(rename = "FVD")]
    Fvd(FvdParams),
    Krauss(KraussParams),
    W99(W99Params),
}

impl Default for CarFollowingParams {
    fn default() -> Self {
        CarFollowingParams::Idm(IdmParams::default())
    }
}

const IDM_NAMES: &[&str] = &["a_max", "b", "T", "s0", "delta", "v0"];
const GIPPS_NAMES: &[&str] = &[
    "accel_max",
    "decel_max",
    "leader_eff_length",
    "leader_decel_est",
    "v_desired",
    "tau",
];
const FVD_NAMES: &[&str] = &["alpha", "lambda0", "V0", "b_len", "beta", "Sc"];
const KRAUSS_NAMES: &[&str] = &["a", "b", "tau", "v_max"];
const W99_NAMES: &[&str] = &[
    "CC0", "CC1", "CC2", "CC3", "CC4", "CC5", "CC6", "CC7", "CC8", "CC9", "v_desired",
];

impl CarFollowingParams {
    pub fn model_name(&self) -> &'static str {
        match self {
            CarFollowingParams::Idm(_) => "IDM",
            CarFollowingParams::Gipps(_) => "Gipps",
            CarFollowingParams::Fvd(_) => "FVD",
            CarFollowingParams::Krauss(_) => "Krauss",
            CarFollowingParams::W99(_) => "W99",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            CarFollowingParams::Idm(_) => IDM_NAMES,
            CarFollowingParams::Gipps(_) => GIPPS_NAMES,
            CarFollowingParams::Fvd(_) => FVD_NAMES,
            CarFollowingParams::Krauss(_) => KRAUSS_NAMES,
            CarFollowingParams::W99(_) => W99_NAMES,
        }
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match (self, name) {
            (CarFollowingParams::Idm(p), "a_max") => &mut p.a_max,
            (CarFollowingParams::Idm(p), "b") => &mut p.b,
            (CarFollowingParams::Idm(p), "T") => &mut p.time_gap,
            (CarFollowingParams::Idm(p), "s0") => &mut p.s0,
            (CarFollowingParams::Idm(p), "delta") => &mut p.delta,
            (CarFollowingParams::Idm(p), "v0") => &mut p.v0,
            (CarFollowingParams::Gipps(p), "accel_max") => &mut p.accel_max,
            (CarFollowingParams::Gipps(p), "decel_max") => &mut p.decel_max,
            (CarFollowingParams::Gipps(p), "leader_eff_length") => &mut p.leader_eff_length,
            (CarFollowingParams::Gipps(p), "leader_decel_est") => &mut p.leader_decel_est,
            (CarFollowingParams::Gipps(p), "v_desired") => &mut p.v_desired,
            (CarFollowingParams::Gipps(p), "tau") => &mut p.tau,
            (CarFollowingParams::Fvd(p), "alpha") => &mut p.alpha,
            (CarFollowingParams::Fvd(p), "lambda0") => &mut p.lambda0,
            (CarFollowingParams::Fvd(p), "V0") => &mut p.v0,
            (CarFollowingParams::Fvd(p), "b_len") => &mut p.b_len,
            (CarFollowingParams::Fvd(p), "beta") => &mut p.beta,
            (CarFollowingParams::Fvd(p), "Sc") => &mut p.sc,
            (CarFollowingParams::Krauss(p), "a") => &mut p.a,
            (CarFollowingParams::Krauss(p), "b") => &mut p.b,
            (CarFollowingParams::Krauss(p), "tau") => &mut p.tau,
            (CarFollowingParams::Krauss(p), "v_max") => &mut p.v_max,
            (CarFollowingParams::W99(p), "CC0") => &mut p.cc0,
            (CarFollowingParams::W99(p), "CC1") => &mut p.cc1,
            (CarFollowingParams::W99(p), "CC2") => &mut p.cc2,
            (CarFollowingParams::W99(p), "CC3") => &mut p.cc3,
            (CarFollowingParams::W99(p), "CC4") => &mut p.cc4,
            (CarFollowingParams::W99(p), "CC5") => &mut p.cc5,
            (CarFollowingParams::W99(p), "CC6") => &mut p.cc6,
            (CarFollowingParams::W99(p), "CC7") => &mut p.cc7,
            (CarFollowingParams::W99(p), "CC8") => &mut p.cc8,
            (CarFollowingParams::W99(p), "CC9") => &mut p.cc9,
            (CarFollowingParams::W99(p), "v_desired") => &mut p.v_desired,
            _ => return None,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let model = self.model_name();
        let slot = self
            .slot(name)
            .ok_or_else(|| Error::UnknownParameter(format!("{model}.{name}")))?;
        *slot = value;
        Ok(())
    }

    pub fn desired_speed(&self) -> f64 {
        match self {
            CarFollowingParams::Idm(p) => p.v0,
            CarFollowingParams::Gipps(p) => p.v_desired,
            CarFollowingParams::Fvd(p) => p.v0,
            CarFollowingParams::Krauss(p) => p.v_max,
            CarFollowingParams::W99(p) => p.v_desired,
        }
    }

    pub fn with_desired_speed(mut self, v: f64) -> Self {
        match &mut self {
            CarFollowingParams::Idm(p) => p.v0 = v,
            CarFollowingParams::Gipps(p) => p.v_desired = v,
            CarFollowingParams::Fvd(p) => p.v0 = v,
            CarFollowingParams::Krauss(p) => p.v_max = v,
            CarFollowingParams::W99(p) => p.v_desired = v,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{}: {what}", self.model_name())));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match self {
            CarFollowingParams::Idm(p) => {
                if !(pos(p.a_max) && pos(p.b) && pos(p.time_gap) && pos(p.s0) && pos(p.delta) && pos(p.v0)) {
                    return bad("a_max, b, T, s0, delta and v0 must be positive");
                }
            }
            CarFollowingParams::Gipps(p) => {
                if !(pos(p.accel_max) && pos(p.tau) && pos(p.v_desired) && p.leader_eff_length >= 0.0) {
                    return bad("accel_max, tau and v_desired must be positive");
                }
                if !(p.decel_max < 0.0 && p.leader_decel_est < 0.0) {
                    return bad("decelerations must be negative");
                }
            }
            CarFollowingParams::Fvd(p) => {
                if !(pos(p.alpha) && p.lambda0 >= 0.0 && pos(p.v0) && pos(p.b_len) && pos(p.sc)) {
                    return bad("alpha, V0, b_len and Sc must be positive, lambda0 non-negative");
                }
            }
            CarFollowingParams::Krauss(p) => {
                if !(pos(p.a) && pos(p.b) && pos(p.tau) && pos(p.v_max)) {
                    return bad("a, b, tau and v_max must be positive");
                }
            }
            CarFollowingParams::W99(p) => {
                if !(pos(p.cc1) && pos(p.cc7) && pos(p.cc8) && pos(p.cc9) && pos(p.v_desired) && p.cc0 >= 0.0) {
                    return bad("CC1, CC7, CC8, CC9 and v_desired must be positive, CC0 non-negative");
                }
            }
        }
        Ok(())
    }

    /// Unclamped model acceleration.
    pub(crate) fn raw_acceleration(&self, v: f64, prev_accel: f64, leader: Option<&Leader>, dt: f64) -> f64 {
        match self {
            CarFollowingParams::Idm(p) => p.acceleration(v, leader),
            CarFollowingParams::Gipps(p) => p.acceleration(v, leader),
            CarFollowingParams::Fvd(p) => p.acceleration(v, leader),
            CarFollowingParams::Krauss(p) => p.acceleration(v, leader, dt),
            CarFollowingParams::W99(p) => p.evaluate(v, prev_accel, leader).1,
        }
    }

    pub(crate) fn clamped_acceleration(&self, v: f64, prev_accel: f64, leader: Option<&Leader>, dt: f64) -> f64 {
        let a = self.raw_acceleration(v, prev_accel, leader, dt);
        a.max(-v / dt)
    }
}

/// Acceleration of `follower` under `model`.
///
/// A leader with a non-positive gap is an unresolved collision and is
/// rejected; the caller has to separate the vehicles first.
pub fn car_following_acceleration(
    model: &CarFollowingParams,
    follower: &VehicleState,
    leader: Option<&Leader>,
    dt: f64,
) -> Result<f64> {
    if let Some(l) = leader {
        if !(l.gap > 0.0) {
            return Err(Error::Degenerate(format!(
                "leader gap {} m is not positive",
                l.gap
            )));
        }
    }
    if !(dt > 0.0) {
        return Err(Error::Degenerate("dt must be positive".into()));
    }
    Ok(model.clamped_acceleration(follower.speed, follower.acceleration, leader, dt))
}
