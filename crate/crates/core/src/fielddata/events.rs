//! Interaction events seen from the subject vehicle.
//!
//! Lane IDs are debounced: a lane is only accepted once it has been held for
//! `debounce` seconds, so sensor flicker such as 2→3→2 produces nothing. A
//! gap in a vehicle's observations longer than `max_gap` starts a new track.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::FieldDataset;
use crate::schema::DetectionRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventConfig {
    /// s
    pub debounce: f64,
    /// Observation gap that splits a track, s.
    pub max_gap: f64,
    /// Cut-ins further ahead than this are ignored, m.
    pub cutin_front_max: f64,
    /// At most one cut-in per intruder within this window, s.
    pub cutin_window: f64,
    /// Largest spacing that counts as following, m.
    pub follow_max_gap: f64,
    /// s
    pub min_episode: f64,
    /// Headway samples below this follower speed are dropped, m/s.
    pub min_speed: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig {
            debounce: 1.0,
            max_gap: 1.0,
            cutin_front_max: 50.0,
            cutin_window: 10.0,
            follow_max_gap: 120.0,
            min_episode: 5.0,
            min_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Subject,
    Vehicle(String),
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Subject => f.write_str("subject"),
            Actor::Vehicle(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub actor: Actor,
    /// Last sample before the new lane was reported.
    pub start_time: f64,
    /// First sample in the new lane; neighbours are measured here.
    pub end_time: f64,
    pub from_lane: u32,
    pub to_lane: u32,
    /// Target-lane leader minus follower position; `None` unless both
    /// were observed.
    pub lc_distance: Option<f64>,
}

impl LaneChangeEvent {
    pub fn partially_observed(&self) -> bool {
        self.lc_distance.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInEvent {
    pub intruder: String,
    pub time: f64,
    pub entry_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarFollowingEpisode {
    pub follower: Actor,
    pub leader: Actor,
    pub start_time: f64,
    pub end_time: f64,
    /// Spacing over follower speed, s.
    pub headway_series: Vec<f64>,
}

impl CarFollowingEpisode {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventSet {
    pub lane_changes: Vec<LaneChangeEvent>,
    pub cut_ins: Vec<CutInEvent>,
    pub episodes: Vec<CarFollowingEpisode>,
}

pub fn extract_events(d: &FieldDataset, cfg: &EventConfig) -> EventSet {
    EventSet {
        lane_changes: detect_lane_changes(d, cfg),
        cut_ins: detect_cut_ins(d, cfg),
        episodes: detect_car_following(d, cfg),
    }
}

/// One observation of an actor: record index, time, lane.
#[derive(Debug, Clone, Copy)]
struct Sample {
    record: usize,
    time: f64,
    lane: u32,
}

fn subject_samples(d: &FieldDataset) -> Vec<Sample> {
    d.records
        .iter()
        .enumerate()
        .map(|(i, r)| Sample {
            record: i,
            time: r.timestamp,
            lane: r.subject.lane_id,
        })
        .collect()
}

fn surrounding_samples(d: &FieldDataset) -> BTreeMap<&str, Vec<Sample>> {
    let mut out: BTreeMap<&str, Vec<Sample>> = BTreeMap::new();
    for (i, r) in d.records.iter().enumerate() {
        for s in &r.surrounding {
            out.entry(s.vehicle_id.as_str()).or_default().push(Sample {
                record: i,
                time: r.timestamp,
                lane: s.lane_id,
            });
        }
    }
    out
}

fn split_tracks(samples: &[Sample], max_gap: f64) -> Vec<&[Sample]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || samples[i].time - samples[i - 1].time > max_gap {
            out.push(&samples[start..i]);
            start = i;
        }
    }
    out.retain(|t| !t.is_empty());
    out
}

/// Debounced lane transitions in one track, as (from, to, index of the last
/// sample before the new lane, index of the first sample in it).
fn debounced_transitions(track: &[Sample], debounce: f64, dt: f64) -> Vec<(u32, u32, usize, usize)> {
    // runs of constant lane: (lane, first index, one past last)
    let mut runs: Vec<(u32, usize, usize)> = Vec::new();
    for (i, s) in track.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == s.lane => r.2 = i + 1,
            _ => runs.push((s.lane, i, i + 1)),
        }
    }
    let duration = |k: usize| {
        let (_, a, b) = runs[k];
        if k + 1 < runs.len() {
            track[runs[k + 1].1].time - track[a].time
        } else {
            track[b - 1].time - track[a].time + dt
        }
    };
    let stable: Vec<usize> = (0..runs.len()).filter(|&k| duration(k) >= debounce - 1e-9).collect();
    stable
        .windows(2)
        .filter(|w| runs[w[0]].0 != runs[w[1]].0)
        .map(|w| {
            let first_new = runs[w[1]].1;
            (runs[w[0]].0, runs[w[1]].0, first_new - 1, first_new)
        })
        .collect()
}

/// Spacing to the nearest target-lane vehicle ahead and behind of a point at
/// `rel`, given (lane, relative position) of everybody else.
fn lc_gap(others: impl Iterator<Item = (u32, f64)>, lane: u32, rel: f64) -> Option<f64> {
    let mut ahead: Option<f64> = None;
    let mut behind: Option<f64> = None;
    for (l, x) in others {
        if l != lane {
            continue;
        }
        let d = x - rel;
        if d > 0.0 {
            ahead = Some(ahead.map_or(d, |a| a.min(d)));
        } else {
            behind = Some(behind.map_or(d, |b| b.max(d)));
        }
    }
    Some(ahead? - behind?)
}

fn interval(d: &FieldDataset) -> f64 {
    d.median_interval().unwrap_or(0.1)
}

fn subject_lane_changes(d: &FieldDataset, cfg: &EventConfig) -> Vec<LaneChangeEvent> {
    let samples = subject_samples(d);
    let dt = interval(d);
    let mut out = Vec::new();
    for track in split_tracks(&samples, cfg.max_gap) {
        for (from, to, a, b) in debounced_transitions(track, cfg.debounce, dt) {
            let r = &d.records[track[b].record];
            let others = r.surrounding.iter().map(|s| (s.lane_id, s.rel_longitudinal));
            out.push(LaneChangeEvent {
                actor: Actor::Subject,
                start_time: track[a].time,
                end_time: track[b].time,
                from_lane: from,
                to_lane: to,
                lc_distance: lc_gap(others, to, 0.0),
            });
        }
    }
    out
}

/// Lane changes of surrounding vehicles with the record index of the
/// transition sample.
fn surrounding_lane_changes(d: &FieldDataset, cfg: &EventConfig) -> Vec<(LaneChangeEvent, usize)> {
    let dt = interval(d);
    let mut out = Vec::new();
    for (id, samples) in surrounding_samples(d) {
        for track in split_tracks(&samples, cfg.max_gap) {
            for (from, to, a, b) in debounced_transitions(track, cfg.debounce, dt) {
                let ri = track[b].record;
                let r = &d.records[ri];
                let me = find(r, id).expect("sample refers to this record");
                let others = r
                    .surrounding
                    .iter()
                    .filter(|s| s.vehicle_id != id)
                    .map(|s| (s.lane_id, s.rel_longitudinal))
                    .chain(std::iter::once((r.subject.lane_id, 0.0)));
                out.push((
                    LaneChangeEvent {
                        actor: Actor::Vehicle(id.to_string()),
                        start_time: track[a].time,
                        end_time: track[b].time,
                        from_lane: from,
                        to_lane: to,
                        lc_distance: lc_gap(others, to, me.rel_longitudinal),
                    },
                    ri,
                ));
            }
        }
    }
    out
}

fn find<'a>(r: &'a DetectionRecord, id: &str) -> Option<&'a crate::schema::SurroundingObservation> {
    r.surrounding.iter().find(|s| s.vehicle_id == id)
}

fn sort_lane_changes(v: &mut [LaneChangeEvent]) {
    v.sort_by(|a, b| a.end_time.total_cmp(&b.end_time).then_with(|| a.actor.cmp(&b.actor)));
}

/// Lane changes of the subject and of every surrounding vehicle, ordered by
/// time then actor.
pub fn detect_lane_changes(d: &FieldDataset, cfg: &EventConfig) -> Vec<LaneChangeEvent> {
    let mut out = subject_lane_changes(d, cfg);
    out.extend(surrounding_lane_changes(d, cfg).into_iter().map(|(e, _)| e));
    sort_lane_changes(&mut out);
    out
}

/// Surrounding vehicles moving from an adjacent lane into the subject's lane
/// ahead of it.
pub fn detect_cut_ins(d: &FieldDataset, cfg: &EventConfig) -> Vec<CutInEvent> {
    let mut candidates: Vec<CutInEvent> = surrounding_lane_changes(d, cfg)
        .into_iter()
        .filter_map(|(e, ri)| {
            let r = &d.records[ri];
            let Actor::Vehicle(id) = &e.actor else { return None };
            let rel = find(r, id)?.rel_longitudinal;
            let adjacent = e.from_lane.abs_diff(e.to_lane) == 1;
            (adjacent && e.to_lane == r.subject.lane_id && rel > 0.0 && rel <= cfg.cutin_front_max).then(|| {
                CutInEvent {
                    intruder: id.clone(),
                    time: e.end_time,
                    entry_gap: rel,
                }
            })
        })
        .collect();
    candidates.sort_by(|a, b| a.intruder.cmp(&b.intruder).then(a.time.total_cmp(&b.time)));
    let mut out: Vec<CutInEvent> = Vec::new();
    let mut last: Option<(String, f64)> = None;
    for c in candidates {
        if let Some((id, t)) = &last {
            if *id == c.intruder && c.time - t < cfg.cutin_window {
                continue;
            }
        }
        last = Some((c.intruder.clone(), c.time));
        out.push(c);
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then_with(|| a.intruder.cmp(&b.intruder)));
    out
}

/// One follower sample: time, lane, leader and spacing, follower speed m/s.
struct FollowSample {
    time: f64,
    lane: u32,
    leader: Option<(Actor, f64)>,
    speed: f64,
}

fn nearest_ahead<'a>(cands: impl Iterator<Item = (Actor, u32, f64)> + 'a, lane: u32, rel: f64, max_gap: f64) -> Option<(Actor, f64)> {
    cands
        .filter(|(_, l, x)| *l == lane && *x - rel > 0.0 && *x - rel <= max_gap)
        .map(|(a, _, x)| (a, x - rel))
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)))
}

fn episodes_of(follower: Actor, samples: &[FollowSample], cfg: &EventConfig, out: &mut Vec<CarFollowingEpisode>) {
    let mut start = 0;
    while start < samples.len() {
        let Some((leader, _)) = &samples[start].leader else {
            start += 1;
            continue;
        };
        let mut end = start + 1;
        while end < samples.len()
            && samples[end].lane == samples[start].lane
            && samples[end].time - samples[end - 1].time <= cfg.max_gap
            && samples[end].leader.as_ref().is_some_and(|(l, _)| l == leader)
        {
            end += 1;
        }
        let seg = &samples[start..end];
        if seg[seg.len() - 1].time - seg[0].time >= cfg.min_episode - 1e-9 {
            out.push(CarFollowingEpisode {
                follower: follower.clone(),
                leader: leader.clone(),
                start_time: seg[0].time,
                end_time: seg[seg.len() - 1].time,
                headway_series: seg
                    .iter()
                    .filter(|s| s.speed >= cfg.min_speed)
                    .map(|s| s.leader.as_ref().expect("in segment").1 / s.speed)
                    .collect(),
            });
        }
        start = end;
    }
}

/// Maximal intervals in which an actor follows the same leader in its own
/// lane within `follow_max_gap`, lasting at least `min_episode`.
pub fn detect_car_following(d: &FieldDataset, cfg: &EventConfig) -> Vec<CarFollowingEpisode> {
    let mut out = Vec::new();

    let subject: Vec<FollowSample> = d
        .records
        .iter()
        .map(|r| FollowSample {
            time: r.timestamp,
            lane: r.subject.lane_id,
            leader: nearest_ahead(
                r.surrounding
                    .iter()
                    .map(|s| (Actor::Vehicle(s.vehicle_id.clone()), s.lane_id, s.rel_longitudinal)),
                r.subject.lane_id,
                0.0,
                cfg.follow_max_gap,
            ),
            speed: r.subject.speed_ms(),
        })
        .collect();
    episodes_of(Actor::Subject, &subject, cfg, &mut out);

    for (id, samples) in surrounding_samples(d) {
        let series: Vec<FollowSample> = samples
            .iter()
            .map(|smp| {
                let r = &d.records[smp.record];
                let me = find(r, id).expect("sample refers to this record");
                let others = r
                    .surrounding
                    .iter()
                    .filter(|s| s.vehicle_id != id)
                    .map(|s| (Actor::Vehicle(s.vehicle_id.clone()), s.lane_id, s.rel_longitudinal))
                    .chain(std::iter::once((Actor::Subject, r.subject.lane_id, 0.0)));
                FollowSample {
                    time: smp.time,
                    lane: me.lane_id,
                    leader: nearest_ahead(others, me.lane_id, me.rel_longitudinal, cfg.follow_max_gap),
                    speed: me.speed_ms(),
                }
            })
            .collect();
        episodes_of(Actor::Vehicle(id.to_string()), &series, cfg, &mut out);
    }
    out.sort_by(|a, b| {
        a.start_time
            .total_cmp(&b.start_time)
            .then_with(|| a.follower.cmp(&b.follower))
            .then_with(|| a.leader.cmp(&b.leader))
    });
    out
}

/// All events in one table: `event,actor,other,start_time,end_time,from_lane,to_lane,value`.
pub fn export_events_csv<W: Write>(events: &EventSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["event", "actor", "other", "start_time", "end_time", "from_lane", "to_lane", "value"])?;
    for e in &events.lane_changes {
        w.write_record([
            "lane_change".to_string(),
            e.actor.to_string(),
            String::new(),
            e.start_time.to_string(),
            e.end_time.to_string(),
            e.from_lane.to_string(),
            e.to_lane.to_string(),
            e.lc_distance.map_or(String::new(), |x| x.to_string()),
        ])?;
    }
    for c in &events.cut_ins {
        w.write_record([
            "cut_in".to_string(),
            c.intruder.clone(),
            "subject".to_string(),
            c.time.to_string(),
            c.time.to_string(),
            String::new(),
            String::new(),
            c.entry_gap.to_string(),
        ])?;
    }
    for p in &events.episodes {
        let mean = if p.headway_series.is_empty() {
            String::new()
        } else {
            (p.headway_series.iter().sum::<f64>() / p.headway_series.len() as f64).to_string()
        };
        w.write_record([
            "car_following".to_string(),
            p.follower.to_string(),
            p.leader.to_string(),
            p.start_time.to_string(),
            p.end_time.to_string(),
            String::new(),
            String::new(),
            mean,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<event csv>", e))?;
    Ok(())
}
