//! Despiking and moving-average smoothing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FieldDataset;
use crate::schema::KMH_PER_MS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Width of the centered moving average, s. 0 disables smoothing.
    pub smoothing_window: f64,
    /// A sample that differs from both neighbours by more than this, in the
    /// same direction, is a spike. m/s per step.
    pub max_speed_jump: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            smoothing_window: 0.5,
            max_speed_jump: 5.0,
        }
    }
}

pub fn preprocess(d: &FieldDataset, cfg: &PreprocessConfig) -> FieldDataset {
    preprocess_flagged(d, cfg).0
}

/// Like [`preprocess`], also returning the record indices whose subject
/// speed was replaced as a spike.
pub fn preprocess_flagged(d: &FieldDataset, cfg: &PreprocessConfig) -> (FieldDataset, Vec<usize>) {
    let mut out = d.clone();
    let jump_kmh = cfg.max_speed_jump * KMH_PER_MS;
    let times: Vec<f64> = d.records.iter().map(|r| r.timestamp).collect();

    let mut speed: Vec<f64> = d.records.iter().map(|r| r.subject.speed_kmh).collect();
    let flagged = despike(&times, &mut speed, jump_kmh);
    let half = half_window(d, cfg.smoothing_window);
    let speed = moving_average(&speed, half);
    let accel = moving_average(&d.records.iter().map(|r| r.subject.acceleration).collect::<Vec<_>>(), half);
    for (i, r) in out.records.iter_mut().enumerate() {
        r.subject.speed_kmh = speed[i];
        r.subject.acceleration = accel[i];
    }

    // per surrounding vehicle, over the records in which it appears
    let mut tracks: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, r) in d.records.iter().enumerate() {
        for (k, s) in r.surrounding.iter().enumerate() {
            tracks.entry(s.vehicle_id.as_str()).or_default().push((i, k));
        }
    }
    for samples in tracks.values() {
        let get = |f: fn(&crate::schema::SurroundingObservation) -> f64| -> Vec<f64> {
            samples.iter().map(|&(i, k)| f(&d.records[i].surrounding[k])).collect()
        };
        let t: Vec<f64> = samples.iter().map(|&(i, _)| times[i]).collect();
        let mut v = get(|s| s.speed_kmh);
        despike(&t, &mut v, jump_kmh);
        let v = moving_average(&v, half);
        let lon = moving_average(&get(|s| s.rel_longitudinal), half);
        let lat = moving_average(&get(|s| s.rel_lateral), half);
        for (n, &(i, k)) in samples.iter().enumerate() {
            let s = &mut out.records[i].surrounding[k];
            s.speed_kmh = v[n];
            s.rel_longitudinal = lon[n];
            s.rel_lateral = lat[n];
        }
    }
    (out, flagged)
}

fn half_window(d: &FieldDataset, window: f64) -> usize {
    match d.median_interval() {
        Some(dt) if window > 0.0 => ((window / dt).round() as usize) / 2,
        _ => 0,
    }
}

/// Replace isolated spikes by linear interpolation of their neighbours.
fn despike(t: &[f64], v: &mut [f64], jump: f64) -> Vec<usize> {
    if !(jump > 0.0) {
        return Vec::new();
    }
    let orig = v.to_vec();
    let mut flagged = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        let (a, b) = (orig[i] - orig[i - 1], orig[i] - orig[i + 1]);
        if a.abs() > jump && b.abs() > jump && a.signum() == b.signum() {
            let w = (t[i] - t[i - 1]) / (t[i + 1] - t[i - 1]);
            v[i] = orig[i - 1] + w * (orig[i + 1] - orig[i - 1]);
            flagged.push(i);
        }
    }
    flagged
}

/// Centered moving average over `2 * half + 1` samples, shrunk at the ends.
fn moving_average(v: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return v.to_vec();
    }
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fielddata::DataSource;
    use crate::schema::{DetectionRecord, SubjectObservation};

    fn series(speeds_ms: &[f64]) -> FieldDataset {
        let records = speeds_ms
            .iter()
            .enumerate()
            .map(|(i, v)| DetectionRecord {
                timestamp: i as f64 * 0.1,
                road_name: "R".into(),
                speed_limit_kmh: 80.0,
                subject: SubjectObservation {
                    speed_kmh: v * KMH_PER_MS,
                    yaw_rate: 0.0,
                    longitude: 0.0,
                    latitude: 0.0,
                    acceleration: 0.0,
                    lane_id: 1,
                    lane_distance: 0.0,
                },
                surrounding: vec![],
                extra: vec![],
            })
            .collect();
        FieldDataset::new(records, DataSource::Field)
    }

    #[test]
    fn zero_window_is_identity() {
        let d = series(&[10.0, 11.0, 12.5, 12.0, 11.0]);
        let cfg = PreprocessConfig {
            smoothing_window: 0.0,
            ..PreprocessConfig::default()
        };
        assert_eq!(preprocess(&d, &cfg), d);
    }

    #[test]
    fn constant_series_is_fixed_point() {
        let d = series(&[15.0; 40]);
        for w in [0.3, 0.5, 1.0, 2.0] {
            let cfg = PreprocessConfig {
                smoothing_window: w,
                ..PreprocessConfig::default()
            };
            let p = preprocess(&d, &cfg);
            for r in &p.records {
                assert!((r.subject.speed_kmh - 54.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_spike_is_interpolated() {
        let mut v: Vec<f64> = (0..10).map(|i| 10.0 + 0.2 * i as f64).collect();
        v[5] += 30.0;
        let d = series(&v);
        let cfg = PreprocessConfig {
            smoothing_window: 0.0,
            ..PreprocessConfig::default()
        };
        let (p, flagged) = preprocess_flagged(&d, &cfg);
        assert_eq!(flagged, vec![5]);
        let expected = 0.5 * (v[4] + v[6]) * KMH_PER_MS;
        assert!((p.records[5].subject.speed_kmh - expected).abs() < 1e-9);
        assert_eq!(p.len(), d.len());
    }
}
