use avcal::fielddata::{
    detect_cut_ins, detect_lane_changes, export_csv, parse_field_data, Actor, DataSource, EventConfig, FieldDataset,
    ParseOptions,
};
use avcal::schema::{DetectionRecord, SubjectObservation, SurroundingObservation};
use proptest::prelude::*;

const DT: f64 = 0.1;

fn subject(lane: u32) -> SubjectObservation {
    SubjectObservation {
        speed_kmh: 54.0,
        yaw_rate: 0.0,
        longitude: 0.0,
        latitude: 0.0,
        acceleration: 0.0,
        lane_id: lane,
        lane_distance: 0.0,
    }
}

fn other(id: &str, lane: u32, rel: f64) -> SurroundingObservation {
    SurroundingObservation {
        vehicle_id: id.into(),
        lane_id: lane,
        rel_longitudinal: rel,
        rel_lateral: 0.0,
        speed_kmh: 54.0,
        heading_deg: 0.0,
        extra: Vec::new(),
    }
}

fn record(k: usize, subject_lane: u32, surrounding: Vec<SurroundingObservation>) -> DetectionRecord {
    DetectionRecord {
        timestamp: k as f64 * DT,
        road_name: "R".into(),
        speed_limit_kmh: 80.0,
        subject: subject(subject_lane),
        surrounding,
        extra: Vec::new(),
    }
}

fn dataset(records: Vec<DetectionRecord>) -> FieldDataset {
    FieldDataset::new(records, DataSource::Field)
}

prop_compose! {
    fn observation(id: usize)(
        lane in 1u32..=4,
        rel in -150.0f64..150.0,
        lat in -10.0f64..10.0,
        speed in 0.0f64..150.0,
        heading in -30.0f64..30.0,
    ) -> SurroundingObservation {
        SurroundingObservation {
            vehicle_id: format!("v{id}"),
            lane_id: lane,
            rel_longitudinal: rel,
            rel_lateral: lat,
            speed_kmh: speed,
            heading_deg: heading,
            extra: Vec::new(),
        }
    }
}

fn any_record() -> impl Strategy<Value = DetectionRecord> {
    let others = (0usize..4).prop_flat_map(|n| (0..n).map(observation).collect::<Vec<_>>());
    (
        0.0f64..150.0,
        -1.0f64..1.0,
        -3.0f64..3.0,
        1u32..=4,
        -1.5f64..1.5,
        0.0f64..1e-3,
        others,
    )
        .prop_map(|(speed, yaw, acc, lane, off, lon, surrounding)| DetectionRecord {
            timestamp: 0.0,
            road_name: String::new(),
            speed_limit_kmh: 80.0,
            subject: SubjectObservation {
                speed_kmh: speed,
                yaw_rate: yaw,
                longitude: lon,
                latitude: lon / 2.0,
                acceleration: acc,
                lane_id: lane,
                lane_distance: off,
            },
            surrounding,
            extra: Vec::new(),
        })
}

proptest! {
    #[test]
    fn csv_round_trip_is_lossless(mut records in prop::collection::vec(any_record(), 1..25)) {
        for (k, r) in records.iter_mut().enumerate() {
            r.timestamp = k as f64 * DT;
            r.road_name = format!("road {}", k / 5);
        }
        let d = dataset(records);
        let mut buf = Vec::new();
        export_csv(&d, &mut buf).unwrap();
        let back = parse_field_data(buf.as_slice(), &ParseOptions::default()).unwrap();
        prop_assert_eq!(back.records, d.records);
    }

    /// Lanes held for at least the debounce time: every boundary between
    /// segments is one lane change, a one-sample blip inside a segment is
    /// not.
    #[test]
    fn lane_changes_match_segment_boundaries(
        segments in prop::collection::vec((1u32..=4, 10usize..40), 1..8),
        blip in any::<bool>(),
    ) {
        let mut lanes: Vec<u32> = Vec::new();
        let mut expected = Vec::new();
        for (lane, len) in &segments {
            if let Some(&prev) = lanes.last() {
                if prev != *lane {
                    expected.push((prev, *lane, lanes.len()));
                }
            }
            let start = lanes.len();
            lanes.extend(std::iter::repeat_n(*lane, *len));
            if blip && *len >= 30 {
                lanes[start + 15] = if *lane == 1 { 2 } else { lane - 1 };
            }
        }
        let d = dataset(lanes.iter().enumerate().map(|(k, &l)| record(k, l, vec![])).collect());
        let got = detect_lane_changes(&d, &EventConfig::default());
        prop_assert_eq!(got.len(), expected.len());
        for (e, (from, to, first_new)) in got.iter().zip(expected) {
            prop_assert_eq!(&e.actor, &Actor::Subject);
            prop_assert_eq!((e.from_lane, e.to_lane), (from, to));
            prop_assert!((e.end_time - first_new as f64 * DT).abs() < 1e-9);
            prop_assert!((e.start_time - (first_new - 1) as f64 * DT).abs() < 1e-9);
            prop_assert!(e.partially_observed());
        }
    }

    /// Intruders moving into the subject's lane: those ending up within the
    /// cut-in distance ahead count, the others do not.
    #[test]
    fn cut_ins_are_counted(rels in prop::collection::vec(-40.0f64..90.0, 1..6)) {
        // Each intruder drives in lane 2 for 2 s, then in lane 1 for 2 s,
        // starting 15 s after the previous one.
        let subject_lane = 1;
        let per = 150;
        let n = per * rels.len() + 40;
        let mut records: Vec<DetectionRecord> = (0..n).map(|k| record(k, subject_lane, vec![])).collect();
        for (i, &rel) in rels.iter().enumerate() {
            let t0 = i * per;
            for k in t0..t0 + 40 {
                let lane = if k < t0 + 20 { 2 } else { subject_lane };
                records[k].surrounding.push(other(&format!("c{i}"), lane, rel));
            }
        }
        let got = detect_cut_ins(&dataset(records), &EventConfig::default());
        let expected: Vec<String> = rels
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0 && r <= 50.0)
            .map(|(i, _)| format!("c{i}"))
            .collect();
        let ids: Vec<String> = got.iter().map(|c| c.intruder.clone()).collect();
        prop_assert_eq!(ids, expected);
    }
}
