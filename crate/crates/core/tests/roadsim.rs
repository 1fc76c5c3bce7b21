use std::collections::BTreeMap;

use avcal::metrics::{compute_traffic_mops, MetricConfig, MopId};
use avcal::pipeline::simulate_dataset;
use avcal::roadsim::spawn::spawn_counts;
use avcal::roadsim::{
    run_scenario, CarFollowingParams, Detector, DetectionRange, Frame, PoissonArrivals, RoadNetwork, ScenarioConfig,
    VehicleClass, VehicleId, VehicleKind, VehicleSpec, VehicleState, World,
};
use avcal::seed::rng_for;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn idm_class() -> VehicleClass {
    VehicleClass {
        cf: CarFollowingParams::Idm(Default::default()),
        ..VehicleClass::default()
    }
}

#[test]
fn platoon_converges_to_leader_speed() {
    let cfg = ScenarioConfig {
        network: RoadNetwork::corridor(1, 20_000.0, 1, 120.0, 1),
        entrance_inputs: BTreeMap::new(),
        total_time: 300.0,
        warmup_time: 0.0,
        ..ScenarioConfig::default()
    };
    let mut w = World::without_demand(&cfg).unwrap();
    let spec = |position: f64, speed: f64, fixed: Option<f64>| VehicleSpec {
        kind: VehicleKind::Background,
        route: vec!["L1".into()],
        lane: 1,
        position,
        speed,
        class: idm_class(),
        fixed_speed: fixed,
    };
    let leader_speed = 20.0;
    w.insert_vehicle(spec(500.0, leader_speed, Some(leader_speed))).unwrap();
    let mut ids = Vec::new();
    for (pos, v) in [(460.0, 15.0), (420.0, 25.0), (370.0, 10.0), (330.0, 22.0)] {
        ids.push(w.insert_vehicle(spec(pos, v, None)).unwrap());
    }
    for _ in 0..cfg.step_count() {
        w.step();
    }
    for id in ids {
        let v = w.vehicle(id).unwrap().speed;
        assert!((v - leader_speed).abs() < 0.05, "{id}: {v}");
    }
    assert_eq!(w.summary().collisions, 0);
}

#[test]
fn spawn_counts_are_poisson() {
    // 0.2 veh/s counted in 10 s windows: mean 2 per window.
    let rate = 720.0;
    let window = 10.0;
    let dt = 0.1;
    let per_step = spawn_counts(rate, dt, 40_000.0, rng_for(11, &[1]));
    let per_window: Vec<usize> = per_step.chunks((window / dt) as usize).map(|c| c.iter().sum()).collect();
    let n = per_window.len() as f64;
    let law = Poisson::new(rate / 3600.0 * window).unwrap();
    let top = 7;
    let mut observed = vec![0.0; top + 1];
    for &c in &per_window {
        observed[c.min(top)] += 1.0;
    }
    let mut expected: Vec<f64> = (0..top).map(|k| n * law.pmf(k as u64)).collect();
    expected.push(n - expected.iter().sum::<f64>());
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(top as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square {chi2}, p = {p}");
}

#[test]
fn inter_arrival_gaps_are_exponential() {
    let rate_per_s = 900.0 / 3600.0;
    let mut a = PoissonArrivals::new(900.0, rng_for(12, &[1]));
    let times = a.arrivals(0.0, 20_000.0);
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len() as f64;
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let f = 1.0 - (-rate_per_s * g).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at the 1% level.
    let critical = 1.6276 / n.sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
    let mean = gaps.iter().sum::<f64>() / n;
    assert!((mean * rate_per_s - 1.0).abs() < 0.05);
}

fn density_at(input: f64) -> f64 {
    let mut sc = ScenarioConfig::default();
    for v in sc.entrance_inputs.values_mut() {
        *v = input;
    }
    sc.total_time = 1200.0;
    sc.warmup_time = 300.0;
    sc.seed = 4;
    let d = simulate_dataset(&sc).unwrap().dataset;
    compute_traffic_mops(&d, &MetricConfig::default())
        .unwrap()
        .get(&MopId::AvgDensity)
        .unwrap()
}

#[test]
fn density_increases_with_demand() {
    let d: Vec<f64> = [300.0, 600.0, 900.0, 1200.0].map(density_at).to_vec();
    assert!(d.windows(2).all(|w| w[1] > w[0]), "{d:?}");
}

#[test]
fn default_scenario_runs_without_collisions() {
    for seed in 0..3 {
        let sc = ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        };
        let log = run_scenario(&sc).unwrap();
        assert_eq!(log.summary.collisions, 0, "seed {seed}");
        assert!(!log.summary.is_gridlock());
        let subject_frames = log.frames.iter().filter(|f| !f.warmup && f.subject().is_some()).count();
        // The subject re-enters a couple of seconds after each trip ends.
        let post = sc.step_count() - sc.warmup_steps();
        assert!(subject_frames as f64 > 0.95 * post as f64, "{subject_frames} of {post}");
    }
}

const LINK: f64 = 500.0;

fn vehicle(id: u64, link: usize, lane: u32, position: f64, kind: VehicleKind) -> VehicleState {
    VehicleState {
        id: VehicleId(id),
        link,
        lane,
        position,
        kind,
        ..VehicleState::at_speed(12.0)
    }
}

prop_compose! {
    fn frame()(
        subject in (0usize..4, 1u32..=3, 0.0..LINK),
        others in prop::collection::vec((0usize..4, 1u32..=3, 0.0..LINK), 0..30),
    ) -> Frame {
        let mut vehicles = vec![vehicle(0, subject.0, subject.1, subject.2, VehicleKind::Subject)];
        for (i, (link, lane, pos)) in others.into_iter().enumerate() {
            vehicles.push(vehicle(i as u64 + 1, link, lane, pos, VehicleKind::Background));
        }
        Frame { step: 0, time: 0.0, warmup: false, vehicles }
    }
}

proptest! {
    #[test]
    fn detector_matches_brute_force(f in frame(), rear in -200.0f64..-50.0, front in 50.0f64..200.0) {
        let mut sc = ScenarioConfig::default();
        sc.network = RoadNetwork::corridor(4, LINK, 3, 80.0, 4);
        sc.detection_range = DetectionRange { rear, front };
        let rec = Detector::new(&sc).unwrap().observe(&f).unwrap();
        let s = &f.vehicles[0];
        let arc = |v: &VehicleState| v.link as f64 * LINK + v.position;
        let mut expected: Vec<(String, f64, f64)> = f.vehicles[1..]
            .iter()
            .map(|v| (v.id.to_string(), arc(v) - arc(s), 3.5 * (f64::from(v.lane) - f64::from(s.lane))))
            .filter(|(_, rel, _)| *rel >= rear && *rel <= front)
            .collect();
        let mut got: Vec<(String, f64, f64)> = rec
            .surrounding
            .iter()
            .map(|o| (o.vehicle_id.clone(), o.rel_longitudinal, o.rel_lateral))
            .collect();
        expected.sort_by(|a, b| a.0.cmp(&b.0));
        got.sort_by(|a, b| a.0.cmp(&b.0));
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            prop_assert_eq!(&g.0, &e.0);
            prop_assert!((g.1 - e.1).abs() < 1e-9);
            prop_assert!((g.2 - e.2).abs() < 1e-9);
        }
        prop_assert_eq!(rec.subject.lane_id, s.lane);
        prop_assert_eq!(&rec.road_name, &format!("L{}", s.link + 1));
    }
}
