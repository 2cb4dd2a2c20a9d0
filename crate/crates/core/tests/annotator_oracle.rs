use bevkit_core::annotate::{annotate_scene, AnnotatorConfig, Direction};
use bevkit_core::synth::{synth_scene, Layout, SynthSpec};

struct Tally {
    records: usize,
    area: usize,
    lane: usize,
    lane_type: usize,
    existence: usize,
    traj_scored: usize,
    traj_ok: usize,
    failures: Vec<String>,
}

fn run(n_scenes: usize, seed0: u64) -> Tally {
    let cfg = AnnotatorConfig::default();
    let mut t = Tally {
        records: 0,
        area: 0,
        lane: 0,
        lane_type: 0,
        existence: 0,
        traj_scored: 0,
        traj_ok: 0,
        failures: Vec::new(),
    };
    for i in 0..n_scenes {
        let layout = Layout::ALL[i % 5];
        let n = 1 + (i / 5) % layout.capacity().min(8);
        let seed = seed0 + i as u64;
        let (scene, gt) = synth_scene(&SynthSpec::new(layout, n), seed).unwrap();
        for rec in annotate_scene(&scene, &cfg) {
            let g = gt.get(&rec.vehicle_id, rec.timestep).expect("gt record");
            t.records += 1;
            let mut note = |what: &str, a: String, b: String| {
                if t.failures.len() < 20 {
                    t.failures.push(format!(
                        "{layout} seed={seed} {}@{} {what}: annot={a} gt={b}",
                        rec.vehicle_id, rec.timestep
                    ));
                }
            };
            if rec.area_type == g.area_type {
                t.area += 1;
            } else {
                note("area", rec.area_type.to_string(), g.area_type.to_string());
            }
            if rec.current_lane == g.lane_id {
                t.lane += 1;
            } else {
                note("lane", format!("{:?}", rec.current_lane), format!("{:?}", g.lane_id));
            }
            if rec.lane_type == g.lane_type {
                t.lane_type += 1;
            } else {
                note("lane_type", rec.lane_type.to_string(), g.lane_type.to_string());
            }
            let ex =
                Direction::ALL.iter().all(|&d| rec.relative_cars.get(d).is_empty() == g.neighbors.get(d).is_empty());
            if ex {
                t.existence += 1;
            } else {
                note("existence", format!("{:?}", rec.relative_cars), format!("{:?}", g.neighbors));
            }
            if !g.trajectory_ambiguous {
                t.traj_scored += 1;
                if Some(rec.trajectory_category) == g.trajectory {
                    t.traj_ok += 1;
                } else {
                    note("trajectory", rec.trajectory_category.to_string(), format!("{:?}", g.trajectory));
                }
            }
        }
    }
    t
}

#[test]
fn annotator_matches_generator_ground_truth() {
    let t = run(100, 1000);
    assert!(t.records > 0);
    let report = t.failures.join("\n");
    assert_eq!(t.area, t.records, "area mismatches\n{report}");
    assert_eq!(t.lane, t.records, "lane mismatches\n{report}");
    assert_eq!(t.lane_type, t.records, "lane type mismatches\n{report}");
    assert_eq!(t.existence, t.records, "existence mismatches\n{report}");
    let acc = t.traj_ok as f64 / t.traj_scored as f64;
    assert!(acc >= 0.95, "trajectory accuracy {acc}\n{report}");
}

#[test]
fn straight_road_single_vehicle_record_count() {
    let (scene, _) = synth_scene(&SynthSpec::new(Layout::StraightRoad, 1), 7).unwrap();
    let recs = annotate_scene(&scene, &AnnotatorConfig::default());
    assert_eq!(recs.len(), 51);
    assert!(recs
        .iter()
        .all(|r| r.trajectory_category.as_str() == "straight" && r.area_type.as_str() == "regular_road"));
}

#[test]
fn left_turn_lane_sequence_matches_ground_truth() {
    let cfg = AnnotatorConfig::default();
    let mut checked = 0;
    for seed in 0..60 {
        let (scene, gt) = synth_scene(&SynthSpec::new(Layout::FourWay, 4), seed).unwrap();
        for rec in annotate_scene(&scene, &cfg) {
            let g = gt.get(&rec.vehicle_id, rec.timestep).unwrap();
            if g.trajectory != Some(bevkit_core::annotate::TrajectoryCategory::LeftTurn) {
                continue;
            }
            let expected = gt.lane_sequence(&rec.vehicle_id, rec.timestep, cfg.horizon);
            assert_eq!(rec.trajectory_lanes, expected, "seed {seed} {} t={}", rec.vehicle_id, rec.timestep);
            checked += 1;
        }
    }
    assert!(checked > 0);
}
