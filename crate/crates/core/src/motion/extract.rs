//! Ground-truth map understanding and trajectory descriptions.

use serde::{Deserialize, Serialize};

use super::{inverse_dynamics, StateSeq};
use crate::annotate::{self, categorize, AnnotatorConfig, TrajectoryCategory};
use crate::error::{Error, Result};
use crate::geom::{Frame, Vec2};
use crate::scene::{resample_polyline, AreaType, LaneType, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapUnderstandingConfig {
    /// Most navigation lanes kept per vehicle.
    pub n_s: usize,
    /// Points per resampled centerline.
    pub n_p: usize,
    /// Future window scanned for navigation lanes (steps).
    pub horizon: usize,
}

impl Default for MapUnderstandingConfig {
    fn default() -> Self {
        Self { n_s: 4, n_p: 20, horizon: 50 }
    }
}

/// One-hot area and lane type at a vehicle's initial position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalUnderstanding {
    pub area_onehot: [f64; 4],
    pub lane_onehot: [f64; 5],
}

impl GlobalUnderstanding {
    pub fn new(area: AreaType, lane: LaneType) -> Self {
        let mut area_onehot = [0.0; 4];
        area_onehot[area.index()] = 1.0;
        let mut lane_onehot = [0.0; 5];
        lane_onehot[lane.index()] = 1.0;
        Self { area_onehot, lane_onehot }
    }

    pub fn area(&self) -> AreaType {
        AreaType::ALL[argmax(&self.area_onehot)]
    }

    pub fn lane(&self) -> LaneType {
        LaneType::ALL[argmax(&self.lane_onehot)]
    }

    /// The 9-vector `[area; lane]`.
    pub fn to_vec(&self) -> [f64; 9] {
        let mut v = [0.0; 9];
        v[..4].copy_from_slice(&self.area_onehot);
        v[4..].copy_from_slice(&self.lane_onehot);
        v
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavLane {
    pub lane_id: String,
    /// Centerline in the vehicle frame at the extraction timestep.
    pub points: Vec<Vec2>,
}

/// Candidate centerlines, at most `n_s`, each with exactly `n_p` points.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationReasoning {
    pub lanes: Vec<NavLane>,
    pub n_s: usize,
    pub n_p: usize,
}

impl NavigationReasoning {
    pub fn empty(n_s: usize, n_p: usize) -> Self {
        Self { lanes: Vec::new(), n_s, n_p }
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    /// Row-major `(n_s, n_p, 2)` values with zero padding.
    pub fn to_tensor(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_s * self.n_p * 2];
        for (i, lane) in self.lanes.iter().take(self.n_s).enumerate() {
            for (j, p) in lane.points.iter().take(self.n_p).enumerate() {
                let k = (i * self.n_p + j) * 2;
                out[k] = p.x;
                out[k + 1] = p.y;
            }
        }
        out
    }

    /// 1 for valid lane slots, 0 for padding.
    pub fn mask(&self) -> Vec<f64> {
        (0..self.n_s).map(|i| if i < self.lanes.len() { 1.0 } else { 0.0 }).collect()
    }
}

/// Area and lane one-hots at `t0` plus the lanes the vehicle actually
/// occupies over the following `horizon` steps, in its own frame at `t0`.
pub fn extract_map_understanding_gt(
    scene: &Scene,
    vehicle_id: &str,
    t0: i64,
    cfg: &MapUnderstandingConfig,
) -> Result<(GlobalUnderstanding, NavigationReasoning)> {
    if cfg.n_p < 2 {
        return Err(Error::Config(format!("n_p must be at least 2, got {}", cfg.n_p)));
    }
    let s0 = *scene.state(vehicle_id, t0)?;
    let track = scene.track(vehicle_id).expect("state lookup succeeded");
    let area = annotate::classify_area(&scene.map, s0.position);
    let lane_type = annotate::current_lane(&scene.map, &s0)
        .and_then(|id| scene.map.lane(id))
        .map_or(LaneType::Other, |l| l.lane_type);
    let frame = Frame::new(s0.position, s0.yaw);
    let mut lanes = Vec::new();
    for id in annotate::trajectory_lanes_available(&scene.map, track, t0, cfg.horizon).into_iter().take(cfg.n_s) {
        let lane = scene.map.lane(&id).expect("occupied lane exists");
        let points = resample_polyline(&lane.centerline, cfg.n_p)?.into_iter().map(|p| frame.to_local(p)).collect();
        lanes.push(NavLane { lane_id: id, points });
    }
    Ok((GlobalUnderstanding::new(area, lane_type), NavigationReasoning { lanes, n_s: cfg.n_s, n_p: cfg.n_p }))
}

const SLOW_BELOW: f64 = 2.0;
const FAST_ABOVE: f64 = 8.0;
const MAINTAIN_BELOW: f64 = 0.2;
const MAX_SEGMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AccelTrend {
    Accelerating,
    Maintaining,
    Decelerating,
}

impl AccelTrend {
    fn of(accel: f64) -> Self {
        if accel.abs() < MAINTAIN_BELOW {
            AccelTrend::Maintaining
        } else if accel > 0.0 {
            AccelTrend::Accelerating
        } else {
            AccelTrend::Decelerating
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            AccelTrend::Accelerating => "accelerating",
            AccelTrend::Maintaining => "maintaining speed",
            AccelTrend::Decelerating => "decelerating",
        }
    }
}

/// Run-length segments, reduced to the longest `MAX_SEGMENTS` runs in
/// temporal order with equal neighbours merged.
fn accel_segments(accels: &[f64]) -> Vec<AccelTrend> {
    let mut runs: Vec<(usize, usize, AccelTrend)> = Vec::new();
    for (i, a) in accels.iter().enumerate() {
        let tr = AccelTrend::of(*a);
        match runs.last_mut() {
            Some(r) if r.2 == tr => r.1 += 1,
            _ => runs.push((i, 1, tr)),
        }
    }
    if runs.len() > MAX_SEGMENTS {
        let mut by_len = runs.clone();
        by_len.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        by_len.truncate(MAX_SEGMENTS);
        by_len.sort_by_key(|r| r.0);
        runs = by_len;
    }
    let mut out: Vec<AccelTrend> = Vec::new();
    for r in runs {
        if out.last() != Some(&r.2) {
            out.push(r.2);
        }
    }
    out
}

/// One sentence: `<type phrase>, at <slow|moderate|fast> speed, <trend>[ then <trend>]*`.
pub fn describe_trajectory(traj: &StateSeq, cfg: &AnnotatorConfig) -> Result<String> {
    let accels: Vec<f64> = inverse_dynamics(traj)?.actions.iter().map(|a| a.accel).collect();
    let category = categorize(&traj.states, cfg);
    let mean = traj.states.iter().map(|s| s.speed).sum::<f64>() / traj.states.len() as f64;
    let speed = if category == TrajectoryCategory::Stationary || mean < SLOW_BELOW {
        "slow"
    } else if mean <= FAST_ABOVE {
        "moderate"
    } else {
        "fast"
    };
    let trend = accel_segments(&accels).iter().map(|t| t.phrase()).collect::<Vec<_>>().join(" then ");
    Ok(format!("{}, at {speed} speed, {trend}", category.phrase()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{rollout, ActionSeq};
    use crate::scene::{VehicleAction, VehicleState};
    use crate::synth::{synth_scene, Layout, SynthSpec};

    fn seq(v0: f64, actions: Vec<VehicleAction>) -> StateSeq {
        rollout(&VehicleState::new(0.0, 0.0, v0, 0.0), &ActionSeq { actions, dt: 0.1 })
    }

    #[test]
    fn constant_speed_straight() {
        let s = seq(5.0, vec![VehicleAction::ZERO; 50]);
        assert_eq!(
            describe_trajectory(&s, &AnnotatorConfig::default()).unwrap(),
            "go straight, at moderate speed, maintaining speed"
        );
    }

    #[test]
    fn linear_ramp_accelerates() {
        let s = seq(0.0, vec![VehicleAction::new(2.0, 0.0); 50]);
        assert_eq!(
            describe_trajectory(&s, &AnnotatorConfig::default()).unwrap(),
            "go straight, at moderate speed, accelerating"
        );
    }

    #[test]
    fn stationary() {
        let s = seq(0.0, vec![VehicleAction::ZERO; 20]);
        assert_eq!(
            describe_trajectory(&s, &AnnotatorConfig::default()).unwrap(),
            "remain stationary, at slow speed, maintaining speed"
        );
        let one = StateSeq { states: vec![VehicleState::new(0.0, 0.0, 0.0, 0.0)], dt: 0.1 };
        assert!(describe_trajectory(&one, &AnnotatorConfig::default()).is_err());
    }

    #[test]
    fn segments_keep_longest_runs() {
        let mut acts = vec![VehicleAction::new(2.0, 0.0); 10];
        acts.extend(vec![VehicleAction::ZERO; 20]);
        acts.push(VehicleAction::new(-1.0, 0.0));
        acts.extend(vec![VehicleAction::ZERO; 2]);
        acts.extend(vec![VehicleAction::new(-2.0, 0.0); 10]);
        let s = seq(3.0, acts);
        let d = describe_trajectory(&s, &AnnotatorConfig::default()).unwrap();
        assert!(d.ends_with("accelerating then maintaining speed then decelerating"), "{d}");
    }

    #[test]
    fn straight_road_gt_extraction() {
        let (scene, _) = synth_scene(&SynthSpec::new(Layout::StraightRoad, 1), 5).unwrap();
        let (g, nav) =
            extract_map_understanding_gt(&scene, &scene.ego_id, 0, &MapUnderstandingConfig::default()).unwrap();
        assert_eq!(g.area(), AreaType::RegularRoad);
        assert_eq!(g.area_onehot.iter().sum::<f64>(), 1.0);
        assert_eq!(g.lane_onehot.iter().sum::<f64>(), 1.0);
        assert_eq!(nav.lanes.len(), 1);
        assert_eq!(nav.lanes[0].points.len(), 20);
        assert_eq!(nav.mask(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(nav.to_tensor().len(), 160);
        assert!(extract_map_understanding_gt(&scene, "nobody", 0, &MapUnderstandingConfig::default()).is_err());
    }

    #[test]
    fn four_way_left_turn_matches_ground_truth() {
        let mut checked = 0;
        for seed in 0..40 {
            let (scene, gt) = synth_scene(&SynthSpec::new(Layout::FourWay, 1), seed).unwrap();
            let Some(rec) = gt.get(&scene.ego_id, 0) else { continue };
            if rec.trajectory != Some(TrajectoryCategory::LeftTurn) {
                continue;
            }
            let (_, nav) =
                extract_map_understanding_gt(&scene, &scene.ego_id, 0, &MapUnderstandingConfig::default()).unwrap();
            let ids: Vec<String> = nav.lanes.iter().map(|l| l.lane_id.clone()).collect();
            let mut expected = gt.lane_sequence(&scene.ego_id, 0, 50);
            expected.truncate(4);
            assert_eq!(ids, expected);
            checked += 1;
        }
        assert!(checked > 0);
    }
}
