//! Deterministic pure-pursuit planner over navigation centerlines.

use serde::{Deserialize, Serialize};

use super::extract::{extract_map_understanding_gt, MapUnderstandingConfig, NavigationReasoning};
use super::{rollout, step_unicycle, ActionSeq};
use crate::annotate::{categorize, AnnotatorConfig, TrajectoryCategory};
use crate::error::{Error, Result};
use crate::geom::{Frame, Vec2};
use crate::scene::{ActionBounds, VehicleAction, VehicleState, DEFAULT_DT};
use crate::synth::{mixed_layout, synth_scene, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Pure-pursuit lookahead distance (m).
    pub lookahead: f64,
    /// Proportional gain from speed error to acceleration (1/s).
    pub speed_gain: f64,
    pub bounds: ActionBounds,
    pub dt: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { lookahead: 6.0, speed_gain: 1.0, bounds: ActionBounds::default(), dt: DEFAULT_DT }
    }
}

/// Polyline with cumulative arc length.
struct Path {
    points: Vec<Vec2>,
    arc: Vec<f64>,
}

impl Path {
    fn new(nav: &NavigationReasoning) -> Option<Path> {
        let mut points: Vec<Vec2> = Vec::new();
        for lane in &nav.lanes {
            for p in &lane.points {
                if points.last().is_none_or(|q| q.distance(*p) > 1e-6) {
                    points.push(*p);
                }
            }
        }
        if points.len() < 2 {
            return None;
        }
        let mut arc = vec![0.0];
        for w in points.windows(2) {
            arc.push(arc.last().unwrap() + w[0].distance(w[1]));
        }
        Some(Path { points, arc })
    }

    fn total(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Projection of `p` restricted to segments `from_seg..` whose start
    /// lies within `window` metres of arc length. Segments pointing against
    /// `heading` are skipped when any other candidate exists.
    fn project(&self, p: Vec2, heading: Option<f64>, from_seg: usize, window: f64) -> (usize, f64) {
        let dir = heading.map(Vec2::from_angle);
        let mut best: Option<(bool, f64, usize, f64)> = None;
        let limit = self.arc[from_seg] + window;
        for i in from_seg..self.points.len() - 1 {
            if self.arc[i] > limit {
                break;
            }
            let (a, b) = (self.points[i], self.points[i + 1]);
            let ab = b - a;
            let len2 = ab.dot(ab);
            let u = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let d = p.distance(a.lerp(b, u));
            let against = dir.is_some_and(|h| h.dot(ab) < 0.0);
            let s = self.arc[i] + u * len2.sqrt();
            let cand = (against, d, i, s);
            if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
                best = Some(cand);
            }
        }
        let b = best.expect("path has a segment");
        (b.2, b.3)
    }

    /// Point at arc length `s`, extrapolated along the last segment past
    /// the end.
    fn at(&self, s: f64) -> Vec2 {
        let n = self.points.len();
        if s >= self.total() {
            let (a, b) = (self.points[n - 2], self.points[n - 1]);
            let dir = (b - a) * (1.0 / a.distance(b));
            return b + dir * (s - self.total());
        }
        let i = self.arc.partition_point(|x| *x <= s).saturating_sub(1).min(n - 2);
        let seg = self.arc[i + 1] - self.arc[i];
        let u = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        self.points[i].lerp(self.points[i + 1], u)
    }
}

/// Pure-pursuit plan of `horizon` actions. `s0` and the navigation points
/// must share a frame. With no usable navigation the plan keeps zero yaw
/// rate and only regulates speed.
pub fn lane_follow_plan(
    s0: &VehicleState,
    nav: &NavigationReasoning,
    target_speed: f64,
    horizon: usize,
    cfg: &PlannerConfig,
) -> ActionSeq {
    let path = Path::new(nav);
    let mut actions = Vec::with_capacity(horizon);
    let mut s = *s0;
    let mut seg = 0;
    let mut first = true;
    for _ in 0..horizon {
        let accel = cfg.speed_gain * (target_speed - s.speed);
        let yaw_rate = match &path {
            None => 0.0,
            Some(path) => {
                let window = if first { f64::INFINITY } else { cfg.lookahead + 2.0 * s.speed * cfg.dt + 1.0 };
                let (i, proj) = path.project(s.position, Some(s.yaw), seg, window);
                seg = i;
                first = false;
                let target = path.at(proj + cfg.lookahead);
                let local = Frame::new(s.position, s.yaw).to_local(target);
                let l2 = local.dot(local);
                if l2 > 0.0 {
                    s.speed * 2.0 * local.y / l2
                } else {
                    0.0
                }
            }
        };
        let a = cfg.bounds.clip(VehicleAction::new(accel, yaw_rate));
        s = step_unicycle(&s, &a, cfg.dt);
        actions.push(a);
    }
    ActionSeq { actions, dt: cfg.dt }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCase {
    pub scene_id: String,
    pub vehicle_id: String,
    pub t0: i64,
    pub category: TrajectoryCategory,
    pub ade_nav: f64,
    pub ade_empty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub cases: Vec<BenchmarkCase>,
    pub median_nav: f64,
    pub median_empty: f64,
}

impl BenchmarkResult {
    /// `1 - median_nav / median_empty`.
    pub fn relative_gain(&self) -> f64 {
        1.0 - self.median_nav / self.median_empty
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// ADE of one planned rollout against the recorded window `gt`, both
/// expressed in the vehicle frame at `gt[0]`.
fn plan_ade(gt: &[VehicleState], nav: &NavigationReasoning, cfg: &PlannerConfig) -> f64 {
    let s0 = gt[0];
    let frame = Frame::new(s0.position, s0.yaw);
    let local0 = VehicleState { position: Vec2::ZERO, speed: s0.speed, yaw: 0.0 };
    let target = gt.iter().map(|s| s.speed).sum::<f64>() / gt.len() as f64;
    let plan = rollout(&local0, &lane_follow_plan(&local0, nav, target, gt.len() - 1, cfg));
    plan.states.iter().zip(gt).map(|(s, g)| s.position.distance(frame.to_local(g.position))).sum::<f64>()
        / gt.len() as f64
}

/// Maneuver benchmark: synthetic scenes of mixed layouts are scanned in
/// seed order and each contributes its first (vehicle, t0) whose full
/// recorded window is a turn or U-turn. Every scenario is planned with
/// ground-truth navigation and with empty navigation, both targeting the
/// recorded mean speed, and scored by ADE.
pub fn nav_benchmark(n_scenarios: usize, n_vehicles: usize, seed: u64) -> Result<BenchmarkResult> {
    let map_cfg = MapUnderstandingConfig::default();
    let cfg = PlannerConfig::default();
    let ann = AnnotatorConfig::default();
    let mut cases = Vec::with_capacity(n_scenarios);
    let mut i = 0usize;
    while cases.len() < n_scenarios {
        if i >= n_scenarios.saturating_mul(20).max(100) {
            return Err(Error::Spec(format!("found only {} maneuver scenarios in {i} scenes", cases.len())));
        }
        let layout = mixed_layout(i);
        let spec = SynthSpec::new(layout, n_vehicles.min(layout.capacity()).max(1));
        let (scene, _) = synth_scene(&spec, seed.wrapping_add(i as u64))?;
        i += 1;
        let found = scene.tracks.iter().find_map(|track| {
            (track.first_timestep..=track.last_timestep())
                .step_by(5)
                .map(|t0| (t0, track.window(t0, map_cfg.horizon)))
                .find(|(_, w)| {
                    w.len() == map_cfg.horizon + 1
                        && matches!(
                            categorize(w, &ann),
                            TrajectoryCategory::LeftTurn | TrajectoryCategory::RightTurn | TrajectoryCategory::UTurn
                        )
                })
                .map(|(t0, w)| (track.vehicle_id.as_str(), t0, w))
        });
        let Some((vehicle, t0, gt)) = found else { continue };
        let (_, nav) = extract_map_understanding_gt(&scene, vehicle, t0, &map_cfg)?;
        let empty = NavigationReasoning::empty(map_cfg.n_s, map_cfg.n_p);
        cases.push(BenchmarkCase {
            scene_id: scene.scene_id.clone(),
            vehicle_id: vehicle.to_string(),
            t0,
            category: categorize(gt, &ann),
            ade_nav: plan_ade(gt, &nav, &cfg),
            ade_empty: plan_ade(gt, &empty, &cfg),
        });
    }
    let median_nav = median(cases.iter().map(|c| c.ade_nav).collect());
    let median_empty = median(cases.iter().map(|c| c.ade_empty).collect());
    Ok(BenchmarkResult { cases, median_nav, median_empty })
}
