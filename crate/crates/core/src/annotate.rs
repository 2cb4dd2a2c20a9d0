//! Rule-based scene annotation.
//!
//! For every (vehicle, timestep) with enough future the annotator produces one
//! [`AnnotationRecord`] holding six fields: area type, lane type, trajectory
//! category, trajectory lanes, relative cars per direction and distances to
//! every other vehicle. Records serialize to one JSON object per line.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Frame, Vec2};
use crate::scene::{AreaType, LaneType, MapGraph, Scene, VehicleState, VehicleTrack};

/// Tunable thresholds. Every field has a default, so a partial JSON file is
/// a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotatorConfig {
    /// Net displacement below which a trajectory is stationary (m).
    pub stationary_displacement: f64,
    /// |heading change| below this is straight (degrees).
    pub straight_max_deg: f64,
    /// |heading change| at or above this is a U-turn (degrees).
    pub uturn_min_deg: f64,
    /// Other vehicles farther than this are not relative cars (m).
    pub neighbor_range: f64,
    /// Half-width of the front and behind sectors (degrees).
    pub sector_half_angle_deg: f64,
    /// Future window for trajectory fields (steps).
    pub horizon: usize,
    /// Fewest future steps for which a record is produced.
    pub min_future_steps: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            stationary_displacement: 2.0,
            straight_max_deg: 15.0,
            uturn_min_deg: 120.0,
            neighbor_range: 50.0,
            sector_half_angle_deg: 45.0,
            horizon: 50,
            min_future_steps: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryCategory {
    Stationary,
    Straight,
    LeftTurn,
    RightTurn,
    UTurn,
}

impl TrajectoryCategory {
    pub const ALL: [TrajectoryCategory; 5] = [
        TrajectoryCategory::Stationary,
        TrajectoryCategory::Straight,
        TrajectoryCategory::LeftTurn,
        TrajectoryCategory::RightTurn,
        TrajectoryCategory::UTurn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryCategory::Stationary => "stationary",
            TrajectoryCategory::Straight => "straight",
            TrajectoryCategory::LeftTurn => "left_turn",
            TrajectoryCategory::RightTurn => "right_turn",
            TrajectoryCategory::UTurn => "u_turn",
        }
    }

    /// Imperative phrase used in prompts and trajectory descriptions.
    pub fn phrase(&self) -> &'static str {
        match self {
            TrajectoryCategory::Stationary => "remain stationary",
            TrajectoryCategory::Straight => "go straight",
            TrajectoryCategory::LeftTurn => "turn left",
            TrajectoryCategory::RightTurn => "turn right",
            TrajectoryCategory::UTurn => "make a U-turn",
        }
    }
}

impl fmt::Display for TrajectoryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Front,
    Behind,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Front, Direction::Behind, Direction::Left, Direction::Right];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Front => "front",
            Direction::Behind => "behind",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }

    /// Sector of a bearing in degrees (ego heading frame, counter-clockwise
    /// positive). Front and behind sectors are closed, left and right open.
    pub fn from_bearing_deg(beta: f64, half_angle: f64) -> Direction {
        let side = 180.0 - half_angle;
        if beta.abs() <= half_angle {
            Direction::Front
        } else if beta.abs() >= side {
            Direction::Behind
        } else if beta > 0.0 {
            Direction::Left
        } else {
            Direction::Right
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vehicle ids per direction, each list sorted by distance ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeCars {
    pub front: Vec<String>,
    pub behind: Vec<String>,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

impl RelativeCars {
    pub fn get(&self, d: Direction) -> &[String] {
        match d {
            Direction::Front => &self.front,
            Direction::Behind => &self.behind,
            Direction::Left => &self.left,
            Direction::Right => &self.right,
        }
    }

    fn get_mut(&mut self, d: Direction) -> &mut Vec<String> {
        match d {
            Direction::Front => &mut self.front,
            Direction::Behind => &mut self.behind,
            Direction::Left => &mut self.left,
            Direction::Right => &mut self.right,
        }
    }

    pub fn total(&self) -> usize {
        Direction::ALL.iter().map(|&d| self.get(d).len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub scene_id: String,
    pub vehicle_id: String,
    pub timestep: i64,
    pub area_type: AreaType,
    pub lane_type: LaneType,
    pub current_lane: Option<String>,
    #[serde(rename = "trajectory")]
    pub trajectory_category: TrajectoryCategory,
    #[serde(rename = "trajectory_lane")]
    pub trajectory_lanes: Vec<String>,
    pub relative_cars: RelativeCars,
    #[serde(rename = "distance")]
    pub distances: BTreeMap<String, f64>,
}

/// Area type at a point: the highest-priority containing area, falling back
/// to regular road.
pub fn classify_area(map: &MapGraph, position: Vec2) -> AreaType {
    let mut best = AreaType::RegularRoad;
    for (i, area) in map.areas().iter().enumerate() {
        if area.area_type.index() < best.index()
            && map.area_box(i).contains(position)
            && geom::point_in_polygon(position, &area.polygon)
        {
            best = area.area_type;
        }
    }
    best
}

/// Segments whose distance is within this of the nearest one all count as
/// the local tangent (a point at a polyline vertex has two).
const TANGENT_TIE_EPS: f64 = 1e-4;

/// Heading misalignment and lateral offset of a state against a centerline.
fn lane_fit(centerline: &[Vec2], state: &VehicleState) -> (f64, f64) {
    let p = state.position;
    let dists: Vec<f64> = centerline.windows(2).map(|w| geom::point_segment_distance(p, w[0], w[1]).0).collect();
    let lateral = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let misalignment = centerline
        .windows(2)
        .zip(&dists)
        .filter(|(w, &d)| d <= lateral + TANGENT_TIE_EPS && w[0] != w[1])
        .map(|(w, _)| geom::shortest_arc((w[1] - w[0]).heading(), state.yaw).abs())
        .fold(f64::INFINITY, f64::min);
    (misalignment, lateral)
}

/// Lane occupied by a vehicle: among lanes whose boundary contains the
/// position, the best heading match, then the smallest lateral offset, then
/// the smallest id.
pub fn current_lane<'a>(map: &'a MapGraph, state: &VehicleState) -> Option<&'a str> {
    let p = state.position;
    let mut best: Option<(f64, f64, &str)> = None;
    for (i, lane) in map.lanes().iter().enumerate() {
        if !map.lane_box(i).contains(p) || !geom::point_in_polygon(p, &lane.boundary) {
            continue;
        }
        let (mis, lat) = lane_fit(&lane.centerline, state);
        let cand = (mis, lat, lane.id.as_str());
        let better = match best {
            None => true,
            Some(b) => cand.partial_cmp(&b) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best = Some(cand);
        }
    }
    best.map(|b| b.2)
}

/// Net heading change along a state sequence, unwrapped by summing
/// shortest-arc increments.
pub fn net_heading_change(states: &[VehicleState]) -> f64 {
    states.windows(2).map(|w| geom::shortest_arc(w[0].yaw, w[1].yaw)).sum()
}

/// Category of a state sequence with no horizon requirement. Shared by the
/// annotator and the trajectory describer.
pub fn categorize(states: &[VehicleState], cfg: &AnnotatorConfig) -> TrajectoryCategory {
    let (first, last) = match (states.first(), states.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return TrajectoryCategory::Stationary,
    };
    if first.position.distance(last.position) < cfg.stationary_displacement {
        return TrajectoryCategory::Stationary;
    }
    let dtheta = net_heading_change(states).to_degrees();
    if dtheta.abs() < cfg.straight_max_deg {
        TrajectoryCategory::Straight
    } else if dtheta.abs() >= cfg.uturn_min_deg {
        TrajectoryCategory::UTurn
    } else if dtheta > 0.0 {
        TrajectoryCategory::LeftTurn
    } else {
        TrajectoryCategory::RightTurn
    }
}

fn future_window<'a>(
    track: &'a VehicleTrack,
    from_t: i64,
    horizon: usize,
    cfg: &AnnotatorConfig,
) -> Result<&'a [VehicleState]> {
    let window = track.window(from_t, horizon);
    let available = window.len().saturating_sub(1);
    if available < cfg.min_future_steps {
        return Err(Error::InsufficientHorizon { available, required: cfg.min_future_steps });
    }
    Ok(window)
}

/// Trajectory category over `[from_t, from_t + horizon]`, truncated to the
/// available suffix.
pub fn classify_trajectory(
    track: &VehicleTrack,
    from_t: i64,
    horizon: usize,
    cfg: &AnnotatorConfig,
) -> Result<TrajectoryCategory> {
    let window = future_window(track, from_t, horizon, cfg)?;
    Ok(categorize(window, cfg))
}

fn collect_lanes<I, S>(lanes: I) -> Vec<String>
where
    I: IntoIterator<Item = Option<S>>,
    S: AsRef<str>,
{
    let mut out: Vec<String> = Vec::new();
    for id in lanes.into_iter().flatten() {
        let id = id.as_ref();
        if !out.iter().any(|x| x == id) {
            out.push(id.to_string());
        }
    }
    out
}

/// Lanes occupied along the window in order of first occurrence.
pub fn trajectory_lanes(
    map: &MapGraph,
    track: &VehicleTrack,
    from_t: i64,
    horizon: usize,
    cfg: &AnnotatorConfig,
) -> Result<Vec<String>> {
    let window = future_window(track, from_t, horizon, cfg)?;
    Ok(collect_lanes(window.iter().map(|s| current_lane(map, s))))
}

/// Lanes along whatever part of the window exists, with no minimum.
pub(crate) fn trajectory_lanes_available(
    map: &MapGraph,
    track: &VehicleTrack,
    from_t: i64,
    horizon: usize,
) -> Vec<String> {
    collect_lanes(track.window(from_t, horizon).iter().map(|s| current_lane(map, s)))
}

fn others_at<'a>(
    scene: &'a Scene,
    ego_id: &str,
    t: i64,
) -> Result<(&'a VehicleState, Vec<(&'a str, &'a VehicleState)>)> {
    let ego = scene.state(ego_id, t)?;
    let others = scene
        .tracks
        .iter()
        .filter(|tr| tr.vehicle_id != ego_id)
        .filter_map(|tr| tr.state_at(t).map(|s| (tr.vehicle_id.as_str(), s)))
        .collect();
    Ok((ego, others))
}

/// Other vehicles within range, bucketed by bearing in the ego's heading frame.
pub fn relative_cars(scene: &Scene, ego_id: &str, t: i64, cfg: &AnnotatorConfig) -> Result<RelativeCars> {
    let (ego, others) = others_at(scene, ego_id, t)?;
    relative_cars_from(ego, &others, cfg)
}

fn relative_cars_from(
    ego: &VehicleState,
    others: &[(&str, &VehicleState)],
    cfg: &AnnotatorConfig,
) -> Result<RelativeCars> {
    let frame = Frame::new(ego.position, ego.yaw);
    let mut buckets: BTreeMap<Direction, Vec<(f64, &str)>> = BTreeMap::new();
    for &(id, s) in others {
        let d = ego.position.distance(s.position);
        if d > cfg.neighbor_range {
            continue;
        }
        let local = frame.to_local(s.position);
        let beta = local.y.atan2(local.x).to_degrees();
        let dir = Direction::from_bearing_deg(beta, cfg.sector_half_angle_deg);
        buckets.entry(dir).or_default().push((d, id));
    }
    let mut out = RelativeCars::default();
    for (dir, mut list) in buckets {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        *out.get_mut(dir) = list.into_iter().map(|(_, id)| id.to_string()).collect();
    }
    Ok(out)
}

/// Center-to-center distance to every other vehicle present at `t`.
pub fn pairwise_distances(scene: &Scene, ego_id: &str, t: i64) -> Result<BTreeMap<String, f64>> {
    let (ego, others) = others_at(scene, ego_id, t)?;
    Ok(others.into_iter().map(|(id, s)| (id.to_string(), ego.position.distance(s.position))).collect())
}

/// Annotates every (vehicle, timestep) that has at least
/// `cfg.min_future_steps` future states. Output is sorted by vehicle id, then
/// timestep.
pub fn annotate_scene(scene: &Scene, cfg: &AnnotatorConfig) -> Vec<AnnotationRecord> {
    let mut tracks: Vec<&VehicleTrack> = scene.tracks.iter().collect();
    tracks.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));

    let lane_cache: Vec<Vec<Option<&str>>> =
        tracks.iter().map(|tr| tr.states.iter().map(|s| current_lane(&scene.map, s)).collect()).collect();

    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (ti, tr) in tracks.iter().enumerate() {
        for (k, t) in tr.timesteps().enumerate() {
            let window = tr.window(t, cfg.horizon);
            if window.len() - 1 < cfg.min_future_steps {
                skipped += 1;
                continue;
            }
            let state = &tr.states[k];
            let current = lane_cache[ti][k];
            let lane_type = current.and_then(|id| scene.map.lane(id)).map(|l| l.lane_type).unwrap_or(LaneType::Other);
            let others: Vec<(&str, &VehicleState)> = tracks
                .iter()
                .filter(|o| o.vehicle_id != tr.vehicle_id)
                .filter_map(|o| o.state_at(t).map(|s| (o.vehicle_id.as_str(), s)))
                .collect();
            let relative = relative_cars_from(state, &others, cfg).expect("ego state exists");
            let distances =
                others.iter().map(|(id, s)| (id.to_string(), state.position.distance(s.position))).collect();
            records.push(AnnotationRecord {
                scene_id: scene.scene_id.clone(),
                vehicle_id: tr.vehicle_id.clone(),
                timestep: t,
                area_type: classify_area(&scene.map, state.position),
                lane_type,
                current_lane: current.map(str::to_string),
                trajectory_category: categorize(window, cfg),
                trajectory_lanes: collect_lanes(lane_cache[ti][k..k + window.len()].iter().copied()),
                relative_cars: relative,
                distances,
            });
        }
    }
    if skipped > 0 {
        log::debug!(
            "scene {}: skipped {skipped} (vehicle, timestep) pairs with fewer than {} future steps",
            scene.scene_id,
            cfg.min_future_steps
        );
    }
    records
}

/// Writes records as JSON lines.
pub fn records_to_jsonl(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<AnnotationRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("annotation line {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Area, Lane};
    use std::f64::consts::PI;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
        vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
    }

    fn straight_lane(id: &str, y: f64) -> Lane {
        Lane {
            id: id.into(),
            centerline: vec![Vec2::new(0.0, y), Vec2::new(100.0, y)],
            boundary: rect(0.0, y - 1.75, 100.0, y + 1.75),
            lane_type: LaneType::Straight,
            successors: vec![],
            width: 3.5,
            draw_boundary: true,
        }
    }

    fn scene_with(tracks: Vec<VehicleTrack>, lanes: Vec<Lane>) -> Scene {
        let areas = vec![Area {
            id: "road".into(),
            polygon: rect(-300.0, -300.0, 300.0, 300.0),
            area_type: AreaType::RegularRoad,
        }];
        let ego_id = tracks[0].vehicle_id.clone();
        Scene { scene_id: "s".into(), map: MapGraph::new(lanes, areas), tracks, dt: 0.1, ego_id }
    }

    fn constant_turn_track(speed: f64, yaw_rate: f64, steps: usize) -> VehicleTrack {
        let mut s = VehicleState::new(0.0, 0.0, speed, 0.0);
        let mut states = vec![s];
        for _ in 0..steps {
            let p = s.position + Vec2::from_angle(s.yaw) * (s.speed * 0.1);
            s = VehicleState { position: p, speed, yaw: geom::normalize_angle(s.yaw + yaw_rate * 0.1) };
            states.push(s);
        }
        VehicleTrack::new("v", 0, states)
    }

    #[test]
    fn area_fallback_and_priority() {
        let map = MapGraph::new(
            vec![],
            vec![
                Area { id: "road".into(), polygon: rect(-50.0, -50.0, 50.0, 50.0), area_type: AreaType::RegularRoad },
                Area {
                    id: "junction".into(),
                    polygon: rect(-10.0, -10.0, 10.0, 10.0),
                    area_type: AreaType::Intersection,
                },
            ],
        );
        assert_eq!(classify_area(&map, Vec2::ZERO), AreaType::Intersection);
        assert_eq!(classify_area(&map, Vec2::new(30.0, 0.0)), AreaType::RegularRoad);
        assert_eq!(classify_area(&map, Vec2::new(200.0, 200.0)), AreaType::RegularRoad);
    }

    #[test]
    fn lone_lane_and_off_road() {
        let map = MapGraph::new(vec![straight_lane("A", 0.0)], vec![]);
        assert_eq!(current_lane(&map, &VehicleState::new(20.0, 0.0, 3.0, 0.0)), Some("A"));
        assert_eq!(current_lane(&map, &VehicleState::new(20.0, 30.0, 3.0, 0.0)), None);
    }

    #[test]
    fn crossing_lanes_resolved_by_heading() {
        // Lane A runs east, lane B north; both contain the origin.
        let a = Lane {
            id: "A".into(),
            centerline: vec![Vec2::new(-20.0, 0.0), Vec2::new(20.0, 0.0)],
            boundary: rect(-20.0, -1.75, 20.0, 1.75),
            lane_type: LaneType::Straight,
            successors: vec![],
            width: 3.5,
            draw_boundary: true,
        };
        let b = Lane {
            id: "B".into(),
            centerline: vec![Vec2::new(0.5, -20.0), Vec2::new(0.5, 20.0)],
            boundary: rect(-1.25, -20.0, 2.25, 20.0),
            lane_type: LaneType::Straight,
            successors: vec![],
            width: 3.5,
            draw_boundary: true,
        };
        let map = MapGraph::new(vec![b, a], vec![]);
        // Heading east: misalignment 0 to A vs 90 deg to B.
        assert_eq!(current_lane(&map, &VehicleState::new(0.0, 0.0, 5.0, 0.0)), Some("A"));
        // Heading north, 0.2 m off A's centerline and 0.5 m off B's: B wins on heading.
        assert_eq!(current_lane(&map, &VehicleState::new(0.0, 0.2, 5.0, PI / 2.0)), Some("B"));
        // Heading 40 deg: closer to A's tangent (40) than B's (50).
        let yaw = 40f64.to_radians();
        assert_eq!(current_lane(&map, &VehicleState::new(0.0, 0.0, 5.0, yaw)), Some("A"));
    }

    #[test]
    fn trajectory_classes_closed_form() {
        let cfg = AnnotatorConfig::default();
        let still = VehicleTrack::new("v", 0, vec![VehicleState::new(1.0, 2.0, 0.0, 0.3); 51]);
        assert_eq!(classify_trajectory(&still, 0, 50, &cfg).unwrap(), TrajectoryCategory::Stationary);
        // 0.2 rad/s for 5 s -> 1.0 rad = 57.3 deg.
        let left = constant_turn_track(5.0, 0.2, 50);
        assert!((net_heading_change(&left.states) - 1.0).abs() < 1e-9);
        assert_eq!(classify_trajectory(&left, 0, 50, &cfg).unwrap(), TrajectoryCategory::LeftTurn);
        // 0.6 rad/s -> 3.0 rad = 171.9 deg.
        let uturn = constant_turn_track(5.0, 0.6, 50);
        assert_eq!(classify_trajectory(&uturn, 0, 50, &cfg).unwrap(), TrajectoryCategory::UTurn);
        let right = constant_turn_track(5.0, -0.2, 50);
        assert_eq!(classify_trajectory(&right, 0, 50, &cfg).unwrap(), TrajectoryCategory::RightTurn);
        let straight = constant_turn_track(5.0, 0.0, 50);
        assert_eq!(classify_trajectory(&straight, 0, 50, &cfg).unwrap(), TrajectoryCategory::Straight);
    }

    #[test]
    fn heading_change_unwraps_across_pi() {
        // Start near +pi heading, turn left through the wrap.
        let states: Vec<VehicleState> =
            (0..=20).map(|k| VehicleState::new(0.0, 0.0, 1.0, geom::normalize_angle(3.0 + 0.05 * k as f64))).collect();
        assert!((net_heading_change(&states) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_horizon_errors() {
        let cfg = AnnotatorConfig::default();
        let tr = constant_turn_track(5.0, 0.0, 9);
        let err = classify_trajectory(&tr, 0, 50, &cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientHorizon { available: 9, required: 10 }));
        // Exactly 10 future steps is enough.
        let tr = constant_turn_track(5.0, 0.0, 10);
        assert!(classify_trajectory(&tr, 0, 50, &cfg).is_ok());
    }

    #[test]
    fn lanes_follow_successor_and_stationary() {
        let cfg = AnnotatorConfig::default();
        let mut a = straight_lane("A", 0.0);
        a.centerline = vec![Vec2::new(0.0, 0.0), Vec2::new(50.0, 0.0)];
        a.boundary = rect(0.0, -1.75, 50.0, 1.75);
        a.successors = vec!["B".into()];
        let mut b = straight_lane("B", 0.0);
        b.centerline = vec![Vec2::new(50.0, 0.0), Vec2::new(100.0, 0.0)];
        b.boundary = rect(50.0, -1.75, 100.0, 1.75);
        let map = MapGraph::new(vec![a, b], vec![]);
        let moving = VehicleTrack::new(
            "m",
            0,
            (0..=50).map(|k| VehicleState::new(30.05 + 0.8 * k as f64, 0.0, 8.0, 0.0)).collect(),
        );
        assert_eq!(trajectory_lanes(&map, &moving, 0, 50, &cfg).unwrap(), vec!["A", "B"]);
        let still = VehicleTrack::new("s", 0, vec![VehicleState::new(10.0, 0.0, 0.0, 0.0); 51]);
        assert_eq!(trajectory_lanes(&map, &still, 0, 50, &cfg).unwrap(), vec!["A"]);
    }

    fn at(id: &str, x: f64, y: f64, yaw: f64) -> VehicleTrack {
        VehicleTrack::new(id, 0, vec![VehicleState::new(x, y, 0.0, yaw)])
    }

    #[test]
    fn relative_cars_sectors() {
        let cfg = AnnotatorConfig::default();
        let s = scene_with(vec![at("ego", 0.0, 0.0, 0.0), at("a", 10.0, 0.0, 0.0)], vec![]);
        let rc = relative_cars(&s, "ego", 0, &cfg).unwrap();
        assert_eq!(rc.front, vec!["a"]);
        assert_eq!(rc.total(), 1);

        // Exactly +45 degrees is front by the closed-sector rule.
        let s = scene_with(vec![at("ego", 0.0, 0.0, 0.0), at("d", 10.0, 10.0, 0.0)], vec![]);
        assert_eq!(relative_cars(&s, "ego", 0, &cfg).unwrap().front, vec!["d"]);

        // Out of range.
        let s = scene_with(vec![at("ego", 0.0, 0.0, 0.0), at("far", 60.0, 0.0, 0.0)], vec![]);
        assert_eq!(relative_cars(&s, "ego", 0, &cfg).unwrap().total(), 0);

        assert!(matches!(relative_cars(&s, "ghost", 0, &cfg), Err(Error::UnknownVehicle { .. })));
    }

    #[test]
    fn ring_of_eight_by_hand_bearings() {
        let cfg = AnnotatorConfig::default();
        let ego_yaw = 0.3;
        let mut tracks = vec![at("ego", 5.0, -3.0, ego_yaw)];
        let mut expected: BTreeMap<Direction, Vec<String>> = BTreeMap::new();
        for k in 0..8 {
            // Offset by 10 degrees so no car sits on a sector diagonal.
            let rel = 10.0 + 45.0 * k as f64;
            let world = ego_yaw + rel.to_radians();
            let id = format!("c{k}");
            tracks.push(at(&id, 5.0 + 20.0 * world.cos(), -3.0 + 20.0 * world.sin(), 0.0));
            let beta = if rel > 180.0 { rel - 360.0 } else { rel };
            let dir = if beta.abs() <= 45.0 {
                Direction::Front
            } else if beta.abs() >= 135.0 {
                Direction::Behind
            } else if beta > 0.0 {
                Direction::Left
            } else {
                Direction::Right
            };
            expected.entry(dir).or_default().push(id);
        }
        let s = scene_with(tracks, vec![]);
        let rc = relative_cars(&s, "ego", 0, &cfg).unwrap();
        for d in Direction::ALL {
            let mut got = rc.get(d).to_vec();
            got.sort();
            assert_eq!(got, expected[&d], "{d}");
            assert_eq!(got.len(), 2);
        }
    }

    #[test]
    fn distances_three_four_five() {
        let s = scene_with(vec![at("ego", 1.0, 1.0, 0.0), at("o", 4.0, 5.0, 0.0)], vec![]);
        let d = pairwise_distances(&s, "ego", 0).unwrap();
        assert_eq!(d["o"], 5.0);
        let alone = scene_with(vec![at("ego", 1.0, 1.0, 0.0)], vec![]);
        assert!(pairwise_distances(&alone, "ego", 0).unwrap().is_empty());
    }

    #[test]
    fn short_scene_yields_no_records() {
        let tr = VehicleTrack::new("ego", 0, vec![VehicleState::new(10.0, 0.0, 0.0, 0.0); 6]);
        let s = scene_with(vec![tr], vec![straight_lane("A", 0.0)]);
        assert!(annotate_scene(&s, &AnnotatorConfig::default()).is_empty());
    }

    #[test]
    fn jsonl_field_names() {
        let tr = VehicleTrack::new("ego", 0, vec![VehicleState::new(10.0, 0.0, 0.0, 0.0); 11]);
        let s = scene_with(vec![tr], vec![straight_lane("A", 0.0)]);
        let recs = annotate_scene(&s, &AnnotatorConfig::default());
        assert_eq!(recs.len(), 1);
        let line = records_to_jsonl(&recs);
        for key in [
            "\"area_type\"",
            "\"lane_type\"",
            "\"current_lane\"",
            "\"trajectory\"",
            "\"trajectory_lane\"",
            "\"relative_cars\"",
            "\"distance\"",
        ] {
            assert!(line.contains(key), "missing {key}");
        }
        assert_eq!(records_from_jsonl(&line).unwrap(), recs);
    }
}
