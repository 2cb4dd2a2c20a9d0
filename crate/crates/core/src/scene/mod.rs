//! Scene data model: lane-graph map plus timestamped vehicle tracks.
//!
//! Every type here is immutable once validated. Scenes enter the system
//! through [`load_scene`] or the synthetic generator in [`crate::synth`], and
//! both paths run [`Scene::validate`].

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Aabb, Vec2};

pub(crate) use io::quantize_scene;
pub use io::{load_scene, save_scene, scene_from_json, scene_to_json, SCHEMA_VERSION};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_VEHICLE_LENGTH: f64 = 4.7;
pub const DEFAULT_VEHICLE_WIDTH: f64 = 2.0;
pub const DEFAULT_MAX_ACCEL: f64 = 6.0;
pub const DEFAULT_MAX_YAW_RATE: f64 = 1.5;

/// Slack for yaw values written at 6-decimal precision next to +/-pi.
const YAW_RANGE_SLACK: f64 = 1e-6;
/// Centerline points may sit this far outside their boundary ring.
const CENTERLINE_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec2,
    pub speed: f64,
    pub yaw: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, speed: f64, yaw: f64) -> Self {
        Self { position: Vec2::new(x, y), speed, yaw }
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && self.speed.is_finite()
            && self.speed >= 0.0
            && self.yaw.is_finite()
            && self.yaw > -PI - YAW_RANGE_SLACK
            && self.yaw <= PI + YAW_RANGE_SLACK
    }

    /// `[x, y, v, yaw]`, the row layout used by trajectory and tensor exports.
    pub fn to_array(&self) -> [f64; 4] {
        [self.position.x, self.position.y, self.speed, self.yaw]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleAction {
    pub accel: f64,
    pub yaw_rate: f64,
}

impl VehicleAction {
    pub const ZERO: VehicleAction = VehicleAction { accel: 0.0, yaw_rate: 0.0 };

    pub fn new(accel: f64, yaw_rate: f64) -> Self {
        Self { accel, yaw_rate }
    }
}

/// Symmetric bounds on the two action channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub max_accel: f64,
    pub max_yaw_rate: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self { max_accel: DEFAULT_MAX_ACCEL, max_yaw_rate: DEFAULT_MAX_YAW_RATE }
    }
}

impl ActionBounds {
    pub fn contains(&self, a: &VehicleAction) -> bool {
        a.accel.is_finite()
            && a.yaw_rate.is_finite()
            && a.accel.abs() <= self.max_accel
            && a.yaw_rate.abs() <= self.max_yaw_rate
    }

    pub fn clip(&self, a: VehicleAction) -> VehicleAction {
        VehicleAction {
            accel: a.accel.clamp(-self.max_accel, self.max_accel),
            yaw_rate: a.yaw_rate.clamp(-self.max_yaw_rate, self.max_yaw_rate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneType {
    Straight,
    LeftTurn,
    RightTurn,
    UTurn,
    Other,
}

impl LaneType {
    /// One-hot slot order.
    pub const ALL: [LaneType; 5] =
        [LaneType::Straight, LaneType::LeftTurn, LaneType::RightTurn, LaneType::UTurn, LaneType::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            LaneType::Straight => "straight",
            LaneType::LeftTurn => "left_turn",
            LaneType::RightTurn => "right_turn",
            LaneType::UTurn => "u_turn",
            LaneType::Other => "other",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).unwrap()
    }

    pub fn parse(s: &str) -> Option<LaneType> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for LaneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaType {
    Intersection,
    Roundabout,
    ParkingArea,
    RegularRoad,
}

impl AreaType {
    /// One-hot slot order, which is also classification priority (first wins).
    pub const ALL: [AreaType; 4] =
        [AreaType::Intersection, AreaType::Roundabout, AreaType::ParkingArea, AreaType::RegularRoad];

    pub fn as_str(&self) -> &'static str {
        match self {
            AreaType::Intersection => "intersection",
            AreaType::Roundabout => "roundabout",
            AreaType::ParkingArea => "parking_area",
            AreaType::RegularRoad => "regular_road",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).unwrap()
    }

    pub fn parse(s: &str) -> Option<AreaType> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for AreaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub centerline: Vec<Vec2>,
    /// Simple counter-clockwise ring.
    pub boundary: Vec<Vec2>,
    pub lane_type: LaneType,
    pub successors: Vec<String>,
    pub width: f64,
    /// Rendering metadata: whether the boundary stroke is drawn. Cleared by
    /// lane-marking erasure noise; geometry is unaffected.
    pub draw_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Area {
    pub id: String,
    pub polygon: Vec<Vec2>,
    pub area_type: AreaType,
}

/// Lanes and areas with id lookup and cached bounding boxes.
#[derive(Debug, Clone)]
pub struct MapGraph {
    lanes: Vec<Lane>,
    areas: Vec<Area>,
    lane_index: BTreeMap<String, usize>,
    lane_boxes: Vec<Aabb>,
    area_boxes: Vec<Aabb>,
}

impl PartialEq for MapGraph {
    fn eq(&self, other: &Self) -> bool {
        self.lanes == other.lanes && self.areas == other.areas
    }
}

impl Default for MapGraph {
    fn default() -> Self {
        MapGraph::new(Vec::new(), Vec::new())
    }
}

impl MapGraph {
    /// Builds the lookup structures. Call [`MapGraph::validate`] (or
    /// [`Scene::validate`]) before relying on the invariants.
    pub fn new(lanes: Vec<Lane>, areas: Vec<Area>) -> Self {
        let mut lane_index = BTreeMap::new();
        for (i, lane) in lanes.iter().enumerate() {
            lane_index.entry(lane.id.clone()).or_insert(i);
        }
        let lane_boxes = lanes
            .iter()
            .map(|l| Aabb::from_points(&l.boundary).unwrap_or(Aabb { min: Vec2::ZERO, max: Vec2::ZERO }))
            .collect();
        let area_boxes = areas
            .iter()
            .map(|a| Aabb::from_points(&a.polygon).unwrap_or(Aabb { min: Vec2::ZERO, max: Vec2::ZERO }))
            .collect();
        Self { lanes, areas, lane_index, lane_boxes, area_boxes }
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn areas(&self) -> &[Area] {
        &self.areas
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lane_index.get(id).map(|&i| &self.lanes[i])
    }

    pub(crate) fn lane_box(&self, i: usize) -> &Aabb {
        &self.lane_boxes[i]
    }

    pub(crate) fn area_box(&self, i: usize) -> &Aabb {
        &self.area_boxes[i]
    }

    pub fn into_parts(self) -> (Vec<Lane>, Vec<Area>) {
        (self.lanes, self.areas)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            let path = format!("map.lanes[{i}]");
            if !seen.insert(lane.id.as_str()) {
                return Err(Error::validation(format!("{path}.id"), format!("duplicate lane id `{}`", lane.id)));
            }
            validate_lane(lane, &path)?;
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            for succ in &lane.successors {
                if !self.lane_index.contains_key(succ) {
                    return Err(Error::validation(
                        format!("map.lanes[{i}].successors"),
                        format!("successor `{succ}` of lane `{}` does not resolve", lane.id),
                    ));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (i, area) in self.areas.iter().enumerate() {
            let path = format!("map.areas[{i}]");
            if !seen.insert(area.id.as_str()) {
                return Err(Error::validation(format!("{path}.id"), format!("duplicate area id `{}`", area.id)));
            }
            validate_ring(&area.polygon, &format!("{path}.polygon"))?;
        }
        for (i, lane) in self.lanes.iter().enumerate() {
            let covered = self.areas.iter().enumerate().any(|(j, a)| {
                self.lane_boxes[i].intersects(&self.area_boxes[j])
                    && geom::polygons_intersect(&lane.boundary, &a.polygon)
            });
            if !covered {
                return Err(Error::validation(
                    format!("map.lanes[{i}].boundary"),
                    format!("lane `{}` does not intersect any area", lane.id),
                ));
            }
        }
        Ok(())
    }
}

fn validate_ring(ring: &[Vec2], path: &str) -> Result<()> {
    if ring.len() < 3 {
        return Err(Error::validation(path, "polygon needs at least 3 vertices"));
    }
    if let Some(k) = ring.iter().position(|p| !p.is_finite()) {
        return Err(Error::validation(format!("{path}[{k}]"), "non-finite coordinate"));
    }
    if !geom::is_simple_polygon(ring) {
        return Err(Error::validation(path, "polygon is not simple"));
    }
    if geom::signed_area(ring) <= 0.0 {
        return Err(Error::validation(path, "polygon must be counter-clockwise with nonzero area"));
    }
    Ok(())
}

fn validate_lane(lane: &Lane, path: &str) -> Result<()> {
    if lane.id.is_empty() {
        return Err(Error::validation(format!("{path}.id"), "empty lane id"));
    }
    if !(lane.width.is_finite() && lane.width > 0.0) {
        return Err(Error::validation(format!("{path}.width"), "width must be positive"));
    }
    if lane.centerline.len() < 2 {
        return Err(Error::validation(format!("{path}.centerline"), "centerline needs at least 2 points"));
    }
    if let Some(k) = lane.centerline.iter().position(|p| !p.is_finite()) {
        return Err(Error::validation(format!("{path}.centerline[{k}]"), "non-finite coordinate"));
    }
    validate_ring(&lane.boundary, &format!("{path}.boundary"))?;
    for (k, p) in lane.centerline.iter().enumerate() {
        if !geom::point_in_polygon_tol(*p, &lane.boundary, CENTERLINE_SLACK) {
            return Err(Error::validation(
                format!("{path}.centerline[{k}]"),
                format!("centerline point lies outside the boundary of lane `{}`", lane.id),
            ));
        }
    }
    Ok(())
}

/// One vehicle's states over a contiguous run of timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrack {
    pub vehicle_id: String,
    /// Timestep of `states[0]`; `states[k]` is at `first_timestep + k`.
    pub first_timestep: i64,
    pub states: Vec<VehicleState>,
    pub length: f64,
    pub width: f64,
}

impl VehicleTrack {
    pub fn new(vehicle_id: impl Into<String>, first_timestep: i64, states: Vec<VehicleState>) -> Self {
        Self {
            vehicle_id: vehicle_id.into(),
            first_timestep,
            states,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
        }
    }

    /// Last covered timestep (inclusive).
    pub fn last_timestep(&self) -> i64 {
        self.first_timestep + self.states.len() as i64 - 1
    }

    pub fn state_at(&self, t: i64) -> Option<&VehicleState> {
        if t < self.first_timestep {
            return None;
        }
        self.states.get((t - self.first_timestep) as usize)
    }

    /// States from `t` through `t + steps` inclusive, truncated to what exists.
    pub fn window(&self, t: i64, steps: usize) -> &[VehicleState] {
        if t < self.first_timestep || t > self.last_timestep() {
            return &[];
        }
        let start = (t - self.first_timestep) as usize;
        let end = (start + steps + 1).min(self.states.len());
        &self.states[start..end]
    }

    pub fn timesteps(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.states.len() as i64).map(move |k| self.first_timestep + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub map: MapGraph,
    pub tracks: Vec<VehicleTrack>,
    pub dt: f64,
    pub ego_id: String,
}

impl Scene {
    pub fn track(&self, vehicle_id: &str) -> Option<&VehicleTrack> {
        self.tracks.iter().find(|t| t.vehicle_id == vehicle_id)
    }

    pub fn state(&self, vehicle_id: &str, t: i64) -> Result<&VehicleState> {
        self.track(vehicle_id)
            .and_then(|tr| tr.state_at(t))
            .ok_or_else(|| Error::UnknownVehicle { vehicle_id: vehicle_id.to_string(), timestep: t })
    }

    /// Inclusive timestep span covered by any track.
    pub fn time_span(&self) -> Option<(i64, i64)> {
        let first = self.tracks.iter().map(|t| t.first_timestep).min()?;
        let last = self.tracks.iter().map(|t| t.last_timestep()).max()?;
        Some((first, last))
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_id.is_empty() {
            return Err(Error::validation("scene_id", "empty scene id"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt", "dt must be positive"));
        }
        self.map.validate()?;
        let mut seen = BTreeSet::new();
        for (i, track) in self.tracks.iter().enumerate() {
            let path = format!("tracks[{i}]");
            if !seen.insert(track.vehicle_id.as_str()) {
                return Err(Error::validation(
                    format!("{path}.vehicle_id"),
                    format!("duplicate vehicle id `{}`", track.vehicle_id),
                ));
            }
            if track.vehicle_id.is_empty() {
                return Err(Error::validation(format!("{path}.vehicle_id"), "empty vehicle id"));
            }
            if !(track.length.is_finite() && track.length > 0.0) {
                return Err(Error::validation(format!("{path}.length"), "length must be positive"));
            }
            if !(track.width.is_finite() && track.width > 0.0) {
                return Err(Error::validation(format!("{path}.width"), "width must be positive"));
            }
            if track.states.is_empty() {
                return Err(Error::validation(format!("{path}.states"), "track has no states"));
            }
            if let Some(k) = track.states.iter().position(|s| !s.is_valid()) {
                return Err(Error::validation(
                    format!("{path}.states[{k}]"),
                    "state must be finite with speed >= 0 and yaw in (-pi, pi]",
                ));
            }
        }
        if self.track(&self.ego_id).is_none() {
            return Err(Error::validation("ego_id", format!("ego `{}` does not match any track", self.ego_id)));
        }
        Ok(())
    }
}

/// Resamples a polyline to `n_points` points equally spaced by arclength.
/// The first and last points are the original endpoints.
pub fn resample_polyline(line: &[Vec2], n_points: usize) -> Result<Vec<Vec2>> {
    if line.len() < 2 {
        return Err(Error::DegenerateInput("polyline needs at least 2 points".into()));
    }
    if n_points < 2 {
        return Err(Error::DegenerateInput("need at least 2 output points".into()));
    }
    let mut cumulative = Vec::with_capacity(line.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in line.windows(2) {
        acc += w[0].distance(w[1]);
        cumulative.push(acc);
    }
    let total = acc;
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::DegenerateInput("polyline has zero arclength".into()));
    }

    let mut out = Vec::with_capacity(n_points);
    out.push(line[0]);
    let mut seg = 0;
    for k in 1..n_points - 1 {
        let target = total * k as f64 / (n_points - 1) as f64;
        while seg + 1 < line.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 { ((target - cumulative[seg]) / seg_len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(line[seg].lerp(line[seg + 1], t));
    }
    out.push(*line.last().unwrap());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec2> {
        v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
    }

    #[test]
    fn resample_two_point_line() {
        let out = resample_polyline(&pts(&[(0.0, 0.0), (10.0, 0.0)]), 3).unwrap();
        assert_eq!(out, pts(&[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)]));
    }

    #[test]
    fn resample_uniform_is_identity() {
        let line = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let out = resample_polyline(&line, 4).unwrap();
        for (a, b) in out.iter().zip(&line) {
            assert!(a.distance(*b) < 1e-9);
        }
    }

    #[test]
    fn resample_l_shape_by_hand() {
        // Arclengths 0,2,4,6,8 along (0,0)->(4,0)->(4,4).
        let out = resample_polyline(&pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0)]), 5).unwrap();
        let expected = pts(&[(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (4.0, 2.0), (4.0, 4.0)]);
        for (a, b) in out.iter().zip(&expected) {
            assert!(a.distance(*b) < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn resample_rejects_zero_length() {
        let err = resample_polyline(&pts(&[(1.0, 1.0), (1.0, 1.0)]), 4).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
        assert!(resample_polyline(&pts(&[(1.0, 1.0)]), 4).is_err());
    }

    #[test]
    fn enum_strings() {
        assert_eq!(LaneType::UTurn.as_str(), "u_turn");
        assert_eq!(AreaType::ParkingArea.as_str(), "parking_area");
        assert_eq!(serde_json::to_string(&LaneType::LeftTurn).unwrap(), "\"left_turn\"");
        assert_eq!(serde_json::to_string(&AreaType::RegularRoad).unwrap(), "\"regular_road\"");
        for t in LaneType::ALL {
            assert_eq!(LaneType::parse(t.as_str()), Some(t));
        }
    }

    #[test]
    fn track_window_truncates() {
        let states = vec![VehicleState::new(0.0, 0.0, 0.0, 0.0); 5];
        let tr = VehicleTrack::new("a", 10, states);
        assert_eq!(tr.window(10, 50).len(), 5);
        assert_eq!(tr.window(12, 1).len(), 2);
        assert!(tr.window(9, 3).is_empty());
        assert_eq!(tr.last_timestep(), 14);
    }
}
