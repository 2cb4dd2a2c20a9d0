//! Scene JSON (schema v1) reading and canonical writing.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{Area, AreaType, Lane, LaneType, MapGraph, Scene, VehicleState, VehicleTrack};
use crate::canon::{quantize, Canon};
use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    schema_version: i64,
    scene_id: String,
    dt: f64,
    ego_id: String,
    map: MapFile,
    tracks: Vec<TrackFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    lanes: Vec<LaneFile>,
    areas: Vec<AreaFile>,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneFile {
    id: String,
    lane_type: LaneType,
    width: f64,
    centerline: Vec<[f64; 2]>,
    boundary: Vec<[f64; 2]>,
    successors: Vec<String>,
    #[serde(default = "yes")]
    draw_boundary: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AreaFile {
    id: String,
    area_type: AreaType,
    polygon: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    vehicle_id: String,
    length: f64,
    width: f64,
    states: Vec<StateFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    t: i64,
    x: f64,
    y: f64,
    v: f64,
    yaw: f64,
}

fn points(v: Vec<[f64; 2]>) -> Vec<Vec2> {
    v.into_iter().map(|[x, y]| Vec2::new(x, y)).collect()
}

/// Parses and validates scene JSON text.
pub fn scene_from_json(text: &str) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::validation("schema_version", format!("unsupported schema version {}", file.schema_version)));
    }
    let lanes = file
        .map
        .lanes
        .into_iter()
        .map(|l| Lane {
            id: l.id,
            centerline: points(l.centerline),
            boundary: points(l.boundary),
            lane_type: l.lane_type,
            successors: l.successors,
            width: l.width,
            draw_boundary: l.draw_boundary,
        })
        .collect();
    let areas = file
        .map
        .areas
        .into_iter()
        .map(|a| Area { id: a.id, polygon: points(a.polygon), area_type: a.area_type })
        .collect();

    let mut tracks = Vec::with_capacity(file.tracks.len());
    for (i, tr) in file.tracks.into_iter().enumerate() {
        let first = match tr.states.first() {
            Some(s) => s.t,
            None => {
                return Err(Error::validation(format!("tracks[{i}].states"), "track has no states"));
            }
        };
        for (k, pair) in tr.states.windows(2).enumerate() {
            if pair[1].t != pair[0].t + 1 {
                return Err(Error::validation(
                    format!("tracks[{i}].states[{}].t", k + 1),
                    "timesteps must be strictly increasing and contiguous",
                ));
            }
        }
        let states = tr.states.iter().map(|s| VehicleState::new(s.x, s.y, s.v, s.yaw)).collect();
        tracks.push(VehicleTrack {
            vehicle_id: tr.vehicle_id,
            first_timestep: first,
            states,
            length: tr.length,
            width: tr.width,
        });
    }

    let scene =
        Scene { scene_id: file.scene_id, map: MapGraph::new(lanes, areas), tracks, dt: file.dt, ego_id: file.ego_id };
    scene.validate()?;
    Ok(scene)
}

fn ring(points: &[Vec2]) -> Canon {
    Canon::Arr(points.iter().map(|p| Canon::xy(p.x, p.y)).collect())
}

/// Canonical JSON text: sorted keys, 6-decimal reals, trailing newline.
pub fn scene_to_json(scene: &Scene) -> String {
    let lanes = scene
        .map
        .lanes()
        .iter()
        .map(|l| {
            let mut fields = vec![
                ("id", Canon::str(&l.id)),
                ("lane_type", Canon::str(l.lane_type.as_str())),
                ("width", Canon::Real(l.width)),
                ("centerline", ring(&l.centerline)),
                ("boundary", ring(&l.boundary)),
                ("successors", Canon::Arr(l.successors.iter().map(Canon::str).collect())),
            ];
            if !l.draw_boundary {
                fields.push(("draw_boundary", Canon::Bool(false)));
            }
            Canon::obj(fields)
        })
        .collect();
    let areas = scene
        .map
        .areas()
        .iter()
        .map(|a| {
            Canon::obj([
                ("id", Canon::str(&a.id)),
                ("area_type", Canon::str(a.area_type.as_str())),
                ("polygon", ring(&a.polygon)),
            ])
        })
        .collect();
    let tracks = scene
        .tracks
        .iter()
        .map(|tr| {
            let states = tr
                .timesteps()
                .zip(&tr.states)
                .map(|(t, s)| {
                    Canon::obj([
                        ("t", Canon::Int(t)),
                        ("x", Canon::Real(s.position.x)),
                        ("y", Canon::Real(s.position.y)),
                        ("v", Canon::Real(s.speed)),
                        ("yaw", Canon::Real(s.yaw)),
                    ])
                })
                .collect();
            Canon::obj([
                ("vehicle_id", Canon::str(&tr.vehicle_id)),
                ("length", Canon::Real(tr.length)),
                ("width", Canon::Real(tr.width)),
                ("states", Canon::Arr(states)),
            ])
        })
        .collect();
    let doc = Canon::obj([
        ("schema_version", Canon::Int(SCHEMA_VERSION)),
        ("scene_id", Canon::str(&scene.scene_id)),
        ("dt", Canon::Real(scene.dt)),
        ("ego_id", Canon::str(&scene.ego_id)),
        ("map", Canon::obj([("lanes", Canon::Arr(lanes)), ("areas", Canon::Arr(areas))])),
        ("tracks", Canon::Arr(tracks)),
    ]);
    let mut text = doc.to_string();
    text.push('\n');
    text
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Parse(format!("{}: not UTF-8", path.display())),
        _ => Error::io(path, e),
    })?;
    scene_from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scene_to_json(scene)).map_err(|e| Error::io(path, e))
}

/// Rounds every real in the scene onto the 6-decimal file grid.
pub(crate) fn quantize_scene(scene: &mut Scene) {
    let q = |p: &mut Vec2| {
        p.x = quantize(p.x);
        p.y = quantize(p.y);
    };
    let (mut lanes, mut areas) = std::mem::take(&mut scene.map).into_parts();
    for lane in &mut lanes {
        lane.centerline.iter_mut().for_each(q);
        lane.boundary.iter_mut().for_each(q);
        lane.width = quantize(lane.width);
    }
    for area in &mut areas {
        area.polygon.iter_mut().for_each(q);
    }
    scene.map = MapGraph::new(lanes, areas);
    scene.dt = quantize(scene.dt);
    for tr in &mut scene.tracks {
        tr.length = quantize(tr.length);
        tr.width = quantize(tr.width);
        for s in &mut tr.states {
            q(&mut s.position);
            s.speed = quantize(s.speed);
            s.yaw = quantize(s.yaw);
        }
    }
}
