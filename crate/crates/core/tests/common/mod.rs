#![allow(dead_code)]

use bevkit_core::geom::{normalize_angle, Vec2};
use bevkit_core::synth::{synth_scene, Layout, SynthSpec};
use bevkit_core::{Area, Lane, MapGraph, Scene, VehicleState, VehicleTrack};

/// Applies a rigid motion (point map plus heading offset) to every
/// coordinate of a scene.
pub fn transform_scene(scene: &Scene, f: impl Fn(Vec2) -> Vec2, dyaw: f64) -> Scene {
    let (lanes, areas) = scene.map.clone().into_parts();
    let lanes = lanes
        .into_iter()
        .map(|l| Lane {
            centerline: l.centerline.iter().map(|&p| f(p)).collect(),
            boundary: l.boundary.iter().map(|&p| f(p)).collect(),
            ..l
        })
        .collect();
    let areas = areas.into_iter().map(|a| Area { polygon: a.polygon.iter().map(|&p| f(p)).collect(), ..a }).collect();
    let tracks = scene
        .tracks
        .iter()
        .map(|t| VehicleTrack {
            states: t
                .states
                .iter()
                .map(|s| VehicleState { position: f(s.position), speed: s.speed, yaw: normalize_angle(s.yaw + dyaw) })
                .collect(),
            ..t.clone()
        })
        .collect();
    Scene { map: MapGraph::new(lanes, areas), tracks, ..scene.clone() }
}

/// Exact quarter turn about `c`.
pub fn quarter_turn(c: Vec2) -> impl Fn(Vec2) -> Vec2 {
    move |p| {
        let d = p - c;
        Vec2::new(c.x - d.y, c.y + d.x)
    }
}

pub fn synth(layout_idx: usize, n: usize, seed: u64) -> Scene {
    let layout = Layout::ALL[layout_idx % Layout::ALL.len()];
    let n = 1 + n % layout.capacity();
    synth_scene(&SynthSpec::new(layout, n), seed).unwrap().0
}
