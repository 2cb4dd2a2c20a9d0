//! Perception-level noise applied to the scene before rendering.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Vec2;
use crate::scene::{LaneType, MapGraph, Scene};

pub const DEFAULT_MAX_SHIFT: f64 = 0.20;

/// What a perturbation did.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerturbReport {
    pub vehicles_total: usize,
    pub vehicles_removed: usize,
    pub vehicles_shifted: usize,
    /// Largest shift norm applied (m).
    pub max_shift: f64,
    pub lanes_total: usize,
    pub lanes_erased: usize,
    pub lanes_relabeled: usize,
}

impl PerturbReport {
    pub fn vehicles_affected(&self) -> usize {
        self.vehicles_removed + self.vehicles_shifted
    }

    pub fn lanes_affected(&self) -> usize {
        self.lanes_erased + self.lanes_relabeled
    }
}

fn check_rate(rate: f64) -> f64 {
    assert!((0.0..=1.0).contains(&rate), "rate must lie in [0, 1], got {rate}");
    rate
}

/// Removes or shifts a `rate` fraction of vehicles. The ego is shifted
/// whenever it would have been removed.
pub fn perturb_vehicles(scene: &Scene, rate: f64, max_shift: f64, seed: u64) -> Scene {
    perturb_vehicles_with_report(scene, rate, max_shift, seed).0
}

pub fn perturb_vehicles_with_report(scene: &Scene, rate: f64, max_shift: f64, seed: u64) -> (Scene, PerturbReport) {
    let rate = check_rate(rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PerturbReport {
        vehicles_total: scene.tracks.len(),
        lanes_total: scene.map.lanes().len(),
        ..PerturbReport::default()
    };
    let mut tracks = Vec::with_capacity(scene.tracks.len());
    for tr in &scene.tracks {
        if !rng.gen_bool(rate) {
            tracks.push(tr.clone());
            continue;
        }
        let remove = rng.gen_bool(0.5);
        if remove && tr.vehicle_id != scene.ego_id {
            report.vehicles_removed += 1;
            continue;
        }
        // Uniform over the disk of radius max_shift.
        let r = max_shift * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(-PI..PI);
        let shift = Vec2::from_angle(phi) * r;
        let mut moved = tr.clone();
        for s in &mut moved.states {
            s.position = s.position + shift;
        }
        report.vehicles_shifted += 1;
        report.max_shift = report.max_shift.max(shift.norm());
        tracks.push(moved);
    }
    let out = Scene { tracks, ..scene.clone() };
    (out, report)
}

/// Erases boundary strokes of, or relabels, a `rate` fraction of lanes.
/// Lane geometry is never touched.
pub fn perturb_lanes(scene: &Scene, rate: f64, seed: u64) -> Scene {
    perturb_lanes_with_report(scene, rate, seed).0
}

pub fn perturb_lanes_with_report(scene: &Scene, rate: f64, seed: u64) -> (Scene, PerturbReport) {
    let rate = check_rate(rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PerturbReport {
        vehicles_total: scene.tracks.len(),
        lanes_total: scene.map.lanes().len(),
        ..PerturbReport::default()
    };
    let (mut lanes, areas) = scene.map.clone().into_parts();
    for lane in &mut lanes {
        if !rng.gen_bool(rate) {
            continue;
        }
        if rng.gen_bool(0.5) {
            lane.draw_boundary = false;
            report.lanes_erased += 1;
        } else {
            let others: Vec<LaneType> = LaneType::ALL.into_iter().filter(|&t| t != lane.lane_type).collect();
            lane.lane_type = others[rng.gen_range(0..others.len())];
            report.lanes_relabeled += 1;
        }
    }
    let out = Scene { map: MapGraph::new(lanes, areas), ..scene.clone() };
    (out, report)
}

/// Sub-seeds for the vehicle and lane stages of [`perturb_combined`].
pub fn combined_sub_seeds(seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.next_u64(), rng.next_u64())
}

pub fn perturb_combined(scene: &Scene, rate: f64, seed: u64) -> Scene {
    perturb_combined_with_report(scene, rate, seed).0
}

pub fn perturb_combined_with_report(scene: &Scene, rate: f64, seed: u64) -> (Scene, PerturbReport) {
    let (sv, sl) = combined_sub_seeds(seed);
    let (mid, rv) = perturb_vehicles_with_report(scene, rate, DEFAULT_MAX_SHIFT, sv);
    let (out, rl) = perturb_lanes_with_report(&mid, rate, sl);
    let report = PerturbReport {
        vehicles_total: rv.vehicles_total,
        vehicles_removed: rv.vehicles_removed,
        vehicles_shifted: rv.vehicles_shifted,
        max_shift: rv.max_shift,
        lanes_total: rl.lanes_total,
        lanes_erased: rl.lanes_erased,
        lanes_relabeled: rl.lanes_relabeled,
    };
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_scene, Layout, SynthSpec};

    fn scene() -> Scene {
        synth_scene(&SynthSpec::new(Layout::FourWay, 8), 5).unwrap().0
    }

    #[test]
    fn rate_zero_is_identity() {
        let s = scene();
        assert_eq!(perturb_vehicles(&s, 0.0, 0.2, 1), s);
        assert_eq!(perturb_lanes(&s, 0.0, 1), s);
        assert_eq!(perturb_combined(&s, 0.0, 1), s);
    }

    #[test]
    fn rate_one_bounds_shifts_and_keeps_ego() {
        let s = scene();
        let (p, rep) = perturb_vehicles_with_report(&s, 1.0, 0.2, 9);
        assert_eq!(rep.vehicles_affected(), s.tracks.len());
        assert!(p.track(&s.ego_id).is_some());
        for tr in &p.tracks {
            let orig = s.track(&tr.vehicle_id).unwrap();
            let d = tr.states[0].position.distance(orig.states[0].position);
            assert!(d <= 0.2);
            for (a, b) in tr.states.iter().zip(&orig.states) {
                assert_eq!((a.speed, a.yaw), (b.speed, b.yaw));
            }
        }
    }

    #[test]
    fn relabel_always_changes_type() {
        let s = scene();
        let (p, rep) = perturb_lanes_with_report(&s, 1.0, 4);
        assert_eq!(rep.lanes_affected(), s.map.lanes().len());
        for (a, b) in p.map.lanes().iter().zip(s.map.lanes()) {
            assert_eq!(a.boundary, b.boundary);
            assert_eq!(a.centerline, b.centerline);
            assert!(a.lane_type != b.lane_type || !a.draw_boundary);
            assert!(a.lane_type == b.lane_type || a.draw_boundary);
        }
    }

    #[test]
    fn combined_is_sequential_composition() {
        let s = scene();
        let (sv, sl) = combined_sub_seeds(77);
        let seq = perturb_lanes(&perturb_vehicles(&s, 0.3, DEFAULT_MAX_SHIFT, sv), 0.3, sl);
        assert_eq!(perturb_combined(&s, 0.3, 77), seq);
        let (_, rep) = perturb_combined_with_report(&s, 1.0, 77);
        assert!(rep.vehicles_affected() > 0 && rep.lanes_affected() > 0);
    }
}
