mod common;

use std::f64::consts::FRAC_PI_2;

use bevkit_core::geom::Vec2;
use bevkit_core::render::{
    perturb_combined_with_report, perturb_lanes_with_report, perturb_vehicles_with_report, render_bev, RenderConfig,
};
use proptest::prelude::*;

fn small_cfg() -> RenderConfig {
    RenderConfig { extent: 30.0, resolution: 0.5, ..RenderConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rendering_is_pure(layout in 0usize..5, n in 0usize..8, seed in any::<u64>(), t in 0i64..60) {
        let scene = common::synth(layout, n, seed);
        let cfg = small_cfg();
        let a = render_bev(&scene, &scene.ego_id, t, &cfg).unwrap();
        let b = render_bev(&scene.clone(), &scene.ego_id, t, &cfg).unwrap();
        prop_assert_eq!(a.to_png().unwrap(), b.to_png().unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn world_pixel_round_trip(layout in 0usize..5, seed in any::<u64>(), t in 0i64..60, u in -0.999f64..0.999, v in -0.999f64..0.999) {
        let scene = common::synth(layout, 0, seed);
        let cfg = small_cfg();
        let r = render_bev(&scene, &scene.ego_id, t, &cfg).unwrap();
        let ego = scene.state(&scene.ego_id, t).unwrap();
        let p = ego.position + Vec2::new(u * cfg.extent, v * cfg.extent).rotate(ego.yaw);
        let q = r.world_to_pixel(p);
        prop_assert!(q.x >= 0.0 && q.y >= 0.0 && q.x < r.width as f64 && q.y < r.height as f64);
        let back = r.pixel_to_world(q.x.floor() as usize, q.y.floor() as usize);
        prop_assert!(back.distance(p) <= cfg.resolution, "{} m apart", back.distance(p));
    }

    #[test]
    fn quarter_turns_leave_raster_unchanged(layout in 0usize..5, n in 0usize..8, seed in any::<u64>(), t in 0i64..60, turns in 1usize..4) {
        let scene = common::synth(layout, n, seed);
        let cfg = small_cfg();
        // With the ego at the origin a quarter turn is exact in floating point.
        let e = scene.state(&scene.ego_id, t).unwrap().position;
        let centred = common::transform_scene(&scene, |p| p - e, 0.0);
        let mut rotated = centred.clone();
        for _ in 0..turns {
            rotated = common::transform_scene(&rotated, common::quarter_turn(Vec2::ZERO), FRAC_PI_2);
        }
        let a = render_bev(&centred, &scene.ego_id, t, &cfg).unwrap();
        let b = render_bev(&rotated, &scene.ego_id, t, &cfg).unwrap();
        let differing = a.pixels.chunks(3).zip(b.pixels.chunks(3)).filter(|(x, y)| x != y).count();
        prop_assert_eq!(differing, 0);
    }

    #[test]
    fn perturbation_leaves_unaffected_items_identical(layout in 0usize..5, n in 0usize..8, seed in any::<u64>(), rate in 0.0f64..1.0) {
        let scene = common::synth(layout, n, seed);
        let (veh, vr) = perturb_vehicles_with_report(&scene, rate, 0.2, seed);
        let changed = scene
            .tracks
            .iter()
            .filter(|t| veh.track(&t.vehicle_id) != Some(t))
            .count();
        prop_assert_eq!(changed, vr.vehicles_affected());
        prop_assert_eq!(&veh.map, &scene.map);
        for t in &veh.tracks {
            let orig = scene.track(&t.vehicle_id).unwrap();
            for (a, b) in t.states.iter().zip(&orig.states) {
                prop_assert!(a.position.distance(b.position) <= 0.2 + 1e-12);
                prop_assert_eq!((a.speed, a.yaw), (b.speed, b.yaw));
            }
        }
        let (lanes, lr) = perturb_lanes_with_report(&scene, rate, seed);
        let changed = scene.map.lanes().iter().zip(lanes.map.lanes()).filter(|(a, b)| a != b).count();
        prop_assert_eq!(changed, lr.lanes_affected());
        prop_assert_eq!(&lanes.tracks, &scene.tracks);
        for (a, b) in scene.map.lanes().iter().zip(lanes.map.lanes()) {
            prop_assert_eq!(&a.boundary, &b.boundary);
            prop_assert_eq!(&a.centerline, &b.centerline);
        }
        let (_, cr) = perturb_combined_with_report(&scene, 0.0, seed);
        prop_assert_eq!(cr.vehicles_affected() + cr.lanes_affected(), 0);
    }
}
