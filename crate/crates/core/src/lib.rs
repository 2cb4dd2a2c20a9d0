//! Bird's-eye-view traffic-scene toolkit: scene model and synthetic scenes,
//! rule-based annotation, BEV rendering with noise regimes, VQA synthesis,
//! unicycle motion utilities and evaluation metrics.

pub mod annotate;
pub mod canon;
pub mod error;
pub mod eval;
pub mod geom;
pub mod motion;
pub mod render;
pub mod scene;
pub mod synth;
pub mod vqa;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use scene::{
    load_scene, resample_polyline, save_scene, ActionBounds, Area, AreaType, Lane, LaneType, MapGraph, Scene,
    VehicleAction, VehicleState, VehicleTrack,
};
