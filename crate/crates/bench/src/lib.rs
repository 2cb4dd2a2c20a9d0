//! Fixtures shared by the benchmarks.

use bevkit_core::annotate::{annotate_scene, AnnotationRecord, AnnotatorConfig};
use bevkit_core::render::{raster_meta, RenderConfig};
use bevkit_core::synth::{synth_scene, Layout, SynthSpec};
use bevkit_core::vqa::ImageRef;
use bevkit_core::Scene;

/// A synthesized scene with its annotation records and one image per
/// vehicle at timestep 0.
pub struct Fixture {
    pub scene: Scene,
    pub records: Vec<AnnotationRecord>,
    pub images: Vec<ImageRef>,
}

pub fn fixture(layout: Layout, n: usize, seed: u64) -> Fixture {
    let spec = SynthSpec::new(layout, n.min(layout.capacity()));
    let (scene, _) = synth_scene(&spec, seed).expect("synthesize fixture");
    let records = annotate_scene(&scene, &AnnotatorConfig::default());
    let cfg = RenderConfig::default();
    let images = records
        .iter()
        .filter(|r| r.timestep == 0)
        .map(|r| ImageRef {
            image: format!("{}__{}.png", r.scene_id, r.vehicle_id),
            meta: raster_meta(&scene, &r.vehicle_id, 0, &cfg).expect("raster meta"),
        })
        .collect();
    Fixture { scene, records, images }
}
