use std::hint::black_box;

use bevkit_bench::fixture;
use bevkit_core::annotate::{annotate_scene, AnnotatorConfig};
use bevkit_core::eval::{obb_overlap, Obb};
use bevkit_core::motion::{
    extract_map_understanding_gt, lane_follow_plan, rollout, MapUnderstandingConfig, PlannerConfig,
};
use bevkit_core::render::{perturb_combined, render_bev, RenderConfig};
use bevkit_core::synth::{synth_scene, Layout, SynthSpec};
use bevkit_core::vqa::{gen_questions, TemplateSet, DEFAULT_RATE};
use bevkit_core::{Vec2, VehicleState};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn synth(c: &mut Criterion) {
    let mut g = c.benchmark_group("synth");
    for layout in Layout::ALL {
        g.bench_with_input(BenchmarkId::from_parameter(layout), &layout, |b, &l| {
            let spec = SynthSpec::new(l, 5.min(l.capacity()));
            b.iter(|| synth_scene(black_box(&spec), 7).unwrap())
        });
    }
    g.finish();
}

fn annotate(c: &mut Criterion) {
    let f = fixture(Layout::FourWay, 5, 3);
    let cfg = AnnotatorConfig::default();
    c.bench_function("annotate/four_way_5", |b| b.iter(|| annotate_scene(black_box(&f.scene), &cfg)));
}

fn render(c: &mut Criterion) {
    let f = fixture(Layout::Roundabout, 5, 3);
    let cfg = RenderConfig::default();
    c.bench_function("render/roundabout", |b| {
        b.iter(|| render_bev(black_box(&f.scene), &f.scene.ego_id, 0, &cfg).unwrap())
    });
    c.bench_function("perturb/combined", |b| b.iter(|| perturb_combined(black_box(&f.scene), 0.1, 5)));
}

fn genqa(c: &mut Criterion) {
    let f = fixture(Layout::TJunction, 5, 3);
    let templates = TemplateSet::builtin();
    c.bench_function("genqa/t_junction", |b| {
        b.iter(|| gen_questions(black_box(&f.scene), &f.records, &f.images, &templates, DEFAULT_RATE, 1).unwrap())
    });
}

fn plan(c: &mut Criterion) {
    let f = fixture(Layout::FourWay, 4, 9);
    let map = MapUnderstandingConfig::default();
    let cfg = PlannerConfig::default();
    let (_, nav) = extract_map_understanding_gt(&f.scene, &f.scene.ego_id, 0, &map).unwrap();
    let s0 = f.scene.track(&f.scene.ego_id).unwrap().states[0];
    c.bench_function("plan/lane_follow_50", |b| {
        b.iter(|| rollout(&s0, &lane_follow_plan(black_box(&s0), &nav, 8.0, 50, &cfg)))
    });
}

fn collision(c: &mut Criterion) {
    let a = Obb::of_state(&VehicleState::new(0.0, 0.0, 0.0, 0.3), 4.5, 2.0);
    let b_box = Obb::new(Vec2::new(3.0, 1.5), 1.2, 4.5, 2.0);
    c.bench_function("eval/obb_overlap", |b| b.iter(|| obb_overlap(black_box(&a), black_box(&b_box)).unwrap()));
}

criterion_group!(benches, synth, annotate, render, genqa, plan, collision);
criterion_main!(benches);
