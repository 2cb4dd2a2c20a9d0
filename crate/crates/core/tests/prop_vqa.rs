mod common;

use std::collections::BTreeMap;

use bevkit_core::annotate::{annotate_scene, AnnotationRecord, AnnotatorConfig, Direction};
use bevkit_core::render::{raster_meta, RenderConfig};
use bevkit_core::vqa::{
    balance_dataset, dataset_stats, gen_questions, split_dataset, verify_item, ImageRef, QAItem, QType, TemplateSet,
};
use bevkit_core::Scene;
use proptest::prelude::*;

fn items_for(scene: &Scene, records: &[AnnotationRecord], rate: f64, seed: u64) -> Vec<QAItem> {
    let cfg = RenderConfig::default();
    let images: Vec<ImageRef> = records
        .iter()
        .filter(|r| r.timestep % 25 == 0)
        .map(|r| ImageRef {
            image: format!("{}_{}_{}.png", r.scene_id, r.vehicle_id, r.timestep),
            meta: raster_meta(scene, &r.vehicle_id, r.timestep, &cfg).unwrap(),
        })
        .collect();
    gen_questions(scene, records, &images, &TemplateSet::builtin(), rate, seed).unwrap()
}

fn corpus(seed: u64, scenes: usize) -> Vec<QAItem> {
    (0..scenes)
        .flat_map(|i| {
            let scene = common::synth(i, 3 + i, seed.wrapping_add(i as u64));
            let recs = annotate_scene(&scene, &AnnotatorConfig::default());
            items_for(&scene, &recs, 6.0, seed)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generated_items_rederive(layout in 0usize..5, n in 0usize..8, seed in any::<u64>(), rate in 1.0f64..8.0) {
        let scene = common::synth(layout, n, seed);
        let recs = annotate_scene(&scene, &AnnotatorConfig::default());
        let items = items_for(&scene, &recs, rate, seed);
        let by_key: BTreeMap<(&str, i64), &AnnotationRecord> =
            recs.iter().map(|r| ((r.vehicle_id.as_str(), r.timestep), r)).collect();
        let templates = TemplateSet::builtin();
        for it in &items {
            let rec = by_key[&(it.ego_id.as_str(), it.timestep)];
            let meta = raster_meta(&scene, &it.ego_id, it.timestep, &RenderConfig::default()).unwrap();
            prop_assert_eq!(verify_item(&scene, rec, &meta, &templates, it), Ok(()));
            if let Some(ch) = &it.choices {
                prop_assert_eq!(ch.a.iou(&ch.b), 0.0);
                for b in [ch.a, ch.b] {
                    prop_assert!(b.x0 <= b.x1 && b.y0 <= b.y1 && b.x1 <= 100 && b.y1 <= 100);
                }
            }
            if it.qtype == QType::Existence {
                let d: Direction = it.direction.unwrap();
                prop_assert_eq!(it.answer == "yes", !rec.relative_cars.get(d).is_empty());
            }
        }
        prop_assert_eq!(&items, &items_for(&scene, &recs, rate, seed));
    }

    #[test]
    fn balancing_only_removes(seed in any::<u64>(), factor in 1.0f64..4.0) {
        let items = corpus(seed, 5);
        let out = balance_dataset(&items, factor, seed);
        prop_assert_eq!(&out, &balance_dataset(&items, factor, seed));
        let before = dataset_stats(&items);
        let after = dataset_stats(&out);
        for (q, classes) in &before.per_answer_class {
            let min = *classes.values().min().unwrap();
            let cap = (factor * min as f64).ceil() as usize;
            for (class, n) in classes {
                let kept = after.per_answer_class[q].get(class).copied().unwrap_or(0);
                prop_assert!(kept <= *n);
                prop_assert_eq!(kept, (*n).min(cap));
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_leak_free(seed in any::<u64>(), frac in 0.0f64..0.5) {
        let items = corpus(seed, 4);
        let (train, test) = split_dataset(&items, frac, seed).unwrap();
        prop_assert_eq!(split_dataset(&items, frac, seed).unwrap(), (train.clone(), test.clone()));
        prop_assert_eq!(train.len() + test.len(), items.len());
        let test_images: std::collections::BTreeSet<&str> = test.iter().map(|i| i.image.as_str()).collect();
        prop_assert!(train.iter().all(|i| !test_images.contains(i.image.as_str())));
    }
}
