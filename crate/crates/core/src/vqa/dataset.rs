//! Dataset-level passes: undersampling, image-level splitting, statistics
//! and JSONL I/O.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{QAItem, QType};
use crate::canon::Canon;
use crate::error::{Error, Result};

/// Caps every answer class of each question type at `ceil(factor * m)`,
/// where `m` is the smallest non-empty class count of that type. Survivors
/// keep their relative order.
pub fn balance_dataset(items: &[QAItem], factor: f64, seed: u64) -> Vec<QAItem> {
    assert!(factor >= 1.0, "balance factor must be at least 1, got {factor}");
    let mut groups: BTreeMap<(QType, &str), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        groups.entry((it.qtype, it.answer_class.as_str())).or_default().push(i);
    }
    let mut min_per_type: BTreeMap<QType, usize> = BTreeMap::new();
    for ((q, _), idx) in &groups {
        let m = min_per_type.entry(*q).or_insert(usize::MAX);
        *m = (*m).min(idx.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; items.len()];
    for ((q, _), idx) in &groups {
        let cap = (factor * min_per_type[q] as f64).ceil() as usize;
        if idx.len() <= cap {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            for k in index::sample(&mut rng, idx.len(), cap) {
                keep[idx[k]] = true;
            }
        }
    }
    items.iter().zip(keep).filter(|(_, k)| *k).map(|(it, _)| it.clone()).collect()
}

/// Splits by image so no image contributes to both sides. Images are taken
/// in seeded random order and assigned to the test side while they fit under
/// the target question count.
pub fn split_dataset(items: &[QAItem], test_fraction: f64, seed: u64) -> Result<(Vec<QAItem>, Vec<QAItem>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::validation(
            "test_fraction",
            format!("test fraction must lie in [0, 1), got {test_fraction}"),
        ));
    }
    let mut per_image: BTreeMap<&str, usize> = BTreeMap::new();
    for it in items {
        *per_image.entry(it.image.as_str()).or_default() += 1;
    }
    let mut images: Vec<(&str, usize)> = per_image.into_iter().collect();
    images.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let target = (test_fraction * items.len() as f64).round() as usize;
    let mut test_images = BTreeSet::new();
    let mut taken = 0;
    for (img, n) in images {
        if taken + n <= target {
            taken += n;
            test_images.insert(img);
        }
        if taken == target {
            break;
        }
    }
    let (test, train): (Vec<QAItem>, Vec<QAItem>) =
        items.iter().cloned().partition(|it| test_images.contains(it.image.as_str()));
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub questions: usize,
    pub images: usize,
    pub questions_per_image: f64,
    pub per_qtype: BTreeMap<QType, usize>,
    pub per_answer_class: BTreeMap<QType, BTreeMap<String, usize>>,
}

impl StatsReport {
    /// Largest over smallest class count of a type; `None` when the type is
    /// absent.
    pub fn class_ratio(&self, q: QType) -> Option<f64> {
        let classes = self.per_answer_class.get(&q)?;
        let max = *classes.values().max()?;
        let min = *classes.values().min()?;
        Some(max as f64 / min as f64)
    }

    pub fn to_json(&self) -> String {
        let per_qtype = Canon::obj(
            QType::ALL.iter().map(|q| (q.as_str(), Canon::Int(*self.per_qtype.get(q).unwrap_or(&0) as i64))),
        );
        let per_class = Canon::obj(QType::ALL.iter().map(|q| {
            let classes = self.per_answer_class.get(q).cloned().unwrap_or_default();
            (q.as_str(), Canon::obj(classes.into_iter().map(|(k, v)| (k, Canon::Int(v as i64)))))
        }));
        let mut s = Canon::obj([
            ("questions", Canon::Int(self.questions as i64)),
            ("images", Canon::Int(self.images as i64)),
            ("questions_per_image", Canon::Real(self.questions_per_image)),
            ("per_qtype", per_qtype),
            ("per_answer_class", per_class),
        ])
        .to_string();
        s.push('\n');
        s
    }
}

pub fn dataset_stats(items: &[QAItem]) -> StatsReport {
    let mut r = StatsReport::default();
    let mut images = BTreeSet::new();
    for it in items {
        images.insert(it.image.as_str());
        *r.per_qtype.entry(it.qtype).or_default() += 1;
        *r.per_answer_class.entry(it.qtype).or_default().entry(it.answer_class.clone()).or_default() += 1;
    }
    r.questions = items.len();
    r.images = images.len();
    r.questions_per_image = if r.images == 0 { 0.0 } else { r.questions as f64 / r.images as f64 };
    r
}

pub fn items_to_jsonl(items: &[QAItem]) -> String {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("item serializes"));
        out.push('\n');
    }
    out
}

pub fn items_from_jsonl(text: &str) -> Result<Vec<QAItem>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(i: usize, qtype: QType, class: &str, image: usize) -> QAItem {
        QAItem {
            qa_id: format!("q{i}"),
            image: format!("img{image}.png"),
            qtype,
            template_id: "t".into(),
            question: "?".into(),
            answer: class.into(),
            choices: None,
            answer_class: class.into(),
            scene_id: "s".into(),
            ego_id: "e".into(),
            timestep: 0,
            direction: None,
            rank: None,
            trajectory_type: None,
        }
    }

    #[test]
    fn balance_caps_majority_class() {
        let mut items = Vec::new();
        for i in 0..1000 {
            items.push(item(i, QType::LaneType, "straight", i));
        }
        for i in 1000..1100 {
            items.push(item(i, QType::LaneType, "left_turn", i));
        }
        for i in 1100..1350 {
            items.push(item(i, QType::LaneType, "right_turn", i));
        }
        let out = balance_dataset(&items, 3.0, 1);
        let s = dataset_stats(&out);
        let c = &s.per_answer_class[&QType::LaneType];
        assert_eq!(c["straight"], 300);
        assert_eq!(c["left_turn"], 100);
        assert_eq!(c["right_turn"], 250);
        let pos: Vec<usize> = out.iter().map(|it| it.qa_id[1..].parse().unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn balanced_input_unchanged() {
        let items: Vec<QAItem> =
            (0..40).map(|i| item(i, QType::Existence, if i % 2 == 0 { "yes" } else { "no" }, i)).collect();
        assert_eq!(balance_dataset(&items, 3.0, 9), items);
    }

    #[test]
    fn split_keeps_images_whole() {
        let items: Vec<QAItem> = (0..1000).map(|i| item(i, QType::AreaType, "x", i / 5)).collect();
        let (train, test) = split_dataset(&items, 0.157, 3).unwrap();
        assert_eq!(train.len() + test.len(), 1000);
        let a: BTreeSet<&str> = train.iter().map(|i| i.image.as_str()).collect();
        let b: BTreeSet<&str> = test.iter().map(|i| i.image.as_str()).collect();
        assert!(a.is_disjoint(&b));
        assert!((test.len() as f64 / 1000.0 - 0.157).abs() <= 0.02);
        let (_, empty) = split_dataset(&items, 0.0, 3).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn stats_counts() {
        assert_eq!(dataset_stats(&[]), StatsReport::default());
        let items = vec![
            item(0, QType::AreaType, "intersection", 0),
            item(1, QType::AreaType, "regular_road", 0),
            item(2, QType::Existence, "yes", 0),
            item(3, QType::Existence, "yes", 1),
            item(4, QType::Existence, "no", 1),
            item(5, QType::Location, "A", 2),
        ];
        let s = dataset_stats(&items);
        assert_eq!((s.questions, s.images), (6, 3));
        assert_eq!(s.questions_per_image, 2.0);
        assert_eq!(s.per_qtype[&QType::Existence], 3);
        assert_eq!(s.per_answer_class[&QType::Existence]["yes"], 2);
        assert_eq!(s.class_ratio(QType::Existence), Some(2.0));
    }

    #[test]
    fn jsonl_round_trip() {
        let items: Vec<QAItem> = (0..3).map(|i| item(i, QType::AreaType, "x", i)).collect();
        assert_eq!(items_from_jsonl(&items_to_jsonl(&items)).unwrap(), items);
    }
}
