//! Question generation and answer re-derivation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Choices, ImageRef, NormBBox, OrientationClass, QAItem, QType, QuestionTemplate, Rank, TemplateSet};
use crate::annotate::{AnnotationRecord, Direction, TrajectoryCategory};
use crate::error::{Error, Result};
use crate::geom::shortest_arc;
use crate::render::RasterMeta;
use crate::scene::Scene;

/// Default questions per image.
pub const DEFAULT_RATE: f64 = 6.0;

fn direction_phrase(d: Direction) -> &'static str {
    match d {
        Direction::Front => "in front of",
        Direction::Behind => "behind",
        Direction::Left => "to the left of",
        Direction::Right => "to the right of",
    }
}

/// FNV-1a over the image identity, so each image draws from its own stream
/// regardless of processing order.
fn image_seed(seed: u64, scene_id: &str, ego_id: &str, t: i64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(scene_id.as_bytes());
    eat(&[0xff]);
    eat(ego_id.as_bytes());
    eat(&[0xff]);
    eat(&t.to_le_bytes());
    h
}

#[derive(Default)]
struct Slots {
    direction: Option<Direction>,
    rank: Option<Rank>,
    trajectory_type: Option<TrajectoryCategory>,
    choices: Option<Choices>,
}

fn fill(template: &QuestionTemplate, slots: &Slots) -> String {
    let mut text = template.text.clone();
    if let Some(d) = slots.direction {
        text = text.replace("{direction}", direction_phrase(d));
    }
    if let Some(r) = slots.rank {
        text = text.replace("{rank}", r.as_str());
    }
    if let Some(t) = slots.trajectory_type {
        text = text.replace("{trajectory_type}", t.phrase());
    }
    if let Some(c) = slots.choices {
        text = text.replace("{bbox_a}", &c.a.text()).replace("{bbox_b}", &c.b.text());
    }
    text
}

/// Per-image geometry shared by the Location and Navigation questions.
struct ImageCtx<'a> {
    scene: &'a Scene,
    record: &'a AnnotationRecord,
    lane_boxes: Vec<Option<NormBBox>>,
}

impl<'a> ImageCtx<'a> {
    fn new(scene: &'a Scene, record: &'a AnnotationRecord, meta: &RasterMeta) -> Self {
        let lane_boxes = scene
            .map
            .lanes()
            .iter()
            .map(|l| NormBBox::from_points(l.boundary.iter().map(|&p| meta.normalize(p))))
            .collect();
        Self { scene, record, lane_boxes }
    }

    fn lane_box(&self, id: &str) -> Option<NormBBox> {
        let i = self.scene.map.lanes().iter().position(|l| l.id == id)?;
        self.lane_boxes[i]
    }

    /// Correct box for a Location question.
    fn location_box(&self) -> Option<NormBBox> {
        self.lane_box(self.record.current_lane.as_deref()?)
    }

    /// Correct box for a Navigation question: union over the trajectory lanes
    /// that are visible.
    fn navigation_box(&self) -> Option<NormBBox> {
        self.record.current_lane.as_ref()?;
        self.record.trajectory_lanes.iter().filter_map(|id| self.lane_box(id)).reduce(|a, b| a.union(&b))
    }

    /// Visible lanes outside `exclude` whose box has zero IoU with `correct`.
    fn distractors(&self, correct: &NormBBox, exclude: &[&str]) -> Vec<NormBBox> {
        self.scene
            .map
            .lanes()
            .iter()
            .zip(&self.lane_boxes)
            .filter(|(l, _)| !exclude.contains(&l.id.as_str()))
            .filter_map(|(_, b)| *b)
            .filter(|b| b.intersection_area(correct) == 0)
            .collect()
    }

    fn choice_pair(&self, q: QType) -> Option<(NormBBox, Vec<NormBBox>)> {
        let (correct, exclude): (NormBBox, Vec<&str>) = match q {
            QType::Location => {
                let cur = self.record.current_lane.as_deref()?;
                (self.location_box()?, vec![cur])
            }
            QType::Navigation => {
                (self.navigation_box()?, self.record.trajectory_lanes.iter().map(String::as_str).collect())
            }
            _ => return None,
        };
        let d = self.distractors(&correct, &exclude);
        (!d.is_empty()).then_some((correct, d))
    }

    fn feasible(&self, q: QType) -> bool {
        match q {
            QType::Location | QType::Navigation => self.choice_pair(q).is_some(),
            _ => true,
        }
    }
}

fn orientation_answer(
    scene: &Scene,
    record: &AnnotationRecord,
    dir: Direction,
    rank: Rank,
) -> Result<OrientationClass> {
    let list = record.relative_cars.get(dir);
    let other = match rank {
        Rank::Closest => list.first(),
        Rank::Farthest => list.last(),
    };
    let Some(other) = other else {
        return Ok(OrientationClass::None);
    };
    let ego = scene.state(&record.vehicle_id, record.timestep)?;
    let o = scene.state(other, record.timestep)?;
    Ok(OrientationClass::from_heading_diff_deg(shortest_arc(ego.yaw, o.yaw).to_degrees()))
}

fn gen_image(
    ctx: &ImageCtx<'_>,
    image: &ImageRef,
    templates: &TemplateSet,
    rate: f64,
    seed: u64,
    out: &mut Vec<QAItem>,
) -> Result<()> {
    let rec = ctx.record;
    let mut rng = ChaCha8Rng::seed_from_u64(image_seed(seed, &rec.scene_id, &rec.vehicle_id, rec.timestep));
    let count = rate.floor() as usize + usize::from(rng.gen_bool(rate.fract()));
    let mut order: Vec<QType> = QType::ALL.into_iter().filter(|&q| ctx.feasible(q)).collect();
    order.shuffle(&mut rng);

    for k in 0..count {
        let qtype = order[k % order.len()];
        let mut slots = Slots::default();
        let answer: String = match qtype {
            QType::AreaType => rec.area_type.as_str().to_string(),
            QType::LaneType => rec.lane_type.as_str().to_string(),
            QType::Location | QType::Navigation => {
                let (correct, distractors) = ctx.choice_pair(qtype).expect("feasibility checked");
                let wrong = distractors[rng.gen_range(0..distractors.len())];
                let correct_is_a = rng.gen_bool(0.5);
                slots.choices = Some(if correct_is_a {
                    Choices { a: correct, b: wrong }
                } else {
                    Choices { a: wrong, b: correct }
                });
                if qtype == QType::Navigation {
                    slots.trajectory_type = Some(rec.trajectory_category);
                }
                if correct_is_a { "A" } else { "B" }.to_string()
            }
            QType::Existence => {
                let d = *Direction::ALL.choose(&mut rng).unwrap();
                slots.direction = Some(d);
                if rec.relative_cars.get(d).is_empty() { "no" } else { "yes" }.to_string()
            }
            QType::Orientation => {
                let d = *Direction::ALL.choose(&mut rng).unwrap();
                let r = if rng.gen_bool(0.5) { Rank::Closest } else { Rank::Farthest };
                slots.direction = Some(d);
                slots.rank = Some(r);
                orientation_answer(ctx.scene, rec, d, r)?.as_str().to_string()
            }
        };
        let candidates = templates.for_type(qtype);
        let template = candidates[rng.gen_range(0..candidates.len())];
        out.push(QAItem {
            qa_id: format!("{}:{}:{}:{}", rec.scene_id, rec.vehicle_id, rec.timestep, k),
            image: image.image.clone(),
            qtype,
            template_id: template.template_id.clone(),
            question: fill(template, &slots),
            answer: answer.clone(),
            choices: slots.choices,
            answer_class: answer,
            scene_id: rec.scene_id.clone(),
            ego_id: rec.vehicle_id.clone(),
            timestep: rec.timestep,
            direction: slots.direction,
            rank: slots.rank,
            trajectory_type: slots.trajectory_type,
        });
    }
    Ok(())
}

/// Generates questions for every image of one scene. Output follows the
/// order of `images`; each image's questions depend only on `seed` and the
/// image identity.
pub fn gen_questions(
    scene: &Scene,
    records: &[AnnotationRecord],
    images: &[ImageRef],
    templates: &TemplateSet,
    rate: f64,
    seed: u64,
) -> Result<Vec<QAItem>> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::validation("rate", format!("rate must be positive, got {rate}")));
    }
    let index: BTreeMap<(&str, i64), &AnnotationRecord> = records
        .iter()
        .filter(|r| r.scene_id == scene.scene_id)
        .map(|r| ((r.vehicle_id.as_str(), r.timestep), r))
        .collect();
    let mut out = Vec::new();
    for image in images {
        let m = &image.meta;
        if m.scene_id != scene.scene_id {
            return Err(Error::validation(
                "images",
                format!("image {} belongs to scene {}, not {}", image.image, m.scene_id, scene.scene_id),
            ));
        }
        let rec = index.get(&(m.ego_id.as_str(), m.timestep)).ok_or_else(|| {
            Error::validation(
                "records",
                format!("no annotation for {} at timestep {} in {}", m.ego_id, m.timestep, m.scene_id),
            )
        })?;
        let ctx = ImageCtx::new(scene, rec, m);
        gen_image(&ctx, image, templates, rate, seed, &mut out)?;
    }
    Ok(out)
}

/// Re-derives an item's answer, choices and question text from the clean
/// scene and its annotation record.
pub fn verify_item(
    scene: &Scene,
    record: &AnnotationRecord,
    meta: &RasterMeta,
    templates: &TemplateSet,
    item: &QAItem,
) -> std::result::Result<(), String> {
    if (item.scene_id.as_str(), item.ego_id.as_str(), item.timestep)
        != (record.scene_id.as_str(), record.vehicle_id.as_str(), record.timestep)
    {
        return Err(format!("{}: record does not match provenance", item.qa_id));
    }
    if item.answer_class != item.answer {
        return Err(format!("{}: answer_class differs from answer", item.qa_id));
    }
    if !item.qtype.answers().contains(&item.answer.as_str()) {
        return Err(format!("{}: answer `{}` outside the {} vocabulary", item.qa_id, item.answer, item.qtype));
    }
    let template = templates
        .get(&item.template_id)
        .filter(|t| t.qtype == item.qtype)
        .ok_or_else(|| format!("{}: unknown template {}", item.qa_id, item.template_id))?;
    let ctx = ImageCtx::new(scene, record, meta);
    let expected = match item.qtype {
        QType::AreaType => record.area_type.as_str().to_string(),
        QType::LaneType => record.lane_type.as_str().to_string(),
        QType::Location | QType::Navigation => {
            let c = item.choices.ok_or_else(|| format!("{}: missing choices", item.qa_id))?;
            let correct = if item.qtype == QType::Location {
                ctx.location_box()
            } else {
                if item.trajectory_type != Some(record.trajectory_category) {
                    return Err(format!("{}: trajectory type differs from record", item.qa_id));
                }
                ctx.navigation_box()
            }
            .ok_or_else(|| format!("{}: no correct box derivable", item.qa_id))?;
            if c.a.intersection_area(&c.b) != 0 {
                return Err(format!("{}: choices overlap (IoU {})", item.qa_id, c.a.iou(&c.b)));
            }
            if c.a == correct {
                "A".to_string()
            } else if c.b == correct {
                "B".to_string()
            } else {
                return Err(format!("{}: neither choice is the correct box {correct}", item.qa_id));
            }
        }
        QType::Existence => {
            let d = item.direction.ok_or_else(|| format!("{}: missing direction", item.qa_id))?;
            if record.relative_cars.get(d).is_empty() { "no" } else { "yes" }.to_string()
        }
        QType::Orientation => {
            let d = item.direction.ok_or_else(|| format!("{}: missing direction", item.qa_id))?;
            let r = item.rank.ok_or_else(|| format!("{}: missing rank", item.qa_id))?;
            orientation_answer(scene, record, d, r).map_err(|e| format!("{}: {e}", item.qa_id))?.as_str().to_string()
        }
    };
    if item.answer != expected {
        return Err(format!("{}: answer `{}`, re-derived `{expected}`", item.qa_id, item.answer));
    }
    let slots = Slots {
        direction: item.direction,
        rank: item.rank,
        trajectory_type: item.trajectory_type,
        choices: item.choices,
    };
    if fill(template, &slots) != item.question {
        return Err(format!("{}: question text does not match its template", item.qa_id));
    }
    Ok(())
}
