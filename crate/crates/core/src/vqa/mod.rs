//! Visual question answering data: templates, generation from annotation
//! records, undersampling, image-level splits and statistics.

mod dataset;
mod gen;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::{Direction, TrajectoryCategory};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::render::RasterMeta;

pub use dataset::{balance_dataset, dataset_stats, items_from_jsonl, items_to_jsonl, split_dataset, StatsReport};
pub use gen::{gen_questions, verify_item, DEFAULT_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QType {
    AreaType,
    LaneType,
    Location,
    Navigation,
    Existence,
    Orientation,
}

impl QType {
    pub const ALL: [QType; 6] =
        [QType::AreaType, QType::LaneType, QType::Location, QType::Navigation, QType::Existence, QType::Orientation];

    pub fn as_str(&self) -> &'static str {
        match self {
            QType::AreaType => "area_type",
            QType::LaneType => "lane_type",
            QType::Location => "location",
            QType::Navigation => "navigation",
            QType::Existence => "existence",
            QType::Orientation => "orientation",
        }
    }

    pub fn parse(s: &str) -> Option<QType> {
        Self::ALL.into_iter().find(|q| q.as_str() == s)
    }

    /// Placeholders a template of this type must contain, and may only contain.
    pub fn placeholders(&self) -> &'static [&'static str] {
        match self {
            QType::AreaType | QType::LaneType => &[],
            QType::Location => &["bbox_a", "bbox_b"],
            QType::Navigation => &["trajectory_type", "bbox_a", "bbox_b"],
            QType::Existence => &["direction"],
            QType::Orientation => &["direction", "rank"],
        }
    }

    /// Closed answer vocabulary.
    pub fn answers(&self) -> Vec<&'static str> {
        match self {
            QType::AreaType => crate::scene::AreaType::ALL.iter().map(|a| a.as_str()).collect(),
            QType::LaneType => crate::scene::LaneType::ALL.iter().map(|l| l.as_str()).collect(),
            QType::Location | QType::Navigation => vec!["A", "B"],
            QType::Existence => vec!["yes", "no"],
            QType::Orientation => OrientationClass::ALL.iter().map(|o| o.as_str()).collect(),
        }
    }
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Closest,
    Farthest,
}

impl Rank {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rank::Closest => "closest",
            Rank::Farthest => "farthest",
        }
    }
}

/// Heading of another vehicle relative to the ego, in 90-degree bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationClass {
    SameDirection,
    Oncoming,
    PerpendicularLeft,
    PerpendicularRight,
    None,
}

impl OrientationClass {
    pub const ALL: [OrientationClass; 5] = [
        OrientationClass::SameDirection,
        OrientationClass::Oncoming,
        OrientationClass::PerpendicularLeft,
        OrientationClass::PerpendicularRight,
        OrientationClass::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OrientationClass::SameDirection => "same_direction",
            OrientationClass::Oncoming => "oncoming",
            OrientationClass::PerpendicularLeft => "perpendicular_left",
            OrientationClass::PerpendicularRight => "perpendicular_right",
            OrientationClass::None => "none",
        }
    }

    /// Bins a heading difference (other minus ego, degrees in (-180, 180]).
    /// The 0 and 180 bins are closed, the side bins open.
    pub fn from_heading_diff_deg(delta: f64) -> OrientationClass {
        if delta.abs() <= 45.0 {
            OrientationClass::SameDirection
        } else if delta.abs() >= 135.0 {
            OrientationClass::Oncoming
        } else if delta > 0.0 {
            OrientationClass::PerpendicularLeft
        } else {
            OrientationClass::PerpendicularRight
        }
    }
}

/// Image-normalized box stored in hundredths, so equality and IoU are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct NormBBox {
    pub x0: u8,
    pub y0: u8,
    pub x1: u8,
    pub y1: u8,
}

impl TryFrom<[f64; 4]> for NormBBox {
    type Error = String;

    fn try_from(v: [f64; 4]) -> std::result::Result<Self, String> {
        let h = |x: f64| -> std::result::Result<u8, String> {
            let k = (x * 100.0).round();
            if !(0.0..=100.0).contains(&k) || (x * 100.0 - k).abs() > 1e-6 {
                return Err(format!("bbox coordinate {x} is not a 2-decimal value in [0, 1]"));
            }
            Ok(k as u8)
        };
        let b = NormBBox { x0: h(v[0])?, y0: h(v[1])?, x1: h(v[2])?, y1: h(v[3])? };
        if b.x0 >= b.x1 || b.y0 >= b.y1 {
            return Err(format!("bbox {v:?} is empty"));
        }
        Ok(b)
    }
}

impl From<NormBBox> for [f64; 4] {
    fn from(b: NormBBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1].map(|k| k as f64 / 100.0)
    }
}

impl NormBBox {
    /// Outward-rounded box of normalized points clipped to the unit square;
    /// `None` when nothing of it remains visible.
    pub fn from_points(points: impl IntoIterator<Item = Vec2>) -> Option<NormBBox> {
        let (mut x0, mut y0) = (f64::INFINITY, f64::INFINITY);
        let (mut x1, mut y1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return None;
        }
        let lo = |v: f64| (v * 100.0).floor().clamp(0.0, 100.0) as u8;
        let hi = |v: f64| (v * 100.0).ceil().clamp(0.0, 100.0) as u8;
        let b = NormBBox { x0: lo(x0), y0: lo(y0), x1: hi(x1), y1: hi(y1) };
        (b.x0 < b.x1 && b.y0 < b.y1).then_some(b)
    }

    pub fn area(&self) -> u32 {
        (self.x1 - self.x0) as u32 * (self.y1 - self.y0) as u32
    }

    pub fn intersection_area(&self, o: &NormBBox) -> u32 {
        let w = self.x1.min(o.x1).saturating_sub(self.x0.max(o.x0));
        let h = self.y1.min(o.y1).saturating_sub(self.y0.max(o.y0));
        w as u32 * h as u32
    }

    pub fn iou(&self, o: &NormBBox) -> f64 {
        let inter = self.intersection_area(o);
        let union = self.area() + o.area() - inter;
        inter as f64 / union as f64
    }

    pub fn union(&self, o: &NormBBox) -> NormBBox {
        NormBBox { x0: self.x0.min(o.x0), y0: self.y0.min(o.y0), x1: self.x1.max(o.x1), y1: self.y1.max(o.y1) }
    }

    /// Prompt form: `[x0, y0, x1, y1]` with two decimals.
    pub fn text(&self) -> String {
        let f = |k: u8| format!("{}.{:02}", k / 100, k % 100);
        format!("[{}, {}, {}, {}]", f(self.x0), f(self.y0), f(self.x1), f(self.y1))
    }
}

impl fmt::Display for NormBBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Choices {
    #[serde(rename = "A")]
    pub a: NormBBox,
    #[serde(rename = "B")]
    pub b: NormBBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QAItem {
    pub qa_id: String,
    pub image: String,
    pub qtype: QType,
    pub template_id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Choices>,
    pub answer_class: String,
    pub scene_id: String,
    pub ego_id: String,
    pub timestep: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<Rank>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_type: Option<TrajectoryCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionTemplate {
    pub qtype: QType,
    pub template_id: String,
    pub text: String,
}

impl QuestionTemplate {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.text.as_str();
        while let Some(i) = rest.find('{') {
            let tail = &rest[i + 1..];
            match tail.find('}') {
                Some(j) => {
                    out.push(&tail[..j]);
                    rest = &tail[j + 1..];
                }
                None => break,
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    version: u32,
    templates: Vec<QuestionTemplate>,
}

/// Validated templates, grouped by question type in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<QuestionTemplate>,
}

const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.json");

impl TemplateSet {
    /// The templates shipped with the crate.
    pub fn builtin() -> TemplateSet {
        Self::from_json(BUILTIN_TEMPLATES).expect("builtin templates are valid")
    }

    pub fn from_json(text: &str) -> Result<TemplateSet> {
        let file: TemplateFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.version != 1 {
            return Err(Error::validation("version", format!("unsupported template file version {}", file.version)));
        }
        let mut ids = BTreeSet::new();
        for (i, t) in file.templates.iter().enumerate() {
            let path = format!("templates[{i}]");
            if !ids.insert(t.template_id.as_str()) {
                return Err(Error::validation(
                    format!("{path}.template_id"),
                    format!("duplicate template id `{}`", t.template_id),
                ));
            }
            let found: BTreeSet<&str> = t.placeholders().into_iter().collect();
            let want: BTreeSet<&str> = t.qtype.placeholders().iter().copied().collect();
            if found != want {
                return Err(Error::validation(
                    format!("{path}.text"),
                    format!("{} template must use placeholders {:?}, found {:?}", t.qtype, want, found),
                ));
            }
        }
        for q in QType::ALL {
            if !file.templates.iter().any(|t| t.qtype == q) {
                return Err(Error::validation("templates", format!("no template for {q}")));
            }
        }
        Ok(TemplateSet { templates: file.templates })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TemplateSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn for_type(&self, q: QType) -> Vec<&QuestionTemplate> {
        self.templates.iter().filter(|t| t.qtype == q).collect()
    }

    pub fn get(&self, template_id: &str) -> Option<&QuestionTemplate> {
        self.templates.iter().find(|t| t.template_id == template_id)
    }

    pub fn all(&self) -> &[QuestionTemplate] {
        &self.templates
    }
}

/// A rendered image a question can refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRef {
    /// Path of the PNG as recorded in each item's `image` field.
    pub image: String,
    pub meta: RasterMeta,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_cover_every_type() {
        let t = TemplateSet::builtin();
        for q in QType::ALL {
            assert!(t.for_type(q).len() >= 6, "{q}");
        }
    }

    #[test]
    fn template_placeholder_mismatch_rejected() {
        let text = r#"{"version":1,"templates":[
            {"qtype":"area_type","template_id":"a","text":"Area {direction}?"}]}"#;
        assert!(matches!(TemplateSet::from_json(text), Err(Error::Validation { .. })));
    }

    #[test]
    fn bbox_text_and_serde() {
        let b = NormBBox { x0: 5, y0: 12, x1: 100, y1: 40 };
        assert_eq!(b.text(), "[0.05, 0.12, 1.00, 0.40]");
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[0.05,0.12,1.0,0.4]");
        assert_eq!(serde_json::from_str::<NormBBox>(&json).unwrap(), b);
        assert!(serde_json::from_str::<NormBBox>("[0.5,0.1,0.5,0.2]").is_err());
    }

    #[test]
    fn bbox_iou() {
        let a = NormBBox { x0: 0, y0: 0, x1: 10, y1: 10 };
        let touching = NormBBox { x0: 10, y0: 0, x1: 20, y1: 10 };
        let half = NormBBox { x0: 5, y0: 0, x1: 15, y1: 10 };
        assert_eq!(a.iou(&touching), 0.0);
        assert!((a.iou(&half) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&a), 1.0);
    }

    #[test]
    fn bbox_from_points_clips_and_rounds_outward() {
        let b = NormBBox::from_points([Vec2::new(-0.2, 0.123), Vec2::new(0.456, 0.5)]).unwrap();
        assert_eq!(b, NormBBox { x0: 0, y0: 12, x1: 46, y1: 50 });
        assert!(NormBBox::from_points([Vec2::new(1.2, 0.1), Vec2::new(1.5, 0.3)]).is_none());
    }

    #[test]
    fn orientation_bins() {
        assert_eq!(OrientationClass::from_heading_diff_deg(45.0), OrientationClass::SameDirection);
        assert_eq!(OrientationClass::from_heading_diff_deg(-135.0), OrientationClass::Oncoming);
        assert_eq!(OrientationClass::from_heading_diff_deg(180.0), OrientationClass::Oncoming);
        assert_eq!(OrientationClass::from_heading_diff_deg(90.0), OrientationClass::PerpendicularLeft);
        assert_eq!(OrientationClass::from_heading_diff_deg(-60.0), OrientationClass::PerpendicularRight);
    }
}
