//! VQA accuracy, displacement metrics and scenario collision rate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canon::Canon;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::motion::StateSeq;
use crate::scene::{Scene, VehicleState};
use crate::vqa::{QAItem, QType};

/// Default number of samples per agent for min-metrics.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub qa_id: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QaMetrics {
    pub per_qtype: BTreeMap<QType, Tally>,
    pub overall: Tally,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisplacementMetrics {
    pub m_ade: f64,
    pub min_ade: f64,
    pub m_fde: f64,
    pub min_fde: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajMetrics {
    pub displacement: DisplacementMetrics,
    /// Agents averaged into `displacement`.
    pub agents: usize,
    pub samples: usize,
    pub scr: f64,
    pub scenarios: usize,
}

/// Either half may be absent; JSON output only carries present halves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub qa: Option<QaMetrics>,
    pub trajectory: Option<TrajMetrics>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut fields: Vec<(&str, Canon)> = Vec::new();
        if let Some(qa) = &self.qa {
            let per = Canon::obj(qa.per_qtype.iter().map(|(q, t)| (q.as_str(), Canon::Real(t.accuracy()))));
            let counts = Canon::obj(qa.per_qtype.iter().map(|(q, t)| (q.as_str(), Canon::Int(t.total as i64))));
            fields.push(("accuracy", per));
            fields.push(("overall_accuracy", Canon::Real(qa.overall.accuracy())));
            fields.push(("counts", counts));
            fields.push(("questions", Canon::Int(qa.overall.total as i64)));
        }
        if let Some(tr) = &self.trajectory {
            let d = tr.displacement;
            fields.push(("mADE", Canon::Real(d.m_ade)));
            fields.push(("minADE", Canon::Real(d.min_ade)));
            fields.push(("mFDE", Canon::Real(d.m_fde)));
            fields.push(("minFDE", Canon::Real(d.min_fde)));
            fields.push(("SCR", Canon::Real(tr.scr)));
            fields.push(("agents", Canon::Int(tr.agents as i64)));
            fields.push(("samples", Canon::Int(tr.samples as i64)));
            fields.push(("scenarios", Canon::Int(tr.scenarios as i64)));
        }
        let mut s = Canon::obj(fields).to_string();
        s.push('\n');
        s
    }
}

fn normalize_answer(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Exact-match top-1 accuracy after trimming and lowercasing.
pub fn qa_accuracy(dataset: &[QAItem], preds: &[Prediction]) -> Result<QaMetrics> {
    let known: BTreeSet<&str> = dataset.iter().map(|it| it.qa_id.as_str()).collect();
    let mut answers: BTreeMap<&str, &str> = BTreeMap::new();
    for p in preds {
        if !known.contains(p.qa_id.as_str()) {
            return Err(Error::UnknownId(p.qa_id.clone()));
        }
        if answers.insert(&p.qa_id, &p.answer).is_some() {
            return Err(Error::DuplicatePrediction(p.qa_id.clone()));
        }
    }
    let missing: Vec<String> =
        dataset.iter().filter(|it| !answers.contains_key(it.qa_id.as_str())).map(|it| it.qa_id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingPrediction(missing));
    }
    let mut m = QaMetrics::default();
    for it in dataset {
        let ok = normalize_answer(answers[it.qa_id.as_str()]) == normalize_answer(&it.answer);
        for t in [m.per_qtype.entry(it.qtype).or_default(), &mut m.overall] {
            t.total += 1;
            t.correct += ok as usize;
        }
    }
    Ok(m)
}

/// ADE averages over every timestep including the first.
pub fn displacement_metrics(gt: &StateSeq, samples: &[StateSeq]) -> Result<DisplacementMetrics> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("need at least one sample".into()));
    }
    if gt.states.is_empty() {
        return Err(Error::EmptyInput("ground truth has no states".into()));
    }
    let mut ades = Vec::with_capacity(samples.len());
    let mut fdes = Vec::with_capacity(samples.len());
    for s in samples {
        if s.states.len() != gt.states.len() {
            return Err(Error::LengthMismatch { expected: gt.states.len(), actual: s.states.len() });
        }
        if s.dt != gt.dt {
            return Err(Error::validation("dt", format!("sample dt {} differs from {}", s.dt, gt.dt)));
        }
        let errs: Vec<f64> = s.states.iter().zip(&gt.states).map(|(a, b)| a.position.distance(b.position)).collect();
        ades.push(errs.iter().sum::<f64>() / errs.len() as f64);
        fdes.push(*errs.last().unwrap());
    }
    let k = samples.len() as f64;
    Ok(DisplacementMetrics {
        m_ade: ades.iter().sum::<f64>() / k,
        min_ade: ades.iter().copied().fold(f64::INFINITY, f64::min),
        m_fde: fdes.iter().sum::<f64>() / k,
        min_fde: fdes.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Oriented rectangle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    pub fn new(center: Vec2, yaw: f64, length: f64, width: f64) -> Self {
        Self { center, yaw, length, width }
    }

    pub fn of_state(s: &VehicleState, length: f64, width: f64) -> Self {
        Self::new(s.position, s.yaw, length, width)
    }

    fn check(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0) || !self.center.is_finite() || !self.yaw.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "rectangle needs positive finite dimensions, got {} x {}",
                self.length, self.width
            )));
        }
        Ok(())
    }

    fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_angle(self.yaw);
        [u, u.perp()]
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let c = self.center;
        [c + u * hl + v * hw, c - u * hl + v * hw, c - u * hl - v * hw, c + u * hl - v * hw]
    }

    /// Half-extent of the projection onto unit axis `n`.
    fn radius_on(&self, n: Vec2) -> f64 {
        let [u, v] = self.axes();
        self.length / 2.0 * u.dot(n).abs() + self.width / 2.0 * v.dot(n).abs()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let [u, v] = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.length / 2.0 && d.dot(v).abs() <= self.width / 2.0
    }
}

const TOUCH_EPS: f64 = 1e-9;

/// Separating-axis test over both rectangles' face normals. Touching
/// counts as overlap.
pub fn obb_overlap(a: &Obb, b: &Obb) -> Result<bool> {
    a.check()?;
    b.check()?;
    let d = b.center - a.center;
    for n in a.axes().into_iter().chain(b.axes()) {
        if d.dot(n).abs() > a.radius_on(n) + b.radius_on(n) + TOUCH_EPS {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRollout {
    pub vehicle_id: String,
    pub length: f64,
    pub width: f64,
    pub states: StateSeq,
}

/// One scenario: the rollouts of several agents aligned from a shared
/// start timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRollout {
    pub scene_id: String,
    pub agents: Vec<AgentRollout>,
}

impl ScenarioRollout {
    /// Pairs each rollout with its vehicle footprint from `scene`.
    pub fn from_scene(scene: &Scene, rollouts: &BTreeMap<String, StateSeq>) -> Result<Self> {
        let agents = rollouts
            .iter()
            .map(|(id, seq)| {
                let tr =
                    scene.track(id).ok_or_else(|| Error::UnknownVehicle { vehicle_id: id.clone(), timestep: 0 })?;
                Ok(AgentRollout { vehicle_id: id.clone(), length: tr.length, width: tr.width, states: seq.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { scene_id: scene.scene_id.clone(), agents })
    }

    /// Whether any two agents' footprints overlap at a common index.
    pub fn has_collision(&self) -> Result<bool> {
        for (i, a) in self.agents.iter().enumerate() {
            let ra = 0.5 * a.length.hypot(a.width);
            for b in &self.agents[i + 1..] {
                let reach = ra + 0.5 * b.length.hypot(b.width) + TOUCH_EPS;
                for (sa, sb) in a.states.states.iter().zip(&b.states.states) {
                    if sa.position.distance(sb.position) > reach {
                        continue;
                    }
                    if obb_overlap(&Obb::of_state(sa, a.length, a.width), &Obb::of_state(sb, b.length, b.width))? {
                        return Ok(true);
                    }
                }
            }
        }
        Ok(false)
    }
}

/// Fraction of scenarios with at least one collision.
pub fn scenario_collision_rate(scenarios: &[ScenarioRollout]) -> Result<f64> {
    if scenarios.is_empty() {
        return Err(Error::EmptyInput("no scenarios".into()));
    }
    let mut hits = 0usize;
    for s in scenarios {
        hits += s.has_collision()? as usize;
    }
    Ok(hits as f64 / scenarios.len() as f64)
}

/// One agent's sampled futures, as stored one per line in rollout files.
/// Each state row is `[x, y, v, yaw]`; every sample starts at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutRecord {
    pub scene_id: String,
    pub vehicle_id: String,
    pub t0: i64,
    pub dt: f64,
    pub samples: Vec<Vec<[f64; 4]>>,
}

impl RolloutRecord {
    pub fn sample_seqs(&self) -> Vec<StateSeq> {
        self.samples
            .iter()
            .map(|s| StateSeq { states: s.iter().map(|a| VehicleState::from_array(*a)).collect(), dt: self.dt })
            .collect()
    }
}

pub fn rollouts_to_jsonl(records: &[RolloutRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn rollouts_from_jsonl(text: &str) -> Result<Vec<RolloutRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Scores rollout records against the recorded tracks of `scenes`.
/// Displacement metrics are averaged over agents. Each (scene, t0, sample
/// index) forms one scenario for the collision rate.
pub fn evaluate_rollouts(scenes: &[Scene], records: &[RolloutRecord]) -> Result<TrajMetrics> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no rollout records".into()));
    }
    let by_id: BTreeMap<&str, &Scene> = scenes.iter().map(|s| (s.scene_id.as_str(), s)).collect();
    let mut sum = DisplacementMetrics::default();
    let mut samples = 0usize;
    let mut groups: BTreeMap<(&str, i64), Vec<&RolloutRecord>> = BTreeMap::new();
    for r in records {
        let scene = by_id.get(r.scene_id.as_str()).ok_or_else(|| Error::UnknownId(r.scene_id.clone()))?;
        let track = scene
            .track(&r.vehicle_id)
            .ok_or_else(|| Error::UnknownVehicle { vehicle_id: r.vehicle_id.clone(), timestep: r.t0 })?;
        let seqs = r.sample_seqs();
        let len = seqs.first().map_or(0, |s| s.states.len());
        let window = track.window(r.t0, len.saturating_sub(1));
        if window.is_empty() {
            return Err(Error::UnknownVehicle { vehicle_id: r.vehicle_id.clone(), timestep: r.t0 });
        }
        let gt = StateSeq { states: window.to_vec(), dt: scene.dt };
        let d = displacement_metrics(&gt, &seqs)?;
        sum.m_ade += d.m_ade;
        sum.min_ade += d.min_ade;
        sum.m_fde += d.m_fde;
        sum.min_fde += d.min_fde;
        samples += seqs.len();
        groups.entry((r.scene_id.as_str(), r.t0)).or_default().push(r);
    }
    let n = records.len() as f64;
    let mut scenarios = Vec::new();
    for ((scene_id, _), recs) in groups {
        let scene = by_id[scene_id];
        let k = recs.iter().map(|r| r.samples.len()).max().unwrap_or(0);
        for j in 0..k {
            let rollouts: BTreeMap<String, StateSeq> = recs
                .iter()
                .filter_map(|r| r.sample_seqs().into_iter().nth(j).map(|s| (r.vehicle_id.clone(), s)))
                .collect();
            scenarios.push(ScenarioRollout::from_scene(scene, &rollouts)?);
        }
    }
    Ok(TrajMetrics {
        displacement: DisplacementMetrics {
            m_ade: sum.m_ade / n,
            min_ade: sum.min_ade / n,
            m_fde: sum.m_fde / n,
            min_fde: sum.min_fde / n,
        },
        agents: records.len(),
        samples,
        scr: scenario_collision_rate(&scenarios)?,
        scenarios: scenarios.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vqa::QType;

    fn line(offset: Vec2, n: usize) -> StateSeq {
        StateSeq {
            states: (0..n).map(|i| VehicleState::new(i as f64 + offset.x, offset.y, 1.0, 0.0)).collect(),
            dt: 0.1,
        }
    }

    #[test]
    fn identical_sample_is_zero() {
        let gt = line(Vec2::ZERO, 10);
        let d = displacement_metrics(&gt, std::slice::from_ref(&gt)).unwrap();
        assert_eq!(d, DisplacementMetrics::default());
    }

    #[test]
    fn constant_offset() {
        let gt = line(Vec2::ZERO, 10);
        let d = displacement_metrics(&gt, &[line(Vec2::new(0.0, 1.0), 10)]).unwrap();
        assert_eq!((d.m_ade, d.min_ade, d.m_fde, d.min_fde), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn three_samples_hand_computed() {
        let gt = line(Vec2::ZERO, 6);
        let s: Vec<StateSeq> = [1.0, 2.0, 3.0].iter().map(|o| line(Vec2::new(0.0, *o), 6)).collect();
        let d = displacement_metrics(&gt, &s).unwrap();
        assert_eq!((d.m_ade, d.min_ade), (2.0, 1.0));
        assert_eq!((d.m_fde, d.min_fde), (2.0, 1.0));
        assert!(matches!(
            displacement_metrics(&gt, &[line(Vec2::ZERO, 5)]),
            Err(Error::LengthMismatch { expected: 6, actual: 5 })
        ));
        assert!(displacement_metrics(&gt, &[]).is_err());
    }

    #[test]
    fn obb_basics() {
        let a = Obb::new(Vec2::ZERO, 0.0, 4.0, 2.0);
        assert!(obb_overlap(&a, &a).unwrap());
        assert!(!obb_overlap(&a, &Obb::new(Vec2::new(10.0, 0.0), 0.0, 4.0, 2.0)).unwrap());
        assert!(obb_overlap(&a, &Obb::new(Vec2::new(4.0, 0.0), 0.0, 4.0, 2.0)).unwrap());
        assert!(!obb_overlap(&a, &Obb::new(Vec2::new(0.0, 3.5), 0.0, 4.0, 2.0)).unwrap());
        // Bounding boxes overlap but a diagonal axis separates.
        assert!(!obb_overlap(&a, &Obb::new(Vec2::new(3.5, 2.5), std::f64::consts::FRAC_PI_4, 4.0, 2.0)).unwrap());
        assert!(matches!(obb_overlap(&a, &Obb::new(Vec2::ZERO, 0.0, 0.0, 2.0)), Err(Error::DegenerateInput(_))));
    }

    fn agent(id: &str, y: f64, v: f64, yaw: f64, x0: f64) -> AgentRollout {
        AgentRollout {
            vehicle_id: id.into(),
            length: 4.5,
            width: 2.0,
            states: StateSeq {
                states: (0..30).map(|i| VehicleState::new(x0 + v * yaw.cos() * 0.1 * i as f64, y, v, yaw)).collect(),
                dt: 0.1,
            },
        }
    }

    #[test]
    fn collision_rate() {
        let parallel = ScenarioRollout {
            scene_id: "p".into(),
            agents: vec![agent("a", 0.0, 5.0, 0.0, 0.0), agent("b", 3.5, 5.0, 0.0, 0.0)],
        };
        let head_on = ScenarioRollout {
            scene_id: "h".into(),
            agents: vec![agent("a", 0.0, 5.0, 0.0, 0.0), agent("b", 0.0, 5.0, std::f64::consts::PI, 20.0)],
        };
        assert_eq!(scenario_collision_rate(std::slice::from_ref(&parallel)).unwrap(), 0.0);
        assert_eq!(scenario_collision_rate(std::slice::from_ref(&head_on)).unwrap(), 1.0);
        let mut batch = vec![parallel; 9];
        batch.push(head_on);
        assert!((scenario_collision_rate(&batch).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(scenario_collision_rate(&[]), Err(Error::EmptyInput(_))));
    }

    fn qa(id: &str, qtype: QType, answer: &str) -> QAItem {
        QAItem {
            qa_id: id.into(),
            image: "i.png".into(),
            qtype,
            template_id: "t".into(),
            question: "?".into(),
            answer: answer.into(),
            choices: None,
            answer_class: answer.into(),
            scene_id: "s".into(),
            ego_id: "e".into(),
            timestep: 0,
            direction: None,
            rank: None,
            trajectory_type: None,
        }
    }

    #[test]
    fn accuracy_and_errors() {
        let ds = vec![
            qa("1", QType::Existence, "yes"),
            qa("2", QType::Existence, "no"),
            qa("3", QType::AreaType, "roundabout"),
        ];
        let p = |id: &str, a: &str| Prediction { qa_id: id.into(), answer: a.into() };
        let m = qa_accuracy(&ds, &[p("1", " YES "), p("2", "yes"), p("3", "roundabout")]).unwrap();
        assert_eq!(m.per_qtype[&QType::Existence].accuracy(), 0.5);
        assert_eq!(m.per_qtype[&QType::AreaType].accuracy(), 1.0);
        assert!((m.overall.accuracy() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(qa_accuracy(&ds, &[]), Err(Error::MissingPrediction(v)) if v.len() == 3));
        assert!(matches!(qa_accuracy(&ds, &[p("9", "x")]), Err(Error::UnknownId(_))));
        assert!(matches!(qa_accuracy(&ds, &[p("1", "x"), p("1", "y")]), Err(Error::DuplicatePrediction(_))));
        let json = MetricReport { qa: Some(m), trajectory: None }.to_json();
        assert!(json.contains("\"existence\":0.500000"), "{json}");
    }

    #[test]
    fn report_keys() {
        let j = MetricReport { qa: None, trajectory: Some(TrajMetrics::default()) }.to_json();
        for k in ["mADE", "minADE", "mFDE", "minFDE", "SCR"] {
            assert!(j.contains(&format!("\"{k}\":")), "{j}");
        }
    }
}
