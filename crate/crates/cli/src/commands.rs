use std::collections::BTreeMap;
use std::path::Path;

use bevkit_core::annotate::{annotate_scene, records_from_jsonl, records_to_jsonl, AnnotationRecord, AnnotatorConfig};
use bevkit_core::canon::Canon;
use bevkit_core::eval::{
    evaluate_rollouts, qa_accuracy, rollouts_from_jsonl, rollouts_to_jsonl, MetricReport, Prediction, RolloutRecord,
    DEFAULT_K,
};
use bevkit_core::geom::{normalize_angle, Frame, Vec2};
use bevkit_core::motion::{
    assemble_condition, describe_trajectory, extract_map_understanding_gt, lane_follow_plan, rollout, ConditionConfig,
    MapUnderstandingConfig, NavigationReasoning, PlannerConfig, StateSeq,
};
use bevkit_core::render::{
    perturb_combined_with_report, perturb_lanes_with_report, perturb_vehicles_with_report, render_bev, PerturbReport,
    RasterMeta, RenderConfig, DEFAULT_MAX_SHIFT,
};
use bevkit_core::synth::{mixed_layout, synth_scene, Layout, SynthSpec};
use bevkit_core::vqa::{
    balance_dataset, dataset_stats, gen_questions, items_from_jsonl, items_to_jsonl, split_dataset, ImageRef,
    TemplateSet, DEFAULT_RATE,
};
use bevkit_core::{save_scene, Error, Result, Scene, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::args::*;
use crate::config::{self, pick, Defaults};
use crate::files::{self, keyed_seed};

struct Ctx {
    defaults: Defaults,
    pool: rayon::ThreadPool,
}

impl Ctx {
    /// Maps `f` over `items` on the worker pool, keeping input order.
    fn par_map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn annotator(&self, path: Option<&Path>) -> Result<AnnotatorConfig> {
        match path {
            Some(p) => config::read_json(p),
            None => Ok(self.defaults.annotator.clone().unwrap_or_default()),
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(p) = &cli.config {
        files::require_exists(p)?;
    }
    let defaults = Defaults::load(cli.config.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs as usize)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cli.jobs)))?;
    let ctx = Ctx { defaults, pool };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Annotate(a) => annotate(&ctx, a),
        Command::Render(a) => render(&ctx, a),
        Command::Perturb(a) => perturb(&ctx, a),
        Command::Genqa(a) => genqa(&ctx, a),
        Command::Balance(a) => balance(&ctx, a),
        Command::Split(a) => split(&ctx, a),
        Command::Stats(a) => stats(a),
        Command::Rollout(a) => rollout_cmd(&ctx, a),
        Command::EvalQa(a) => eval_qa(a),
        Command::EvalTraj(a) => eval_traj(a),
        Command::ExportCond(a) => export_cond(&ctx, a),
    }
}

fn layout_at(name: &str, i: usize) -> Result<Layout> {
    if name == "mixed" {
        Ok(mixed_layout(i))
    } else {
        name.parse()
    }
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let horizon = pick(a.horizon, ctx.defaults.horizon, || SynthSpec::new(Layout::StraightRoad, 1).horizon);
    let make = |i: usize, scene_id: Option<String>| -> Result<(Scene, bevkit_core::synth::GroundTruth)> {
        let layout = layout_at(&a.layout, i)?;
        let mut spec = SynthSpec::new(layout, a.n.min(layout.capacity())).with_horizon(horizon);
        if let Some(id) = scene_id {
            spec = spec.with_scene_id(id);
        }
        synth_scene(&spec, a.seed.wrapping_add(i as u64))
    };
    let made = match (&a.output, &a.out_dir) {
        (Some(out), None) => {
            let (scene, gt) = make(0, None)?;
            save_scene(&scene, out)?;
            vec![gt]
        }
        (None, Some(dir)) => {
            files::ensure_dir(dir)?;
            let idx: Vec<usize> = (0..a.count.unwrap_or(1)).collect();
            ctx.par_map(&idx, |&i| {
                let (scene, gt) = make(i, Some(format!("scene_{i:05}")))?;
                save_scene(&scene, dir.join(format!("{}.json", scene.scene_id)))?;
                Ok(gt)
            })?
        }
        _ => return Err(Error::validation("synth", "give exactly one of --output or --out-dir")),
    };
    if let Some(gt_path) = &a.gt {
        let mut text = String::new();
        for gt in &made {
            text.push_str(&serde_json::to_string(gt).expect("ground truth serializes"));
            text.push('\n');
        }
        files::write_text(gt_path, &text)?;
    }
    log::info!("synthesized {} scene(s)", made.len());
    Ok(())
}

fn annotate(ctx: &Ctx, a: AnnotateArgs) -> Result<()> {
    let cfg = ctx.annotator(a.thresholds.as_deref())?;
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    let per_scene = ctx.par_map(&scenes, |s| Ok(annotate_scene(s, &cfg)))?;
    let records: Vec<AnnotationRecord> = per_scene.into_iter().flatten().collect();
    log::info!("{} records from {} scene(s)", records.len(), scenes.len());
    files::write_text(&a.output, &records_to_jsonl(&records))
}

fn image_stem(scene_id: &str, vehicle_id: &str, t: i64) -> String {
    format!("{scene_id}__{vehicle_id}__t{t:03}")
}

fn render(ctx: &Ctx, a: RenderArgs) -> Result<()> {
    let render_cfg: RenderConfig = match &a.render_config {
        Some(p) => config::read_json(p)?,
        None => ctx.defaults.render.clone().unwrap_or_default(),
    };
    render_cfg.side()?;
    let ann = ctx.annotator(a.thresholds.as_deref())?;
    let timesteps = pick(a.timesteps, ctx.defaults.timesteps.clone(), || config::DEFAULT_TIMESTEPS.to_vec());
    let egos = pick(a.egos, ctx.defaults.egos()?, || EgoSelection::All);
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    files::ensure_dir(&a.out_dir)?;
    let counts = ctx.par_map(&scenes, |scene| {
        let mut ids: Vec<&str> = match egos {
            EgoSelection::All => scene.tracks.iter().map(|t| t.vehicle_id.as_str()).collect(),
            EgoSelection::Scene => vec![scene.ego_id.as_str()],
        };
        ids.sort_unstable();
        let mut n = 0;
        for id in ids {
            let track = scene
                .track(id)
                .ok_or_else(|| Error::validation(&scene.scene_id, format!("ego `{id}` has no track")))?;
            for &t in &timesteps {
                // Skips pairs the annotator emits no record for.
                if track.window(t, ann.horizon).len() < ann.min_future_steps + 1 {
                    continue;
                }
                let raster = render_bev(scene, id, t, &render_cfg)?;
                raster.write(a.out_dir.join(format!("{}.png", image_stem(&scene.scene_id, id, t))))?;
                n += 1;
            }
        }
        Ok(n)
    })?;
    log::info!("rendered {} image(s)", counts.iter().sum::<usize>());
    Ok(())
}

fn perturb(ctx: &Ctx, a: PerturbArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.rate) {
        return Err(Error::validation("rate", format!("rate must lie in [0, 1], got {}", a.rate)));
    }
    let max_shift = pick(a.max_shift, ctx.defaults.max_shift, || DEFAULT_MAX_SHIFT);
    if !(max_shift >= 0.0 && max_shift.is_finite()) {
        return Err(Error::validation("max_shift", format!("must be non-negative, got {max_shift}")));
    }
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    files::ensure_dir(&a.out_dir)?;
    let reports = ctx.par_map(&scenes, |scene| {
        let seed = keyed_seed(a.seed, &scene.scene_id);
        let (noisy, report) = match a.mode {
            NoiseMode::Vehicle => perturb_vehicles_with_report(scene, a.rate, max_shift, seed),
            NoiseMode::Lane => perturb_lanes_with_report(scene, a.rate, seed),
            NoiseMode::Combined => perturb_combined_with_report(scene, a.rate, seed),
        };
        save_scene(&noisy, a.out_dir.join(format!("{}.json", scene.scene_id)))?;
        Ok(report)
    })?;
    let total = reports.iter().fold(PerturbReport::default(), |mut acc, r| {
        acc.vehicles_total += r.vehicles_total;
        acc.vehicles_removed += r.vehicles_removed;
        acc.vehicles_shifted += r.vehicles_shifted;
        acc.max_shift = acc.max_shift.max(r.max_shift);
        acc.lanes_total += r.lanes_total;
        acc.lanes_erased += r.lanes_erased;
        acc.lanes_relabeled += r.lanes_relabeled;
        acc
    });
    let mut summary = Canon::obj([
        ("scenes", Canon::Int(scenes.len() as i64)),
        ("vehicles_total", Canon::Int(total.vehicles_total as i64)),
        ("vehicles_removed", Canon::Int(total.vehicles_removed as i64)),
        ("vehicles_shifted", Canon::Int(total.vehicles_shifted as i64)),
        ("max_shift", Canon::Real(total.max_shift)),
        ("lanes_total", Canon::Int(total.lanes_total as i64)),
        ("lanes_erased", Canon::Int(total.lanes_erased as i64)),
        ("lanes_relabeled", Canon::Int(total.lanes_relabeled as i64)),
    ])
    .to_string();
    summary.push('\n');
    files::emit(None, &summary)
}

fn genqa(ctx: &Ctx, a: GenqaArgs) -> Result<()> {
    let rate = pick(a.rate, ctx.defaults.rate, || DEFAULT_RATE);
    let templates = match &a.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::builtin(),
    };
    files::require_exists(&a.records)?;
    files::require_exists(&a.images)?;
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    let records = records_from_jsonl(&files::read_text(&a.records)?)?;
    let mut by_scene: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_scene.entry(r.scene_id.clone()).or_default().push(r);
    }
    let mut images: BTreeMap<String, Vec<ImageRef>> = BTreeMap::new();
    for side in files::list_with_extension(&a.images, "json")? {
        let meta = RasterMeta::load(&side)?;
        let png = side.with_extension("png");
        files::require_exists(&png)?;
        let name = png.file_name().expect("file path").to_string_lossy().into_owned();
        images.entry(meta.scene_id.clone()).or_default().push(ImageRef { image: name, meta });
    }
    let known: std::collections::BTreeSet<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
    if let Some(orphan) = images.keys().find(|k| !known.contains(k.as_str())) {
        return Err(Error::validation(
            a.images.display().to_string(),
            format!("images reference scene `{orphan}` absent from --scenes"),
        ));
    }
    let empty_r = Vec::new();
    let empty_i = Vec::new();
    let per_scene = ctx.par_map(&scenes, |scene| {
        let imgs = images.get(&scene.scene_id).unwrap_or(&empty_i);
        let recs = by_scene.get(&scene.scene_id).unwrap_or(&empty_r);
        gen_questions(scene, recs, imgs, &templates, rate, a.seed)
    })?;
    let items: Vec<_> = per_scene.into_iter().flatten().collect();
    log::info!("{} question(s) over {} image(s)", items.len(), images.values().map(Vec::len).sum::<usize>());
    files::write_text(&a.output, &items_to_jsonl(&items))
}

fn balance(ctx: &Ctx, a: BalanceArgs) -> Result<()> {
    let factor = pick(a.factor, ctx.defaults.balance_factor, || config::DEFAULT_BALANCE_FACTOR);
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::validation("factor", format!("balance factor must be at least 1, got {factor}")));
    }
    let items = items_from_jsonl(&files::read_text(&a.input)?)?;
    let out = balance_dataset(&items, factor, a.seed);
    log::info!("kept {} of {} question(s)", out.len(), items.len());
    files::write_text(&a.output, &items_to_jsonl(&out))
}

fn split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let frac = pick(a.fraction, ctx.defaults.test_fraction, || config::DEFAULT_TEST_FRACTION);
    let items = items_from_jsonl(&files::read_text(&a.input)?)?;
    let (train, test) = split_dataset(&items, frac, a.seed)?;
    log::info!("train {} / test {}", train.len(), test.len());
    files::write_text(&a.train, &items_to_jsonl(&train))?;
    files::write_text(&a.test, &items_to_jsonl(&test))
}

fn stats(a: StatsArgs) -> Result<()> {
    let items = items_from_jsonl(&files::read_text(&a.input)?)?;
    files::emit(a.output.as_deref(), &dataset_stats(&items).to_json())
}

fn to_world(frame: &Frame, yaw0: f64, s: &VehicleState) -> [f64; 4] {
    let p = frame.to_world(s.position);
    [p.x, p.y, s.speed, normalize_angle(s.yaw + yaw0)]
}

fn rollout_cmd(ctx: &Ctx, a: RolloutArgs) -> Result<()> {
    let k = pick(a.samples, ctx.defaults.samples, || DEFAULT_K);
    if k == 0 {
        return Err(Error::validation("samples", "need at least one sample"));
    }
    let map_cfg = MapUnderstandingConfig {
        horizon: pick(a.horizon, ctx.defaults.horizon, || MapUnderstandingConfig::default().horizon),
        ..MapUnderstandingConfig::default()
    };
    let planner: PlannerConfig = ctx.defaults.planner.unwrap_or_default();
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    let per_scene = ctx.par_map(&scenes, |scene| {
        let mut ids: Vec<&str> = match a.agents {
            EgoSelection::All => scene.tracks.iter().map(|t| t.vehicle_id.as_str()).collect(),
            EgoSelection::Scene => vec![scene.ego_id.as_str()],
        };
        ids.sort_unstable();
        let mut out = Vec::new();
        for id in ids {
            let track = scene.track(id).expect("listed vehicle");
            let gt = track.window(a.t0, map_cfg.horizon);
            if gt.len() < 2 {
                continue;
            }
            let s0 = gt[0];
            let frame = Frame::new(s0.position, s0.yaw);
            let local0 = VehicleState { position: Vec2::ZERO, speed: s0.speed, yaw: 0.0 };
            let target = gt.iter().map(|s| s.speed).sum::<f64>() / gt.len() as f64;
            let nav = match a.planner {
                PlannerKind::Nav => extract_map_understanding_gt(scene, id, a.t0, &map_cfg)?.1,
                _ => NavigationReasoning::empty(map_cfg.n_s, map_cfg.n_p),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(keyed_seed(a.seed, &format!("{}/{id}", scene.scene_id)));
            let samples = (0..k)
                .map(|j| {
                    if a.planner == PlannerKind::Oracle {
                        return gt.iter().map(|s| s.to_array()).collect();
                    }
                    // The first sample tracks the recorded mean speed; the
                    // others jitter it by up to 10%.
                    let jitter: f64 = if j == 0 { 0.0 } else { rng.gen_range(-0.1..0.1) };
                    let plan = lane_follow_plan(&local0, &nav, target * (1.0 + jitter), gt.len() - 1, &planner);
                    rollout(&local0, &plan).states.iter().map(|s| to_world(&frame, s0.yaw, s)).collect()
                })
                .collect();
            out.push(RolloutRecord {
                scene_id: scene.scene_id.clone(),
                vehicle_id: id.to_string(),
                t0: a.t0,
                dt: scene.dt,
                samples,
            });
        }
        Ok(out)
    })?;
    let records: Vec<RolloutRecord> = per_scene.into_iter().flatten().collect();
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("no vehicle has a future after t0 = {}", a.t0)));
    }
    log::info!("{} agent rollout(s)", records.len());
    files::write_text(&a.output, &rollouts_to_jsonl(&records))
}

fn eval_qa(a: EvalQaArgs) -> Result<()> {
    let dataset = items_from_jsonl(&files::read_text(&a.dataset)?)?;
    let preds: Vec<Prediction> = files::read_text(&a.predictions)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("predictions line {}: {e}", i + 1))))
        .collect::<Result<_>>()?;
    let m = qa_accuracy(&dataset, &preds)?;
    let report = MetricReport { qa: Some(m), trajectory: None };
    files::emit(a.output.as_deref(), &report.to_json())
}

fn eval_traj(a: EvalTrajArgs) -> Result<()> {
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    let records = rollouts_from_jsonl(&files::read_text(&a.rollouts)?)?;
    let report = MetricReport { qa: None, trajectory: Some(evaluate_rollouts(&scenes, &records)?) };
    files::emit(a.output.as_deref(), &report.to_json())
}

fn export_cond(ctx: &Ctx, a: ExportCondArgs) -> Result<()> {
    let cfg: ConditionConfig = ctx.defaults.condition.unwrap_or_default();
    let ann = ctx.defaults.annotator.clone().unwrap_or_default();
    let scenes = files::load_scenes(&a.scenes.scenes)?;
    files::ensure_dir(&a.out_dir)?;
    ctx.par_map(&scenes, |scene| {
        let mut desc = BTreeMap::new();
        if a.descriptions == DescriptionSource::Auto {
            for tr in &scene.tracks {
                let w = tr.window(a.t0, cfg.map.horizon);
                if w.len() >= 2 {
                    let seq = StateSeq { states: w.to_vec(), dt: scene.dt };
                    desc.insert(tr.vehicle_id.clone(), describe_trajectory(&seq, &ann)?);
                }
            }
        }
        let bundle = assemble_condition(scene, a.t0, &desc, &cfg)?;
        bundle.export(&a.out_dir.join(&scene.scene_id))
    })?;
    log::info!("exported {} condition bundle(s)", scenes.len());
    Ok(())
}
