//! Condition-input assembly and its on-disk tensor layout.
//!
//! Export directory contents:
//!
//! | file               | shape          | dtype   |
//! |--------------------|----------------|---------|
//! | `history.f32`      | (N, H, 4)      | f32 LE  |
//! | `global.f32`       | (N, 9)         | f32 LE  |
//! | `navigation.f32`   | (N, N_s, N_p, 2) | f32 LE |
//! | `nav_mask.f32`     | (N, N_s)       | f32 LE  |
//! | `descriptions.txt` | N lines        | UTF-8   |
//! | `manifest.json`    | shapes, dtypes, vehicle order | |
//!
//! History rows are `[x, y, v, yaw]` in world coordinates, oldest first.
//! Navigation points are in each vehicle's own frame at `t0`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::extract::{extract_map_understanding_gt, GlobalUnderstanding, MapUnderstandingConfig, NavigationReasoning};
use crate::error::{Error, Result};
use crate::scene::{Scene, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionConfig {
    /// History length per vehicle.
    pub history: usize,
    pub map: MapUnderstandingConfig,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        Self { history: 10, map: MapUnderstandingConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionBundle {
    pub scene_id: String,
    pub t0: i64,
    pub vehicles: Vec<String>,
    /// `history[i]` has exactly `H` states ending at `t0`.
    pub history: Vec<Vec<VehicleState>>,
    pub descriptions: Vec<String>,
    pub global: Vec<GlobalUnderstanding>,
    pub navigation: Vec<NavigationReasoning>,
    pub config: ConditionConfig,
}

/// Gathers every vehicle present at `t0`, ordered by id. Missing
/// descriptions become empty strings; a description for a vehicle absent at
/// `t0` is an error.
pub fn assemble_condition(
    scene: &Scene,
    t0: i64,
    descriptions: &BTreeMap<String, String>,
    cfg: &ConditionConfig,
) -> Result<ConditionBundle> {
    if cfg.history == 0 {
        return Err(Error::Config("history length must be positive".into()));
    }
    let mut vehicles: Vec<String> =
        scene.tracks.iter().filter(|t| t.state_at(t0).is_some()).map(|t| t.vehicle_id.clone()).collect();
    vehicles.sort();
    if let Some(id) = descriptions.keys().find(|k| vehicles.binary_search(k).is_err()) {
        return Err(Error::UnknownVehicle { vehicle_id: id.clone(), timestep: t0 });
    }
    let mut bundle = ConditionBundle {
        scene_id: scene.scene_id.clone(),
        t0,
        vehicles: Vec::with_capacity(vehicles.len()),
        history: Vec::new(),
        descriptions: Vec::new(),
        global: Vec::new(),
        navigation: Vec::new(),
        config: *cfg,
    };
    for id in vehicles {
        let track = scene.track(&id).expect("listed vehicle exists");
        let start = (t0 - cfg.history as i64 + 1).max(track.first_timestep);
        let mut hist: Vec<VehicleState> = (start..=t0).map(|t| *track.state_at(t).expect("contiguous track")).collect();
        let pad = cfg.history - hist.len();
        hist.splice(0..0, std::iter::repeat_n(hist[0], pad));
        let (g, nav) = extract_map_understanding_gt(scene, &id, t0, &cfg.map)?;
        bundle.history.push(hist);
        bundle.descriptions.push(descriptions.get(&id).map(|d| d.replace(['\n', '\r'], " ")).unwrap_or_default());
        bundle.global.push(g);
        bundle.navigation.push(nav);
        bundle.vehicles.push(id);
    }
    Ok(bundle)
}

/// Flat little-endian-ready arrays plus their shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionArrays {
    pub vehicles: Vec<String>,
    pub descriptions: Vec<String>,
    pub history: Vec<f32>,
    pub global: Vec<f32>,
    pub navigation: Vec<f32>,
    pub nav_mask: Vec<f32>,
    pub history_shape: [usize; 3],
    pub global_shape: [usize; 2],
    pub navigation_shape: [usize; 4],
    pub nav_mask_shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    scene_id: String,
    t0: i64,
    vehicles: Vec<String>,
    tensors: BTreeMap<String, TensorEntry>,
    descriptions: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    file: String,
    shape: Vec<usize>,
    dtype: String,
}

const TENSORS: [&str; 4] = ["history", "global", "navigation", "nav_mask"];

impl ConditionBundle {
    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn to_arrays(&self) -> ConditionArrays {
        let n = self.len();
        let h = self.config.history;
        let (ns, np) = (self.config.map.n_s, self.config.map.n_p);
        let history = self.history.iter().flatten().flat_map(|s| s.to_array()).map(|x| x as f32).collect();
        let global = self.global.iter().flat_map(|g| g.to_vec()).map(|x| x as f32).collect();
        let navigation = self.navigation.iter().flat_map(|nv| nv.to_tensor()).map(|x| x as f32).collect();
        let nav_mask = self.navigation.iter().flat_map(|nv| nv.mask()).map(|x| x as f32).collect();
        ConditionArrays {
            vehicles: self.vehicles.clone(),
            descriptions: self.descriptions.clone(),
            history,
            global,
            navigation,
            nav_mask,
            history_shape: [n, h, 4],
            global_shape: [n, 9],
            navigation_shape: [n, ns, np, 2],
            nav_mask_shape: [n, ns],
        }
    }

    /// Writes the tensor files, `descriptions.txt` and `manifest.json` into
    /// `dir`, creating it when needed.
    pub fn export(&self, dir: &Path) -> Result<()> {
        let arrays = self.to_arrays();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tensors = BTreeMap::new();
        for name in TENSORS {
            let (data, shape) = arrays.tensor(name);
            let file = format!("{name}.f32");
            let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
            let path = dir.join(&file);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            tensors.insert(name.to_string(), TensorEntry { file, shape, dtype: "float32_le".into() });
        }
        let mut text = String::new();
        for d in &self.descriptions {
            text.push_str(d);
            text.push('\n');
        }
        let path = dir.join("descriptions.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest {
            scene_id: self.scene_id.clone(),
            t0: self.t0,
            vehicles: self.vehicles.clone(),
            tensors,
            descriptions: "descriptions.txt".into(),
        };
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}

impl ConditionArrays {
    fn tensor(&self, name: &str) -> (&[f32], Vec<usize>) {
        match name {
            "history" => (&self.history, self.history_shape.to_vec()),
            "global" => (&self.global, self.global_shape.to_vec()),
            "navigation" => (&self.navigation, self.navigation_shape.to_vec()),
            "nav_mask" => (&self.nav_mask, self.nav_mask_shape.to_vec()),
            _ => unreachable!("unknown tensor {name}"),
        }
    }

    /// Reads an export directory back, checking sizes against the manifest.
    pub fn load(dir: &Path) -> Result<ConditionArrays> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut data: BTreeMap<&str, (Vec<f32>, Vec<usize>)> = BTreeMap::new();
        for name in TENSORS {
            let entry = m
                .tensors
                .get(name)
                .ok_or_else(|| Error::validation(path.display().to_string(), format!("missing tensor {name}")))?;
            if entry.dtype != "float32_le" {
                return Err(Error::validation(name, format!("unsupported dtype {}", entry.dtype)));
            }
            let p = dir.join(&entry.file);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let expected: usize = entry.shape.iter().product();
            if bytes.len() != expected * 4 || entry.shape.first() != Some(&m.vehicles.len()) {
                return Err(Error::validation(
                    p.display().to_string(),
                    format!("{} bytes do not match shape {:?}", bytes.len(), entry.shape),
                ));
            }
            let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            data.insert(name, (values, entry.shape.clone()));
        }
        let p = dir.join(&m.descriptions);
        let descriptions: Vec<String> =
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?.lines().map(str::to_string).collect();
        if descriptions.len() != m.vehicles.len() {
            return Err(Error::LengthMismatch { expected: m.vehicles.len(), actual: descriptions.len() });
        }
        let shape_err = |name: &str| Error::validation(name, "unexpected tensor rank");
        let mut take = |name: &str| data.remove(name).expect("loaded above");
        let (history, hs) = take("history");
        let (global, gs) = take("global");
        let (navigation, ns) = take("navigation");
        let (nav_mask, ms) = take("nav_mask");
        Ok(ConditionArrays {
            vehicles: m.vehicles,
            descriptions,
            history,
            global,
            navigation,
            nav_mask,
            history_shape: hs.try_into().map_err(|_| shape_err("history"))?,
            global_shape: gs.try_into().map_err(|_| shape_err("global"))?,
            navigation_shape: ns.try_into().map_err(|_| shape_err("navigation"))?,
            nav_mask_shape: ms.try_into().map_err(|_| shape_err("nav_mask"))?,
        })
    }
}
