//! Ego-centric, heading-up BEV rasterization and the scene-level noise regimes.
//!
//! Image coordinates are continuous: pixel `(col, row)` covers
//! `[col, col + 1) x [row, row + 1)` and is painted when its center lies inside
//! a shape. The ego position maps to `(side / 2, side / 2)`, forward points up
//! and the ego's left points left.

mod noise;

use std::fs;
use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canon::Canon;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scene::{AreaType, Scene, VehicleState};

pub use noise::{
    combined_sub_seeds, perturb_combined, perturb_combined_with_report, perturb_lanes, perturb_lanes_with_report,
    perturb_vehicles, perturb_vehicles_with_report, PerturbReport, DEFAULT_MAX_SHIFT,
};

pub type Rgb = [u8; 3];

/// Ego speed above which the heading arrow is drawn (m/s).
pub const ARROW_MIN_SPEED: f64 = 0.5;
const ARROW_SHAFT_LENGTH: f64 = 2.5;
const ARROW_SHAFT_WIDTH: f64 = 0.5;
const ARROW_HEAD_LENGTH: f64 = 1.5;
const ARROW_HEAD_WIDTH: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Palette {
    pub background: Rgb,
    pub intersection: Rgb,
    pub roundabout: Rgb,
    pub parking_area: Rgb,
    pub regular_road: Rgb,
    pub lane: Rgb,
    pub lane_boundary: Rgb,
    pub vehicle: Rgb,
    pub ego: Rgb,
    pub arrow: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [24, 24, 24],
            intersection: [96, 72, 140],
            roundabout: [64, 112, 150],
            parking_area: [120, 112, 64],
            regular_road: [56, 56, 56],
            lane: [112, 112, 112],
            lane_boundary: [236, 236, 236],
            vehicle: [40, 120, 255],
            ego: [255, 0, 0],
            arrow: [255, 208, 0],
        }
    }
}

impl Palette {
    pub fn area(&self, t: AreaType) -> Rgb {
        match t {
            AreaType::Intersection => self.intersection,
            AreaType::Roundabout => self.roundabout,
            AreaType::ParkingArea => self.parking_area,
            AreaType::RegularRoad => self.regular_road,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Half-width of the square window (m).
    pub extent: f64,
    /// Meters per pixel.
    pub resolution: f64,
    /// Lane boundary stroke width (m).
    pub boundary_width: f64,
    pub palette: Palette,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { extent: 50.0, resolution: 0.25, boundary_width: 0.3, palette: Palette::default() }
    }
}

impl RenderConfig {
    /// Image side in pixels, or a config error when it is not a positive integer.
    pub fn side(&self) -> Result<usize> {
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return Err(Error::Config(format!("extent must be positive, got {}", self.extent)));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::Config(format!("resolution must be positive, got {}", self.resolution)));
        }
        let side = 2.0 * self.extent / self.resolution;
        let rounded = side.round();
        if rounded < 1.0 || (side - rounded).abs() > 1e-9 * side.max(1.0) {
            return Err(Error::Config(format!("image side 2*extent/resolution = {side} is not a positive integer")));
        }
        if rounded > 16384.0 {
            return Err(Error::Config(format!("image side {rounded} is too large")));
        }
        Ok(rounded as usize)
    }
}

/// `col = a*x + b*y + c`, `row = d*x + e*y + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 6]", into = "[f64; 6]")]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl From<[f64; 6]> for Affine {
    fn from([a, b, c, d, e, f]: [f64; 6]) -> Self {
        Affine { a, b, c, d, e, f }
    }
}

impl From<Affine> for [f64; 6] {
    fn from(t: Affine) -> Self {
        [t.a, t.b, t.c, t.d, t.e, t.f]
    }
}

impl Affine {
    /// Ego-centered, heading-up transform for a square image of `side` pixels.
    pub fn ego_frame(ego: &VehicleState, resolution: f64, side: usize) -> Affine {
        let (s, c) = crate::geom::sin_cos_quadrant(ego.yaw);
        let half = side as f64 / 2.0;
        let (a, b) = (s / resolution, -c / resolution);
        let (d, e) = (-c / resolution, -s / resolution);
        let (ex, ey) = (ego.position.x, ego.position.y);
        Affine { a, b, c: half - a * ex - b * ey, d, e, f: half - d * ex - e * ey }
    }

    /// Coefficients rounded onto the 6-decimal file grid, so a transform read
    /// back from a sidecar equals the one used for drawing.
    pub fn quantized(&self) -> Affine {
        let [a, b, c, d, e, f] = <[f64; 6]>::from(*self).map(crate::canon::quantize);
        Affine { a, b, c, d, e, f }
    }

    /// World point to continuous image coordinates `(col, row)`.
    pub fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.a * p.x + self.b * p.y + self.c, self.d * p.x + self.e * p.y + self.f)
    }

    /// Continuous image coordinates back to the world.
    pub fn invert(&self, q: Vec2) -> Vec2 {
        let det = self.a * self.e - self.b * self.d;
        let (u, v) = (q.x - self.c, q.y - self.f);
        Vec2::new((self.e * u - self.b * v) / det, (-self.d * u + self.a * v) / det)
    }
}

/// Everything about a raster except its pixels; written as the sidecar JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterMeta {
    pub scene_id: String,
    pub ego_id: String,
    pub timestep: i64,
    pub extent: f64,
    pub resolution: f64,
    pub transform: Affine,
}

impl RasterMeta {
    pub fn side(&self) -> usize {
        (2.0 * self.extent / self.resolution).round() as usize
    }

    /// World point to image-normalized coordinates (0..1 across the window).
    pub fn normalize(&self, p: Vec2) -> Vec2 {
        let q = self.transform.apply(p);
        let side = self.side() as f64;
        Vec2::new(q.x / side, q.y / side)
    }

    pub fn to_json(&self) -> String {
        let t: [f64; 6] = self.transform.into();
        let mut s = Canon::obj([
            ("scene_id", Canon::str(&self.scene_id)),
            ("ego_id", Canon::str(&self.ego_id)),
            ("timestep", Canon::Int(self.timestep)),
            ("extent", Canon::Real(self.extent)),
            ("resolution", Canon::Real(self.resolution)),
            ("transform", Canon::Arr(t.iter().map(|&v| Canon::Real(v)).collect())),
        ])
        .to_string();
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RasterMeta> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RasterMeta> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// An RGB image plus the transform it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct BevRaster {
    pub meta: RasterMeta,
    pub width: usize,
    pub height: usize,
    /// Row-major RGB bytes.
    pub pixels: Vec<u8>,
}

impl BevRaster {
    pub fn pixel(&self, col: usize, row: usize) -> Rgb {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn world_to_pixel(&self, p: Vec2) -> Vec2 {
        self.meta.transform.apply(p)
    }

    /// World position of the center of pixel `(col, row)`.
    pub fn pixel_to_world(&self, col: usize, row: usize) -> Vec2 {
        self.meta.transform.invert(Vec2::new(col as f64 + 0.5, row as f64 + 0.5))
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Fast);
            let mut w = enc.write_header().map_err(|e| Error::Parse(format!("png encoding: {e}")))?;
            w.write_image_data(&self.pixels).map_err(|e| Error::Parse(format!("png encoding: {e}")))?;
        }
        Ok(out)
    }

    /// Writes the PNG and a `.json` sidecar next to it.
    pub fn write(&self, png_path: impl AsRef<Path>) -> Result<()> {
        let png_path = png_path.as_ref();
        fs::write(png_path, self.to_png()?).map_err(|e| Error::io(png_path, e))?;
        let side = png_path.with_extension("json");
        fs::write(&side, self.meta.to_json()).map_err(|e| Error::io(&side, e))
    }
}

/// Decodes an 8-bit RGB PNG into `(width, height, pixels)`.
pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let err = |e: png::DecodingError| Error::Parse(format!("png decoding: {e}"));
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Parse("png too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Parse("expected 8-bit RGB png".into()));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

struct Canvas {
    side: usize,
    pixels: Vec<u8>,
}

impl Canvas {
    fn new(side: usize, bg: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(side * side * 3);
        for _ in 0..side * side {
            pixels.extend_from_slice(&bg);
        }
        Self { side, pixels }
    }

    /// Even-odd scanline fill sampling pixel centers.
    fn fill(&mut self, poly: &[Vec2], color: Rgb) {
        if poly.len() < 3 {
            return;
        }
        let side = self.side as f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut left, mut right) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in poly {
            lo = lo.min(p.y);
            hi = hi.max(p.y);
            left = left.min(p.x);
            right = right.max(p.x);
        }
        if hi < 0.0 || lo > side || right < 0.0 || left > side {
            return;
        }
        let row0 = (lo - 0.5).ceil().max(0.0) as usize;
        let row1 = ((hi - 0.5).floor() + 1.0).clamp(0.0, side) as usize;
        let mut xs: Vec<f64> = Vec::with_capacity(8);
        for row in row0..row1 {
            let y = row as f64 + 0.5;
            xs.clear();
            let n = poly.len();
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if (a.y <= y) != (b.y <= y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                let c0 = (pair[0] - 0.5).ceil().max(0.0);
                let c1 = (pair[1] - 0.5).ceil().min(side);
                if c1 <= c0 {
                    continue;
                }
                let base = row * self.side;
                for col in c0 as usize..c1 as usize {
                    let i = 3 * (base + col);
                    self.pixels[i..i + 3].copy_from_slice(&color);
                }
            }
        }
    }

    fn stroke(&mut self, a: Vec2, b: Vec2, width: f64, color: Rgb) {
        let dir = b - a;
        let len = dir.norm();
        if len == 0.0 {
            return;
        }
        let n = dir.perp() * (width / 2.0 / len);
        self.fill(&[a - n, b - n, b + n, a + n], color);
    }
}

fn footprint(s: &VehicleState, length: f64, width: f64) -> [Vec2; 4] {
    let f = Vec2::from_angle(s.yaw);
    let l = f.perp();
    let (hf, hl) = (f * (length / 2.0), l * (width / 2.0));
    let p = s.position;
    [p - hf - hl, p + hf - hl, p + hf + hl, p - hf + hl]
}

/// Sidecar metadata of the raster `render_bev` would produce, without
/// drawing it.
pub fn raster_meta(scene: &Scene, ego_id: &str, t: i64, cfg: &RenderConfig) -> Result<RasterMeta> {
    let side = cfg.side()?;
    let ego = scene.state(ego_id, t)?;
    Ok(RasterMeta {
        scene_id: scene.scene_id.clone(),
        ego_id: ego_id.to_string(),
        timestep: t,
        extent: cfg.extent,
        resolution: cfg.resolution,
        transform: Affine::ego_frame(ego, cfg.resolution, side).quantized(),
    })
}

/// Renders the scene around `ego_id` at timestep `t`.
pub fn render_bev(scene: &Scene, ego_id: &str, t: i64, cfg: &RenderConfig) -> Result<BevRaster> {
    let meta = raster_meta(scene, ego_id, t, cfg)?;
    let side = meta.side();
    let ego = *scene.state(ego_id, t)?;
    let tf = meta.transform;
    // Offsets from the ego are formed before the linear part is applied.
    let half = side as f64 / 2.0;
    let px = |pts: &[Vec2]| -> Vec<Vec2> {
        pts.iter()
            .map(|&p| {
                let d = p - ego.position;
                Vec2::new(half + (tf.a * d.x + tf.b * d.y), half + (tf.d * d.x + tf.e * d.y))
            })
            .collect()
    };
    let pal = &cfg.palette;
    let mut canvas = Canvas::new(side, pal.background);

    let mut areas: Vec<_> = scene.map.areas().iter().collect();
    areas.sort_by_key(|a| std::cmp::Reverse(a.area_type.index()));
    for area in areas {
        canvas.fill(&px(&area.polygon), pal.area(area.area_type));
    }
    for lane in scene.map.lanes() {
        canvas.fill(&px(&lane.boundary), pal.lane);
    }
    let stroke_px = cfg.boundary_width / cfg.resolution;
    for lane in scene.map.lanes().iter().filter(|l| l.draw_boundary) {
        let ring = px(&lane.boundary);
        for i in 0..ring.len() {
            canvas.stroke(ring[i], ring[(i + 1) % ring.len()], stroke_px, pal.lane_boundary);
        }
    }
    for tr in &scene.tracks {
        if tr.vehicle_id == ego_id {
            continue;
        }
        if let Some(s) = tr.state_at(t) {
            canvas.fill(&px(&footprint(s, tr.length, tr.width)), pal.vehicle);
        }
    }
    let ego_track = scene.track(ego_id).expect("ego state resolved above");
    canvas.fill(&px(&footprint(&ego, ego_track.length, ego_track.width)), pal.ego);
    if ego.speed > ARROW_MIN_SPEED {
        let f = Vec2::from_angle(ego.yaw);
        let l = f.perp();
        let base = ego.position + f * (ego_track.length / 2.0);
        let neck = base + f * ARROW_SHAFT_LENGTH;
        let tip = neck + f * ARROW_HEAD_LENGTH;
        let sw = l * (ARROW_SHAFT_WIDTH / 2.0);
        let hw = l * (ARROW_HEAD_WIDTH / 2.0);
        canvas.fill(&px(&[base - sw, neck - sw, neck + sw, base + sw]), pal.arrow);
        canvas.fill(&px(&[neck - hw, tip, neck + hw]), pal.arrow);
    }

    Ok(BevRaster { meta, width: side, height: side, pixels: canvas.pixels })
}
