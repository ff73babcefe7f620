//! Synthetic picker scenes with exact masks and activity labels.
//!
//! Every picker is a textured two-part body moving rigidly over a static
//! textured background, one picker per horizontal lane. Picking is a short
//! vertical up/down stroke with little turning; unloading is a faster
//! horizontal sweep across the lane with more rotation. Occlusions empty the
//! mask (a detector dropout) while the pixels keep moving.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{write_gray, DatasetManifest, FrameEntry, MaskEntry};
use super::texture::SineTexture;
use crate::classifier::Label;
use crate::descriptor::MorMask;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::pipeline::MaskIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Picking,
    Unloading,
}

impl Activity {
    pub fn label(self) -> Label {
        match self {
            Activity::Picking => Label::Picking,
            Activity::Unloading => Label::NotPicking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub activity: Activity,
}

/// Activity segments of one picker; each runs until the next one starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickerSchedule {
    pub picker_id: String,
    pub segments: Vec<Segment>,
}

impl PickerSchedule {
    pub fn constant(picker_id: impl Into<String>, activity: Activity) -> Self {
        PickerSchedule {
            picker_id: picker_id.into(),
            segments: vec![Segment {
                start_frame: 0,
                activity,
            }],
        }
    }

    /// Activity at `frame`; the schedule must be valid.
    pub fn activity_at(&self, frame: usize) -> Activity {
        self.segments
            .iter()
            .take_while(|s| s.start_frame <= frame)
            .last()
            .map(|s| s.activity)
            .expect("validated schedule starts at frame 0")
    }
}

/// Frames `[start_frame, end_frame)` in which the picker's detector fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionInterval {
    pub picker_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub fps: f64,
    pub pickers: Vec<PickerSchedule>,
    /// Standard deviation of additive Gaussian noise, intensity in [0, 1].
    pub noise_sigma: f64,
    /// Box blur radius in pixels, 0 for none.
    pub blur_radius: usize,
    pub occlusion_intervals: Vec<OcclusionInterval>,
    pub motion: MotionProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 160,
            height: 120,
            frame_count: 60,
            fps: 10.0,
            pickers: vec![
                PickerSchedule::constant("picker_0", Activity::Picking),
                PickerSchedule::constant("picker_1", Activity::Picking),
            ],
            noise_sigma: 0.0,
            blur_radius: 0,
            occlusion_intervals: Vec::new(),
            motion: MotionProfile::default(),
        }
    }
}

/// Smallest accepted frame width and per-picker lane height.
const MIN_WIDTH: usize = 96;
const MIN_LANE: usize = 40;

impl SynthConfig {
    /// Alternating picking / unloading segments of random length for
    /// `picker_count` pickers. Bouts last 40–80 frames.
    pub fn mixed(frame_count: usize, picker_count: usize, seed: u64) -> SynthConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5c4e_d01e);
        let pickers = (0..picker_count)
            .map(|p| {
                let mut activity = if rng.random_bool(0.5) {
                    Activity::Picking
                } else {
                    Activity::Unloading
                };
                let mut segments = Vec::new();
                let mut start = 0;
                while start < frame_count {
                    segments.push(Segment {
                        start_frame: start,
                        activity,
                    });
                    start += match activity {
                        Activity::Picking | Activity::Unloading => rng.random_range(40..=80),
                    };
                    activity = match activity {
                        Activity::Picking => Activity::Unloading,
                        Activity::Unloading => Activity::Picking,
                    };
                }
                PickerSchedule {
                    picker_id: format!("picker_{p}"),
                    segments,
                }
            })
            .collect();
        SynthConfig {
            frame_count,
            pickers,
            ..SynthConfig::default()
        }
    }

    /// Adds detector dropouts of 3–6 frames until at least `fraction` of
    /// each picker's frames are covered.
    pub fn with_occlusion_fraction(mut self, fraction: f64, seed: u64) -> SynthConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0cc1_0de5);
        let target = (fraction.clamp(0.0, 1.0) * self.frame_count as f64).ceil() as usize;
        for picker in &self.pickers {
            let mut covered = vec![false; self.frame_count];
            let mut count = 0;
            let mut attempts = 0;
            while count < target && attempts < 10_000 {
                attempts += 1;
                let len = rng.random_range(3..=6).min(self.frame_count);
                let start = rng.random_range(0..=self.frame_count - len);
                if covered[start..start + len].iter().any(|&c| c) {
                    continue;
                }
                covered[start..start + len].iter_mut().for_each(|c| *c = true);
                count += len;
                self.occlusion_intervals.push(OcclusionInterval {
                    picker_id: picker.picker_id.clone(),
                    start_frame: start,
                    end_frame: start + len,
                });
            }
        }
        self.occlusion_intervals
            .sort_by(|a, b| (&a.picker_id, a.start_frame).cmp(&(&b.picker_id, b.start_frame)));
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        if self.width < MIN_WIDTH {
            return Err(Error::Config(format!("width must be >= {MIN_WIDTH}")));
        }
        if self.pickers.is_empty() {
            return Err(Error::Config("at least one picker is required".into()));
        }
        if self.height / self.pickers.len() < MIN_LANE {
            return Err(Error::Config(format!(
                "height {} leaves less than {MIN_LANE} rows per picker",
                self.height
            )));
        }
        if self.frame_count == 0 {
            return Err(Error::Config("frame_count must be >= 1".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.pickers {
            if !ids.insert(p.picker_id.as_str()) {
                return Err(Error::Config(format!("duplicate picker `{}`", p.picker_id)));
            }
            if p.picker_id.is_empty() || p.picker_id.contains(['/', '\\']) {
                return Err(Error::Config(format!("invalid picker id `{}`", p.picker_id)));
            }
            match p.segments.first() {
                Some(s) if s.start_frame == 0 => {}
                _ => {
                    return Err(Error::Schedule(format!(
                        "schedule of `{}` does not start at frame 0",
                        p.picker_id
                    )))
                }
            }
            for w in p.segments.windows(2) {
                if w[1].start_frame <= w[0].start_frame {
                    return Err(Error::Schedule(format!(
                        "schedule of `{}` is not strictly increasing at frame {}",
                        p.picker_id, w[1].start_frame
                    )));
                }
            }
            if let Some(last) = p.segments.last() {
                if last.start_frame >= self.frame_count {
                    return Err(Error::Schedule(format!(
                        "schedule of `{}` starts a segment at frame {} past the end",
                        p.picker_id, last.start_frame
                    )));
                }
            }
        }
        for o in &self.occlusion_intervals {
            if !ids.contains(o.picker_id.as_str()) {
                return Err(Error::Config(format!(
                    "occlusion for unknown picker `{}`",
                    o.picker_id
                )));
            }
            if o.start_frame >= o.end_frame || o.end_frame > self.frame_count {
                return Err(Error::Config(format!(
                    "occlusion [{}, {}) is empty or outside the video",
                    o.start_frame, o.end_frame
                )));
            }
        }
        Ok(())
    }

    fn occluded(&self, picker: &str, frame: usize) -> bool {
        self.occlusion_intervals
            .iter()
            .any(|o| o.picker_id == picker && (o.start_frame..o.end_frame).contains(&frame))
    }
}

/// A rendered scene held in memory.
#[derive(Debug, Clone)]
pub struct SynthScene {
    pub frames: Vec<GrayFrame>,
    pub masks: MaskIndex,
    pub truth: BTreeMap<String, Vec<Label>>,
    /// Rigid pose of every picker in every frame.
    pub poses: BTreeMap<String, Vec<Pose>>,
}

impl SynthScene {
    /// Exact displacement, from frame `frame - 1` to `frame`, of the picker
    /// point that sits at `(x, y)` in frame `frame - 1`.
    pub fn true_displacement(&self, picker: &str, frame: usize, x: f64, y: f64) -> Option<(f64, f64)> {
        let poses = self.poses.get(picker)?;
        let (a, b) = (poses.get(frame.checked_sub(1)?)?, poses.get(frame)?);
        let (s0, c0) = a.theta.sin_cos();
        let (dx, dy) = (x - a.cx, y - a.cy);
        let (lx, ly) = (c0 * dx + s0 * dy, -s0 * dx + c0 * dy);
        let (s1, c1) = b.theta.sin_cos();
        let (nx, ny) = (b.cx + c1 * lx - s1 * ly, b.cy + s1 * lx + c1 * ly);
        Some((nx - x, ny - y))
    }
}

/// Centre and tilt of a picker; the tilt is in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    pub theta: f64,
}

/// How a picker moves. Speeds are in pixels per frame. The body turns in
/// step with its travel, so turns are in radians per pixel moved. Speed
/// jitter follows a slowly varying pace shared by both activities; turn
/// jitter is drawn afresh every frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionProfile {
    pub pick_speed: f64,
    pub sweep_speed: f64,
    pub speed_sd: f64,
    /// Frame-to-frame correlation of the pace, in [0, 1).
    pub speed_memory: f64,
    /// Largest vertical offset from the lane centre while picking.
    pub pick_amplitude: f64,
    pub pick_turn: f64,
    pub sweep_turn: f64,
    /// Per-frame spin jitter, radians per frame.
    pub spin_sd: f64,
    /// Per-frame deviation of the travel direction from the stroke axis,
    /// radians.
    pub heading_sd: f64,
    /// How far the turn rate follows pace changes: 0 turns at the base
    /// speed's rate, 1 turns exactly with the distance covered.
    pub turn_coupling: f64,
    /// Largest body tilt, radians; the spin reverses beyond it.
    pub max_tilt: f64,
}

impl Default for MotionProfile {
    fn default() -> Self {
        MotionProfile {
            pick_speed: 2.0,
            sweep_speed: 3.2,
            speed_sd: 0.45,
            speed_memory: 0.3,
            pick_amplitude: 4.0,
            pick_turn: 0.006,
            sweep_turn: 0.04,
            spin_sd: 0.004,
            heading_sd: 0.05,
            turn_coupling: 0.5,
            max_tilt: 0.05,
        }
    }
}

impl MotionProfile {
    fn validate(&self) -> Result<()> {
        let values = [
            self.pick_speed,
            self.sweep_speed,
            self.speed_sd,
            self.pick_amplitude,
            self.pick_turn,
            self.sweep_turn,
            self.spin_sd,
            self.heading_sd,
            self.max_tilt,
        ];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("motion parameters must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.turn_coupling) {
            return Err(Error::Config("turn_coupling must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.speed_memory) {
            return Err(Error::Config("speed_memory must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// A picker drawn as two rigidly joined parts (body and carried load)
/// side by side with a gap between them.
struct Actor {
    home_y: f64,
    x_range: (f64, f64),
    rx: f64,
    ry: f64,
    /// Distance from the pose centre to each part's centre.
    offset: f64,
    texture: SineTexture,
    pose: Pose,
    dir_x: f64,
    dir_y: f64,
    spin: f64,
    /// Standardised pace, an AR(1) process.
    pace: f64,
}

impl Actor {
    /// Local texture coordinates if `(x, y)` lies on the picker.
    fn contains(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = &self.pose;
        let (s, c) = p.theta.sin_cos();
        let (dx, dy) = (x - p.cx, y - p.cy);
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        let part = (lx.abs() - self.offset) / self.rx;
        (part * part + (ly / self.ry).powi(2) <= 1.0).then_some((lx, ly))
    }

    /// Advances the pose by one frame of `activity`.
    fn step(&mut self, activity: Activity, motion: &MotionProfile, rng: &mut ChaCha8Rng) {
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let m = motion.speed_memory;
        self.pace = m * self.pace + (1.0 - m * m).sqrt() * unit.sample(rng);
        let (base_speed, turn) = match activity {
            Activity::Picking => (motion.pick_speed, motion.pick_turn),
            Activity::Unloading => (motion.sweep_speed, motion.sweep_turn),
        };
        let speed = (base_speed + motion.speed_sd * self.pace.clamp(-PACE_LIMIT, PACE_LIMIT)).max(0.0);
        let heading = motion.heading_sd * unit.sample(rng);
        let (across, along) = heading.sin_cos();
        let p = &mut self.pose;
        // reversals happen between frames, so every frame covers `speed`
        match activity {
            Activity::Picking => {
                let step = along * speed;
                let offset = p.cy - self.home_y;
                if (offset + self.dir_y * step).abs() > motion.pick_amplitude {
                    self.dir_y = -self.dir_y;
                }
                p.cy += self.dir_y * step;
                p.cx += across * speed;
            }
            Activity::Unloading => {
                let step = along * speed;
                let next = p.cx + self.dir_x * step;
                if next < self.x_range.0 || next > self.x_range.1 {
                    self.dir_x = -self.dir_x;
                }
                p.cx += self.dir_x * step;
                p.cy += across * speed;
            }
        }
        p.cx = p.cx.clamp(self.x_range.0, self.x_range.1);
        let band = motion.pick_amplitude + 1.0;
        p.cy = p.cy.clamp(self.home_y - band, self.home_y + band);
        let travel = base_speed + motion.turn_coupling * (speed - base_speed);
        let spin = (travel * turn + motion.spin_sd * unit.sample(rng)).abs();
        if (p.theta + self.spin * spin).abs() > motion.max_tilt {
            self.spin = -self.spin;
        }
        p.theta += self.spin * spin;
    }
}

/// Peak texture deviation of the background and of the pickers from
/// their mean intensity.
const BACKGROUND_CONTRAST: f64 = 0.12;
const OBJECT_CONTRAST: f64 = 0.2;

/// Pace excursions are cut off at this many standard deviations so the
/// picker never comes to a stop.
const PACE_LIMIT: f64 = 2.5;

fn box_blur(data: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return data.to_vec();
    }
    let r = radius as isize;
    let norm = 1.0 / (2 * radius + 1) as f64;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| data[y * w + clamp(x as isize + d, w)]).sum();
            tmp[y * w + x] = s * norm;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let s: f64 = (-r..=r).map(|d| tmp[clamp(y as isize + d, h) * w + x]).sum();
            out[y * w + x] = s * norm;
        }
    }
    out
}

/// Renders the scene in memory. Frames are quantised to 8 bits so they
/// equal what [`generate_synthetic`] writes to disk.
pub fn render_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SynthScene> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let background = SineTexture::random(&mut rng, 12, 6.0, 24.0, 0.55, BACKGROUND_CONTRAST);
    let bg: Vec<f64> = (0..w * h)
        .map(|i| background.eval((i % w) as f64, (i / w) as f64))
        .collect();

    let lane = h as f64 / cfg.pickers.len() as f64;
    let rx = 0.065 * w as f64;
    let ry = 0.22 * lane;
    let offset = 0.04 * w as f64 + rx;
    let margin = 12.0 + offset + rx;
    let mut actors: Vec<Actor> = (0..cfg.pickers.len())
        .map(|i| {
            let home_y = (i as f64 + 0.5) * lane;
            let x_range = (margin, w as f64 - margin);
            Actor {
                home_y,
                x_range,
                rx,
                ry,
                offset,
                texture: SineTexture::random(&mut rng, 12, 5.0, 16.0, 0.45, OBJECT_CONTRAST),
                pose: Pose {
                    cx: rng.random_range(x_range.0..=x_range.1),
                    cy: home_y,
                    theta: 0.0,
                },
                dir_x: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                dir_y: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                spin: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
                pace: 0.0,
            }
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut scene = SynthScene {
        frames: Vec::with_capacity(cfg.frame_count),
        masks: MaskIndex::new(),
        poses: BTreeMap::new(),
        truth: cfg
            .pickers
            .iter()
            .map(|p| {
                let labels = (0..cfg.frame_count).map(|f| p.activity_at(f).label()).collect();
                (p.picker_id.clone(), labels)
            })
            .collect(),
    };

    for f in 0..cfg.frame_count {
        if f > 0 {
            for (actor, sched) in actors.iter_mut().zip(&cfg.pickers) {
                actor.step(sched.activity_at(f), &cfg.motion, &mut rng);
            }
        }
        let mut img = bg.clone();
        for (actor, sched) in actors.iter().zip(&cfg.pickers) {
            let pose = actor.pose;
            let mut bits = vec![false; w * h];
            let y0 = (pose.cy - lane / 2.0).floor().max(0.0) as usize;
            let y1 = ((pose.cy + lane / 2.0).ceil() as usize).min(h);
            for y in y0..y1 {
                for x in 0..w {
                    if let Some((lx, ly)) = actor.contains(x as f64, y as f64) {
                        img[y * w + x] = actor.texture.eval(lx, ly);
                        bits[y * w + x] = true;
                    }
                }
            }
            let id = &sched.picker_id;
            let mask = if cfg.occluded(id, f) {
                MorMask::empty(w, h, id.clone(), f)
            } else {
                MorMask::new(w, h, bits, id.clone(), f)?
            };
            scene.masks.insert((f, id.clone()), mask);
            scene.poses.entry(id.clone()).or_default().push(pose);
        }
        let mut img = box_blur(&img, w, h, cfg.blur_radius);
        if cfg.noise_sigma > 0.0 {
            img.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        let bytes: Vec<u8> = img
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        scene.frames.push(GrayFrame::from_luma8(w, h, &bytes, f)?);
    }
    Ok(scene)
}

/// Renders the scene and writes frames, masks and the manifest (with
/// ground truth) under `dir`.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64, dir: &Path) -> Result<DatasetManifest> {
    let scene = render_synthetic(cfg, seed)?;
    write_scene(&scene, cfg.fps, dir)
}

pub fn write_scene(scene: &SynthScene, fps: f64, dir: &Path) -> Result<DatasetManifest> {
    let (w, h) = scene
        .frames
        .first()
        .map(|f| (f.width(), f.height()))
        .ok_or_else(|| Error::Config("scene has no frames".into()))?;
    let mut manifest = DatasetManifest {
        root: dir.to_path_buf(),
        fps,
        width: w,
        height: h,
        frames: Vec::new(),
        masks: Vec::new(),
        truth: Some(scene.truth.clone()),
    };
    for frame in &scene.frames {
        let rel = format!("frames/{:06}.png", frame.frame_index());
        write_gray(&dir.join(&rel), w, h, frame.to_luma8())?;
        manifest.frames.push(FrameEntry {
            index: frame.frame_index(),
            path: rel.into(),
        });
    }
    for ((f, picker), mask) in &scene.masks {
        let rel = format!("masks/{picker}/{f:06}.png");
        write_gray(&dir.join(&rel), w, h, mask.to_luma8())?;
        manifest.masks.push(MaskEntry {
            frame: *f,
            picker: picker.clone(),
            path: rel.into(),
        });
    }
    manifest.save(dir)?;
    Ok(manifest)
}
