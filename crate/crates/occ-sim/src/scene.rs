//! Synthetic camera frames of LED arrays and interference sources.
//!
//! World coordinates follow the camera: X right, Y down, Z forward, origin
//! at the pinhole. Emitters are hard discs with a one-pixel anti-aliased
//! rim; their drive level at the sampling instant runs through the optical
//! channel pixel by pixel, so every pixel carries the channel's noise
//! floor. Renders are the ground truth for the detection, ranging, and
//! demodulation tests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{transmit, ChannelError, ChannelParams};
use crate::modem::{Group, LedWaveform};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("camera: {0}")]
    InvalidCamera(String),
    #[error("point at depth {z} is behind the camera")]
    BehindCamera { z: f64 },
    #[error("LED array: {0}")]
    InvalidArray(String),
    #[error("noise source: {0}")]
    InvalidNoiseSource(String),
    #[error("stereo baseline {0} must be positive")]
    NonPositiveBaseline(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shutter {
    Global,
    Rolling { row_time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length: f64,
    pub pixel_size: f64,
    /// (width, height) in pixels.
    pub resolution: (usize, usize),
    pub fps: f64,
    pub shutter: Shutter,
    pub exposure: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: String| Err(SceneError::InvalidCamera(msg));
        if !(self.focal_length > 0.0) {
            return bad(format!("focal length {} must be positive", self.focal_length));
        }
        if !(self.pixel_size > 0.0) {
            return bad(format!("pixel size {} must be positive", self.pixel_size));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return bad("resolution must be nonzero".into());
        }
        if !(self.fps > 0.0) {
            return bad(format!("frame rate {} must be positive", self.fps));
        }
        if !(self.exposure >= 0.0) || self.exposure > 1.0 / self.fps {
            return bad(format!("exposure {} must fit in a frame period", self.exposure));
        }
        if let Shutter::Rolling { row_time } = self.shutter {
            if !(row_time > 0.0) {
                return bad(format!("row time {row_time} must be positive"));
            }
            if row_time * self.resolution.1 as f64 > 1.0 / self.fps {
                return bad(format!(
                    "row scan {}x{row_time}s overruns the {}s frame period",
                    self.resolution.1,
                    1.0 / self.fps
                ));
            }
        }
        Ok(())
    }

    /// Focal length expressed in pixels, `f / a`.
    pub fn focal_px(&self) -> f64 {
        self.focal_length / self.pixel_size
    }

    /// Principal point, at the image center in pixel-center coordinates.
    pub fn principal_point(&self) -> (f64, f64) {
        (
            (self.resolution.0 as f64 - 1.0) / 2.0,
            (self.resolution.1 as f64 - 1.0) / 2.0,
        )
    }
}

/// Two grid units of LEDs on one vehicle, left and right, separated by
/// `left_right_separation` along X and centered on `world_position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedArraySpec {
    /// (rows, cols) of each unit.
    pub grid: (usize, usize),
    pub world_position: [f64; 3],
    pub emitter_spacing: f64,
    /// Group per unit-grid emitter, row-major, `rows * cols` entries.
    pub group_labels: Vec<Group>,
    pub left_right_separation: f64,
    pub emitter_radius: f64,
}

impl LedArraySpec {
    /// Uniform array with every emitter in group A and a radius of a
    /// quarter of the spacing.
    pub fn uniform(
        grid: (usize, usize),
        world_position: [f64; 3],
        emitter_spacing: f64,
        left_right_separation: f64,
    ) -> Self {
        LedArraySpec {
            grid,
            world_position,
            emitter_spacing,
            group_labels: vec![Group::A; grid.0 * grid.1],
            left_right_separation,
            emitter_radius: emitter_spacing / 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: String| Err(SceneError::InvalidArray(msg));
        if self.grid.0 * self.grid.1 == 0 {
            return bad("grid must be non-empty".into());
        }
        if self.group_labels.len() != self.grid.0 * self.grid.1 {
            return bad(format!(
                "{} group labels for {}x{} grid",
                self.group_labels.len(),
                self.grid.0,
                self.grid.1
            ));
        }
        if !(self.left_right_separation > 0.0) {
            return bad(format!(
                "unit separation {} must be positive",
                self.left_right_separation
            ));
        }
        if !(self.emitter_spacing > 0.0) || !(self.emitter_radius > 0.0) {
            return bad("emitter spacing and radius must be positive".into());
        }
        Ok(())
    }

    /// All emitters of both units. `pilot` marks the four corner emitters
    /// of each unit.
    pub fn emitters(&self) -> Vec<Emitter> {
        let (rows, cols) = self.grid;
        let mut out = Vec::with_capacity(2 * rows * cols);
        for side in [-0.5, 0.5] {
            let unit_x = self.world_position[0] + side * self.left_right_separation;
            for r in 0..rows {
                for c in 0..cols {
                    let dx = (c as f64 - (cols as f64 - 1.0) / 2.0) * self.emitter_spacing;
                    let dy = (r as f64 - (rows as f64 - 1.0) / 2.0) * self.emitter_spacing;
                    out.push(Emitter {
                        position: [
                            unit_x + dx,
                            self.world_position[1] + dy,
                            self.world_position[2],
                        ],
                        group: self.group_labels[r * cols + c],
                        pilot: (r == 0 || r == rows - 1) && (c == 0 || c == cols - 1),
                    });
                }
            }
        }
        out
    }

    /// Pixel distance between the two unit centers seen at depth Z.
    pub fn projected_separation(&self, cam: &CameraModel) -> f64 {
        cam.focal_px() * self.left_right_separation / self.world_position[2]
    }

    /// World centers of the left and right unit.
    pub fn unit_centers(&self) -> [[f64; 3]; 2] {
        let [x, y, z] = self.world_position;
        let half = self.left_right_separation / 2.0;
        [[x - half, y, z], [x + half, y, z]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub position: [f64; 3],
    pub group: Group,
    pub pilot: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCategory {
    AcLighting,
    NeonBallast,
    LedScreen,
}

impl NoiseCategory {
    /// Drive level at time `t`. Mains lighting ripples as a rectified
    /// sine (60 Hz mains, 120 Hz optical); ballasts and screens run square
    /// waves in their respective bands, quarter-cycle shifted so frame
    /// samples at rates dividing the carrier stay clear of the edges.
    pub fn level(&self, t: f64) -> f64 {
        match self {
            NoiseCategory::AcLighting => (2.0 * std::f64::consts::PI * 60.0 * t).sin().abs(),
            NoiseCategory::NeonBallast => square_level(30_000.0 * t + 0.25),
            NoiseCategory::LedScreen => square_level(300_000.0 * t + 0.25),
        }
    }

    pub fn frequency(&self) -> f64 {
        match self {
            NoiseCategory::AcLighting => 120.0,
            NoiseCategory::NeonBallast => 30_000.0,
            NoiseCategory::LedScreen => 300_000.0,
        }
    }
}

fn square_level(cycles: f64) -> f64 {
    if cycles.rem_euclid(1.0) < 0.5 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSourceSpec {
    pub category: NoiseCategory,
    pub world_position: [f64; 3],
    /// Peak drive level on the same scale as an LED's full brightness.
    pub intensity: f64,
    /// Disc radius on the image, in pixels.
    pub extent: f64,
}

impl NoiseSourceSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.intensity >= 0.0) || !(self.extent > 0.0) {
            return Err(SceneError::InvalidNoiseSource(format!(
                "intensity {} and extent {} must be non-negative and positive",
                self.intensity, self.extent
            )));
        }
        Ok(())
    }
}

/// One vehicle's lights: geometry plus the drive waveform. Pilot corner
/// emitters stay constant-on so a tracker can follow the array through the
/// waveform's dark frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneVehicle {
    pub array: LedArraySpec,
    pub waveform: LedWaveform,
    /// Scene time at which the waveform starts.
    pub waveform_start: f64,
    pub pilot_corners: bool,
}

impl SceneVehicle {
    pub fn drive_level(&self, e: &Emitter, t: f64) -> f64 {
        if self.pilot_corners && e.pilot {
            1.0
        } else {
            self.waveform.group_level_at(e.group, t - self.waveform_start)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub vehicles: Vec<SceneVehicle>,
    pub noise_sources: Vec<NoiseSourceSpec>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        for v in &self.vehicles {
            v.array.validate()?;
        }
        for n in &self.noise_sources {
            n.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Row-major intensities in [0, 1], `width * height` values.
    pub pixels: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub timestamp: f64,
    pub camera_id: String,
}

impl Frame {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Intensity-weighted centroid (x, y), or `None` for an all-dark frame.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sum = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.at(x, y);
                sum += v;
                sx += v * x as f64;
                sy += v * y as f64;
            }
        }
        (sum > 0.0).then(|| (sx / sum, sy / sum))
    }
}

/// Pinhole projection to absolute pixel coordinates; the principal point
/// sits at the image center and offsets grow as `f/a * X/Z`.
pub fn project(world_point: [f64; 3], cam: &CameraModel) -> Result<(f64, f64), SceneError> {
    let [x, y, z] = world_point;
    if z <= 0.0 {
        return Err(SceneError::BehindCamera { z });
    }
    let (cx, cy) = cam.principal_point();
    let k = cam.focal_px() / z;
    Ok((cx + k * x, cy + k * y))
}

struct Splat {
    u: f64,
    v: f64,
    radius: f64,
    kind: SplatKind,
}

enum SplatKind {
    Led { vehicle: usize, emitter: Emitter },
    Noise { source: usize },
}

/// Disc coverage of the pixel at (x, y): 1 inside, 0 outside, linear over
/// the one-pixel rim.
fn coverage(x: usize, y: usize, u: f64, v: f64, radius: f64) -> f64 {
    let d = ((x as f64 - u).powi(2) + (y as f64 - v).powi(2)).sqrt();
    (radius + 0.5 - d).clamp(0.0, 1.0)
}

fn splats(scene: &Scene, cam: &CameraModel, offset: [f64; 3]) -> Vec<Splat> {
    let mut out = Vec::new();
    let shift = |p: [f64; 3]| [p[0] - offset[0], p[1] - offset[1], p[2] - offset[2]];
    for (vi, vehicle) in scene.vehicles.iter().enumerate() {
        for e in vehicle.array.emitters() {
            let pos = shift(e.position);
            let Ok((u, v)) = project(pos, cam) else { continue };
            let radius = cam.focal_px() * vehicle.array.emitter_radius / pos[2];
            out.push(Splat { u, v, radius, kind: SplatKind::Led { vehicle: vi, emitter: e } });
        }
    }
    for (ni, source) in scene.noise_sources.iter().enumerate() {
        let pos = shift(source.world_position);
        let Ok((u, v)) = project(pos, cam) else { continue };
        out.push(Splat { u, v, radius: source.extent, kind: SplatKind::Noise { source: ni } });
    }
    out
}

fn render_offset<R: Rng + ?Sized>(
    scene: &Scene,
    cam: &CameraModel,
    camera_offset: [f64; 3],
    t: f64,
    channel: &ChannelParams,
    camera_id: &str,
    rng: &mut R,
) -> Result<Frame, SceneError> {
    cam.validate()?;
    scene.validate()?;
    channel.validate()?;
    let (width, height) = cam.resolution;
    let splats = splats(scene, cam, camera_offset);
    let gain = crate::channel::sample_gain(channel, rng);
    let full_scale = channel.responsivity * channel.on_level();

    let mut pixels = vec![0.0; width * height];
    for y in 0..height {
        // Global shutter samples mid-frame, matching the codecs' ideal
        // samplers; a rolling shutter walks the rows instead.
        let t_row = match cam.shutter {
            Shutter::Global => t + 0.5 / cam.fps,
            Shutter::Rolling { row_time } => t + y as f64 * row_time,
        };
        for x in 0..width {
            let mut drive = 0.0;
            for s in &splats {
                let c = coverage(x, y, s.u, s.v, s.radius);
                if c == 0.0 {
                    continue;
                }
                drive += c * match &s.kind {
                    SplatKind::Led { vehicle, emitter } => {
                        scene.vehicles[*vehicle].drive_level(emitter, t_row)
                    }
                    SplatKind::Noise { source } => {
                        let n = &scene.noise_sources[*source];
                        n.intensity * n.category.level(t_row)
                    }
                };
            }
            let sample = transmit(drive * channel.on_level(), channel, gain, rng)?;
            pixels[y * width + x] = (sample.received / full_scale).clamp(0.0, 1.0);
        }
    }
    Ok(Frame { pixels, width, height, timestamp: t, camera_id: camera_id.to_string() })
}

/// Renders the scene at time `t` from the origin camera.
pub fn render<R: Rng + ?Sized>(
    scene: &Scene,
    cam: &CameraModel,
    t: f64,
    channel: &ChannelParams,
    camera_id: &str,
    rng: &mut R,
) -> Result<Frame, SceneError> {
    render_offset(scene, cam, [0.0; 3], t, channel, camera_id, rng)
}

/// Renders a stereo pair: the left camera at the origin and the right one
/// shifted `baseline` meters along +X with a parallel optical axis, so a
/// point at depth Z lands `f*b/(Z*a)` pixels further left in the right
/// frame.
pub fn render_stereo<R: Rng + ?Sized>(
    scene: &Scene,
    left: &CameraModel,
    right: &CameraModel,
    baseline: f64,
    t: f64,
    channel: &ChannelParams,
    rng: &mut R,
) -> Result<(Frame, Frame), SceneError> {
    if !(baseline > 0.0) {
        return Err(SceneError::NonPositiveBaseline(baseline));
    }
    let l = render_offset(scene, left, [0.0; 3], t, channel, "left", rng)?;
    let r = render_offset(scene, right, [baseline, 0.0, 0.0], t, channel, "right", rng)?;
    Ok((l, r))
}

/// Renders the frame sequence starting at `t0`, one frame period apart.
pub fn render_sequence<R: Rng + ?Sized>(
    scene: &Scene,
    cam: &CameraModel,
    t0: f64,
    n_frames: usize,
    channel: &ChannelParams,
    camera_id: &str,
    rng: &mut R,
) -> Result<Vec<Frame>, SceneError> {
    (0..n_frames)
        .map(|i| render(scene, cam, t0 + i as f64 / cam.fps, channel, camera_id, rng))
        .collect()
}

/// Plain-text PGM (P2), 8-bit, one image row per line.
pub fn pgm_string(frame: &Frame) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "P2");
    let _ = writeln!(out, "# {} t={}", frame.camera_id, frame.timestamp);
    let _ = writeln!(out, "{} {}", frame.width, frame.height);
    let _ = writeln!(out, "255");
    for y in 0..frame.height {
        let line: Vec<String> = frame
            .row(y)
            .iter()
            .map(|v| ((v * 255.0).round() as u8).to_string())
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_pgm(frame: &Frame, path: &Path) -> Result<(), SceneError> {
    Ok(fs::write(path, pgm_string(frame))?)
}
