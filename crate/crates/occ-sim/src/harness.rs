//! Scenario runner: BER sweeps, queue throughput, packet traces.
//!
//! A [`ScenarioConfig`] describes one experiment (camera, channel, modem,
//! link geometry, sweep axes) and loads from TOML. Each `run_*` entry point
//! consumes the config and returns plain rows; [`ber_csv`] and friends
//! serialize them with a versioned header line so downstream tooling can
//! detect format drift.
//!
//! The BER sweep renders real frames and pits two receivers against each
//! other on the same pixels:
//!
//! * the **standard** receiver calibrates on the raw brightest pixel of a
//!   lit reference frame, which an interfering source can capture;
//! * the **adaptive** receiver calibrates on the strongest pixel of the
//!   on/off differential image inside a detected transmitter region, so
//!   static interference cancels out.
//!
//! Determinism: every sweep point derives its generator from the master
//! seed plus a fixed per-point stream, so results are bit-identical whether
//! points run serially or in parallel.

use crate::channel::{ChannelError, ChannelParams};
use crate::detect::{binarize, connected_components, differential_image, shape_filter, Rect, ShapeFilterParams};
use crate::modem::{LedWaveform, Scheme, WaveBody};
use crate::scene::{render, CameraModel, Frame, LedArraySpec, NoiseSourceSpec, Scene, SceneError, SceneVehicle};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Fewest symbols per sweep point that still give a usable error estimate.
pub const MIN_SYMBOLS: usize = 10_000;
/// Shortest packet trace worth reporting per-second statistics on.
pub const MIN_TRACE_SECONDS: f64 = 10.0;

/// Overhead bits added around every payload: two flag bytes.
const FRAME_OVERHEAD_BITS: usize = 16;

const BER_STREAM: u64 = 0x1000;
const QUEUE_STREAM: u64 = 0x2000;
const TRACE_STREAM: u64 = 0x3000;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0} symbols per point is below the floor of {MIN_SYMBOLS}")]
    InsufficientSymbols(usize),
    #[error("trace of {0} s is shorter than the minimum {MIN_TRACE_SECONDS} s")]
    ShortTrace(f64),
    #[error("receiver calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Transmitter description: codec plus payload size per packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModemSection {
    pub scheme: Scheme,
    pub payload_bits: usize,
}

impl Default for ModemSection {
    fn default() -> Self {
        Self { scheme: Scheme::NyquistOok, payload_bits: 16 }
    }
}

/// Receiver-side sampling policy knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSection {
    pub base_interval: f64,
    pub temporal_threshold: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self { base_interval: 1.0 / 30.0, temporal_threshold: 20.0 }
    }
}

/// Sweep axes shared by the runs: SNR points for the BER sweep, camera
/// rates for the throughput curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    pub arrival_fps: Vec<f64>,
    pub symbols_per_point: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 13.0],
            arrival_fps: vec![10.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0],
            symbols_per_point: MIN_SYMBOLS,
        }
    }
}

/// Packet generator feeding the frame queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSection {
    /// Poisson packet generation rate, packets per second.
    pub gen_rate_pps: f64,
    /// Packets a single frame can carry.
    pub packets_per_frame: usize,
}

impl Default for QueueSection {
    fn default() -> Self {
        Self { gen_rate_pps: 180.0, packets_per_frame: 2 }
    }
}

/// Image-plane motion during a packet trace. Per-frame jitter magnitude is
/// `|N(0, jitter_px)|` plus the magnitude of every burst covering the frame;
/// a frame decodes while the total stays within `tolerance_px`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSection {
    pub jitter_px: f64,
    pub tolerance_px: f64,
    #[serde(default)]
    pub bursts: Vec<JitterBurst>,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self { jitter_px: 0.0, tolerance_px: 3.0, bursts: Vec::new() }
    }
}

/// A window of added image motion, e.g. a pothole or a shove.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterBurst {
    pub start: f64,
    pub duration: f64,
    pub magnitude_px: f64,
}

/// Stereo rig and block matcher used for range estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangingSection {
    /// Camera separation in meters.
    pub baseline: f64,
    /// Odd SAD window side in pixels.
    pub sad_window: usize,
    pub max_disparity: usize,
}

impl Default for RangingSection {
    fn default() -> Self {
        Self { baseline: 0.3, sad_window: 7, max_disparity: 60 }
    }
}

/// One transmitting vehicle in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSection {
    pub array: LedArraySpec,
    #[serde(default)]
    pub pilot_corners: bool,
}

/// Complete description of one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Simulated wall-clock length of the queue and trace runs, seconds.
    pub duration: f64,
    pub camera: CameraModel,
    pub channel: ChannelParams,
    #[serde(default)]
    pub modem: ModemSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub queue: QueueSection,
    #[serde(default)]
    pub trace: TraceSection,
    #[serde(default)]
    pub ranging: RangingSection,
    #[serde(default)]
    pub vehicles: Vec<VehicleSection>,
    #[serde(default)]
    pub noise_sources: Vec<NoiseSourceSpec>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.camera.validate()?;
        self.channel.validate()?;
        for v in &self.vehicles {
            v.array.validate()?;
        }
        for n in &self.noise_sources {
            n.validate()?;
        }
        if !(self.duration > 0.0) {
            return bad(format!("duration {} must be positive", self.duration));
        }
        if self.modem.payload_bits == 0 {
            return bad("payload must be at least one bit".into());
        }
        if !(self.controller.base_interval > 0.0) {
            return bad(format!(
                "base interval {} must be positive",
                self.controller.base_interval
            ));
        }
        if !(self.controller.temporal_threshold > 0.0) {
            return bad(format!(
                "temporal threshold {} must be positive",
                self.controller.temporal_threshold
            ));
        }
        if let Some(r) = self.sweep.arrival_fps.iter().find(|r| !(**r > 0.0)) {
            return bad(format!("arrival rate {r} must be positive"));
        }
        if !(self.queue.gen_rate_pps > 0.0) {
            return bad(format!(
                "generation rate {} must be positive",
                self.queue.gen_rate_pps
            ));
        }
        if self.queue.packets_per_frame == 0 {
            return bad("a frame must carry at least one packet".into());
        }
        if !(self.trace.jitter_px >= 0.0) {
            return bad(format!("jitter {} must be non-negative", self.trace.jitter_px));
        }
        if !(self.trace.tolerance_px > 0.0) {
            return bad(format!(
                "jitter tolerance {} must be positive",
                self.trace.tolerance_px
            ));
        }
        if let Some(b) = self
            .trace
            .bursts
            .iter()
            .find(|b| !(b.duration >= 0.0) || !(b.magnitude_px >= 0.0))
        {
            return bad(format!(
                "burst at {} needs non-negative duration and magnitude",
                b.start
            ));
        }
        if !(self.ranging.baseline > 0.0) {
            return bad(format!("baseline {} must be positive", self.ranging.baseline));
        }
        if self.ranging.sad_window % 2 == 0 || self.ranging.sad_window < 3 {
            return bad(format!(
                "matcher window {} must be odd and at least 3",
                self.ranging.sad_window
            ));
        }
        if self.ranging.max_disparity == 0 {
            return bad("disparity search needs a positive range".into());
        }
        Ok(())
    }

    /// Small single-vehicle scenario used as a template and by the tests:
    /// one two-unit transmitter 10 m ahead of a 24x16 camera.
    pub fn example() -> Self {
        Self {
            seed: 7,
            duration: 12.0,
            camera: CameraModel {
                focal_length: 8e-3,
                pixel_size: 1e-5,
                resolution: (24, 16),
                fps: 30.0,
                shutter: crate::scene::Shutter::Global,
                exposure: 1e-3,
            },
            channel: ChannelParams {
                transmit_power_avg: 1.0,
                responsivity: 1.0,
                noise_std: 0.0,
                fading: crate::channel::Fading::Fixed(1.0),
            },
            modem: ModemSection::default(),
            controller: ControllerSection::default(),
            sweep: SweepSection::default(),
            queue: QueueSection::default(),
            trace: TraceSection::default(),
            ranging: RangingSection::default(),
            vehicles: vec![VehicleSection {
                array: LedArraySpec::uniform((1, 1), [0.0, 0.0, 10.0], 0.12, 0.1),
                pilot_corners: false,
            }],
            noise_sources: Vec::new(),
        }
    }
}

/// Constant drive waveform covering `slots` frames at `fps`.
fn steady(level: bool, slots: usize, fps: f64) -> LedWaveform {
    LedWaveform {
        scheme: Scheme::NyquistOok,
        pulse_rate: fps,
        phase: 0.0,
        body: WaveBody::Levels(vec![level; slots]),
    }
}

/// Scene with every configured vehicle lit steadily for `frames` frames.
pub fn steady_scene(config: &ScenarioConfig, frames: usize) -> Scene {
    let vehicles = config
        .vehicles
        .iter()
        .map(|v| SceneVehicle {
            array: v.array.clone(),
            waveform: steady(true, frames.max(1), config.camera.fps),
            waveform_start: 0.0,
            pilot_corners: v.pilot_corners,
        })
        .collect();
    Scene { vehicles, noise_sources: config.noise_sources.clone() }
}

/// One row of the BER sweep. Confidence bounds are 95% normal-approximation
/// half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub adaptive_ber: f64,
    pub standard_ber: f64,
    pub symbols: usize,
    pub adaptive_ci95: f64,
    pub standard_ci95: f64,
}

/// Measures both receivers at every configured SNR by rendering one frame
/// per symbol. The first configured vehicle transmits a balanced random
/// symbol stream; any further vehicles stay lit as static distractors.
pub fn run_ber_sweep(config: &ScenarioConfig) -> Result<Vec<BerPoint>, HarnessError> {
    config.validate()?;
    if config.sweep.symbols_per_point < MIN_SYMBOLS {
        return Err(HarnessError::InsufficientSymbols(config.sweep.symbols_per_point));
    }
    if config.vehicles.is_empty() {
        return Err(HarnessError::Config("ber sweep needs a transmitter".into()));
    }
    config
        .sweep
        .snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr_db)| ber_point(config, i, snr_db))
        .collect()
}

/// Pixel coordinates and on/off reference levels of one calibrated receiver.
struct PixelTap {
    x: usize,
    y: usize,
    threshold: f64,
    /// A receiver whose reference levels coincide cannot separate the
    /// symbols and always reports the off level.
    degenerate: bool,
}

impl PixelTap {
    fn new(x: usize, y: usize, on: f64, off: f64) -> Self {
        PixelTap { x, y, threshold: 0.5 * (on + off), degenerate: on - off < 1e-9 }
    }

    fn decide(&self, frame: &Frame) -> bool {
        !self.degenerate && frame.at(self.x, self.y) > self.threshold
    }
}

/// Raster-first argmax over a window of the frame.
fn peak_pixel(frame: &Frame, window: Option<&Rect>) -> (usize, usize) {
    let full = Rect { x0: 0, y0: 0, x1: frame.width - 1, y1: frame.height - 1 };
    let w = window.unwrap_or(&full);
    let mut best = (w.x0, w.y0);
    let mut best_value = f64::NEG_INFINITY;
    for y in w.y0..=w.y1 {
        for x in w.x0..=w.x1 {
            if frame.at(x, y) > best_value {
                best_value = frame.at(x, y);
                best = (x, y);
            }
        }
    }
    best
}

/// Calibrates both receivers from a noiseless lit/dark frame pair.
fn calibrate(
    config: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PixelTap, PixelTap), HarnessError> {
    let quiet = ChannelParams {
        noise_std: 0.0,
        fading: crate::channel::Fading::Fixed(1.0),
        ..config.channel
    };
    let fps = config.camera.fps;
    let mut scene = steady_scene(config, 1);
    scene.vehicles[0].waveform = steady(true, 1, fps);
    let lit = render(&scene, &config.camera, 0.0, &quiet, "calib", rng)?;
    scene.vehicles[0].waveform = steady(false, 1, fps);
    let dark = render(&scene, &config.camera, 0.0, &quiet, "calib", rng)?;

    let diff = differential_image(&lit, &dark).expect("calibration frames match");
    let peak = diff.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(HarnessError::Calibration("transmitter is invisible".into()));
    }
    let mask = binarize(&diff, 0.5 * peak);
    let regions = connected_components(&mask);
    let rois = shape_filter(&regions, diff.width, diff.height, &ShapeFilterParams::default());
    let roi = rois
        .iter()
        .find(|r| r.accepted())
        .ok_or_else(|| HarnessError::Calibration("no transmitter region found".into()))?;

    let (ax, ay) = peak_pixel(&diff, Some(&roi.bbox));
    let adaptive = PixelTap::new(ax, ay, lit.at(ax, ay), dark.at(ax, ay));
    if adaptive.degenerate {
        return Err(HarnessError::Calibration("flat contrast inside the region".into()));
    }
    let (sx, sy) = peak_pixel(&lit, None);
    let standard = PixelTap::new(sx, sy, lit.at(sx, sy), dark.at(sx, sy));
    Ok((adaptive, standard))
}

fn ber_point(config: &ScenarioConfig, index: usize, snr_db: f64) -> Result<BerPoint, HarnessError> {
    let symbols = config.sweep.symbols_per_point.next_multiple_of(2);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(BER_STREAM + index as u64);

    let gamma = 10f64.powf(snr_db / 10.0);
    let scale = config.channel.transmit_power_avg * config.channel.responsivity;
    let noise_std = if gamma.is_infinite() { 0.0 } else { scale * (2.0 / gamma).sqrt() };
    let channel = ChannelParams { noise_std, ..config.channel };

    let (adaptive, standard) = calibrate(config, &mut rng)?;

    let mut bits = vec![false; symbols];
    for bit in bits.iter_mut().take(symbols / 2) {
        *bit = true;
    }
    bits.shuffle(&mut rng);

    let fps = config.camera.fps;
    let mut scene = steady_scene(config, symbols);
    scene.vehicles[0].waveform = LedWaveform {
        scheme: Scheme::NyquistOok,
        pulse_rate: fps,
        phase: 0.0,
        body: WaveBody::Levels(bits.clone()),
    };

    let mut adaptive_errors = 0usize;
    let mut standard_errors = 0usize;
    for (k, &bit) in bits.iter().enumerate() {
        let frame = render(&scene, &config.camera, k as f64 / fps, &channel, "rx", &mut rng)?;
        adaptive_errors += (adaptive.decide(&frame) != bit) as usize;
        standard_errors += (standard.decide(&frame) != bit) as usize;
    }

    let rate = |errors: usize| errors as f64 / symbols as f64;
    let ci = |p: f64| 1.96 * (p * (1.0 - p) / symbols as f64).sqrt();
    let adaptive_ber = rate(adaptive_errors);
    let standard_ber = rate(standard_errors);
    Ok(BerPoint {
        snr_db,
        adaptive_ber,
        standard_ber,
        symbols,
        adaptive_ci95: ci(adaptive_ber),
        standard_ci95: ci(standard_ber),
    })
}

/// One row of the throughput curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputPoint {
    pub arrival_fps: f64,
    pub bits_per_second: f64,
}

/// Drains one Poisson packet stream through a bounded-service frame queue
/// at every configured camera rate. All rates see the same arrivals, so the
/// curve isolates the service side: it rises with the frame rate until the
/// generator becomes the bottleneck.
pub fn run_throughput(config: &ScenarioConfig) -> Result<Vec<ThroughputPoint>, HarnessError> {
    config.validate()?;
    let arrivals = poisson_arrivals(config);
    Ok(config
        .sweep
        .arrival_fps
        .par_iter()
        .map(|&fps| ThroughputPoint {
            arrival_fps: fps,
            bits_per_second: drain(&arrivals, fps, config),
        })
        .collect())
}

fn poisson_arrivals(config: &ScenarioConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(QUEUE_STREAM);
    let gaps = Exp::new(config.queue.gen_rate_pps).expect("validated rate");
    let mut arrivals = Vec::new();
    let mut t = gaps.sample(&mut rng);
    while t <= config.duration {
        arrivals.push(t);
        t += gaps.sample(&mut rng);
    }
    arrivals
}

/// FIFO service: each frame tick transmits up to `packets_per_frame` of the
/// packets that have arrived by then.
fn drain(arrivals: &[f64], fps: f64, config: &ScenarioConfig) -> f64 {
    let per_frame = config.queue.packets_per_frame;
    let frames = (config.duration * fps).floor() as usize;
    let mut head = 0usize;
    let mut delivered = 0usize;
    for k in 1..=frames {
        let t = k as f64 / fps;
        let mut slots = per_frame;
        while slots > 0 && head < arrivals.len() && arrivals[head] <= t {
            head += 1;
            slots -= 1;
            delivered += 1;
        }
    }
    delivered as f64 * config.modem.payload_bits as f64 / config.duration
}

/// Received fraction of the packets sent during one second of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub received_fraction: f64,
}

/// Streams back-to-back packets for the configured duration under image
/// jitter. A packet arrives iff every frame it spans stays within the
/// jitter tolerance; fractions are grouped by the second each packet
/// started in.
pub fn run_packet_trace(config: &ScenarioConfig) -> Result<Vec<TracePoint>, HarnessError> {
    config.validate()?;
    if config.duration < MIN_TRACE_SECONDS {
        return Err(HarnessError::ShortTrace(config.duration));
    }
    let fps = config.camera.fps;
    let frames = (config.duration * fps).floor() as usize;
    let span = frames_per_packet(&config.modem, fps);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(TRACE_STREAM);
    let wobble = (config.trace.jitter_px > 0.0)
        .then(|| Normal::new(0.0, config.trace.jitter_px).expect("validated jitter"));
    let frame_ok: Vec<bool> = (0..frames)
        .map(|k| {
            let t = k as f64 / fps;
            let mut shift = wobble.map_or(0.0, |w| w.sample(&mut rng).abs());
            for burst in &config.trace.bursts {
                if t >= burst.start && t < burst.start + burst.duration {
                    shift += burst.magnitude_px;
                }
            }
            shift <= config.trace.tolerance_px
        })
        .collect();

    let seconds = config.duration.floor() as usize;
    let mut sent = vec![0usize; seconds];
    let mut received = vec![0usize; seconds];
    let mut k = 0;
    while k + span <= frames {
        let second = (k as f64 / fps).floor() as usize;
        if second >= seconds {
            break;
        }
        sent[second] += 1;
        if frame_ok[k..k + span].iter().all(|&ok| ok) {
            received[second] += 1;
        }
        k += span;
    }
    Ok((0..seconds)
        .map(|s| TracePoint {
            time: s as f64,
            received_fraction: if sent[s] == 0 {
                1.0
            } else {
                received[s] as f64 / sent[s] as f64
            },
        })
        .collect())
}

/// Frames needed to carry one framed packet: payload plus flag overhead at
/// the codec's bit rate. A rolling-shutter exposure carries the whole
/// packet in a single frame.
fn frames_per_packet(modem: &ModemSection, fps: f64) -> usize {
    let wire_bits = (modem.payload_bits + FRAME_OVERHEAD_BITS) as f64;
    match modem.scheme.bit_rate(fps) {
        Some(rate) => (wire_bits * fps / rate).ceil() as usize,
        None => 1,
    }
}

/// Everything one scenario produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub ber_curve: Vec<BerPoint>,
    pub throughput_curve: Vec<ThroughputPoint>,
    pub packet_trace: Vec<TracePoint>,
}

impl MetricsReport {
    /// Rejects physically impossible numbers: error rates beyond chance,
    /// throughput above the frame budget, fractions outside `[0, 1]`.
    pub fn validate(&self, config: &ScenarioConfig) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        for p in &self.ber_curve {
            if !(0.0..=0.5).contains(&p.adaptive_ber) || !(0.0..=0.5).contains(&p.standard_ber) {
                return bad(format!("error rate beyond chance at {} dB", p.snr_db));
            }
        }
        let bits = config.modem.payload_bits as f64;
        let per_frame = config.queue.packets_per_frame as f64;
        for p in &self.throughput_curve {
            let budget = per_frame * bits * p.arrival_fps;
            if p.bits_per_second < 0.0 || p.bits_per_second > budget + 1e-9 {
                return bad(format!(
                    "{} bps exceeds the frame budget {budget} at {} fps",
                    p.bits_per_second, p.arrival_fps
                ));
            }
        }
        for p in &self.packet_trace {
            if !(0.0..=1.0).contains(&p.received_fraction) {
                return bad(format!("received fraction {} at {} s", p.received_fraction, p.time));
            }
        }
        Ok(())
    }
}

/// Runs all three experiments and validates the combined report.
pub fn run_all(config: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    let report = MetricsReport {
        ber_curve: run_ber_sweep(config)?,
        throughput_curve: run_throughput(config)?,
        packet_trace: run_packet_trace(config)?,
    };
    report.validate(config)?;
    Ok(report)
}

pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut out = String::from(
        "# ber v1\nsnr_db,adaptive_ber,standard_ber,symbols,adaptive_ci95,standard_ci95\n",
    );
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.snr_db, p.adaptive_ber, p.standard_ber, p.symbols, p.adaptive_ci95, p.standard_ci95
        );
    }
    out
}

pub fn throughput_csv(points: &[ThroughputPoint]) -> String {
    let mut out = String::from("# throughput v1\narrival_fps,bits_per_second\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.arrival_fps, p.bits_per_second);
    }
    out
}

pub fn trace_csv(points: &[TracePoint]) -> String {
    let mut out = String::from("# trace v1\ntime,received_fraction\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.time, p.received_fraction);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ook_ber_theory;
    use crate::scene::NoiseCategory;
    use proptest::prelude::*;

    fn interference_config() -> ScenarioConfig {
        let mut config = ScenarioConfig::example();
        config.noise_sources.push(NoiseSourceSpec {
            category: NoiseCategory::NeonBallast,
            world_position: [0.0, -0.06, 10.0],
            intensity: 1.2,
            extent: 2.5,
        });
        config
    }

    #[test]
    fn toml_round_trips_the_config() {
        let config = interference_config();
        let text = config.to_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut config = ScenarioConfig::example();
        config.duration = 0.0;
        assert!(matches!(config.validate(), Err(HarnessError::Config(_))));

        let mut config = ScenarioConfig::example();
        config.camera.focal_length = 0.0;
        assert!(matches!(config.validate(), Err(HarnessError::Scene(_))));

        let mut config = ScenarioConfig::example();
        config.queue.packets_per_frame = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn symbol_floor_is_enforced() {
        let mut config = ScenarioConfig::example();
        config.sweep.symbols_per_point = 100;
        assert!(matches!(
            run_ber_sweep(&config),
            Err(HarnessError::InsufficientSymbols(100))
        ));
    }

    #[test]
    fn noiseless_sweep_is_error_free() {
        let mut config = ScenarioConfig::example();
        config.sweep.snr_db = vec![f64::INFINITY];
        let points = run_ber_sweep(&config).unwrap();
        assert_eq!(points[0].adaptive_ber, 0.0);
        assert_eq!(points[0].standard_ber, 0.0);
    }

    #[test]
    fn clean_scene_receivers_coincide() {
        let mut config = ScenarioConfig::example();
        config.sweep.snr_db = vec![5.0];
        let point = &run_ber_sweep(&config).unwrap()[0];
        assert_eq!(point.adaptive_ber, point.standard_ber);
        assert!(point.adaptive_ber > 0.0);
    }

    #[test]
    fn adaptive_receiver_tracks_the_closed_form() {
        let mut config = ScenarioConfig::example();
        config.sweep.snr_db = vec![0.0, 10.0];
        for point in run_ber_sweep(&config).unwrap() {
            let gamma = 10f64.powf(point.snr_db / 10.0);
            let expected = ook_ber_theory(gamma);
            let se = (expected * (1.0 - expected) / point.symbols as f64).sqrt();
            assert!(
                (point.adaptive_ber - expected).abs() <= 3.0 * se,
                "{} dB: got {}, closed form {expected}",
                point.snr_db,
                point.adaptive_ber
            );
        }
    }

    #[test]
    fn interference_blinds_the_standard_receiver_only() {
        let mut config = interference_config();
        config.sweep.snr_db = vec![10.0];
        let point = &run_ber_sweep(&config).unwrap()[0];
        assert_eq!(point.standard_ber, 0.5);
        let expected = ook_ber_theory(10.0);
        let se = (expected * (1.0 - expected) / point.symbols as f64).sqrt();
        assert!((point.adaptive_ber - expected).abs() <= 3.0 * se);
    }

    #[test]
    fn starved_queue_delivers_every_frame_slot() {
        let mut config = ScenarioConfig::example();
        config.sweep.arrival_fps = vec![10.0];
        let point = &run_throughput(&config).unwrap()[0];
        let full_frames = 2.0 * 16.0 * 10.0;
        assert_eq!(point.bits_per_second, full_frames);
    }

    #[test]
    fn fast_camera_is_generator_limited() {
        let mut config = ScenarioConfig::example();
        config.sweep.arrival_fps = vec![1000.0];
        let point = &run_throughput(&config).unwrap()[0];
        let mean = config.queue.gen_rate_pps * config.modem.payload_bits as f64;
        let se_bits = (config.queue.gen_rate_pps * config.duration).sqrt()
            * config.modem.payload_bits as f64
            / config.duration;
        assert!((point.bits_per_second - mean).abs() <= 5.0 * se_bits);
    }

    #[test]
    fn throughput_rises_then_saturates() {
        let config = ScenarioConfig::example();
        let points = run_throughput(&config).unwrap();
        for pair in points.windows(2) {
            assert!(pair[1].bits_per_second >= pair[0].bits_per_second);
        }
        assert!(points[1].bits_per_second >= 2.8 * points[0].bits_per_second);
        let last = points.last().unwrap().bits_per_second;
        let prev = points[points.len() - 2].bits_per_second;
        assert!((last - prev).abs() <= 0.02 * last);
    }

    #[test]
    fn short_trace_is_refused() {
        let mut config = ScenarioConfig::example();
        config.duration = 5.0;
        assert!(matches!(run_packet_trace(&config), Err(HarnessError::ShortTrace(_))));
    }

    #[test]
    fn still_trace_receives_everything() {
        let config = ScenarioConfig::example();
        let trace = run_packet_trace(&config).unwrap();
        assert_eq!(trace.len(), 12);
        assert!(trace.iter().all(|p| p.received_fraction == 1.0));
    }

    #[test]
    fn burst_dents_the_trace_where_it_lands() {
        let mut config = ScenarioConfig::example();
        config.modem.scheme = Scheme::S2Psk;
        config.trace.bursts.push(JitterBurst { start: 8.0, duration: 0.5, magnitude_px: 10.0 });
        let trace = run_packet_trace(&config).unwrap();
        for p in &trace {
            if p.time == 7.0 {
                assert!(p.received_fraction < 1.0);
            } else {
                assert_eq!(p.received_fraction, 1.0, "second {}", p.time);
            }
        }
    }

    #[test]
    fn doubling_the_payload_never_helps() {
        let mut config = ScenarioConfig::example();
        config.duration = 12.8;
        config.modem.scheme = Scheme::S2Psk;
        config.trace.jitter_px = 1.2;
        let totals = |payload: usize| {
            let mut c = config.clone();
            c.modem.payload_bits = payload;
            let trace = run_packet_trace(&c).unwrap();
            trace.iter().map(|p| p.received_fraction).sum::<f64>() / trace.len() as f64
        };
        let short = totals(16);
        let long = totals(48);
        assert!(long <= short, "long {long} vs short {short}");
        assert!(short < 1.0);
    }

    #[test]
    fn packet_spans_follow_the_codec() {
        let nyquist = ModemSection { scheme: Scheme::NyquistOok, payload_bits: 16 };
        assert_eq!(frames_per_packet(&nyquist, 30.0), 128);
        let s2 = ModemSection { scheme: Scheme::S2Psk, payload_bits: 16 };
        assert_eq!(frames_per_packet(&s2, 30.0), 32);
        let rolling = ModemSection { scheme: Scheme::RollingShutterOok, payload_bits: 64 };
        assert_eq!(frames_per_packet(&rolling, 30.0), 1);
    }

    #[test]
    fn thread_count_does_not_change_the_numbers() {
        let config = ScenarioConfig::example();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| {
                (run_throughput(&config).unwrap(), run_packet_trace(&config).unwrap())
            });
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| {
                (run_throughput(&config).unwrap(), run_packet_trace(&config).unwrap())
            });
        assert_eq!(throughput_csv(&serial.0), throughput_csv(&parallel.0));
        assert_eq!(trace_csv(&serial.1), trace_csv(&parallel.1));
    }

    #[test]
    fn csv_headers_are_versioned() {
        let ber = vec![BerPoint {
            snr_db: 5.0,
            adaptive_ber: 0.25,
            standard_ber: 0.5,
            symbols: 10000,
            adaptive_ci95: 0.01,
            standard_ci95: 0.01,
        }];
        assert_eq!(
            ber_csv(&ber),
            "# ber v1\nsnr_db,adaptive_ber,standard_ber,symbols,adaptive_ci95,standard_ci95\n\
             5,0.25,0.5,10000,0.01,0.01\n"
        );
        let thr = vec![ThroughputPoint { arrival_fps: 30.0, bits_per_second: 960.0 }];
        assert_eq!(throughput_csv(&thr), "# throughput v1\narrival_fps,bits_per_second\n30,960\n");
        let trace = vec![TracePoint { time: 0.0, received_fraction: 1.0 }];
        assert_eq!(trace_csv(&trace), "# trace v1\ntime,received_fraction\n0,1\n");
    }

    #[test]
    fn report_validation_catches_impossible_rows() {
        let config = ScenarioConfig::example();
        let mut report = MetricsReport::default();
        report.throughput_curve.push(ThroughputPoint {
            arrival_fps: 10.0,
            bits_per_second: 2.0 * 16.0 * 10.0 + 1.0,
        });
        assert!(report.validate(&config).is_err());
        report.throughput_curve[0].bits_per_second = 320.0;
        assert!(report.validate(&config).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn throughput_never_beats_the_frame_budget(
            seed in 0u64..1000,
            gen_rate in 1.0f64..400.0,
            fps in prop::collection::vec(1.0f64..200.0, 1..5),
            payload in 1usize..64,
            per_frame in 1usize..4,
        ) {
            let mut config = ScenarioConfig::example();
            config.seed = seed;
            config.queue.gen_rate_pps = gen_rate;
            config.sweep.arrival_fps = fps;
            config.modem.payload_bits = payload;
            config.queue.packets_per_frame = per_frame;
            let points = run_throughput(&config).unwrap();
            for p in &points {
                let budget = per_frame as f64 * payload as f64 * p.arrival_fps;
                prop_assert!(p.bits_per_second <= budget + 1e-9);
            }
            let report = MetricsReport { throughput_curve: points, ..Default::default() };
            prop_assert!(report.validate(&config).is_ok());
        }
    }
}
