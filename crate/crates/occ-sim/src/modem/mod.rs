//! LED codecs: payload bits to drive waveforms and sampled frames back to
//! bits.
//!
//! Four schemes share one waveform container. `NyquistOok` and
//! `RollingShutterOok` switch the LED between two levels; `Ufsook` keys
//! between square-wave frequencies that alias to steady or toggling frame
//! samples; `S2Psk` drives a second LED group in or out of phase with a
//! reference group. Decoders classify sampled intensities into dark, bright,
//! or unclear and report erasures instead of guessing.

pub mod framing;
mod nyquist;
mod rolling;
mod s2psk;
mod text;
mod ufsook;

pub use nyquist::{decode_nyquist_ook, encode_nyquist_ook};
pub use rolling::{decode_rolling_ook, decode_rolling_rows, encode_rolling_ook};
pub use s2psk::{decode_s2psk, encode_s2psk, group_mean_intensity, S2PSK_BLINK_PER_FRAME};
pub use text::{demod_from_text, demod_to_text, waveform_from_text, waveform_to_text};
pub use ufsook::{decode_ufsook, encode_ufsook, UFSOOK_MIN_HZ, UFSOOK_SFD_PER_FRAME};

use thiserror::Error;

pub type Bit = bool;

/// Fraction of a sequence's dynamic range below which a sample reads dark
/// and above which it reads bright. In between is unclear.
pub const DEFAULT_THRESHOLDS: (f64, f64) = (0.33, 0.66);

#[derive(Debug, Error, PartialEq)]
pub enum ModemError {
    #[error("payload is empty")]
    EmptyPayload,
    #[error("start delimiter must be the flag pattern 01111110")]
    InvalidSfd,
    #[error("frame rate {0} is not a positive even integer")]
    OddFrameRate(f64),
    #[error("space frequency {space_hz} Hz is not an integer multiple of {camera_fps} fps")]
    NotHarmonic { space_hz: f64, camera_fps: f64 },
    #[error("mark frequency {mark_hz} Hz is not offset from a harmonic by {camera_fps}/2 fps")]
    BadMarkOffset { mark_hz: f64, camera_fps: f64 },
    #[error("keying frequency {0} Hz is low enough to flicker visibly")]
    FlickerViolation(f64),
    #[error("LED rate {led_hz} Hz must be positive")]
    InvalidLedRate { led_hz: f64 },
    #[error("blink frequency {0} Hz is not positive")]
    InvalidBlink(f64),
    #[error("half-bit band spans {band_rows:.3} rows; rows cannot resolve the keying rate")]
    Undersampled { band_rows: f64 },
    #[error("waveform text: {0}")]
    Parse(String),
}

/// Modulation scheme carried by a waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    #[serde(rename = "nyquist-ook")]
    NyquistOok,
    #[serde(rename = "ufsook")]
    Ufsook,
    #[serde(rename = "rolling-shutter-ook")]
    RollingShutterOok,
    #[serde(rename = "s2-psk")]
    S2Psk,
}

impl Scheme {
    /// Payload bit rate when sampled by a camera at `fps` frames per second.
    /// Rolling shutter keying is set by the LED rate, not the frame rate.
    pub fn bit_rate(&self, fps: f64) -> Option<f64> {
        match self {
            Scheme::NyquistOok => Some(fps / 4.0),
            Scheme::Ufsook => Some(fps / 2.0),
            Scheme::S2Psk => Some(fps),
            Scheme::RollingShutterOok => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::NyquistOok => "nyquist-ook",
            Scheme::Ufsook => "ufsook",
            Scheme::RollingShutterOok => "rolling-shutter-ook",
            Scheme::S2Psk => "s2-psk",
        }
    }
}

/// A delimited payload. `sfd` is the start delimiter; level-keyed schemes
/// require the flag pattern so bit stuffing keeps it unique in the stream,
/// while `Ufsook` marks packet edges in frequency and ignores it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub sfd: Vec<Bit>,
    pub payload: Vec<Bit>,
}

impl Packet {
    pub fn new(payload: Vec<Bit>) -> Self {
        Packet { sfd: framing::FLAG.to_vec(), payload }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let payload = bytes
            .iter()
            .flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
            .collect();
        Self::new(payload)
    }

    pub fn len_bits(&self) -> usize {
        self.payload.len()
    }
}

/// Frequency keying of one camera-frame slot in a `Ufsook` waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqKind {
    Space,
    Mark,
    Sfd,
}

/// Scheme-specific switching timeline of a waveform.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveBody {
    /// On/off level per slot.
    Levels(Vec<Bit>),
    /// Square-wave frequency per slot. Slots last one camera frame.
    FreqSlots { slots: Vec<FreqKind>, space_hz: f64, mark_hz: f64, sfd_hz: f64 },
    /// Relative phase of group B against group A per slot: `false` in
    /// phase, `true` half a cycle out. Slots last one camera frame.
    GroupPhases { slots: Vec<Bit>, blink_hz: f64 },
}

/// An LED drive waveform on a uniform slot timeline.
///
/// `pulse_rate` is the slot rate in Hz; slot `i` covers
/// `[i, i + 1) / pulse_rate` seconds. `phase` shifts any square-wave
/// carriers by that fraction of a cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct LedWaveform {
    pub scheme: Scheme,
    pub pulse_rate: f64,
    pub phase: f64,
    pub body: WaveBody,
}

/// LED group within an array. Schemes other than `S2Psk` drive all groups
/// identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    A,
    B,
}

fn square(cycles: f64) -> f64 {
    if cycles.rem_euclid(1.0) < 0.5 {
        1.0
    } else {
        0.0
    }
}

impl LedWaveform {
    pub fn n_slots(&self) -> usize {
        match &self.body {
            WaveBody::Levels(v) => v.len(),
            WaveBody::FreqSlots { slots, .. } => slots.len(),
            WaveBody::GroupPhases { slots, .. } => slots.len(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.n_slots() as f64 / self.pulse_rate
    }

    /// Drive level of group A at time `t`. Past either end the LED is dark.
    pub fn level_at(&self, t: f64) -> f64 {
        self.group_level_at(Group::A, t)
    }

    /// Drive level of `group` at time `t` in `[0, 1]`. The half-intensity
    /// level only arises for `Ufsook` start-delimiter slots, whose carrier
    /// outruns the exposure and averages out.
    pub fn group_level_at(&self, group: Group, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let slot = (t * self.pulse_rate).floor() as usize;
        if slot >= self.n_slots() {
            return 0.0;
        }
        match &self.body {
            WaveBody::Levels(v) => {
                if v[slot] {
                    1.0
                } else {
                    0.0
                }
            }
            WaveBody::FreqSlots { slots, space_hz, mark_hz, .. } => match slots[slot] {
                FreqKind::Space => square(space_hz * t + self.phase),
                FreqKind::Mark => square(mark_hz * t + self.phase),
                FreqKind::Sfd => 0.5,
            },
            WaveBody::GroupPhases { slots, blink_hz } => {
                let flip = match group {
                    Group::A => 0.0,
                    Group::B => {
                        if slots[slot] {
                            0.5
                        } else {
                            0.0
                        }
                    }
                };
                square(blink_hz * t + self.phase + flip)
            }
        }
    }

    /// Camera frame rate this waveform is laid out for.
    pub fn camera_fps(&self) -> f64 {
        match self.scheme {
            Scheme::NyquistOok => 2.0 * self.pulse_rate,
            Scheme::Ufsook | Scheme::S2Psk => self.pulse_rate,
            Scheme::RollingShutterOok => self.pulse_rate,
        }
    }
}

/// Samples group A at the centers of camera frames covering the waveform.
pub fn ideal_sample(w: &LedWaveform) -> Vec<f64> {
    ideal_sample_group(w, Group::A)
}

/// Samples one group at frame centers.
pub fn ideal_sample_group(w: &LedWaveform, group: Group) -> Vec<f64> {
    let fps = w.camera_fps();
    let n = (w.duration() * fps).round() as usize;
    (0..n)
        .map(|i| w.group_level_at(group, (i as f64 + 0.5) / fps))
        .collect()
}

/// Samples group A at the centers of `n_rows` consecutive row exposures.
pub fn ideal_rows(w: &LedWaveform, row_time: f64, n_rows: usize) -> Vec<f64> {
    (0..n_rows)
        .map(|r| w.level_at((r as f64 + 0.5) * row_time))
        .collect()
}

/// Decoder output. `bits` is the recovered payload and stays empty unless
/// `sync_found`; an erasure inside a delimited packet also empties it so a
/// damaged packet is dropped rather than passed on with guessed bits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DemodResult {
    pub bits: Vec<Bit>,
    pub frames_consumed: usize,
    pub unclear_frames: usize,
    pub sync_found: bool,
}

impl DemodResult {
    pub fn no_sync(frames_consumed: usize, unclear_frames: usize) -> Self {
        DemodResult { bits: Vec::new(), frames_consumed, unclear_frames, sync_found: false }
    }
}

/// Ternary sample classification shared by the decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Level {
    Dark,
    Bright,
    Unclear,
}

/// Ternary symbol stream after pairing or combining levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sym {
    Zero,
    One,
    Erased,
}

impl Sym {
    pub(crate) fn from_bit(b: Bit) -> Self {
        if b {
            Sym::One
        } else {
            Sym::Zero
        }
    }
}

/// Classifies raw intensities against fractions of their dynamic range.
/// The span is measured between the 2nd and 98th percentiles so a stray
/// sample cannot stretch the scale; with no span everything is unclear.
pub(crate) fn classify(samples: &[f64], thresholds: (f64, f64)) -> Vec<Level> {
    let (lo, hi) = percentile_span(samples);
    let span = hi - lo;
    if span < 1e-12 {
        return vec![Level::Unclear; samples.len()];
    }
    samples
        .iter()
        .map(|&v| {
            let x = (v - lo) / span;
            if x <= thresholds.0 {
                Level::Dark
            } else if x >= thresholds.1 {
                Level::Bright
            } else {
                Level::Unclear
            }
        })
        .collect()
}

fn percentile_span(samples: &[f64]) -> (f64, f64) {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return (0.0, 0.0);
    }
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    (rank(0.02), rank(0.98))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels_wave(levels: Vec<bool>, rate: f64) -> LedWaveform {
        LedWaveform {
            scheme: Scheme::NyquistOok,
            pulse_rate: rate,
            phase: 0.0,
            body: WaveBody::Levels(levels),
        }
    }

    #[test]
    fn level_timeline_indexes_slots() {
        let w = levels_wave(vec![true, false, true], 10.0);
        assert_eq!(w.level_at(0.05), 1.0);
        assert_eq!(w.level_at(0.15), 0.0);
        assert_eq!(w.level_at(0.25), 1.0);
        assert_eq!(w.level_at(-0.01), 0.0);
        assert_eq!(w.level_at(0.35), 0.0);
        assert_eq!(w.duration(), 0.3);
    }

    #[test]
    fn square_wave_has_half_duty_and_wraps() {
        assert_eq!(square(0.0), 1.0);
        assert_eq!(square(0.49), 1.0);
        assert_eq!(square(0.5), 0.0);
        assert_eq!(square(0.99), 0.0);
        assert_eq!(square(1.25), 1.0);
        assert_eq!(square(-0.25), 0.0);
    }

    #[test]
    fn bit_rates_follow_scheme() {
        assert_eq!(Scheme::NyquistOok.bit_rate(600.0), Some(150.0));
        assert_eq!(Scheme::Ufsook.bit_rate(20.0), Some(10.0));
        assert_eq!(Scheme::S2Psk.bit_rate(30.0), Some(30.0));
        assert_eq!(Scheme::RollingShutterOok.bit_rate(30.0), None);
    }

    #[test]
    fn classify_splits_dynamic_range() {
        let v = vec![0.0, 1.0, 0.5, 0.1, 0.9];
        let got = classify(&v, DEFAULT_THRESHOLDS);
        assert_eq!(
            got,
            vec![Level::Dark, Level::Bright, Level::Unclear, Level::Dark, Level::Bright]
        );
    }

    #[test]
    fn classify_flat_sequence_is_all_unclear() {
        let v = vec![0.7; 6];
        assert!(classify(&v, DEFAULT_THRESHOLDS).iter().all(|l| *l == Level::Unclear));
    }

    #[test]
    fn classify_is_scale_invariant() {
        let v = vec![0.1, 0.9, 0.45, 0.2];
        let scaled: Vec<f64> = v.iter().map(|x| 3.7 * x + 0.2).collect();
        assert_eq!(classify(&v, DEFAULT_THRESHOLDS), classify(&scaled, DEFAULT_THRESHOLDS));
    }

    #[test]
    fn packet_from_bytes_is_msb_first() {
        let p = Packet::from_bytes(&[0b1010_0001]);
        assert_eq!(
            p.payload,
            vec![true, false, true, false, false, false, false, true]
        );
        assert_eq!(p.sfd, framing::FLAG.to_vec());
    }
}
