//! On/off keying at half the camera frame rate.
//!
//! The LED switches at `camera_fps / 2`, so every pulse is sampled by two
//! consecutive frames and a frame pair decides one pulse level even when one
//! frame lands on a transition and reads unclear. Each payload bit is sent
//! as two identical pulses; the duplicate carries the bit through a pulse
//! whose pair came back erased, and pins the data rate at `camera_fps / 4`.

use super::framing::{self, Deframed};
use super::{
    classify, DemodResult, Level, LedWaveform, ModemError, Packet, Scheme, Sym, WaveBody,
};

const FRAMES_PER_BIT: usize = 4;

pub fn encode_nyquist_ook(packet: &Packet, camera_fps: f64) -> Result<LedWaveform, ModemError> {
    if packet.payload.is_empty() {
        return Err(ModemError::EmptyPayload);
    }
    if packet.sfd != framing::FLAG {
        return Err(ModemError::InvalidSfd);
    }
    if !(camera_fps > 0.0) || camera_fps.fract() != 0.0 || (camera_fps as u64) % 2 != 0 {
        return Err(ModemError::OddFrameRate(camera_fps));
    }
    let wire = framing::frame_bits(&packet.payload);
    let levels = wire.iter().flat_map(|&b| [b, b]).collect();
    Ok(LedWaveform {
        scheme: Scheme::NyquistOok,
        pulse_rate: camera_fps / 2.0,
        phase: 0.0,
        body: WaveBody::Levels(levels),
    })
}

fn pair_level(a: Level, b: Level) -> Sym {
    use Level::*;
    match (a, b) {
        (Bright, Dark) | (Dark, Bright) | (Unclear, Unclear) => Sym::Erased,
        (Bright, _) | (_, Bright) => Sym::One,
        _ => Sym::Zero,
    }
}

fn merge_pulses(a: Sym, b: Sym) -> Sym {
    match (a, b) {
        (Sym::Erased, other) | (other, Sym::Erased) => other,
        (x, y) if x == y => x,
        _ => Sym::Erased,
    }
}

/// Decodes per-RoI mean intensities sampled at the camera frame rate.
///
/// Frame pairs give pulse levels, duplicate pulses give bits, and the flag
/// delimiter gives payload extent. The frame offset of the first pulse is
/// unknown to the receiver, so each of the four alignments within a bit is
/// tried and the first that yields a delimited packet wins.
pub fn decode_nyquist_ook(frames: &[f64], thresholds: (f64, f64)) -> DemodResult {
    if frames.len() < 2 {
        return DemodResult::no_sync(frames.len(), 0);
    }
    let levels = classify(frames, thresholds);
    let total_unclear = levels.iter().filter(|l| **l == Level::Unclear).count();

    let mut damaged_end = None;
    for offset in 0..FRAMES_PER_BIT.min(levels.len()) {
        let pulses: Vec<Sym> = levels[offset..]
            .chunks_exact(2)
            .map(|p| pair_level(p[0], p[1]))
            .collect();
        let bits: Vec<Sym> = pulses
            .chunks_exact(2)
            .map(|p| merge_pulses(p[0], p[1]))
            .collect();
        match framing::deframe(&bits) {
            Deframed::Packet { payload, end } => {
                let consumed = offset + end * FRAMES_PER_BIT;
                let unclear = levels[..consumed]
                    .iter()
                    .filter(|l| **l == Level::Unclear)
                    .count();
                return DemodResult {
                    bits: payload,
                    frames_consumed: consumed,
                    unclear_frames: unclear,
                    sync_found: true,
                };
            }
            Deframed::Damaged { end } => {
                damaged_end.get_or_insert(offset + end * FRAMES_PER_BIT);
            }
            Deframed::NoFlag => {}
        }
    }
    match damaged_end {
        Some(end) => DemodResult {
            bits: Vec::new(),
            frames_consumed: end,
            unclear_frames: total_unclear,
            sync_found: true,
        },
        None => DemodResult::no_sync(frames.len(), total_unclear),
    }
}
