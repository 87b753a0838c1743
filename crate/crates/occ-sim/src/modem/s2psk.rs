//! Two-group phase keying.
//!
//! The LED array splits into a reference group A and a data group B, both
//! blinking at the same rate. A bit is carried by B's phase against A:
//! in phase means 0, half a cycle out means 1. Each camera frame samples
//! both groups once and recovers the bit as a state mismatch, so absolute
//! brightness cancels and a frame missing either group is an erasure
//! rather than a guess.
//!
//! The blink rate runs at 1.5x the frame rate; frame-centered samples then
//! advance three quarters of a cycle per frame, landing a quarter cycle
//! from the square edges while both groups visibly toggle from frame to
//! frame.

use super::framing::{self, Deframed};
use super::{
    classify, DemodResult, Level, LedWaveform, ModemError, Packet, Scheme, Sym, WaveBody,
    DEFAULT_THRESHOLDS,
};

/// Blink cycles per camera frame period.
pub const S2PSK_BLINK_PER_FRAME: f64 = 1.5;

pub fn encode_s2psk(packet: &Packet, blink_hz: f64) -> Result<LedWaveform, ModemError> {
    if packet.payload.is_empty() {
        return Err(ModemError::EmptyPayload);
    }
    if packet.sfd != framing::FLAG {
        return Err(ModemError::InvalidSfd);
    }
    if !(blink_hz > 0.0) || !blink_hz.is_finite() {
        return Err(ModemError::InvalidBlink(blink_hz));
    }
    let wire = framing::frame_bits(&packet.payload);
    Ok(LedWaveform {
        scheme: Scheme::S2Psk,
        pulse_rate: blink_hz / S2PSK_BLINK_PER_FRAME,
        phase: 0.0,
        body: WaveBody::GroupPhases { slots: wire, blink_hz },
    })
}

/// Pooled intensity of one group over its visible emitters, or `None` when
/// every emitter is hidden.
pub fn group_mean_intensity(emitters: &[Option<f64>]) -> Option<f64> {
    let visible: Vec<f64> = emitters.iter().flatten().copied().collect();
    if visible.is_empty() {
        None
    } else {
        Some(visible.iter().sum::<f64>() / visible.len() as f64)
    }
}

fn xor_sym(a: Option<Level>, b: Option<Level>) -> Sym {
    match (a, b) {
        (Some(Level::Unclear), _) | (_, Some(Level::Unclear)) => Sym::Erased,
        (Some(x), Some(y)) => Sym::from_bit(x != y),
        _ => Sym::Erased,
    }
}

/// Decodes per-frame group states. Either slice may hold `None` where the
/// group was occluded for that frame; such frames become erasures.
///
/// Both groups are classified against their joint dynamic range, so scaling
/// every intensity by a common factor leaves the result unchanged.
pub fn decode_s2psk(group_a: &[Option<f64>], group_b: &[Option<f64>]) -> DemodResult {
    let n = group_a.len().min(group_b.len());
    let (a, b) = (&group_a[..n], &group_b[..n]);

    let pooled: Vec<f64> = a.iter().chain(b.iter()).flatten().copied().collect();
    let levels = classify(&pooled, DEFAULT_THRESHOLDS);
    let mut it = levels.into_iter();
    let mut relabel = |side: &[Option<f64>]| -> Vec<Option<Level>> {
        side.iter()
            .map(|v| v.map(|_| it.next().expect("one level per visible state")))
            .collect()
    };
    let a_levels = relabel(a);
    let b_levels = relabel(b);

    let syms: Vec<Sym> = a_levels
        .iter()
        .zip(&b_levels)
        .map(|(&x, &y)| xor_sym(x, y))
        .collect();
    let unclear = syms.iter().filter(|s| **s == Sym::Erased).count();

    match framing::deframe(&syms) {
        Deframed::Packet { payload, end } => {
            let unclear = syms[..end].iter().filter(|s| **s == Sym::Erased).count();
            DemodResult {
                bits: payload,
                frames_consumed: end,
                unclear_frames: unclear,
                sync_found: true,
            }
        }
        Deframed::Damaged { end } => DemodResult {
            bits: Vec::new(),
            frames_consumed: end,
            unclear_frames: unclear,
            sync_found: true,
        },
        Deframed::NoFlag => DemodResult::no_sync(n, unclear),
    }
}
