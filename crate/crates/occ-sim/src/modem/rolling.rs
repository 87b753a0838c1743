//! Manchester keying read out through a rolling shutter.
//!
//! The LED switches faster than the frame rate, so a single rolling-shutter
//! frame shows it as horizontal bands: each row samples a different instant,
//! and a half-bit at rate `led_hz` paints `1 / (2 * led_hz * row_time)`
//! consecutive rows. The keying rate therefore has to sit between the frame
//! rate and the row clock; candidates whose bands would be thinner than one
//! row are undersampled and rejected.

use super::framing::{self, Deframed};
use super::{
    classify, DemodResult, LedWaveform, Level, ModemError, Packet, Scheme, Sym, WaveBody,
    DEFAULT_THRESHOLDS,
};
use crate::scene::Frame;

pub fn encode_rolling_ook(packet: &Packet, led_hz: f64) -> Result<LedWaveform, ModemError> {
    if packet.payload.is_empty() {
        return Err(ModemError::EmptyPayload);
    }
    if packet.sfd != framing::FLAG {
        return Err(ModemError::InvalidSfd);
    }
    if !(led_hz > 0.0) || !led_hz.is_finite() {
        return Err(ModemError::InvalidLedRate { led_hz });
    }
    let wire = framing::frame_bits(&packet.payload);
    // Rising mid-bit transition encodes 1: low half, then high half.
    let halves = wire
        .iter()
        .flat_map(|&b| if b { [false, true] } else { [true, false] })
        .collect();
    Ok(LedWaveform {
        scheme: Scheme::RollingShutterOok,
        pulse_rate: 2.0 * led_hz,
        phase: 0.0,
        body: WaveBody::Levels(halves),
    })
}

/// Crisp row runs with transition rows absorbed into the preceding run.
fn row_runs(levels: &[Level]) -> Vec<(bool, usize)> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    let mut pending = 0usize;
    for &l in levels {
        match l {
            Level::Unclear => match runs.last_mut() {
                Some(run) => run.1 += 1,
                None => pending += 1,
            },
            crisp => {
                let bright = crisp == Level::Bright;
                match runs.last_mut() {
                    Some(run) if run.0 == bright => run.1 += 1,
                    _ => {
                        runs.push((bright, pending + 1));
                        pending = 0;
                    }
                }
            }
        }
    }
    runs
}

/// Half-bit symbols quantized from row runs under band width `w`, with the
/// cumulative row count at the end of each symbol.
fn quantize(runs: &[(bool, usize)], w: f64) -> (Vec<Sym>, Vec<usize>, f64) {
    let mut halves = Vec::new();
    let mut row_ends = Vec::new();
    let mut rows = 0usize;
    let mut score = 0.0;
    for &(bright, len) in runs {
        let m = ((len as f64 / w).round() as usize).max(1);
        score += (len as f64 - m as f64 * w).abs();
        rows += len;
        for k in 1..=m {
            halves.push(Sym::from_bit(bright));
            let frac = rows as f64 - (m - k) as f64 * w;
            row_ends.push(frac.round() as usize);
        }
    }
    (halves, row_ends, score)
}

fn manchester_bits(halves: &[Sym], phase: usize) -> Vec<Sym> {
    halves[phase..]
        .chunks_exact(2)
        .map(|p| match (p[0], p[1]) {
            (Sym::Zero, Sym::One) => Sym::One,
            (Sym::One, Sym::Zero) => Sym::Zero,
            _ => Sym::Erased,
        })
        .collect()
}

/// Decodes one rolling-shutter frame by reducing it to a row profile.
///
/// The emitter paints a vertical stripe of bands; columns whose summed
/// intensity reaches half of the strongest column's are taken as the
/// stripe, and each row's mean over those columns feeds the row decoder.
pub fn decode_rolling_ook(
    frame: &Frame,
    row_time: f64,
    led_hz_candidates: &[f64],
) -> Result<DemodResult, ModemError> {
    let mut column_sum = vec![0.0f64; frame.width];
    for y in 0..frame.height {
        for (x, s) in column_sum.iter_mut().enumerate() {
            *s += frame.at(x, y);
        }
    }
    let peak = column_sum.iter().copied().fold(0.0f64, f64::max);
    let stripe: Vec<usize> = (0..frame.width)
        .filter(|&x| column_sum[x] >= 0.5 * peak && peak > 0.0)
        .collect();
    if stripe.is_empty() {
        return Ok(DemodResult::no_sync(frame.height, 0));
    }
    let rows: Vec<f64> = (0..frame.height)
        .map(|y| stripe.iter().map(|&x| frame.at(x, y)).sum::<f64>() / stripe.len() as f64)
        .collect();
    decode_rolling_rows(&rows, row_time, led_hz_candidates)
}

/// Decodes a per-row intensity profile of one rolling-shutter frame.
///
/// Each candidate keying rate fixes a band width in rows; the candidate
/// whose bands best explain the observed run lengths is tried first, and
/// both half-bit alignments are scanned for a flag-delimited packet.
pub fn decode_rolling_rows(
    rows: &[f64],
    row_time: f64,
    led_hz_candidates: &[f64],
) -> Result<DemodResult, ModemError> {
    let mut feasible: Vec<f64> = Vec::new();
    let mut widest_band = 0.0f64;
    for &f in led_hz_candidates {
        if !(f > 0.0) || !f.is_finite() {
            continue;
        }
        let band = 1.0 / (2.0 * f * row_time);
        widest_band = widest_band.max(band);
        if band >= 1.0 {
            feasible.push(f);
        }
    }
    if feasible.is_empty() {
        return Err(ModemError::Undersampled { band_rows: widest_band });
    }

    let levels = classify(rows, DEFAULT_THRESHOLDS);
    let total_unclear = levels.iter().filter(|l| **l == Level::Unclear).count();
    let runs = row_runs(&levels);
    if runs.len() < 2 {
        return Ok(DemodResult::no_sync(rows.len(), total_unclear));
    }

    let mut ranked: Vec<(Vec<Sym>, Vec<usize>, f64)> = feasible
        .iter()
        .map(|&f| quantize(&runs, 1.0 / (2.0 * f * row_time)))
        .collect();
    ranked.sort_by(|a, b| a.2.total_cmp(&b.2));

    let mut damaged: Option<usize> = None;
    for (halves, row_ends, _) in &ranked {
        for phase in 0..2usize {
            if halves.len() <= phase {
                continue;
            }
            let bits = manchester_bits(halves, phase);
            match framing::deframe(&bits) {
                Deframed::Packet { payload, end } => {
                    let last_half = phase + end * 2 - 1;
                    let consumed = row_ends[last_half].min(rows.len());
                    let unclear = levels[..consumed]
                        .iter()
                        .filter(|l| **l == Level::Unclear)
                        .count();
                    return Ok(DemodResult {
                        bits: payload,
                        frames_consumed: consumed,
                        unclear_frames: unclear,
                        sync_found: true,
                    });
                }
                Deframed::Damaged { end } => {
                    let last_half = (phase + end * 2).min(row_ends.len()) - 1;
                    damaged.get_or_insert(row_ends[last_half].min(rows.len()));
                }
                Deframed::NoFlag => {}
            }
        }
    }
    Ok(match damaged {
        Some(consumed) => DemodResult {
            bits: Vec::new(),
            frames_consumed: consumed,
            unclear_frames: total_unclear,
            sync_found: true,
        },
        None => DemodResult::no_sync(rows.len(), total_unclear),
    })
}
