//! Undersampled frequency-shift on/off keying.
//!
//! The LED carries square waves far above the frame rate. A space frequency
//! sits on an integer harmonic of the frame rate, so consecutive frames
//! sample it at the same point of its cycle and read an identical state; a
//! mark frequency sits half a frame rate off a harmonic, so consecutive
//! samples land half a cycle apart and toggle. Packet edges carry a third
//! frequency at 1.25x the frame rate whose cycle outruns the exposure and
//! reads as sustained half intensity, giving a delimiter no data bit can
//! imitate.

use super::{
    classify, DemodResult, FreqKind, LedWaveform, Level, ModemError, Packet, Scheme, WaveBody,
    DEFAULT_THRESHOLDS,
};

/// Keying frequencies at or below this flicker visibly and are rejected.
pub const UFSOOK_MIN_HZ: f64 = 100.0;

/// Delimiter carrier frequency as a multiple of the camera frame rate.
pub const UFSOOK_SFD_PER_FRAME: f64 = 1.25;

/// Frames spanned by one start or end delimiter.
const SFD_FRAMES: usize = 4;

const FRAMES_PER_BIT: usize = 2;

pub fn encode_ufsook(
    packet: &Packet,
    camera_fps: f64,
    space_hz: f64,
    mark_hz: f64,
) -> Result<LedWaveform, ModemError> {
    if packet.payload.is_empty() {
        return Err(ModemError::EmptyPayload);
    }
    if !(camera_fps > 0.0) {
        return Err(ModemError::OddFrameRate(camera_fps));
    }
    for f in [space_hz, mark_hz] {
        if f <= UFSOOK_MIN_HZ {
            return Err(ModemError::FlickerViolation(f));
        }
    }
    let m = space_hz / camera_fps;
    if (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
        return Err(ModemError::NotHarmonic { space_hz, camera_fps });
    }
    let q = mark_hz / (camera_fps / 2.0);
    if (q - q.round()).abs() > 1e-9 || (q.round() as i64) % 2 == 0 {
        return Err(ModemError::BadMarkOffset { mark_hz, camera_fps });
    }

    let mut slots = Vec::with_capacity(2 * SFD_FRAMES + FRAMES_PER_BIT * packet.payload.len());
    slots.extend([FreqKind::Sfd; SFD_FRAMES]);
    for &b in &packet.payload {
        let kind = if b { FreqKind::Mark } else { FreqKind::Space };
        slots.extend([kind; FRAMES_PER_BIT]);
    }
    slots.extend([FreqKind::Sfd; SFD_FRAMES]);

    Ok(LedWaveform {
        scheme: Scheme::Ufsook,
        pulse_rate: camera_fps,
        // Frame-centered samples hit the space carrier at multiples of
        // half a cycle and the mark carrier a quarter cycle off those, so
        // an eighth-cycle offset stays clear of both carriers' edges.
        phase: 0.125,
        body: WaveBody::FreqSlots {
            slots,
            space_hz,
            mark_hz,
            sfd_hz: UFSOOK_SFD_PER_FRAME * camera_fps,
        },
    })
}

enum Scan {
    Complete(DemodResult),
    Damaged { consumed: usize },
    NoSync,
}

fn scan(levels: &[Level]) -> Scan {
    let unclear_run_at = |start: usize| {
        levels[start..]
            .iter()
            .take_while(|l| **l == Level::Unclear)
            .count()
    };

    let mut open = None;
    let mut i = 0;
    while i < levels.len() {
        let run = unclear_run_at(i);
        if run >= SFD_FRAMES {
            open = Some(i + run);
            break;
        }
        i += run.max(1);
    }
    let Some(data_start) = open else {
        return Scan::NoSync;
    };

    let mut bits = Vec::new();
    let mut i = data_start;
    loop {
        if i >= levels.len() {
            return Scan::Damaged { consumed: levels.len() };
        }
        let run = unclear_run_at(i);
        if run >= 2 {
            let consumed = i + run;
            let unclear = levels[..consumed]
                .iter()
                .filter(|l| **l == Level::Unclear)
                .count();
            return Scan::Complete(DemodResult {
                bits,
                frames_consumed: consumed,
                unclear_frames: unclear,
                sync_found: true,
            });
        }
        if run == 1 || i + 1 >= levels.len() || levels[i + 1] == Level::Unclear {
            return Scan::Damaged { consumed: (i + 2).min(levels.len()) };
        }
        bits.push(levels[i] != levels[i + 1]);
        i += FRAMES_PER_BIT;
    }
}

/// Splits samples into clusters separated by gaps wider than a quarter of
/// the overall span. Ideal streams form at most three.
fn clusters(frames: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = frames.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let Some((&first, &last)) = sorted.first().zip(sorted.last()) else {
        return Vec::new();
    };
    let gap = 0.25 * (last - first);
    if gap <= 0.0 {
        return vec![first];
    }
    let mut centers = vec![first];
    let mut lo = first;
    for &v in &sorted {
        if v - lo > gap {
            centers.push(v);
        }
        lo = v;
    }
    centers
}

/// Decodes per-frame sampled LED states captured at `camera_fps`.
///
/// Data frames read crisply dark or bright while delimiter frames hold the
/// middle of the dynamic range, so a run of four or more unclear frames
/// opens the packet and the next sustained run closes it. Streams that the
/// range-fraction classifier misreads are retried by clustering: with three
/// intensity clusters the middle one is the delimiter, and a payload of
/// identical bits collapses the stream to two clusters, each of which is
/// tried as the delimiter in turn. The hypothesis that yields a complete
/// packet wins.
pub fn decode_ufsook(frames: &[f64], camera_fps: f64) -> DemodResult {
    debug_assert!(camera_fps > 0.0);
    let total_unclear = |levels: &[Level]| {
        levels
            .iter()
            .filter(|l| **l == Level::Unclear)
            .count()
    };

    let direct = classify(frames, DEFAULT_THRESHOLDS);
    let fallback = match scan(&direct) {
        Scan::Complete(res) => return res,
        Scan::Damaged { consumed } => DemodResult {
            bits: Vec::new(),
            frames_consumed: consumed,
            unclear_frames: total_unclear(&direct),
            sync_found: true,
        },
        Scan::NoSync => DemodResult::no_sync(frames.len(), total_unclear(&direct)),
    };

    let centers = clusters(frames);
    match centers[..] {
        [a, b] => {
            for (sfd, data) in [(a, b), (b, a)] {
                let levels: Vec<Level> = frames
                    .iter()
                    .map(|&v| {
                        if (v - sfd).abs() <= (v - data).abs() {
                            Level::Unclear
                        } else {
                            Level::Bright
                        }
                    })
                    .collect();
                if let Scan::Complete(res) = scan(&levels) {
                    return res;
                }
            }
        }
        [lo, mid, hi] => {
            let levels: Vec<Level> = frames
                .iter()
                .map(|&v| {
                    let to_mid = (v - mid).abs();
                    if to_mid <= (v - lo).abs() && to_mid <= (v - hi).abs() {
                        Level::Unclear
                    } else if (v - lo).abs() <= (v - hi).abs() {
                        Level::Dark
                    } else {
                        Level::Bright
                    }
                })
                .collect();
            if let Scan::Complete(res) = scan(&levels) {
                return res;
            }
        }
        _ => {}
    }
    fallback
}
