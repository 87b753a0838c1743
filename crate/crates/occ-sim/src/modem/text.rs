//! Line-oriented text form of waveforms and demod results.
//!
//! One `key value` pair per line, keys in a fixed order, floats printed in
//! shortest round-trip form. The first line names the record and version:
//! `ledwave v1` or `demod v1`. Bit strings are `0`/`1` characters;
//! frequency-slot strings use `S` (space), `M` (mark) and `F` (delimiter).

use std::fmt::Write as _;

use super::{Bit, DemodResult, FreqKind, LedWaveform, ModemError, Scheme, WaveBody};

pub fn waveform_to_text(w: &LedWaveform) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ledwave v1");
    let _ = writeln!(out, "scheme {}", w.scheme.name());
    let _ = writeln!(out, "pulse_rate {}", w.pulse_rate);
    let _ = writeln!(out, "phase {}", w.phase);
    match &w.body {
        WaveBody::Levels(levels) => {
            let _ = writeln!(out, "levels {}", bit_str(levels));
        }
        WaveBody::FreqSlots { slots, space_hz, mark_hz, sfd_hz } => {
            let _ = writeln!(out, "freqs space={space_hz} mark={mark_hz} sfd={sfd_hz}");
            let s: String = slots
                .iter()
                .map(|k| match k {
                    FreqKind::Space => 'S',
                    FreqKind::Mark => 'M',
                    FreqKind::Sfd => 'F',
                })
                .collect();
            let _ = writeln!(out, "slots {s}");
        }
        WaveBody::GroupPhases { slots, blink_hz } => {
            let _ = writeln!(out, "blink {blink_hz}");
            let _ = writeln!(out, "slots {}", bit_str(slots));
        }
    }
    out
}

pub fn waveform_from_text(text: &str) -> Result<LedWaveform, ModemError> {
    let mut lines = Lines::new(text);
    lines.expect_header("ledwave v1")?;
    let scheme = match lines.take("scheme")? {
        s if s == Scheme::NyquistOok.name() => Scheme::NyquistOok,
        s if s == Scheme::Ufsook.name() => Scheme::Ufsook,
        s if s == Scheme::RollingShutterOok.name() => Scheme::RollingShutterOok,
        s if s == Scheme::S2Psk.name() => Scheme::S2Psk,
        s => return Err(ModemError::Parse(format!("unknown scheme {s}"))),
    };
    let pulse_rate = parse_f64(&lines.take("pulse_rate")?)?;
    let phase = parse_f64(&lines.take("phase")?)?;
    let body = match scheme {
        Scheme::NyquistOok | Scheme::RollingShutterOok => {
            WaveBody::Levels(parse_bits(&lines.take("levels")?)?)
        }
        Scheme::Ufsook => {
            let freqs = lines.take("freqs")?;
            let mut space = None;
            let mut mark = None;
            let mut sfd = None;
            for part in freqs.split_whitespace() {
                let (key, val) = part
                    .split_once('=')
                    .ok_or_else(|| ModemError::Parse(format!("bad freq field {part}")))?;
                let slot = match key {
                    "space" => &mut space,
                    "mark" => &mut mark,
                    "sfd" => &mut sfd,
                    _ => return Err(ModemError::Parse(format!("unknown freq {key}"))),
                };
                *slot = Some(parse_f64(val)?);
            }
            let (Some(space_hz), Some(mark_hz), Some(sfd_hz)) = (space, mark, sfd) else {
                return Err(ModemError::Parse("missing freq field".into()));
            };
            let slots = lines
                .take("slots")?
                .chars()
                .map(|c| match c {
                    'S' => Ok(FreqKind::Space),
                    'M' => Ok(FreqKind::Mark),
                    'F' => Ok(FreqKind::Sfd),
                    other => Err(ModemError::Parse(format!("bad slot char {other}"))),
                })
                .collect::<Result<_, _>>()?;
            WaveBody::FreqSlots { slots, space_hz, mark_hz, sfd_hz }
        }
        Scheme::S2Psk => {
            let blink_hz = parse_f64(&lines.take("blink")?)?;
            WaveBody::GroupPhases { slots: parse_bits(&lines.take("slots")?)?, blink_hz }
        }
    };
    Ok(LedWaveform { scheme, pulse_rate, phase, body })
}

pub fn demod_to_text(d: &DemodResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "demod v1");
    let _ = writeln!(out, "sync {}", d.sync_found);
    let _ = writeln!(out, "frames_consumed {}", d.frames_consumed);
    let _ = writeln!(out, "unclear_frames {}", d.unclear_frames);
    let _ = writeln!(out, "bits {}", bit_str(&d.bits));
    out
}

pub fn demod_from_text(text: &str) -> Result<DemodResult, ModemError> {
    let mut lines = Lines::new(text);
    lines.expect_header("demod v1")?;
    let sync_found = match lines.take("sync")?.as_str() {
        "true" => true,
        "false" => false,
        other => return Err(ModemError::Parse(format!("bad sync value {other}"))),
    };
    let frames_consumed = parse_usize(&lines.take("frames_consumed")?)?;
    let unclear_frames = parse_usize(&lines.take("unclear_frames")?)?;
    let bits = parse_bits(&lines.take("bits")?)?;
    Ok(DemodResult { bits, frames_consumed, unclear_frames, sync_found })
}

fn bit_str(bits: &[Bit]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<Vec<Bit>, ModemError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(ModemError::Parse(format!("bad bit char {other}"))),
        })
        .collect()
}

fn parse_f64(s: &str) -> Result<f64, ModemError> {
    s.parse()
        .map_err(|_| ModemError::Parse(format!("bad number {s}")))
}

fn parse_usize(s: &str) -> Result<usize, ModemError> {
    s.parse()
        .map_err(|_| ModemError::Parse(format!("bad count {s}")))
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { iter: text.lines() }
    }

    fn expect_header(&mut self, want: &str) -> Result<(), ModemError> {
        match self.iter.next() {
            Some(line) if line.trim() == want => Ok(()),
            other => Err(ModemError::Parse(format!("expected header {want:?}, got {other:?}"))),
        }
    }

    /// Next line, which must start with `key` followed by a space. The
    /// value may be empty.
    fn take(&mut self, key: &str) -> Result<String, ModemError> {
        let line = self
            .iter
            .next()
            .ok_or_else(|| ModemError::Parse(format!("missing line {key}")))?;
        match line.strip_prefix(key) {
            Some(rest) if rest.is_empty() => Ok(String::new()),
            Some(rest) if rest.starts_with(' ') => Ok(rest[1..].to_string()),
            _ => Err(ModemError::Parse(format!("expected key {key}, got {line:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{encode_nyquist_ook, encode_s2psk, encode_ufsook, Packet};
    use super::*;

    fn packet(bits: &str) -> Packet {
        Packet::new(bits.chars().map(|c| c == '1').collect())
    }

    #[test]
    fn waveforms_round_trip_through_text() {
        let waves = [
            encode_nyquist_ook(&packet("10110"), 600.0).unwrap(),
            encode_ufsook(&packet("1100"), 30.0, 120.0, 105.0).unwrap(),
            encode_s2psk(&packet("0101"), 45.0).unwrap(),
        ];
        for w in waves {
            let text = waveform_to_text(&w);
            assert_eq!(waveform_from_text(&text).unwrap(), w, "{text}");
        }
    }

    #[test]
    fn demod_results_round_trip_through_text() {
        let d = DemodResult {
            bits: vec![true, false, true],
            frames_consumed: 44,
            unclear_frames: 8,
            sync_found: true,
        };
        assert_eq!(demod_from_text(&demod_to_text(&d)).unwrap(), d);
        let empty = DemodResult::no_sync(12, 3);
        assert_eq!(demod_from_text(&demod_to_text(&empty)).unwrap(), empty);
    }

    #[test]
    fn ufsook_text_is_stable() {
        let w = encode_ufsook(&packet("10"), 30.0, 120.0, 105.0).unwrap();
        let text = waveform_to_text(&w);
        assert_eq!(
            text,
            "ledwave v1\n\
             scheme ufsook\n\
             pulse_rate 30\n\
             phase 0.125\n\
             freqs space=120 mark=105 sfd=37.5\n\
             slots FFFFMMSSFFFF\n"
        );
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(matches!(waveform_from_text("nonsense"), Err(ModemError::Parse(_))));
        assert!(matches!(
            waveform_from_text("ledwave v1\nscheme warble\n"),
            Err(ModemError::Parse(_))
        ));
        let good = demod_to_text(&DemodResult::no_sync(1, 0));
        let bad = good.replace("frames_consumed 1", "frames_consumed x");
        assert!(matches!(demod_from_text(&bad), Err(ModemError::Parse(_))));
    }
}
