//! Flag-delimited bit framing with zero insertion.
//!
//! A packet on the wire is `FLAG + stuffed payload + FLAG`. Stuffing inserts
//! a zero after five consecutive ones so the six-one flag pattern cannot
//! occur inside the payload, which makes the delimiter unambiguous at any
//! bit offset.

use super::{Bit, Sym};

/// The delimiter pattern 01111110.
pub const FLAG: [Bit; 8] = [false, true, true, true, true, true, true, false];

/// Inserts a zero after every run of five ones.
pub fn stuff(payload: &[Bit]) -> Vec<Bit> {
    let mut out = Vec::with_capacity(payload.len() + payload.len() / 5 + 1);
    let mut ones = 0usize;
    for &b in payload {
        out.push(b);
        ones = if b { ones + 1 } else { 0 };
        if ones == 5 {
            out.push(false);
            ones = 0;
        }
    }
    out
}

/// Removes the zeros inserted by `stuff`. Inverse of `stuff` on its image.
pub fn destuff(bits: &[Bit]) -> Vec<Bit> {
    let mut out = Vec::with_capacity(bits.len());
    let mut ones = 0usize;
    let mut skip = false;
    for &b in bits {
        if skip {
            skip = false;
            ones = 0;
            continue;
        }
        out.push(b);
        ones = if b { ones + 1 } else { 0 };
        if ones == 5 {
            skip = true;
        }
    }
    out
}

/// Wire bits for one packet: flag, stuffed payload, flag.
pub fn frame_bits(payload: &[Bit]) -> Vec<Bit> {
    let mut out = Vec::with_capacity(payload.len() + 20);
    out.extend_from_slice(&FLAG);
    out.extend(stuff(payload));
    out.extend_from_slice(&FLAG);
    out
}

/// Outcome of scanning a symbol stream for one framed packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Deframed {
    /// Payload plus the stream index one past the closing flag.
    Packet { payload: Vec<Bit>, end: usize },
    /// Opening flag seen but the packet was cut short or an erased symbol
    /// landed inside it.
    Damaged { end: usize },
    NoFlag,
}

fn flag_at(stream: &[Sym], i: usize) -> bool {
    i + FLAG.len() <= stream.len()
        && FLAG
            .iter()
            .zip(&stream[i..])
            .all(|(&f, &s)| s == Sym::from_bit(f))
}

/// Finds the first flag-delimited packet in a ternary symbol stream.
/// Erased symbols never match a flag; one inside the packet body damages it.
pub(crate) fn deframe(stream: &[Sym]) -> Deframed {
    let mut open = None;
    for i in 0..stream.len() {
        if flag_at(stream, i) {
            open = Some(i);
            break;
        }
    }
    let Some(open) = open else {
        return Deframed::NoFlag;
    };
    let body_start = open + FLAG.len();
    let mut i = body_start;
    while i < stream.len() {
        if flag_at(stream, i) {
            let body: Option<Vec<Bit>> = stream[body_start..i]
                .iter()
                .map(|s| match s {
                    Sym::Zero => Some(false),
                    Sym::One => Some(true),
                    Sym::Erased => None,
                })
                .collect();
            return match body {
                Some(body) => Deframed::Packet { payload: destuff(&body), end: i + FLAG.len() },
                None => Deframed::Damaged { end: i + FLAG.len() },
            };
        }
        i += 1;
    }
    Deframed::Damaged { end: stream.len() }
}
