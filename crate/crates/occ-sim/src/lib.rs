//! Deterministic end-to-end simulator of an LED-to-camera vehicular link.
//!
//! Bitstreams are modulated onto simulated LED arrays, rendered into camera
//! frames, corrupted by a fading/AWGN optical channel, then detected, ranged,
//! and decoded again, with link metrics gathered under an adaptive
//! spatial/temporal sampling policy.
//!
//! Module map:
//!
//! - [`channel`] — IM/DD propagation, SNR, fading SNR distribution, OOK BER.
//! - [`modem`] — the four LED codecs (Nyquist-rate OOK, undersampled
//!   frequency-shift OOK, rolling-shutter OOK, spatial 2-PSK) with packet
//!   framing.
//! - [`scene`] — pinhole projection and frame rendering: LED arrays,
//!   interference sources, global/rolling shutter, stereo pairs.
//! - [`detect`] — RoI extraction from differential images, DoG keypoints,
//!   ICP registration, stabilization transforms, masked template classifier.
//! - [`ranging`] — stereo extrinsics, SAD disparity, depth/triangulation,
//!   inter-vehicle distance, re-projection error.
//! - [`controller`] — situation classification, sampling intervals, robust
//!   transform estimation, temporal decoding of the vehicle of interest.
//! - [`harness`] — scenario configs, BER/throughput/packet-trace sweeps,
//!   CSV reporting.

pub mod channel;
pub mod controller;
pub mod detect;
pub mod harness;
pub mod modem;
pub mod ranging;
pub mod scene;
