//! Adaptive sampling policy and the fast-path decoder it steers.
//!
//! A slow vision pass hands in the regions it detected and the distances it
//! ranged. Classification picks the situation, the situation picks the
//! sampling interval, and when a vehicle is close enough to matter its
//! region becomes the vehicle of interest: a high-rate camera tracks it,
//! stabilizes it against frame-to-frame motion, and decodes its LED states.

use crate::detect::{binarize, connected_components, Affine2D, Rect, Region, Roi};
use crate::modem::{
    decode_nyquist_ook, decode_s2psk, decode_ufsook, DemodResult, Scheme, DEFAULT_THRESHOLDS,
};
use crate::scene::Frame;
use nalgebra::{Matrix3, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use thiserror::Error;

/// Distance below which a vehicle forces the fast path, in meters.
pub const TEMPORAL_THRESHOLD: f64 = 20.0;

/// Default number of minimal random samples tried by [`estimate_homography`].
pub const RANSAC_ROUNDS: usize = 500;

/// Re-fit iterations allowed before the inlier set is declared stable.
pub const REFIT_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("transform estimation needs at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("no sampled transform kept 4 inliers within {0} rounds")]
    NoConsensus(usize),
    #[error("scheme {} keys on pixel rows, not frames, and has no fast-path decoder", .0.name())]
    UnsupportedScheme(Scheme),
}

/// Driving situation as seen by the slow pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Normal,
    Spatial,
    Temporal,
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::Normal => "normal",
            Case::Spatial => "spatial",
            Case::Temporal => "temporal",
        }
    }
}

/// Outcome of one classification. `voi` indexes the region slice given to
/// [`classify`] and is present exactly when the case is temporal.
#[derive(Debug, Clone, PartialEq)]
pub struct SituationCase {
    pub case: Case,
    pub voi: Option<usize>,
    pub nearest_distance: f64,
}

/// Picks the control case from the ranged regions ahead.
///
/// A vehicle nearer than `temporal_threshold` wins the fast path and its
/// region becomes the vehicle of interest, ties going to the leftmost
/// centroid. With nothing that close, several vehicles make the spatial
/// case and anything else is normal cruising. `nearest_distance` is
/// infinite when no regions were given.
pub fn classify(
    rois: &[Roi],
    distances: &[f64],
    vehicle_count: usize,
    temporal_threshold: f64,
) -> SituationCase {
    assert!(temporal_threshold > 0.0, "temporal threshold must be positive");
    assert_eq!(rois.len(), distances.len(), "one distance per region");
    let mut nearest: Option<usize> = None;
    for (i, &d) in distances.iter().enumerate() {
        let better = match nearest {
            None => true,
            Some(j) => {
                d < distances[j]
                    || (d == distances[j] && rois[i].centroid.0 < rois[j].centroid.0)
            }
        };
        if better {
            nearest = Some(i);
        }
    }
    match nearest {
        Some(i) if distances[i] < temporal_threshold => SituationCase {
            case: Case::Temporal,
            voi: Some(i),
            nearest_distance: distances[i],
        },
        _ => SituationCase {
            case: if vehicle_count > 1 { Case::Spatial } else { Case::Normal },
            voi: None,
            nearest_distance: nearest.map_or(f64::INFINITY, |i| distances[i]),
        },
    }
}

/// Sampling interval for a case given the normal interval `base`: spatial
/// processing gets half again as long, the temporal fast path a tenth.
pub fn sampling_interval(case: Case, base: f64) -> f64 {
    assert!(base > 0.0, "base interval must be positive");
    match case {
        Case::Normal => base,
        Case::Spatial => 1.5 * base,
        Case::Temporal => base / 10.0,
    }
}

/// Current frame-sampling interval, retuned case by case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPolicy {
    pub base_interval: f64,
    pub current_interval: f64,
}

impl SamplingPolicy {
    pub fn new(base_interval: f64) -> Self {
        assert!(base_interval > 0.0, "base interval must be positive");
        SamplingPolicy { base_interval, current_interval: base_interval }
    }

    /// Retunes for `case` and returns the new interval.
    pub fn apply(&mut self, case: Case) -> f64 {
        self.current_interval = sampling_interval(case, self.base_interval);
        self.current_interval
    }
}

/// One logged policy decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub time: f64,
    pub case: Case,
    pub voi: Option<usize>,
    pub distance: f64,
    pub interval: f64,
}

/// Single owner of the sampling policy. Each observation from the slow
/// pass is classified, the interval retuned, and the decision logged; the
/// fast path only ever receives frozen [`Roi`] snapshots, never live state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub policy: SamplingPolicy,
    pub temporal_threshold: f64,
    log: Vec<PolicyRecord>,
}

impl Controller {
    pub fn new(base_interval: f64) -> Self {
        Controller::with_threshold(base_interval, TEMPORAL_THRESHOLD)
    }

    pub fn with_threshold(base_interval: f64, temporal_threshold: f64) -> Self {
        Controller {
            policy: SamplingPolicy::new(base_interval),
            temporal_threshold,
            log: Vec::new(),
        }
    }

    /// Classifies one slow-pass observation, retunes the interval, and logs
    /// the decision.
    pub fn observe(
        &mut self,
        time: f64,
        rois: &[Roi],
        distances: &[f64],
        vehicle_count: usize,
    ) -> SituationCase {
        let situation = classify(rois, distances, vehicle_count, self.temporal_threshold);
        let interval = self.policy.apply(situation.case);
        self.log.push(PolicyRecord {
            time,
            case: situation.case,
            voi: situation.voi,
            distance: situation.nearest_distance,
            interval,
        });
        situation
    }

    pub fn log(&self) -> &[PolicyRecord] {
        &self.log
    }

    pub fn policy_csv(&self) -> String {
        policy_csv(&self.log)
    }
}

/// Renders policy decisions as CSV. The `voi` column is empty outside the
/// temporal case.
pub fn policy_csv(records: &[PolicyRecord]) -> String {
    let mut out = String::from("# policy v1\ntime,case,voi,distance,interval\n");
    for r in records {
        let voi = r.voi.map_or(String::new(), |i| i.to_string());
        let _ = writeln!(out, "{},{},{},{},{}", r.time, r.case.name(), voi, r.distance, r.interval);
    }
    out
}

/// Inlier gate `sqrt(5.99)*sigma`: the 95% quantile radius of a circular
/// Gaussian residual with per-axis deviation `sigma`.
pub fn inlier_threshold(sigma: f64) -> f64 {
    5.99_f64.sqrt() * sigma
}

fn fit_affine(pairs: &[((f64, f64), (f64, f64))], idx: &[usize]) -> Option<Affine2D> {
    let mut normal = Matrix3::zeros();
    let mut rhs_x = Vector3::zeros();
    let mut rhs_y = Vector3::zeros();
    for &i in idx {
        let ((x, y), (u, v)) = pairs[i];
        let row = Vector3::new(x, y, 1.0);
        normal += row * row.transpose();
        rhs_x += row * u;
        rhs_y += row * v;
    }
    let lu = normal.lu();
    let rx = lu.solve(&rhs_x)?;
    let ry = lu.solve(&rhs_y)?;
    Some(Affine2D { linear: [[rx[0], rx[1]], [ry[0], ry[1]]], translation: (rx[2], ry[2]) })
}

fn inlier_set(pairs: &[((f64, f64), (f64, f64))], h: &Affine2D, threshold: f64) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|&(_, &(p, (u, v)))| {
            let (px, py) = h.apply(p);
            (px - u).hypot(py - v) < threshold
        })
        .map(|(i, _)| i)
        .collect()
}

/// Robust affine registration between two point sets.
///
/// Repeatedly fits a transform to four random correspondences and keeps the
/// one with the most inliers, an inlier being a pair whose residual stays
/// inside [`inlier_threshold`]. The winner is then re-fit on its full
/// inlier set until two consecutive re-fits agree on the set, capped at
/// [`REFIT_CAP`] rounds. Returns the transform and the indices of its
/// inliers, every one of which satisfies the gate.
pub fn estimate_homography<R: Rng + ?Sized>(
    pairs: &[((f64, f64), (f64, f64))],
    sigma: f64,
    max_rounds: usize,
    rng: &mut R,
) -> Result<(Affine2D, Vec<usize>), ControllerError> {
    assert!(sigma > 0.0, "sigma must be positive");
    if pairs.len() < 4 {
        return Err(ControllerError::TooFewCorrespondences(pairs.len()));
    }
    let threshold = inlier_threshold(sigma);
    let mut best: Option<(Affine2D, Vec<usize>)> = None;
    for _ in 0..max_rounds {
        let sample = index::sample(rng, pairs.len(), 4).into_vec();
        let Some(h) = fit_affine(pairs, &sample) else { continue };
        let inliers = inlier_set(pairs, &h, threshold);
        if inliers.len() < 4 {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            best = Some((h, inliers));
        }
    }
    let (mut h, mut inliers) = best.ok_or(ControllerError::NoConsensus(max_rounds))?;
    for _ in 0..REFIT_CAP {
        let Some(refit) = fit_affine(pairs, &inliers) else { break };
        let next = inlier_set(pairs, &refit, threshold);
        if next.len() < 4 {
            break;
        }
        h = refit;
        let stable = next == inliers;
        inliers = next;
        if stable {
            break;
        }
    }
    Ok((h, inliers))
}

/// Fast-path decoder settings. `blob_threshold` is the fraction of a
/// frame's peak that counts as lit when tracking features; `match_gate`
/// the pixel radius within which consecutive-frame blobs pair up, sized
/// under the feature spacing and over the expected frame-to-frame motion.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalDecoderConfig {
    pub scheme: Scheme,
    pub camera_fps: f64,
    pub blob_threshold: f64,
    pub match_gate: f64,
    pub sigma: f64,
    pub max_rounds: usize,
    pub seed: u64,
}

impl TemporalDecoderConfig {
    pub fn new(scheme: Scheme, camera_fps: f64) -> Self {
        TemporalDecoderConfig {
            scheme,
            camera_fps,
            blob_threshold: 0.5,
            match_gate: 8.0,
            sigma: 1.0,
            max_rounds: RANSAC_ROUNDS,
            seed: 0,
        }
    }
}

/// Fast-path outcome: the demodulated packet, the stabilized per-frame
/// region means it was decoded from, and the indices of frames registered
/// by carrying the previous transform because too few feature pairs
/// survived.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalDecode {
    pub demod: DemodResult,
    pub samples: Vec<f64>,
    pub gaps: Vec<usize>,
}

/// Decodes the vehicle of interest from a high-rate frame sequence.
///
/// Consecutive frames are registered on bright-blob centroids via
/// [`estimate_homography`]; the composed transform carries `voi` from the
/// first frame into each later one, and the mean intensity of the carried
/// region is the per-frame LED state handed to the scheme's decoder.
/// Pattern-keyed schemes read the whole region; the two-group phase scheme
/// reads the left and right halves separately, group A on the left. A
/// frame that cannot be registered reuses the last transform and is
/// recorded in `gaps`.
pub fn temporal_decode(
    frames: &[Frame],
    voi: &Roi,
    config: &TemporalDecoderConfig,
) -> Result<TemporalDecode, ControllerError> {
    if config.scheme == Scheme::RollingShutterOok {
        return Err(ControllerError::UnsupportedScheme(config.scheme));
    }
    if frames.is_empty() {
        return Ok(TemporalDecode {
            demod: DemodResult::no_sync(0, 0),
            samples: Vec::new(),
            gaps: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut to_current = Affine2D::identity();
    let mut anchors = blob_centroids(&frames[0], config.blob_threshold);
    let mut gaps = Vec::new();
    let mut levels = vec![roi_levels(&frames[0], &voi.bbox, &to_current)];
    for (k, frame) in frames.iter().enumerate().skip(1) {
        let blobs = blob_centroids(frame, config.blob_threshold);
        let pairs = pair_blobs(&anchors, &blobs, config.match_gate);
        match estimate_homography(&pairs, config.sigma, config.max_rounds, &mut rng) {
            Ok((step, _)) => to_current = Affine2D::compose(&step, &to_current),
            Err(_) => gaps.push(k),
        }
        levels.push(roi_levels(frame, &voi.bbox, &to_current));
        if !blobs.is_empty() {
            anchors = blobs;
        }
    }
    let samples: Vec<f64> = levels.iter().map(|l| l.whole.unwrap_or(0.0)).collect();
    let demod = match config.scheme {
        Scheme::NyquistOok => decode_nyquist_ook(&samples, DEFAULT_THRESHOLDS),
        Scheme::Ufsook => decode_ufsook(&samples, config.camera_fps),
        Scheme::S2Psk => {
            let a: Vec<Option<f64>> = levels.iter().map(|l| l.left).collect();
            let b: Vec<Option<f64>> = levels.iter().map(|l| l.right).collect();
            decode_s2psk(&a, &b)
        }
        Scheme::RollingShutterOok => unreachable!(),
    };
    Ok(TemporalDecode { demod, samples, gaps })
}

fn blob_centroids(frame: &Frame, rel_threshold: f64) -> Vec<(f64, f64)> {
    let peak = frame.pixels.iter().copied().fold(0.0_f64, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let mask = binarize(frame, rel_threshold * peak);
    connected_components(&mask).iter().map(Region::centroid).collect()
}

fn pair_blobs(
    prev: &[(f64, f64)],
    curr: &[(f64, f64)],
    gate: f64,
) -> Vec<((f64, f64), (f64, f64))> {
    let mut pairs = Vec::new();
    for &p in prev {
        let mut best: Option<((f64, f64), f64)> = None;
        for &c in curr {
            let d = (p.0 - c.0).hypot(p.1 - c.1);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        if let Some((c, d)) = best {
            if d <= gate {
                pairs.push((p, c));
            }
        }
    }
    pairs
}

struct RoiLevels {
    whole: Option<f64>,
    left: Option<f64>,
    right: Option<f64>,
}

fn roi_levels(frame: &Frame, bbox: &Rect, to_current: &Affine2D) -> RoiLevels {
    let (x0, y0) = (bbox.x0 as f64, bbox.y0 as f64);
    let (x1, y1) = (bbox.x1 as f64, bbox.y1 as f64);
    let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)].map(|p| to_current.apply(p));
    let lo_x = corners.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let hi_x = corners.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
    let lo_y = corners.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let hi_y = corners.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mid = (lo_x + hi_x) / 2.0;
    RoiLevels {
        whole: block_mean(frame, lo_x, hi_x, lo_y, hi_y),
        left: block_mean(frame, lo_x, mid, lo_y, hi_y),
        right: block_mean(frame, mid, hi_x, lo_y, hi_y),
    }
}

fn block_mean(frame: &Frame, x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Option<f64> {
    let x0 = x_lo.round().max(0.0);
    let y0 = y_lo.round().max(0.0);
    let x1 = x_hi.round().min(frame.width as f64 - 1.0);
    let y1 = y_hi.round().min(frame.height as f64 - 1.0);
    if x1 < x0 || y1 < y0 {
        return None;
    }
    let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
    let mut sum = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            sum += frame.at(x, y);
        }
    }
    Some(sum / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelParams, Fading};
    use crate::detect::Tag;
    use crate::modem::{
        encode_nyquist_ook, encode_s2psk, Group, Packet, S2PSK_BLINK_PER_FRAME,
    };
    use crate::scene::{
        render, render_sequence, CameraModel, LedArraySpec, Scene, SceneVehicle, Shutter,
    };
    use proptest::prelude::*;

    fn roi_at(cx: f64) -> Roi {
        let x = cx as usize;
        Roi {
            bbox: Rect { x0: x.saturating_sub(2), y0: 8, x1: x + 2, y1: 12 },
            centroid: (cx, 10.0),
            area: 25,
            circumcircle_fill: 1.0,
            tag: Tag::Near,
        }
    }

    #[test]
    fn spatial_when_nothing_is_close() {
        let rois = [roi_at(30.0), roi_at(90.0)];
        let got = classify(&rois, &[25.0, 40.0], 2, 20.0);
        assert_eq!(got.case, Case::Spatial);
        assert_eq!(got.voi, None);
        assert_eq!(got.nearest_distance, 25.0);
    }

    #[test]
    fn temporal_focuses_the_nearest_vehicle() {
        let rois = [roi_at(30.0), roi_at(90.0)];
        let got = classify(&rois, &[10.2, 40.0], 2, 20.0);
        assert_eq!(got.case, Case::Temporal);
        assert_eq!(got.voi, Some(0));
        assert_eq!(got.nearest_distance, 10.2);

        let got = classify(&rois, &[40.0, 10.2], 2, 20.0);
        assert_eq!(got.voi, Some(1));
    }

    #[test]
    fn empty_scene_is_normal() {
        let got = classify(&[], &[], 0, 20.0);
        assert_eq!(got.case, Case::Normal);
        assert_eq!(got.voi, None);
        assert!(got.nearest_distance.is_infinite());
    }

    #[test]
    fn single_far_vehicle_is_normal() {
        let got = classify(&[roi_at(50.0)], &[30.0], 1, 20.0);
        assert_eq!(got.case, Case::Normal);
        assert_eq!(got.voi, None);
    }

    #[test]
    fn distance_ties_break_leftmost() {
        let rois = [roi_at(50.0), roi_at(20.0), roi_at(80.0)];
        let got = classify(&rois, &[15.0, 15.0, 15.0], 3, 20.0);
        assert_eq!(got.voi, Some(1));
    }

    proptest! {
        // Power-of-two scales keep every product exact, so the invariance
        // holds bit for bit rather than merely within rounding.
        #[test]
        fn classification_is_scale_consistent(
            regions in proptest::collection::vec((0.1_f64..100.0, 0.0_f64..160.0), 0..6),
            threshold in 0.1_f64..50.0,
            exp in -10_i32..=10,
        ) {
            let scale = 2.0_f64.powi(exp);
            let rois: Vec<Roi> = regions.iter().map(|&(_, cx)| roi_at(cx)).collect();
            let distances: Vec<f64> = regions.iter().map(|&(d, _)| d).collect();
            let scaled: Vec<f64> = distances.iter().map(|d| d * scale).collect();
            let a = classify(&rois, &distances, rois.len(), threshold);
            let b = classify(&rois, &scaled, rois.len(), threshold * scale);
            prop_assert_eq!(a.case, b.case);
            prop_assert_eq!(a.voi, b.voi);
        }
    }

    #[test]
    fn intervals_follow_the_case() {
        assert_eq!(sampling_interval(Case::Normal, 0.010), 0.010);
        assert_eq!(sampling_interval(Case::Spatial, 0.010), 0.015);
        assert_eq!(sampling_interval(Case::Temporal, 0.010), 0.001);
    }

    #[test]
    fn policy_stays_in_the_menu() {
        let mut policy = SamplingPolicy::new(0.02);
        for case in [Case::Temporal, Case::Normal, Case::Spatial, Case::Temporal] {
            let dt = policy.apply(case);
            assert!(
                dt == 0.02 || dt == 0.03 || dt == 0.002,
                "interval {dt} left the menu"
            );
            assert_eq!(dt, policy.current_interval);
        }
    }

    #[test]
    fn controller_logs_every_decision() {
        let mut ctl = Controller::new(0.01);
        ctl.observe(0.0, &[], &[], 0);
        ctl.observe(1.0, &[roi_at(30.0)], &[10.2], 1);
        let csv = ctl.policy_csv();
        assert_eq!(
            csv,
            "# policy v1\ntime,case,voi,distance,interval\n\
             0,normal,,inf,0.01\n\
             1,temporal,0,10.2,0.001\n"
        );
        assert_eq!(ctl.log().len(), 2);
    }

    #[test]
    fn gate_is_the_root_of_5_99_sigma() {
        assert!((inlier_threshold(1.0) - 2.4474).abs() < 1e-3);
        assert_eq!(inlier_threshold(2.0), 2.0 * inlier_threshold(1.0));
    }

    fn planted() -> Affine2D {
        Affine2D { linear: [[1.01, 0.02], [-0.015, 0.99]], translation: (3.0, -2.0) }
    }

    fn field_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
        use rand::RngExt;
        (0..n).map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect()
    }

    #[test]
    fn exact_affine_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = planted();
        let pairs: Vec<_> = field_points(12, &mut rng)
            .into_iter()
            .map(|p| (p, h.apply(p)))
            .collect();
        let (got, inliers) = estimate_homography(&pairs, 1.0, 100, &mut rng).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((got.linear[i][j] - h.linear[i][j]).abs() < 1e-9);
            }
        }
        assert!((got.translation.0 - h.translation.0).abs() < 1e-9);
        assert!((got.translation.1 - h.translation.1).abs() < 1e-9);
        assert_eq!(inliers, (0..pairs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_correspondences_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pairs = vec![((0.0, 0.0), (1.0, 1.0)); 3];
        assert_eq!(
            estimate_homography(&pairs, 1.0, 10, &mut rng),
            Err(ControllerError::TooFewCorrespondences(3))
        );
    }

    /// Correspondences with noisy inliers and planted outliers: the first
    /// `n_in` pairs follow the planted transform plus N(0, sigma) per axis,
    /// the rest point somewhere far away.
    fn contaminated(
        n_in: usize,
        n_out: usize,
        sigma: f64,
        rng: &mut ChaCha8Rng,
    ) -> Vec<((f64, f64), (f64, f64))> {
        use rand::RngExt;
        use rand_distr::{Distribution, Normal};
        let h = planted();
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut pairs = Vec::new();
        for p in field_points(n_in, rng) {
            let (u, v) = h.apply(p);
            pairs.push((p, (u + noise.sample(rng), v + noise.sample(rng))));
        }
        for p in field_points(n_out, rng) {
            let (u, v) = h.apply(p);
            let target = loop {
                let t = (rng.random_range(0.0..120.0), rng.random_range(0.0..120.0));
                if (t.0 - u).hypot(t.1 - v) > 4.0 * inlier_threshold(sigma) {
                    break t;
                }
            };
            pairs.push((p, target));
        }
        pairs
    }

    #[test]
    fn returned_inliers_respect_the_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs = contaminated(42, 18, 1.0, &mut rng);
        let (h, inliers) = estimate_homography(&pairs, 1.0, 500, &mut rng).unwrap();
        assert!(inliers.len() >= 30, "only {} inliers", inliers.len());
        for &i in &inliers {
            let (p, (u, v)) = pairs[i];
            let (px, py) = h.apply(p);
            assert!((px - u).hypot(py - v) < inlier_threshold(1.0));
        }
    }

    /// Least-squares fit on the listed pairs plus the standard error of
    /// each of the six parameters, from the residual variance and the
    /// inverse normal matrix.
    fn lsq_with_errors(
        pairs: &[((f64, f64), (f64, f64))],
        idx: &[usize],
    ) -> (Affine2D, [f64; 6]) {
        let h = fit_affine(pairs, idx).unwrap();
        let mut normal = Matrix3::zeros();
        let (mut rss_x, mut rss_y) = (0.0, 0.0);
        for &i in idx {
            let (p, (u, v)) = pairs[i];
            let row = Vector3::new(p.0, p.1, 1.0);
            normal += row * row.transpose();
            let (px, py) = h.apply(p);
            rss_x += (px - u).powi(2);
            rss_y += (py - v).powi(2);
        }
        let cov = normal.try_inverse().unwrap();
        let dof = (idx.len() - 3) as f64;
        let (var_x, var_y) = (rss_x / dof, rss_y / dof);
        let se = [
            (var_x * cov[(0, 0)]).sqrt(),
            (var_x * cov[(1, 1)]).sqrt(),
            (var_x * cov[(2, 2)]).sqrt(),
            (var_y * cov[(0, 0)]).sqrt(),
            (var_y * cov[(1, 1)]).sqrt(),
            (var_y * cov[(2, 2)]).sqrt(),
        ];
        (h, se)
    }

    fn params(h: &Affine2D) -> [f64; 6] {
        [
            h.linear[0][0],
            h.linear[0][1],
            h.translation.0,
            h.linear[1][0],
            h.linear[1][1],
            h.translation.1,
        ]
    }

    #[test]
    fn outliers_do_not_drag_the_fit_off_the_clean_answer() {
        let mut good = 0;
        let trials = 20;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let pairs = contaminated(42, 18, 1.0, &mut rng);
            let true_inliers: Vec<usize> = (0..42).collect();
            let (clean, se) = lsq_with_errors(&pairs, &true_inliers);
            let (got, _) = estimate_homography(&pairs, 1.0, 500, &mut rng).unwrap();
            let ok = params(&got)
                .iter()
                .zip(params(&clean).iter().zip(se.iter()))
                .all(|(g, (c, e))| (g - c).abs() < 3.0 * e);
            good += ok as usize;
        }
        assert!(good * 100 >= trials as usize * 95, "{good}/{trials} trials inside 3 SE");
    }

    fn quiet_channel() -> ChannelParams {
        ChannelParams {
            transmit_power_avg: 1.0,
            responsivity: 1.0,
            noise_std: 0.0,
            fading: Fading::Fixed(1.0),
        }
    }

    fn fast_cam() -> CameraModel {
        CameraModel {
            focal_length: 8e-3,
            pixel_size: 1e-5,
            resolution: (160, 64),
            fps: 600.0,
            shutter: Shutter::Global,
            exposure: 1e-4,
        }
    }

    fn array_roi() -> Roi {
        Roi {
            bbox: Rect { x0: 18, y0: 10, x1: 141, y1: 53 },
            centroid: (79.5, 31.5),
            area: 1,
            circumcircle_fill: 1.0,
            tag: Tag::Near,
        }
    }

    #[test]
    fn empty_sequence_reports_no_sync() {
        let cfg = TemporalDecoderConfig::new(Scheme::NyquistOok, 600.0);
        let got = temporal_decode(&[], &array_roi(), &cfg).unwrap();
        assert!(!got.demod.sync_found);
        assert!(got.samples.is_empty());
    }

    #[test]
    fn row_keyed_scheme_is_refused() {
        let cfg = TemporalDecoderConfig::new(Scheme::RollingShutterOok, 600.0);
        assert_eq!(
            temporal_decode(&[], &array_roi(), &cfg),
            Err(ControllerError::UnsupportedScheme(Scheme::RollingShutterOok))
        );
    }

    fn pattern_scene(payload: &[bool]) -> Scene {
        let packet = Packet::new(payload.to_vec());
        let waveform = encode_nyquist_ook(&packet, 600.0).unwrap();
        let array = LedArraySpec::uniform((3, 3), [0.0, 0.0, 10.0], 0.2, 1.0);
        Scene {
            vehicles: vec![SceneVehicle {
                array,
                waveform,
                waveform_start: 0.0,
                pilot_corners: true,
            }],
            noise_sources: vec![],
        }
    }

    #[test]
    fn static_fast_sequence_round_trips() {
        let payload = vec![true, false, true, true, false, false, true, false];
        let scene = pattern_scene(&payload);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frames =
            render_sequence(&scene, &fast_cam(), 0.0, 100, &quiet_channel(), "fast", &mut rng)
                .unwrap();
        let cfg = TemporalDecoderConfig::new(Scheme::NyquistOok, 600.0);
        let got = temporal_decode(&frames, &array_roi(), &cfg).unwrap();
        assert!(got.demod.sync_found);
        assert_eq!(got.demod.bits, payload);
        assert!(got.gaps.is_empty(), "tracking gaps at {:?}", got.gaps);
    }

    #[test]
    fn jittered_fast_sequence_round_trips() {
        let payload = vec![true, false, true, true, false, false, true, false];
        let scene = pattern_scene(&payload);
        let cam = fast_cam();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Smooth +-3 px sway, converted to meters at the array's depth.
        let px_to_m = 10.0 / 800.0;
        let mut frames = Vec::new();
        for k in 0..100 {
            let dx = (3.0 * (k as f64 * 0.35).sin()).round();
            let dy = (3.0 * (k as f64 * 0.23).cos()).round();
            let mut swayed = scene.clone();
            swayed.vehicles[0].array.world_position[0] += dx * px_to_m;
            swayed.vehicles[0].array.world_position[1] += dy * px_to_m;
            frames.push(
                render(&swayed, &cam, k as f64 / 600.0, &quiet_channel(), "fast", &mut rng)
                    .unwrap(),
            );
        }
        let cfg = TemporalDecoderConfig::new(Scheme::NyquistOok, 600.0);
        let got = temporal_decode(&frames, &array_roi(), &cfg).unwrap();
        assert!(got.demod.sync_found);
        assert_eq!(got.demod.bits, payload);
        assert!(got.gaps.is_empty(), "tracking gaps at {:?}", got.gaps);
    }

    #[test]
    fn split_groups_round_trip() {
        let payload = vec![true, false, false, true, true, false, true, false];
        let packet = Packet::new(payload.clone());
        let waveform = encode_s2psk(&packet, S2PSK_BLINK_PER_FRAME * 600.0).unwrap();
        let mut array = LedArraySpec::uniform((1, 2), [0.0, 0.0, 10.0], 0.2, 1.0);
        array.group_labels = vec![Group::A, Group::B];
        let scene = Scene {
            vehicles: vec![SceneVehicle {
                array,
                waveform,
                waveform_start: 0.0,
                pilot_corners: false,
            }],
            noise_sources: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = waveform_len_frames(&scene) + 4;
        let frames =
            render_sequence(&scene, &fast_cam(), 0.0, n, &quiet_channel(), "fast", &mut rng)
                .unwrap();
        let voi = Roi {
            bbox: Rect { x0: 24, y0: 24, x1: 55, y1: 39 },
            centroid: (39.5, 31.5),
            area: 1,
            circumcircle_fill: 1.0,
            tag: Tag::Near,
        };
        let cfg = TemporalDecoderConfig::new(Scheme::S2Psk, 600.0);
        let got = temporal_decode(&frames, &voi, &cfg).unwrap();
        assert!(got.demod.sync_found);
        assert_eq!(got.demod.bits, payload);
    }

    fn waveform_len_frames(scene: &Scene) -> usize {
        let w = &scene.vehicles[0].waveform;
        (w.duration() * 600.0).round() as usize
    }
}
