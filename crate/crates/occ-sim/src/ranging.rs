//! Stereo geometry: extrinsic composition between two cameras, block-matching
//! disparity, depth and triangulation, inter-vehicle distance from projected
//! LED separation, and re-projection error against observed pixels.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::scene::{CameraModel, Frame};

#[derive(Debug, Error, PartialEq)]
pub enum RangingError {
    #[error("rotation is not orthonormal with determinant +1")]
    NotARotation,
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("window {window} does not fit a {width}x{height} frame")]
    WindowTooLarge { window: usize, width: usize, height: usize },
    #[error("window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("disparity {0} gives no finite depth")]
    NonPositiveDisparity(f64),
    #[error("pixel separation {0} must be positive")]
    NonPositivePixelCount(f64),
    #[error("no point pairs given")]
    EmptyPoints,
    #[error("expected {expected} observations, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("world point projects from behind the camera (z = {0})")]
    BehindCamera(f64),
}

/// Rigid transform taking points in one camera's coordinates into another's.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ROTATION_TOL: f64 = 1e-9;

fn is_rotation(r: &Matrix3<f64>) -> bool {
    let gram = r.transpose() * r;
    let mut err: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            err = err.max((gram[(i, j)] - want).abs());
        }
    }
    err < ROTATION_TOL && (r.determinant() - 1.0).abs() < ROTATION_TOL
}

impl StereoExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, RangingError> {
        if !is_rotation(&rotation) {
            return Err(RangingError::NotARotation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

/// Relative pose between two cameras whose poses are given against a common
/// world frame as p_ci = R_i p_w + T_i. The result maps camera-2 coordinates
/// into camera-1: R = R1 R2', T = -R1 R2' T2 + T1.
pub fn compose_extrinsics(
    r1: &Matrix3<f64>,
    t1: &Vector3<f64>,
    r2: &Matrix3<f64>,
    t2: &Vector3<f64>,
) -> Result<StereoExtrinsics, RangingError> {
    if !is_rotation(r1) || !is_rotation(r2) {
        return Err(RangingError::NotARotation);
    }
    let rotation = r1 * r2.transpose();
    let translation = -rotation * t2 + t1;
    StereoExtrinsics::new(rotation, translation)
}

/// Dense horizontal disparity with validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    /// Row-major disparities in pixels; meaningful only where `valid`.
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub width: usize,
    pub height: usize,
    pub window: usize,
    pub max_disparity: usize,
}

impl DisparityMap {
    pub fn at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid[y * self.width + x].then(|| self.values[y * self.width + x])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Fraction of the left window's summed intensity a competing disparity must
/// trail the winner by, or the pixel is marked invalid.
pub const SAD_MARGIN: f64 = 0.05;

fn sad(left: &Frame, right: &Frame, x: usize, y: usize, d: usize, half: usize) -> f64 {
    let mut acc = 0.0;
    for j in y - half..=y + half {
        for i in x - half..=x + half {
            acc += (left.at(i, j) - right.at(i - d, j)).abs();
        }
    }
    acc
}

/// Block-matching disparity of a rectified pair.
///
/// Every candidate shift keeps the window inside both frames; the smallest
/// SAD wins with ties broken toward the smaller disparity, a losing score
/// within [`SAD_MARGIN`] of the window energy invalidates the pixel, and the
/// winner is refined by fitting a parabola through its two neighbors.
pub fn sad_disparity(
    left: &Frame,
    right: &Frame,
    window: usize,
    max_disparity: usize,
) -> Result<DisparityMap, RangingError> {
    if left.width != right.width || left.height != right.height {
        return Err(RangingError::SizeMismatch(
            left.width,
            left.height,
            right.width,
            right.height,
        ));
    }
    if window % 2 == 0 {
        return Err(RangingError::EvenWindow(window));
    }
    if window > left.width || window > left.height {
        return Err(RangingError::WindowTooLarge {
            window,
            width: left.width,
            height: left.height,
        });
    }
    let half = window / 2;
    let width = left.width;

    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..left.height)
        .into_par_iter()
        .map(|y| {
            let mut values = vec![0.0; width];
            let mut valid = vec![false; width];
            if y < half || y + half >= left.height {
                return (values, valid);
            }
            for x in half..width - half {
                let reach = (x - half).min(max_disparity);
                let scores: Vec<f64> =
                    (0..=reach).map(|d| sad(left, right, x, y, d, half)).collect();
                if scores.len() < 2 {
                    continue;
                }
                let mut best = 0;
                for (d, &s) in scores.iter().enumerate().skip(1) {
                    if s < scores[best] {
                        best = d;
                    }
                }
                let energy: f64 = (y - half..=y + half)
                    .flat_map(|j| (x - half..=x + half).map(move |i| left.at(i, j)))
                    .sum();
                let rival_beyond = scores
                    .iter()
                    .enumerate()
                    .filter(|&(d, _)| d.abs_diff(best) > 1)
                    .map(|(_, &s)| s)
                    .fold(f64::INFINITY, f64::min);
                let rival = if rival_beyond.is_finite() {
                    rival_beyond
                } else {
                    // Search range too narrow to spare the winner's
                    // neighbors; hold them to the margin instead.
                    scores
                        .iter()
                        .enumerate()
                        .filter(|&(d, _)| d != best)
                        .map(|(_, &s)| s)
                        .fold(f64::INFINITY, f64::min)
                };
                if rival - scores[best] < SAD_MARGIN * energy {
                    continue;
                }
                let refined = if best > 0 && best < scores.len() - 1 && scores[best] > 0.0 {
                    let (prev, here, next) = (scores[best - 1], scores[best], scores[best + 1]);
                    let denom = prev - 2.0 * here + next;
                    if denom > 0.0 {
                        best as f64 + (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
                    } else {
                        best as f64
                    }
                } else {
                    best as f64
                };
                values[x] = refined.clamp(0.0, max_disparity as f64);
                valid[x] = true;
            }
            (values, valid)
        })
        .collect();

    let mut values = Vec::with_capacity(width * left.height);
    let mut valid = Vec::with_capacity(width * left.height);
    for (v, m) in rows {
        values.extend(v);
        valid.extend(m);
    }
    Ok(DisparityMap { values, valid, width, height: left.height, window, max_disparity })
}

/// z = f b / d for a rectified pair, f in pixels and b in meters.
pub fn depth(d: f64, focal_px: f64, baseline: f64) -> Result<f64, RangingError> {
    if d <= 0.0 {
        return Err(RangingError::NonPositiveDisparity(d));
    }
    Ok(focal_px * baseline / d)
}

/// Recovers the 3-D point seen at x_l in the left image and x_r in the right,
/// both in pixels relative to the principal point. Returned coordinates are
/// meters in the left camera frame.
pub fn triangulate(
    x_l: f64,
    x_r: f64,
    y_l: f64,
    focal_px: f64,
    baseline: f64,
) -> Result<[f64; 3], RangingError> {
    let z = depth(x_l - x_r, focal_px, baseline)?;
    Ok([x_l * z / focal_px, y_l * z / focal_px, z])
}

/// Distance to a vehicle whose LED units sit `separation` meters apart and
/// appear `pixel_gap` pixels apart: D = (f/a) * (separation/pixel_gap).
pub fn inter_vehicle_distance(
    focal_length: f64,
    pixel_size: f64,
    separation: f64,
    pixel_gap: f64,
) -> Result<f64, RangingError> {
    if pixel_gap <= 0.0 {
        return Err(RangingError::NonPositivePixelCount(pixel_gap));
    }
    Ok(focal_length / pixel_size * separation / pixel_gap)
}

/// Mean Euclidean distance in pixels between observed image points and the
/// projections of the matching world points through `extrinsics` and `camera`.
pub fn reprojection_error(
    extrinsics: &StereoExtrinsics,
    camera: &CameraModel,
    world_points: &[[f64; 3]],
    observed: &[(f64, f64)],
) -> Result<f64, RangingError> {
    if world_points.is_empty() {
        return Err(RangingError::EmptyPoints);
    }
    if world_points.len() != observed.len() {
        return Err(RangingError::PointCount {
            expected: world_points.len(),
            got: observed.len(),
        });
    }
    let f = camera.focal_px();
    let (cx, cy) = camera.principal_point();
    let mut total = 0.0;
    for (w, o) in world_points.iter().zip(observed) {
        let p = extrinsics.apply(&Vector3::new(w[0], w[1], w[2]));
        if p.z <= 0.0 {
            return Err(RangingError::BehindCamera(p.z));
        }
        let u = cx + f * p.x / p.z;
        let v = cy + f * p.y / p.z;
        total += (u - o.0).hypot(v - o.1);
    }
    Ok(total / world_points.len() as f64)
}

/// Disparity map as a plain-text PGM, full scale at `max_disparity`; invalid
/// pixels render black.
pub fn disparity_to_pgm(map: &DisparityMap) -> String {
    let mut out = format!("P2\n# window={} max_disparity={}\n{} {}\n255\n",
        map.window, map.max_disparity, map.width, map.height);
    for y in 0..map.height {
        let row: Vec<String> = (0..map.width)
            .map(|x| match map.at(x, y) {
                Some(d) => format!("{}", (d / map.max_disparity as f64 * 255.0).round() as u8),
                None => "0".to_string(),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Metadata sidecar accompanying [`disparity_to_pgm`].
pub fn disparity_sidecar(map: &DisparityMap) -> String {
    format!(
        "disparity v1\nsize {} {}\nwindow {}\nmax_disparity {}\nvalid {}\n",
        map.width,
        map.height,
        map.window,
        map.max_disparity,
        map.valid_count(),
    )
}
