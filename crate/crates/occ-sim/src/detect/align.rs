//! Scale-rotation-translation transforms, ICP point registration, and
//! cumulative stabilization chains.

use super::DetectError;

pub const ICP_MAX_ITERS: usize = 50;
pub const ICP_TOLERANCE: f64 = 1e-9;

/// Similarity transform p -> s * R(angle) * p + translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2D {
    pub scale: f64,
    pub angle: f64,
    pub translation: (f64, f64),
}

impl Transform2D {
    pub fn identity() -> Self {
        Self { scale: 1.0, angle: 0.0, translation: (0.0, 0.0) }
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (sin, cos) = self.angle.sin_cos();
        (
            self.scale * (cos * p.0 - sin * p.1) + self.translation.0,
            self.scale * (sin * p.0 + cos * p.1) + self.translation.1,
        )
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(a: &Self, b: &Self) -> Self {
        Self {
            scale: a.scale * b.scale,
            angle: a.angle + b.angle,
            translation: a.apply(b.translation),
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = Self {
            scale: 1.0 / self.scale,
            angle: -self.angle,
            translation: (0.0, 0.0),
        };
        let t = inv.apply(self.translation);
        Self { translation: (-t.0, -t.1), ..inv }
    }

    pub fn to_affine(&self) -> Affine2D {
        let (sin, cos) = self.angle.sin_cos();
        Affine2D {
            linear: [
                [self.scale * cos, -self.scale * sin],
                [self.scale * sin, self.scale * cos],
            ],
            translation: self.translation,
        }
    }
}

/// General 6-parameter planar transform p -> linear * p + translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2D {
    pub linear: [[f64; 2]; 2],
    pub translation: (f64, f64),
}

impl Affine2D {
    pub fn identity() -> Self {
        Affine2D { linear: [[1.0, 0.0], [0.0, 1.0]], translation: (0.0, 0.0) }
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.linear[0][0] * p.0 + self.linear[0][1] * p.1 + self.translation.0,
            self.linear[1][0] * p.0 + self.linear[1][1] * p.1 + self.translation.1,
        )
    }

    /// `compose(a, b)` applies `b` first, then `a`.
    pub fn compose(a: &Self, b: &Self) -> Self {
        let mut linear = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                linear[i][j] = a.linear[i][0] * b.linear[0][j] + a.linear[i][1] * b.linear[1][j];
            }
        }
        Affine2D { linear, translation: a.apply(b.translation) }
    }
}

/// Projects the linear part onto the closest (Frobenius) scaled proper
/// rotation; the translation carries over unchanged.
pub fn fit_srt(affine: &Affine2D) -> Result<Transform2D, DetectError> {
    let m = &affine.linear;
    let a = m[0][0] + m[1][1];
    let b = m[1][0] - m[0][1];
    let norm = a.hypot(b);
    if norm < 1e-12 {
        return Err(DetectError::DegenerateLinear);
    }
    Ok(Transform2D {
        scale: norm / 2.0,
        angle: b.atan2(a),
        translation: affine.translation,
    })
}

/// Running composition of per-frame transforms: element i is
/// `per_frame[i] . per_frame[i-1] . ... . per_frame[0]`.
pub fn cumulative_transform(per_frame: &[Transform2D]) -> Vec<Transform2D> {
    let mut out: Vec<Transform2D> = Vec::with_capacity(per_frame.len());
    for h in per_frame {
        let next = match out.last() {
            None => *h,
            Some(prev) => Transform2D::compose(h, prev),
        };
        out.push(next);
    }
    out
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Weighted least-squares similarity mapping paired data onto model points.
fn fit_similarity(
    data: &[(f64, f64)],
    model: &[(f64, f64)],
    weights: &[f64],
) -> Result<Transform2D, DetectError> {
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(DetectError::DegenerateFit("all weights vanish"));
    }
    let mean = |pts: &[(f64, f64)]| {
        let (mut sx, mut sy) = (0.0, 0.0);
        for (p, w) in pts.iter().zip(weights) {
            sx += w * p.0;
            sy += w * p.1;
        }
        (sx / wsum, sy / wsum)
    };
    let (mdx, mdy) = mean(data);
    let (mmx, mmy) = mean(model);
    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut spread = 0.0;
    for ((d, m), w) in data.iter().zip(model).zip(weights) {
        let (dx, dy) = (d.0 - mdx, d.1 - mdy);
        let (mx, my) = (m.0 - mmx, m.1 - mmy);
        dot += w * (dx * mx + dy * my);
        cross += w * (dx * my - dy * mx);
        spread += w * (dx * dx + dy * dy);
    }
    if spread <= 0.0 {
        return Err(DetectError::DegenerateFit("data points coincide"));
    }
    let gain = dot.hypot(cross);
    if gain < 1e-15 * spread {
        return Err(DetectError::DegenerateFit("model points coincide"));
    }
    let angle = cross.atan2(dot);
    let scale = gain / spread;
    let fit = Transform2D { scale, angle, translation: (0.0, 0.0) };
    let rotated = fit.apply((mdx, mdy));
    Ok(Transform2D {
        translation: (mmx - rotated.0, mmy - rotated.1),
        ..fit
    })
}

/// Iterated closest-point registration of `data` onto `model` with an
/// optional per-data-point weight vector (empty for uniform).
///
/// Alternates nearest-model association with a weighted similarity fit until
/// the weighted sum of squared errors changes by less than [`ICP_TOLERANCE`]
/// or [`ICP_MAX_ITERS`] passes. Returns the transform and that final sum.
pub fn icp_align(
    data: &[(f64, f64)],
    model: &[(f64, f64)],
    weights: &[f64],
) -> Result<(Transform2D, f64), DetectError> {
    const PARAM_DIM: usize = 4;
    if model.is_empty() {
        return Err(DetectError::EmptyModel);
    }
    if data.is_empty() {
        return Err(DetectError::EmptyData);
    }
    if !weights.is_empty() && weights.len() != data.len() {
        return Err(DetectError::WeightCount { expected: data.len(), got: weights.len() });
    }
    if model.len() <= PARAM_DIM {
        return Err(DetectError::ModelTooSmall { dim: PARAM_DIM, got: model.len() });
    }
    let uniform;
    let weights = if weights.is_empty() {
        uniform = vec![1.0; data.len()];
        &uniform
    } else {
        weights
    };

    let nearest = |p: (f64, f64)| -> (f64, f64) {
        *model
            .iter()
            .min_by(|a, b| dist2(p, **a).total_cmp(&dist2(p, **b)))
            .expect("model is non-empty")
    };

    let mut transform = Transform2D::identity();
    let mut residual = f64::INFINITY;
    for _ in 0..ICP_MAX_ITERS {
        let paired: Vec<(f64, f64)> = data.iter().map(|&d| nearest(transform.apply(d))).collect();
        let fit = fit_similarity(data, &paired, weights)?;
        let fresh: f64 = data
            .iter()
            .zip(&paired)
            .zip(weights)
            .map(|((d, m), w)| w * dist2(fit.apply(*d), *m))
            .sum();
        let converged = (residual - fresh).abs() < ICP_TOLERANCE;
        transform = fit;
        residual = fresh;
        if converged {
            break;
        }
    }
    Ok((transform, residual))
}
