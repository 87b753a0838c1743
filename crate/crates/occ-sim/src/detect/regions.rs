//! Differential-image RoI extraction: difference, threshold, dilate, label,
//! then keep the blobs that fill their circumcircle like an LED spot does.

use std::f64::consts::PI;

use super::{DetectError, Mask, Rect, Roi, Tag};
use crate::scene::Frame;

/// Per-pixel absolute difference of two equally sized frames.
///
/// Emitters that changed state between the captures survive; anything static
/// cancels. Timestamp and camera id are taken from the later frame.
pub fn differential_image(f1: &Frame, f2: &Frame) -> Result<Frame, DetectError> {
    if f1.width != f2.width || f1.height != f2.height {
        return Err(DetectError::SizeMismatch(f1.width, f1.height, f2.width, f2.height));
    }
    let pixels = f1
        .pixels
        .iter()
        .zip(&f2.pixels)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(Frame {
        pixels,
        width: f1.width,
        height: f1.height,
        timestamp: f2.timestamp,
        camera_id: f2.camera_id.clone(),
    })
}

/// Pixels at or above `threshold` become set.
pub fn binarize(frame: &Frame, threshold: f64) -> Mask {
    Mask {
        bits: frame.pixels.iter().map(|&p| p >= threshold).collect(),
        width: frame.width,
        height: frame.height,
    }
}

/// Morphological dilation by a disc structuring element of the given radius.
pub fn dilate(mask: &Mask, radius: f64) -> Mask {
    let radius = radius.max(0.0);
    let r = radius.floor() as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                offsets.push((dx, dy));
            }
        }
    }
    let mut out = Mask::new(mask.width, mask.height);
    for y in 0..mask.height {
        for x in 0..mask.width {
            if !mask.at(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < mask.width && (ny as usize) < mask.height {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

/// One 8-connected component of a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Member pixels as (x, y), in discovery order.
    pub pixels: Vec<(usize, usize)>,
}

impl Region {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let (sx, sy) = self
            .pixels
            .iter()
            .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
        (sx / n, sy / n)
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        };
        for &(x, y) in &self.pixels {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x);
            r.y1 = r.y1.max(y);
        }
        r
    }
}

/// 8-connected components of the set pixels, in raster order of first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Region> {
    let mut seen = vec![false; mask.bits.len()];
    let mut regions = Vec::new();
    for start_y in 0..mask.height {
        for start_x in 0..mask.width {
            let idx = start_y * mask.width + start_x;
            if !mask.bits[idx] || seen[idx] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut queue = vec![(start_x, start_y)];
            seen[idx] = true;
            while let Some((x, y)) = queue.pop() {
                pixels.push((x, y));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if nx >= mask.width || ny >= mask.height {
                            continue;
                        }
                        let nidx = ny * mask.width + nx;
                        if mask.bits[nidx] && !seen[nidx] {
                            seen[nidx] = true;
                            queue.push((nx, ny));
                        }
                    }
                }
            }
            regions.push(Region { pixels });
        }
    }
    regions
}

#[derive(Debug, Clone, Copy)]
struct Circle {
    cx: f64,
    cy: f64,
    r: f64,
}

impl Circle {
    fn contains(&self, p: (f64, f64)) -> bool {
        let d2 = (p.0 - self.cx).powi(2) + (p.1 - self.cy).powi(2);
        d2 <= self.r * self.r + 1e-9 * (1.0 + self.r * self.r)
    }
}

fn circle_two(a: (f64, f64), b: (f64, f64)) -> Circle {
    let cx = (a.0 + b.0) / 2.0;
    let cy = (a.1 + b.1) / 2.0;
    Circle { cx, cy, r: ((a.0 - cx).powi(2) + (a.1 - cy).powi(2)).sqrt() }
}

fn circle_three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<Circle> {
    let d = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
    if d.abs() < 1e-12 {
        return None;
    }
    let a2 = a.0 * a.0 + a.1 * a.1;
    let b2 = b.0 * b.0 + b.1 * b.1;
    let c2 = c.0 * c.0 + c.1 * c.1;
    let cx = (a2 * (b.1 - c.1) + b2 * (c.1 - a.1) + c2 * (a.1 - b.1)) / d;
    let cy = (a2 * (c.0 - b.0) + b2 * (a.0 - c.0) + c2 * (b.0 - a.0)) / d;
    Some(Circle { cx, cy, r: ((a.0 - cx).powi(2) + (a.1 - cy).powi(2)).sqrt() })
}

fn boundary_three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Circle {
    if let Some(circle) = circle_three(a, b, c) {
        return circle;
    }
    // Collinear: the widest pair's diameter circle covers the third point.
    [circle_two(a, b), circle_two(a, c), circle_two(b, c)]
        .into_iter()
        .max_by(|p, q| p.r.total_cmp(&q.r))
        .expect("three candidate circles")
}

fn mec_two(points: &[(f64, f64)], q1: (f64, f64), q2: (f64, f64)) -> Circle {
    let mut c = circle_two(q1, q2);
    for &p in points {
        if !c.contains(p) {
            c = boundary_three(p, q1, q2);
        }
    }
    c
}

fn mec_one(points: &[(f64, f64)], q: (f64, f64)) -> Circle {
    let mut c = Circle { cx: q.0, cy: q.1, r: 0.0 };
    for (j, &p) in points.iter().enumerate() {
        if !c.contains(p) {
            c = mec_two(&points[..j], p, q);
        }
    }
    c
}

/// Welzl's minimal enclosing circle over the given points.
pub(crate) fn min_enclosing_circle(points: &[(f64, f64)]) -> (f64, f64, f64) {
    assert!(!points.is_empty(), "minimal circle of an empty set");
    let mut c = Circle { cx: points[0].0, cy: points[0].1, r: 0.0 };
    for (i, &p) in points.iter().enumerate().skip(1) {
        if !c.contains(p) {
            c = mec_one(&points[..i], p);
        }
    }
    (c.cx, c.cy, c.r)
}

/// Thresholds steering [`shape_filter`].
///
/// Areas are in pixels except `max_area_fraction`, which is relative to the
/// whole image. The horizon is a fraction of the image height measured from
/// the top; small accepted regions with their centroid above it are tagged
/// [`Tag::TrafficLight`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFilterParams {
    pub min_area: usize,
    pub max_area_fraction: f64,
    pub min_fill: f64,
    pub near_area: usize,
    pub horizon_frac: f64,
}

impl Default for ShapeFilterParams {
    fn default() -> Self {
        Self {
            min_area: 4,
            max_area_fraction: 0.25,
            min_fill: 0.3,
            near_area: 200,
            horizon_frac: 0.3,
        }
    }
}

/// Scores every region and tags it.
///
/// Regions smaller than the minimum area, larger than the maximum image
/// fraction, or filling too little of their circumcircle are tagged
/// [`Tag::Rejected`]; survivors get a size/row tag. The circumcircle is
/// grown by half a pixel so a pixel counts with its extent, which puts a
/// perfect disc near fill 1 and a 1xN line near 4/(pi*N).
pub fn shape_filter(
    regions: &[Region],
    width: usize,
    height: usize,
    params: &ShapeFilterParams,
) -> Vec<Roi> {
    let max_area = params.max_area_fraction * (width * height) as f64;
    regions
        .iter()
        .map(|region| {
            let points: Vec<(f64, f64)> = region
                .pixels
                .iter()
                .map(|&(x, y)| (x as f64, y as f64))
                .collect();
            let (_, _, r) = min_enclosing_circle(&points);
            let area = region.area();
            let fill = (area as f64 / (PI * (r + 0.5).powi(2))).min(1.0);
            let centroid = region.centroid();
            let tag = if area < params.min_area
                || area as f64 > max_area
                || fill < params.min_fill
            {
                Tag::Rejected
            } else if area >= params.near_area {
                Tag::Near
            } else if centroid.1 < params.horizon_frac * height as f64 {
                Tag::TrafficLight
            } else {
                Tag::Far
            };
            Roi {
                bbox: region.bbox(),
                centroid,
                area,
                circumcircle_fill: fill,
                tag,
            }
        })
        .collect()
}

/// Copies the pixels under `rect` into a standalone frame.
pub fn crop(frame: &Frame, rect: &Rect) -> Frame {
    let mut pixels = Vec::with_capacity(rect.width() * rect.height());
    for y in rect.y0..=rect.y1 {
        pixels.extend_from_slice(&frame.row(y)[rect.x0..=rect.x1]);
    }
    Frame {
        pixels,
        width: rect.width(),
        height: rect.height(),
        timestamp: frame.timestamp,
        camera_id: frame.camera_id.clone(),
    }
}
