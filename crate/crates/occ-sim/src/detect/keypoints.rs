//! Difference-of-Gaussians keypoints with orientation histograms and
//! gradient descriptors, plus ratio-test matching.

use std::f64::consts::PI;

use super::{DetectError, Keypoint};
use crate::scene::Frame;

pub const DESCRIPTOR_LEN: usize = 128;
pub const ORIENTATION_BINS: usize = 36;
/// Nearest-neighbor distance ratio below which a match is kept.
pub const MATCH_RATIO: f64 = 0.8;

/// Stack of equally sized planes, one per smoothing scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub width: usize,
    pub height: usize,
    pub sigmas: Vec<f64>,
    pub planes: Vec<Vec<f64>>,
}

impl ImageStack {
    pub fn at(&self, plane: usize, x: usize, y: usize) -> f64 {
        self.planes[plane][y * self.width + x]
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

fn blur_separable(pixels: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let mut horizontal = vec![0.0; pixels.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sx = (x as i64 + k as i64 - r).clamp(0, width as i64 - 1) as usize;
                acc += kv * pixels[y * width + sx];
            }
            horizontal[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; pixels.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = (y as i64 + k as i64 - r).clamp(0, height as i64 - 1) as usize;
                acc += kv * horizontal[sy * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Same-resolution Gaussian pyramid with sigma_i = sigma0 * factor^i.
pub fn scale_space(
    image: &Frame,
    sigma0: f64,
    factor: f64,
    levels: usize,
) -> Result<ImageStack, DetectError> {
    if !(sigma0 > 0.0) || !(factor > 1.0) || levels < 3 {
        return Err(DetectError::InvalidScaleSpace);
    }
    let sigmas: Vec<f64> = (0..levels).map(|i| sigma0 * factor.powi(i as i32)).collect();
    let planes = sigmas
        .iter()
        .map(|&s| blur_separable(&image.pixels, image.width, image.height, s))
        .collect();
    Ok(ImageStack { width: image.width, height: image.height, sigmas, planes })
}

/// Adjacent-level differences; plane i keeps the lower level's sigma.
pub fn dog(stack: &ImageStack) -> ImageStack {
    let planes: Vec<Vec<f64>> = stack
        .planes
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(hi, lo)| hi - lo).collect())
        .collect();
    let sigmas = stack.sigmas[..planes.len()].to_vec();
    ImageStack { width: stack.width, height: stack.height, sigmas, planes }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaConfig {
    /// Also require the response to beat both neighboring planes
    /// (26-neighbor mode). Off by default: the in-plane 8-neighbor rule.
    pub cross_scale: bool,
    /// Responses with magnitude below this are ignored.
    pub min_contrast: f64,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        Self { cross_scale: false, min_contrast: 1e-4 }
    }
}

/// Pixels that are strict extrema against their 8 in-plane neighbors, and
/// against both adjacent planes when `cross_scale` is set.
pub fn find_extrema(dog_maps: &ImageStack, config: &ExtremaConfig) -> Vec<Keypoint> {
    let mut out = Vec::new();
    let last = dog_maps.planes.len().saturating_sub(1);
    for p in 0..dog_maps.planes.len() {
        if config.cross_scale && (p == 0 || p == last) {
            continue;
        }
        for y in 1..dog_maps.height.saturating_sub(1) {
            for x in 1..dog_maps.width.saturating_sub(1) {
                let v = dog_maps.at(p, x, y);
                if v.abs() < config.min_contrast {
                    continue;
                }
                let mut is_max = true;
                let mut is_min = true;
                let mut check = |n: f64| {
                    is_max &= v > n;
                    is_min &= v < n;
                };
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        check(dog_maps.at(p, (x as i64 + dx) as usize, (y as i64 + dy) as usize));
                    }
                }
                if config.cross_scale {
                    for q in [p - 1, p + 1] {
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                check(dog_maps.at(
                                    q,
                                    (x as i64 + dx) as usize,
                                    (y as i64 + dy) as usize,
                                ));
                            }
                        }
                    }
                }
                if is_max || is_min {
                    out.push(Keypoint {
                        position: (x as f64, y as f64),
                        scale: dog_maps.sigmas[p],
                        orientation: 0.0,
                        descriptor: Vec::new(),
                    });
                }
            }
        }
    }
    out
}

fn gradient(image: &Frame, x: usize, y: usize) -> Option<(f64, f64)> {
    if x < 1 || y < 1 || x + 1 >= image.width || y + 1 >= image.height {
        return None;
    }
    let gx = (image.at(x + 1, y) - image.at(x - 1, y)) / 2.0;
    let gy = (image.at(x, y + 1) - image.at(x, y - 1)) / 2.0;
    Some((gx, gy))
}

/// One keypoint per orientation-histogram bin reaching 80% of the peak bin.
///
/// The histogram has [`ORIENTATION_BINS`] bins over a window scaled to the
/// keypoint's sigma; emitted orientations are bin centers. A window with no
/// gradient emits nothing.
pub fn assign_orientation(kp: &Keypoint, image: &Frame) -> Vec<Keypoint> {
    let sigma_w = 1.5 * kp.scale;
    let r = (3.0 * sigma_w).ceil() as i64;
    let cx = kp.position.0.round() as i64;
    let cy = kp.position.1.round() as i64;
    let mut hist = vec![0.0; ORIENTATION_BINS];
    for dy in -r..=r {
        for dx in -r..=r {
            let x = cx + dx;
            let y = cy + dy;
            if x < 0 || y < 0 {
                continue;
            }
            let Some((gx, gy)) = gradient(image, x as usize, y as usize) else {
                continue;
            };
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(2.0 * PI);
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_w * sigma_w)).exp();
            let bin = ((theta / (2.0 * PI) * ORIENTATION_BINS as f64) as usize)
                .min(ORIENTATION_BINS - 1);
            hist[bin] += weight * mag;
        }
    }
    let peak = hist.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    hist.iter()
        .enumerate()
        .filter(|&(_, &mass)| mass >= 0.8 * peak)
        .map(|(bin, _)| Keypoint {
            orientation: (bin as f64 + 0.5) * 2.0 * PI / ORIENTATION_BINS as f64,
            descriptor: Vec::new(),
            ..*kp
        })
        .collect()
}

fn bilinear(image: &Frame, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (image.width - 1) as f64);
    let y = y.clamp(0.0, (image.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(image.width - 1);
    let y1 = (y0 + 1).min(image.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = image.at(x0, y0) * (1.0 - fx) + image.at(x1, y0) * fx;
    let bot = image.at(x0, y1) * (1.0 - fx) + image.at(x1, y1) * fx;
    top * (1.0 - fy) + bot * fy
}

/// 4x4 spatial cells x 8 orientation bins over a 16x16 sample grid spaced by
/// the keypoint's sigma and rotated to its orientation; unit-normalized.
pub fn compute_descriptor(kp: &Keypoint, image: &Frame) -> Vec<f64> {
    let (cx, cy) = kp.position;
    let (sin_o, cos_o) = kp.orientation.sin_cos();
    let step = kp.scale;
    let mut d = vec![0.0; DESCRIPTOR_LEN];
    for j in 0..16 {
        for i in 0..16 {
            let u = i as f64 - 7.5;
            let v = j as f64 - 7.5;
            let sx = cx + (u * cos_o - v * sin_o) * step;
            let sy = cy + (u * sin_o + v * cos_o) * step;
            if sx < 1.0 || sy < 1.0 || sx > (image.width - 2) as f64 || sy > (image.height - 2) as f64
            {
                continue;
            }
            let gx = (bilinear(image, sx + 1.0, sy) - bilinear(image, sx - 1.0, sy)) / 2.0;
            let gy = (bilinear(image, sx, sy + 1.0) - bilinear(image, sx, sy - 1.0)) / 2.0;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let rel = (gy.atan2(gx) - kp.orientation).rem_euclid(2.0 * PI);
            let obin = ((rel / (2.0 * PI) * 8.0) as usize).min(7);
            let cell = (j / 4) * 4 + i / 4;
            let weight = (-(u * u + v * v) / (2.0 * 4.0 * 4.0)).exp();
            d[cell * 8 + obin] += weight * mag;
        }
    }
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for v in &mut d {
            *v /= norm;
        }
    }
    d
}

/// Nearest-neighbor correspondences (index in `a`, index in `b`) passing the
/// [`MATCH_RATIO`] test against the second-best candidate.
pub fn match_descriptors(a: &[Keypoint], b: &[Keypoint]) -> Vec<(usize, usize)> {
    let mut matches = Vec::new();
    for (i, ka) in a.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        let mut second = f64::INFINITY;
        for (j, kb) in b.iter().enumerate() {
            let d2: f64 = ka
                .descriptor
                .iter()
                .zip(&kb.descriptor)
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            match best {
                Some((_, bd)) if d2 >= bd => second = second.min(d2),
                _ => {
                    if let Some((_, bd)) = best {
                        second = bd;
                    }
                    best = Some((j, d2));
                }
            }
        }
        if let Some((j, d2)) = best {
            if d2 < MATCH_RATIO * MATCH_RATIO * second {
                matches.push((i, j));
            }
        }
    }
    matches
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame_of(pixels: Vec<f64>, width: usize, height: usize) -> Frame {
        Frame { pixels, width, height, timestamp: 0.0, camera_id: "t".into() }
    }

    fn blob(width: usize, height: usize, cx: f64, cy: f64, sigma: f64) -> Frame {
        let pixels = (0..width * height)
            .map(|i| {
                let x = (i % width) as f64;
                let y = (i / width) as f64;
                (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        frame_of(pixels, width, height)
    }

    fn noise_frame(width: usize, height: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        frame_of((0..width * height).map(|_| rng.random::<f64>()).collect(), width, height)
    }

    #[test]
    fn scale_space_validates_its_inputs() {
        let f = frame_of(vec![0.0; 16], 4, 4);
        assert_eq!(scale_space(&f, 0.0, 1.5, 3).unwrap_err(), DetectError::InvalidScaleSpace);
        assert_eq!(scale_space(&f, 1.0, 1.0, 3).unwrap_err(), DetectError::InvalidScaleSpace);
        assert_eq!(scale_space(&f, 1.0, 1.5, 2).unwrap_err(), DetectError::InvalidScaleSpace);
    }

    #[test]
    fn constant_image_has_zero_dog() {
        let f = frame_of(vec![0.7; 24 * 24], 24, 24);
        let maps = dog(&scale_space(&f, 1.2, 1.6, 4).unwrap());
        assert_eq!(maps.planes.len(), 3);
        for plane in &maps.planes {
            assert!(plane.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn dog_of_an_impulse_is_the_kernel_difference() {
        let mut f = frame_of(vec![0.0; 41 * 41], 41, 41);
        f.pixels[20 * 41 + 20] = 1.0;
        let stack = scale_space(&f, 1.0, 1.6, 3).unwrap();
        let maps = dog(&stack);
        let k0 = gaussian_kernel(1.0);
        let k1 = gaussian_kernel(1.6);
        let sample = |k: &[f64], d: i64| {
            let r = (k.len() / 2) as i64;
            if d.abs() > r { 0.0 } else { k[(d + r) as usize] }
        };
        for (dx, dy) in [(0i64, 0i64), (1, 0), (0, 2), (3, 3), (-2, 1)] {
            let want = sample(&k1, dx) * sample(&k1, dy) - sample(&k0, dx) * sample(&k0, dy);
            let got = maps.at(0, (20 + dx) as usize, (20 + dy) as usize);
            assert!((got - want).abs() < 1e-12, "offset ({dx},{dy}): {got} vs {want}");
        }
    }

    #[test]
    fn blob_extremum_lands_on_the_strongest_scale() {
        let sigma_b: f64 = 3.0;
        let f = blob(64, 64, 32.0, 32.0, sigma_b);
        let stack = scale_space(&f, 1.2, 1.5, 6).unwrap();
        let maps = dog(&stack);

        let center_response = |lo: f64, hi: f64| {
            let s2 = sigma_b * sigma_b;
            s2 / (s2 + hi * hi) - s2 / (s2 + lo * lo)
        };
        let best = (0..maps.planes.len())
            .max_by(|&a, &b| {
                let ra = center_response(stack.sigmas[a], stack.sigmas[a + 1]).abs();
                let rb = center_response(stack.sigmas[b], stack.sigmas[b + 1]).abs();
                ra.total_cmp(&rb)
            })
            .unwrap();

        let kps = find_extrema(&maps, &ExtremaConfig { cross_scale: true, min_contrast: 1e-4 });
        let near_center: Vec<_> = kps
            .iter()
            .filter(|k| (k.position.0 - 32.0).abs() <= 1.0 && (k.position.1 - 32.0).abs() <= 1.0)
            .collect();
        assert_eq!(near_center.len(), 1, "keypoints: {kps:?}");
        assert_eq!(near_center[0].scale, maps.sigmas[best]);
    }

    #[test]
    fn in_plane_rule_fires_on_every_scale() {
        let f = blob(64, 64, 32.0, 32.0, 3.0);
        let maps = dog(&scale_space(&f, 1.2, 1.5, 5).unwrap());
        let kps = find_extrema(&maps, &ExtremaConfig::default());
        let center_scales: Vec<f64> = kps
            .iter()
            .filter(|k| (k.position.0 - 32.0).abs() <= 1.0 && (k.position.1 - 32.0).abs() <= 1.0)
            .map(|k| k.scale)
            .collect();
        assert!(center_scales.len() >= 2, "scales at center: {center_scales:?}");
    }

    #[test]
    fn two_blobs_give_two_keypoints() {
        let mut f = blob(64, 64, 16.0, 16.0, 2.0);
        let other = blob(64, 64, 48.0, 48.0, 2.0);
        for (p, q) in f.pixels.iter_mut().zip(&other.pixels) {
            *p += q;
        }
        let maps = dog(&scale_space(&f, 1.2, 1.5, 5).unwrap());
        // The contrast floor sits above the positive side lobe that rings
        // each blob response, leaving only the two centers.
        let kps = find_extrema(&maps, &ExtremaConfig { cross_scale: true, min_contrast: 0.05 });
        assert_eq!(kps.len(), 2, "{kps:?}");
        let mut xs: Vec<f64> = kps.iter().map(|k| k.position.0).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] - 16.0).abs() <= 1.0 && (xs[1] - 48.0).abs() <= 1.0);
    }

    #[test]
    fn zero_map_yields_no_keypoints() {
        let maps = ImageStack {
            width: 8,
            height: 8,
            sigmas: vec![1.0, 1.6],
            planes: vec![vec![0.0; 64]; 2],
        };
        assert!(find_extrema(&maps, &ExtremaConfig::default()).is_empty());
    }

    #[test]
    fn keypoints_translate_with_the_image() {
        let (dx, dy) = (3usize, 5usize);
        let base = noise_frame(48, 48, 9);
        let mut shifted = frame_of(vec![0.0; 48 * 48], 48, 48);
        for y in 0..48 - dy {
            for x in 0..48 - dx {
                shifted.pixels[(y + dy) * 48 + (x + dx)] = base.at(x, y);
            }
        }
        let maps_a = dog(&scale_space(&base, 1.0, 1.6, 3).unwrap());
        let maps_b = dog(&scale_space(&shifted, 1.0, 1.6, 3).unwrap());
        let config = ExtremaConfig::default();
        let margin = 14.0;
        let hi = 48.0 - margin - dx.max(dy) as f64;
        let keep = |kps: Vec<Keypoint>, shift: (f64, f64)| -> Vec<(u64, u64, u64)> {
            let mut v: Vec<_> = kps
                .into_iter()
                .filter(|k| {
                    k.position.0 >= margin
                        && k.position.0 <= hi
                        && k.position.1 >= margin
                        && k.position.1 <= hi
                })
                .map(|k| {
                    (
                        (k.position.0 + shift.0) as u64,
                        (k.position.1 + shift.1) as u64,
                        k.scale.to_bits(),
                    )
                })
                .collect();
            v.sort();
            v
        };
        let a = keep(find_extrema(&maps_a, &config), (dx as f64, dy as f64));
        let b: Vec<_> = find_extrema(&maps_b, &config)
            .into_iter()
            .filter(|k| {
                k.position.0 - dx as f64 >= margin
                    && k.position.0 - (dx as f64) <= hi
                    && k.position.1 - dy as f64 >= margin
                    && k.position.1 - (dy as f64) <= hi
            })
            .map(|k| (k.position.0 as u64, k.position.1 as u64, k.scale.to_bits()))
            .collect();
        let mut b = b;
        b.sort();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    fn ramp(theta: f64) -> Frame {
        let pixels = (0..64 * 64)
            .map(|i| {
                let x = (i % 64) as f64;
                let y = (i / 64) as f64;
                (x * theta.cos() + y * theta.sin()) / 64.0
            })
            .collect();
        frame_of(pixels, 64, 64)
    }

    fn bin_center(theta: f64) -> f64 {
        let width = 2.0 * PI / ORIENTATION_BINS as f64;
        ((theta.rem_euclid(2.0 * PI) / width).floor() + 0.5) * width
    }

    #[test]
    fn ramp_gradient_gives_one_orientation() {
        let theta = 0.5;
        let kp = Keypoint { position: (32.0, 32.0), scale: 2.0, orientation: 0.0, descriptor: vec![] };
        let oriented = assign_orientation(&kp, &ramp(theta));
        assert_eq!(oriented.len(), 1);
        assert!((oriented[0].orientation - bin_center(theta)).abs() < 1e-9);
        assert!((oriented[0].orientation - theta).abs() <= PI / ORIENTATION_BINS as f64 + 1e-9);
    }

    #[test]
    fn rotating_the_pattern_rotates_the_orientation() {
        let kp = Keypoint { position: (32.0, 32.0), scale: 2.0, orientation: 0.0, descriptor: vec![] };
        let a = assign_orientation(&kp, &ramp(0.5))[0].orientation;
        let b = assign_orientation(&kp, &ramp(0.5 + PI / 6.0))[0].orientation;
        assert!((b - a - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_blob_spreads_mass_over_many_bins() {
        // Off-lattice center so gradient angles are not pinned to the axes.
        let kp = Keypoint { position: (48.0, 48.0), scale: 4.0, orientation: 0.0, descriptor: vec![] };
        let oriented = assign_orientation(&kp, &blob(96, 96, 47.6, 48.4, 8.0));
        assert!(oriented.len() >= 8, "only {} orientations", oriented.len());
    }

    #[test]
    fn flat_window_emits_nothing() {
        let kp = Keypoint { position: (8.0, 8.0), scale: 1.0, orientation: 0.0, descriptor: vec![] };
        assert!(assign_orientation(&kp, &frame_of(vec![0.5; 256], 16, 16)).is_empty());
    }

    fn described_keypoints(image: &Frame) -> Vec<Keypoint> {
        let maps = dog(&scale_space(image, 1.0, 1.6, 3).unwrap());
        find_extrema(&maps, &ExtremaConfig::default())
            .iter()
            .flat_map(|kp| assign_orientation(kp, image))
            .map(|mut kp| {
                kp.descriptor = compute_descriptor(&kp, image);
                kp
            })
            .collect()
    }

    #[test]
    fn descriptors_are_unit_length() {
        let kps = described_keypoints(&noise_frame(48, 48, 3));
        assert!(!kps.is_empty());
        for kp in &kps {
            assert_eq!(kp.descriptor.len(), DESCRIPTOR_LEN);
            let norm: f64 = kp.descriptor.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_sets_match_one_to_one() {
        let kps = described_keypoints(&noise_frame(48, 48, 4));
        let matches = match_descriptors(&kps, &kps);
        assert_eq!(matches.len(), kps.len());
        assert!(matches.iter().all(|&(i, j)| i == j));
    }

    #[test]
    fn random_descriptors_fail_the_ratio_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut random_kps = |n: usize| -> Vec<Keypoint> {
            (0..n)
                .map(|_| {
                    let mut d: Vec<f64> = (0..DESCRIPTOR_LEN).map(|_| rng.random::<f64>()).collect();
                    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                    d.iter_mut().for_each(|v| *v /= norm);
                    Keypoint { position: (0.0, 0.0), scale: 1.0, orientation: 0.0, descriptor: d }
                })
                .collect()
        };
        let a = random_kps(6);
        let b = random_kps(6);
        assert!(match_descriptors(&a, &b).is_empty());
    }

    #[test]
    fn matches_across_a_translated_copy_recover_the_shift() {
        let (dx, dy) = (3.0, 5.0);
        let base = noise_frame(64, 64, 21);
        let mut shifted = frame_of(vec![0.0; 64 * 64], 64, 64);
        for y in 0..59 {
            for x in 0..61 {
                shifted.pixels[(y + 5) * 64 + (x + 3)] = base.at(x, y);
            }
        }
        let interior = |k: &Keypoint| {
            k.position.0 >= 20.0 && k.position.0 <= 40.0 && k.position.1 >= 20.0 && k.position.1 <= 40.0
        };
        let a: Vec<Keypoint> = described_keypoints(&base).into_iter().filter(interior).collect();
        let b: Vec<Keypoint> = described_keypoints(&shifted)
            .into_iter()
            .filter(|k| interior(&Keypoint { position: (k.position.0 - dx, k.position.1 - dy), ..k.clone() }))
            .collect();
        let matches = match_descriptors(&a, &b);
        assert!(matches.len() >= 5, "only {} matches", matches.len());
        for &(i, j) in &matches {
            assert!((b[j].position.0 - a[i].position.0 - dx).abs() < 1e-9);
            assert!((b[j].position.1 - a[i].position.1 - dy).abs() < 1e-9);
        }
    }
}
