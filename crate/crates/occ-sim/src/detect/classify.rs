//! Masked template correlation for LED-state readout, used where a learned
//! classifier would sit in a real receiver.

use super::{DetectError, Mask};
use crate::scene::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub label: String,
    pub pixels: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

impl Template {
    pub fn new(label: impl Into<String>, pixels: Vec<f64>, width: usize, height: usize) -> Self {
        assert_eq!(pixels.len(), width * height);
        Self { label: label.into(), pixels, width, height }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub index: usize,
    pub label: String,
    /// Margin between the best and second-best correlation. Zero on a tie;
    /// with a single template the rival defaults to the correlation floor -1.
    pub confidence: f64,
    pub scores: Vec<f64>,
}

/// Normalized cross-correlation of the region against each template over the
/// pixels the occlusion mask leaves visible; best score wins, ties broken by
/// template order.
pub fn classify_pattern(
    roi: &Frame,
    templates: &[Template],
    occlusion: &Mask,
) -> Result<Classification, DetectError> {
    if templates.is_empty() {
        return Err(DetectError::NoTemplates);
    }
    if occlusion.width != roi.width || occlusion.height != roi.height {
        return Err(DetectError::SizeMismatch(
            roi.width,
            roi.height,
            occlusion.width,
            occlusion.height,
        ));
    }
    for t in templates {
        if t.width != roi.width || t.height != roi.height {
            return Err(DetectError::SizeMismatch(roi.width, roi.height, t.width, t.height));
        }
    }
    let visible: Vec<usize> = (0..roi.pixels.len()).filter(|&i| !occlusion.bits[i]).collect();
    if visible.is_empty() {
        return Err(DetectError::FullyMasked);
    }

    let n = visible.len() as f64;
    let roi_mean: f64 = visible.iter().map(|&i| roi.pixels[i]).sum::<f64>() / n;
    let roi_var: f64 = visible.iter().map(|&i| (roi.pixels[i] - roi_mean).powi(2)).sum();
    let scores: Vec<f64> = templates
        .iter()
        .map(|t| {
            let t_mean: f64 = visible.iter().map(|&i| t.pixels[i]).sum::<f64>() / n;
            let t_var: f64 = visible.iter().map(|&i| (t.pixels[i] - t_mean).powi(2)).sum();
            let cov: f64 = visible
                .iter()
                .map(|&i| (roi.pixels[i] - roi_mean) * (t.pixels[i] - t_mean))
                .sum();
            let denom = (roi_var * t_var).sqrt();
            if denom > 0.0 { cov / denom } else { 0.0 }
        })
        .collect();

    let mut index = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[index] {
            index = i;
        }
    }
    let rival = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, &s)| s)
        .fold(-1.0, f64::max);
    Ok(Classification {
        index,
        label: templates[index].label.clone(),
        confidence: scores[index] - rival,
        scores,
    })
}
