//! Transmitter detection and tracking on rendered frames.
//!
//! Differential imaging isolates blinking emitters, morphology plus a
//! circumcircle shape test turns the surviving blobs into tagged regions of
//! interest, and a small scale-space keypoint pipeline with ICP registration
//! keeps those regions localized through frames where the emitters are dark.
//! A masked template correlator stands in for a learned LED-state classifier.

mod align;
mod classify;
mod keypoints;
mod regions;
mod text;

pub use align::{
    cumulative_transform, fit_srt, icp_align, Affine2D, Transform2D, ICP_MAX_ITERS, ICP_TOLERANCE,
};
pub use classify::{classify_pattern, Classification, Template};
pub use keypoints::{
    assign_orientation, compute_descriptor, dog, find_extrema, match_descriptors, scale_space,
    ExtremaConfig, ImageStack, DESCRIPTOR_LEN, MATCH_RATIO, ORIENTATION_BINS,
};
pub use regions::{
    binarize, connected_components, crop, differential_image, dilate, shape_filter, Region,
    ShapeFilterParams,
};
pub use text::{keypoints_from_text, keypoints_to_text, mask_to_pgm, rois_from_text, rois_to_text};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("scale space needs sigma0 > 0, factor > 1 and at least 3 levels")]
    InvalidScaleSpace,
    #[error("model point set is empty")]
    EmptyModel,
    #[error("data point set is empty")]
    EmptyData,
    #[error("need more model points than the {dim} transform parameters, got {got}")]
    ModelTooSmall { dim: usize, got: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateFit(&'static str),
    #[error("linear part has no rotation component to project onto")]
    DegenerateLinear,
    #[error("no templates given")]
    NoTemplates,
    #[error("every pixel of the region is occluded")]
    FullyMasked,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Boolean image, row-major like [`crate::scene::Frame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub bits: Vec<bool>,
    pub width: usize,
    pub height: usize,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { bits: vec![false; width * height], width, height }
    }

    pub fn at(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    /// Number of set pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 as f64 <= x && x <= self.x1 as f64 && self.y0 as f64 <= y && y <= self.y1 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Near,
    Far,
    TrafficLight,
    Rejected,
}

/// Candidate transmitter region.
#[derive(Debug, Clone, PartialEq)]
pub struct Roi {
    pub bbox: Rect,
    pub centroid: (f64, f64),
    pub area: usize,
    /// Fraction of the region's circumcircle covered by its pixels, in (0, 1].
    pub circumcircle_fill: f64,
    pub tag: Tag,
}

impl Roi {
    pub fn accepted(&self) -> bool {
        self.tag != Tag::Rejected
    }
}

/// Scale-space feature point. `descriptor` is empty until
/// [`compute_descriptor`] fills it with a unit-length 128-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub position: (f64, f64),
    pub scale: f64,
    pub orientation: f64,
    pub descriptor: Vec<f64>,
}
