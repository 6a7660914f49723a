//! The perceptual substrate words are grounded in.
//!
//! A [`FeatureVector`] has six components, all derived from a grayscale
//! view of a detected object. There is deliberately no hue slot.

use alloc::format;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Named feature slots, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Size,
    Elongation,
    Cornerness,
    Intensity,
    Lateral,
    Depth,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_DIM] =
        [Feature::Size, Feature::Elongation, Feature::Cornerness, Feature::Intensity, Feature::Lateral, Feature::Depth];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Size => "size",
            Feature::Elongation => "elongation",
            Feature::Cornerness => "cornerness",
            Feature::Intensity => "intensity",
            Feature::Lateral => "lateral",
            Feature::Depth => "depth",
        }
    }

    /// Closed value range of the component.
    pub fn range(self) -> (f64, f64) {
        match self {
            Feature::Lateral => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    /// Whether the component depends on the reference frame.
    pub fn is_spatial(self) -> bool {
        matches!(self, Feature::Lateral | Feature::Depth)
    }
}

/// Six validated components: size, elongation, cornerness, intensity,
/// lateral, depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; FEATURE_DIM]", into = "[f64; FEATURE_DIM]")]
pub struct FeatureVector([f64; FEATURE_DIM]);

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector([0.0; FEATURE_DIM]);

    pub fn new(values: [f64; FEATURE_DIM]) -> Result<Self> {
        for (feature, &v) in Feature::ALL.iter().zip(values.iter()) {
            if !v.is_finite() {
                return Err(Error::invalid(alloc::format!("{} is not finite", feature.name())));
            }
            let (lo, hi) = feature.range();
            if v < lo || v > hi {
                return Err(Error::invalid(alloc::format!("{} = {v} outside [{lo}, {hi}]", feature.name())));
            }
        }
        Ok(FeatureVector(values))
    }

    /// Builds a vector by clamping every component into its range.
    /// Non-finite components are still rejected.
    pub fn clamped(values: [f64; FEATURE_DIM]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {} is not finite", Feature::ALL[i].name())));
        }
        let mut out = values;
        for (feature, v) in Feature::ALL.iter().zip(out.iter_mut()) {
            let (lo, hi) = feature.range();
            *v = v.clamp(lo, hi);
        }
        Self::new(out)
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature.index()]
    }

    pub fn as_array(&self) -> &[f64; FEATURE_DIM] {
        &self.0
    }

    pub fn dot(&self, weights: &[f64; FEATURE_DIM]) -> f64 {
        self.0.iter().zip(weights.iter()).map(|(x, w)| x * w).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

impl TryFrom<[f64; FEATURE_DIM]> for FeatureVector {
    type Error = Error;

    fn try_from(values: [f64; FEATURE_DIM]) -> Result<Self> {
        FeatureVector::new(values)
    }
}

impl From<FeatureVector> for [f64; FEATURE_DIM] {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Reference frame for the lateral and depth components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The agent's home pose at the start of an episode.
    Agent,
    /// The human speaker's pose.
    #[default]
    Speaker,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Agent => "agent",
            Frame::Speaker => "speaker",
        }
    }
}

/// Planar position and heading (radians, counter-clockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        libm::hypot(x - self.x, y - self.y)
    }

    /// Point expressed as (forward, rightward) offsets from this pose.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.x, y - self.y);
        let (s, c) = libm::sincos(self.heading);
        let forward = dx * c + dy * s;
        let right = dx * s - dy * c;
        (forward, right)
    }

    /// Unsigned angle between the heading and the direction to `(x, y)`.
    pub fn bearing_to(&self, x: f64, y: f64) -> f64 {
        let (forward, right) = self.to_local(x, y);
        libm::fabs(libm::atan2(right, forward))
    }
}
