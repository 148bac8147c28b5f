use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const HEAD_ASPECT: (f64, f64) = (0.85, 1.15);
pub const EYE_SPACING: (f64, f64) = (0.62, 0.82);
pub const EYE_SIZE: (f64, f64) = (0.8, 1.2);
pub const NOSE_LENGTH: (f64, f64) = (0.8, 1.2);
pub const MOUTH_WIDTH: (f64, f64) = (0.8, 1.2);
pub const SKIN: (f64, f64) = (0.25, 0.65);
pub const FEATURE: (f64, f64) = (0.0, 0.4);

pub const YAW: (f64, f64) = (-40.0, 40.0);
pub const PITCH: (f64, f64) = (-30.0, 30.0);
pub const ROLL: (f64, f64) = (-45.0, 45.0);
pub const UNIT: (f64, f64) = (0.0, 1.0);
pub const ILLUMINATION: (f64, f64) = (0.6, 1.4);
pub const SHIFT: (f64, f64) = (-0.15, 0.15);
pub const ZOOM: (f64, f64) = (0.7, 1.3);

fn check(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

fn span((lo, hi): (f64, f64)) -> f64 {
    hi - lo
}

/// Per-person appearance. Geometry values are relative to the template rig
/// (1.0 reproduces it exactly, eye spacing is the inter-ocular distance in rig
/// units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    /// Face height over width; > 1 narrows the head.
    pub head_aspect: f64,
    pub eye_spacing: f64,
    pub eye_size: f64,
    pub nose_length: f64,
    pub mouth_width: f64,
    pub skin: [f64; 3],
    pub feature: [f64; 3],
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            head_aspect: 1.0,
            eye_spacing: 0.72,
            eye_size: 1.0,
            nose_length: 1.0,
            mouth_width: 1.0,
            skin: [0.6, 0.45, 0.35],
            feature: [0.15, 0.1, 0.08],
        }
    }
}

impl IdentityParams {
    pub fn validate(&self) -> Result<()> {
        check("head_aspect", self.head_aspect, HEAD_ASPECT)?;
        check("eye_spacing", self.eye_spacing, EYE_SPACING)?;
        check("eye_size", self.eye_size, EYE_SIZE)?;
        check("nose_length", self.nose_length, NOSE_LENGTH)?;
        check("mouth_width", self.mouth_width, MOUTH_WIDTH)?;
        for c in 0..3 {
            check("skin", self.skin[c], SKIN)?;
            check("feature", self.feature[c], FEATURE)?;
        }
        Ok(())
    }

    /// Uniform draw over the documented ranges.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        Self {
            head_aspect: u(HEAD_ASPECT),
            eye_spacing: u(EYE_SPACING),
            eye_size: u(EYE_SIZE),
            nose_length: u(NOSE_LENGTH),
            mouth_width: u(MOUTH_WIDTH),
            skin: [u(SKIN), u(SKIN), u(SKIN)],
            feature: [u(FEATURE), u(FEATURE), u(FEATURE)],
        }
    }

    /// Every parameter mapped to [0, 1] by its range, in a fixed order:
    /// head_aspect, eye_spacing, eye_size, nose_length, mouth_width, skin rgb,
    /// feature rgb.
    pub fn normalized(&self) -> [f64; 11] {
        let n = |v: f64, r: (f64, f64)| (v - r.0) / span(r);
        [
            n(self.head_aspect, HEAD_ASPECT),
            n(self.eye_spacing, EYE_SPACING),
            n(self.eye_size, EYE_SIZE),
            n(self.nose_length, NOSE_LENGTH),
            n(self.mouth_width, MOUTH_WIDTH),
            n(self.skin[0], SKIN),
            n(self.skin[1], SKIN),
            n(self.skin[2], SKIN),
            n(self.feature[0], FEATURE),
            n(self.feature[1], FEATURE),
            n(self.feature[2], FEATURE),
        ]
    }

    /// Largest range-normalized parameter difference.
    pub fn max_normalized_error(&self, other: &IdentityParams) -> f64 {
        self.normalized()
            .iter()
            .zip(other.normalized())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance in range-normalized space over the parameters that
    /// are visible inside the face (everything except `head_aspect`).
    pub fn interior_distance(&self, other: &IdentityParams) -> f64 {
        self.normalized()[1..]
            .iter()
            .zip(&other.normalized()[1..])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-frame pose, expression, lighting and framing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    /// Degrees.
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub mouth_open: f64,
    pub eye_open: f64,
    /// Multiplicative gain on the face.
    pub illumination: f64,
    pub background_seed: u64,
    /// Face offset as a fraction of the frame size.
    pub shift: [f64; 2],
    pub zoom: f64,
}

impl Default for StateParams {
    fn default() -> Self {
        Self {
            yaw: 0.0,
            pitch: 0.0,
            roll: 0.0,
            mouth_open: 0.0,
            eye_open: 1.0,
            illumination: 1.0,
            background_seed: 0,
            shift: [0.0, 0.0],
            zoom: 1.0,
        }
    }
}

impl StateParams {
    pub fn validate(&self) -> Result<()> {
        check("yaw", self.yaw, YAW)?;
        check("pitch", self.pitch, PITCH)?;
        check("roll", self.roll, ROLL)?;
        check("mouth_open", self.mouth_open, UNIT)?;
        check("eye_open", self.eye_open, UNIT)?;
        check("illumination", self.illumination, ILLUMINATION)?;
        check("shift", self.shift[0], SHIFT)?;
        check("shift", self.shift[1], SHIFT)?;
        check("zoom", self.zoom, ZOOM)
    }
}

/// Per-frame step limits and clamp ranges for the dataset random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub yaw_step: f64,
    pub pitch_step: f64,
    pub roll_step: f64,
    pub mouth_step: f64,
    pub eye_step: f64,
    pub illumination_step: f64,
    pub shift_step: f64,
    pub zoom_step: f64,
    pub yaw_range: (f64, f64),
    pub pitch_range: (f64, f64),
    pub roll_range: (f64, f64),
    pub eye_range: (f64, f64),
    pub illumination_range: (f64, f64),
    pub shift_range: (f64, f64),
    pub zoom_range: (f64, f64),
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            yaw_step: 3.0,
            pitch_step: 2.0,
            roll_step: 2.0,
            mouth_step: 0.1,
            eye_step: 0.1,
            illumination_step: 0.03,
            shift_step: 0.005,
            zoom_step: 0.01,
            yaw_range: (-30.0, 30.0),
            pitch_range: (-15.0, 15.0),
            roll_range: (-15.0, 15.0),
            eye_range: (0.4, 1.0),
            illumination_range: (0.8, 1.2),
            shift_range: (-0.05, 0.05),
            zoom_range: (0.9, 1.1),
        }
    }
}

impl WalkParams {
    /// `n` states starting from `start`, each step uniform within the step
    /// limits and clamped to the walk ranges.
    pub fn walk(&self, start: StateParams, n: usize, seed: u64) -> Vec<StateParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut s = start;
        for i in 0..n {
            if i > 0 {
                let mut step = |v: f64, d: f64, (lo, hi): (f64, f64)| {
                    (v + rng.random_range(-d..=d)).clamp(lo, hi)
                };
                s.yaw = step(s.yaw, self.yaw_step, self.yaw_range);
                s.pitch = step(s.pitch, self.pitch_step, self.pitch_range);
                s.roll = step(s.roll, self.roll_step, self.roll_range);
                s.mouth_open = step(s.mouth_open, self.mouth_step, UNIT);
                s.eye_open = step(s.eye_open, self.eye_step, self.eye_range);
                s.illumination = step(s.illumination, self.illumination_step, self.illumination_range);
                s.shift[0] = step(s.shift[0], self.shift_step, self.shift_range);
                s.shift[1] = step(s.shift[1], self.shift_step, self.shift_range);
                s.zoom = step(s.zoom, self.zoom_step, self.zoom_range);
            }
            out.push(s);
        }
        out
    }
}
