use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::models::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    None,
    Rct,
    Idt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    Alpha,
    Poisson,
}

impl std::str::FromStr for ColorMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ColorMode::None),
            "rct" => Ok(ColorMode::Rct),
            "idt" => Ok(ColorMode::Idt),
            other => Err(invalid(format!("unknown colour mode {other}"))),
        }
    }
}

impl std::str::FromStr for BlendMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(BlendMode::Alpha),
            "poisson" => Ok(BlendMode::Poisson),
            other => Err(invalid(format!("unknown blend mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvertConfig {
    pub direction: Direction,
    pub color_mode: ColorMode,
    pub blend_mode: BlendMode,
    /// Gaussian σ (aligned-face pixels) applied to the mask after erosion.
    pub feather_sigma: f64,
    /// Erosion radius in aligned-face pixels.
    pub mask_erode: usize,
    /// Unsharp-mask gain inside the mask; 0 disables sharpening.
    pub sharpen_amount: f64,
    pub idt_iterations: usize,
    pub idt_seed: u64,
    pub cg_tol: f64,
    /// `None` uses `10·√|Ω|`, capped.
    pub cg_max_iter: Option<usize>,
}

pub const SHARPEN_SIGMA: f64 = 1.0;

impl Default for ConvertConfig {
    fn default() -> Self {
        Self {
            direction: Direction::Src2dst,
            color_mode: ColorMode::None,
            blend_mode: BlendMode::Alpha,
            feather_sigma: 3.0,
            mask_erode: 2,
            sharpen_amount: 0.0,
            idt_iterations: 30,
            idt_seed: 0,
            cg_tol: 1e-6,
            cg_max_iter: None,
        }
    }
}

impl ConvertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.feather_sigma >= 0.0) || !self.feather_sigma.is_finite() {
            return Err(invalid("feather_sigma must be a finite value >= 0"));
        }
        if !(self.sharpen_amount >= 0.0) || !self.sharpen_amount.is_finite() {
            return Err(invalid("sharpen_amount must be a finite value >= 0"));
        }
        if !(self.cg_tol > 0.0) {
            return Err(invalid("cg_tol must be positive"));
        }
        if self.color_mode == ColorMode::Idt && self.idt_iterations == 0 {
            return Err(invalid("idt_iterations must be at least 1"));
        }
        if self.cg_max_iter == Some(0) {
            return Err(invalid("cg_max_iter must be at least 1"));
        }
        Ok(())
    }
}
