//! Conversion: swap prediction, colour harmonization, paste-back and
//! blending.

mod color;
mod config;
mod pipeline;
mod poisson;

pub use color::{idt_transfer, rct_transfer, MASK_THRESHOLD, RCT_STD_FLOOR};
pub use config::{BlendMode, ColorMode, ConvertConfig, SHARPEN_SIGMA};
pub use pipeline::{convert_frame, convert_sequence, FrameDiagnostics, FrameInput, FrameResult};
pub use poisson::{default_cg_max_iter, interior, poisson_blend, PoissonReport, CG_MAX_ITER_CAP};
