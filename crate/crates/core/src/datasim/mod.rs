//! Procedural faces with exact ground truth: frames, 68-point landmarks, head
//! masks and the identity/state parameters that produced them.

mod dataset;
mod fit;
pub mod params;
mod raster;
mod render;
mod rig;

pub use dataset::{frame_name, load_identity, load_state, make_dataset, DatasetSpec, FRAME_SIZE};
pub use fit::{fit_identity, FitOptions, IdentityFit};
pub use params::{IdentityParams, StateParams, WalkParams};
pub use render::{background, render, Rendered};
