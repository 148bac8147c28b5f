pub mod error;
pub mod conversion;
pub mod datasim;
pub mod geometry;
pub mod imgcore;
pub mod metrics;
pub mod models;
pub mod training;

pub use error::{Error, Result};
