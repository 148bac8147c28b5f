//! DF and LIAE autoencoders (with optional HD residual stages), their training
//! and swap forward passes, and checkpoint I/O.

mod checkpoint;
mod net;
mod tensors;

pub use checkpoint::{read_bundle, write_bundle, BundleEntry, CheckpointInfo, MANIFEST_FILE, WEIGHTS_FILE};
pub use net::{forward_train, Direction, InitScheme, Latents, Model, ModelConfig, Structure, TrainOutputs, LEAKY_SLOPE};
pub use tensors::{images_to_tensor, masks_to_tensor, tensor_to_images};
