//! Losses, optimizer, initialization, the optional adversarial term and the
//! training loop.

mod config;
mod data;
mod gan;
mod init;
mod losses;
mod optim;
mod session;
mod weights;

pub use config::TrainConfig;
pub use data::{sample_batch, Batch, FaceSample, FaceSet, SCALE_JITTER};
pub use gan::{lsgan_discriminator, lsgan_generator, Discriminator};
pub use init::cai_init;
pub use losses::{
    dssim, latent_mean_distance, mixed_loss, mse, ssim_map, trueface_loss, weighted_mse, MixedWeights, SideTerms,
    SSIM_K1, SSIM_K2, SSIM_SIGMA,
};
pub use optim::{adam_step, AdamConfig, AdamState, ADAM_EPS};
pub use session::{
    append_loss_log, dataset_latent_distance, iteration_rng, train, LossReport, SideReport, TrainSession,
    TRAIN_STATE_BIN, TRAIN_STATE_FILE,
};
pub use weights::{eye_weight_map, EYE_DILATION};
