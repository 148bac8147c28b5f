use std::io::Write;
use std::path::Path;

use facelab_autograd::{Graph, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{sample_batch, FaceSet};
use super::gan::{lsgan_discriminator, lsgan_generator, Discriminator};
use super::losses::{latent_mean_distance, mixed_loss, trueface_loss, MixedWeights};
use super::optim::{adam_step, AdamConfig, AdamState};
use super::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::models::{
    forward_train, images_to_tensor, read_bundle, write_bundle, BundleEntry, CheckpointInfo, InitScheme, Model,
    ModelConfig,
};

pub const TRAIN_STATE_FILE: &str = "train_state.json";
pub const TRAIN_STATE_BIN: &str = "train_state.bin";
const DISC_SEED_SALT: u64 = 0x6469_7363;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideReport {
    pub dssim: f64,
    pub mse: f64,
    pub mask: f64,
}

/// Loss components of one iteration. Components are unweighted; `total` is
/// their configured weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub iteration: u64,
    pub total: f64,
    pub src: SideReport,
    pub dst: SideReport,
    pub trueface: f64,
    /// Generator-side adversarial term.
    pub gan: f64,
    pub gan_discriminator: f64,
    /// `‖μ_src − μ_dst‖` of the latent codes TrueFace compares.
    pub latent_distance: f64,
}

impl LossReport {
    pub fn weighted_total(&self, cfg: &TrainConfig) -> f64 {
        let side = |s: &SideReport| cfg.dssim_weight * s.dssim + cfg.mse_weight * s.mse + cfg.mask_loss_weight * s.mask;
        side(&self.src) + side(&self.dst) + cfg.trueface_weight * self.trueface + cfg.gan_weight * self.gan
    }
}

#[derive(Debug, Clone)]
struct GanState {
    disc: Discriminator<f32>,
    adam: AdamState,
}

/// Model, optimizer state and iteration counter of one training run.
#[derive(Debug, Clone)]
pub struct TrainSession {
    model: Model<f32>,
    cfg: TrainConfig,
    adam: AdamState,
    gan: Option<GanState>,
    iteration: u64,
}

#[derive(Serialize, Deserialize)]
struct TrainStateManifest {
    iteration: u64,
    config: TrainConfig,
    adam_t: u64,
    disc_adam_t: Option<u64>,
    tensors: Vec<BundleEntry>,
}

/// RNG for iteration `k`: one stream per iteration index so that a resumed
/// run draws exactly what an uninterrupted run would.
pub fn iteration_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

impl TrainSession {
    pub fn new(model_cfg: ModelConfig, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let init = if cfg.cai_init { InitScheme::ConvAware } else { InitScheme::Glorot };
        let model = Model::build_with(model_cfg, cfg.seed, init)?;
        Self::from_model(model, cfg)
    }

    pub fn from_model(model: Model<f32>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = AdamState::new(model.params());
        let gan = (cfg.gan_weight > 0.0).then(|| {
            let disc = Discriminator::new(cfg.gan_channels, cfg.seed ^ DISC_SEED_SALT);
            let adam = AdamState::new(disc.params());
            GanState { disc, adam }
        });
        Ok(Self {
            model,
            cfg,
            adam,
            gan,
            iteration: 0,
        })
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Changes the planned iteration count, e.g. when extending a resumed run.
    /// Only the stored config changes; the training trajectory does not.
    pub fn set_iterations(&mut self, iterations: u64) {
        self.cfg.iterations = iterations;
    }

    pub fn discriminator(&self) -> Option<&Discriminator<f32>> {
        self.gan.as_ref().map(|g| &g.disc)
    }

    fn adam_config(&self, dropout: bool) -> AdamConfig {
        AdamConfig {
            lr: self.cfg.lr,
            beta1: self.cfg.beta1,
            beta2: self.cfg.beta2,
            lr_dropout_keep: if dropout { self.cfg.lr_dropout_keep } else { 1.0 },
        }
    }

    /// One optimization step on freshly sampled batches.
    pub fn step(&mut self, src: &FaceSet, dst: &FaceSet) -> Result<LossReport> {
        let res = self.model.config().resolution;
        for (side, set) in [("src", src), ("dst", dst)] {
            if set.is_empty() {
                return Err(Error::EmptyDataset(format!("{side} has no aligned faces")));
            }
            if set.size() != res {
                return Err(invalid(format!(
                    "{side} faces are {}px but the model resolution is {res}px",
                    set.size()
                )));
            }
        }
        let cfg = self.cfg;
        let mut rng = iteration_rng(cfg.seed, self.iteration);
        let sb = sample_batch::<f32, _>(src, cfg.batch_size, cfg.augment, &mut rng)?;
        let db = sample_batch::<f32, _>(dst, cfg.batch_size, cfg.augment, &mut rng)?;

        let mut g = Graph::new();
        let xs = g.input(sb.faces);
        let xd = g.input(db.faces.clone());
        let ms = g.input(sb.masks);
        let md = g.input(db.masks);
        let out = forward_train(&mut g, &self.model, xs, xd)?;
        let w = MixedWeights {
            dssim: cfg.dssim_weight,
            mse: cfg.mse_weight,
            mask: cfg.mask_loss_weight,
        };
        let side_s = mixed_loss(&mut g, out.pred_src, xs, out.pred_src_mask, ms, &sb.weights, &w)?;
        let side_d = mixed_loss(&mut g, out.pred_dst, xd, out.pred_dst_mask, md, &db.weights, &w)?;
        let mut total = g.add(side_s.total, side_d.total)?;
        let (ls, ld) = out.latents.trueface_pair();
        let tf = trueface_loss(&mut g, ls, ld)?;
        if cfg.trueface_weight > 0.0 {
            let t = g.mul_scalar(tf, cfg.trueface_weight);
            total = g.add(total, t)?;
        }
        let gen_term = match &self.gan {
            Some(gs) => {
                let d_fake = gs.disc.forward(&mut g, out.pred_dst, false)?;
                let gt = lsgan_generator(&mut g, d_fake);
                let t = g.mul_scalar(gt, cfg.gan_weight);
                total = g.add(total, t)?;
                Some(gt)
            }
            None => None,
        };
        let total_value = g.value(total).item() as f64;
        if !total_value.is_finite() {
            return Err(Error::NonFinite(format!("training loss at iteration {}", self.iteration + 1)));
        }
        let grads = g.backward(total)?;
        let acfg = self.adam_config(true);
        adam_step(self.model.params_mut(), &grads, &mut self.adam, &acfg, &mut rng)?;

        let val = |v| g.value(v).item() as f64;
        let mut gan_d = 0.0;
        if let Some(gs) = &mut self.gan {
            let mut g2 = Graph::new();
            let real = g2.input(db.faces);
            let fake = g2.input(g.value(out.pred_dst).clone());
            let dr = gs.disc.forward(&mut g2, real, true)?;
            let df = gs.disc.forward(&mut g2, fake, true)?;
            let dl = lsgan_discriminator(&mut g2, dr, df)?;
            gan_d = g2.value(dl).item() as f64;
            let dgrads = g2.backward(dl)?;
            let dcfg = AdamConfig {
                lr_dropout_keep: 1.0,
                ..acfg
            };
            adam_step(gs.disc.params_mut(), &dgrads, &mut gs.adam, &dcfg, &mut rng)?;
        }

        self.iteration += 1;
        let side = |t: &super::losses::SideTerms| SideReport {
            dssim: val(t.dssim),
            mse: val(t.mse),
            mask: t.mask.map_or(0.0, val),
        };
        let mut report = LossReport {
            iteration: self.iteration,
            total: 0.0,
            src: side(&side_s),
            dst: side(&side_d),
            trueface: val(tf),
            gan: gen_term.map_or(0.0, val),
            gan_discriminator: gan_d,
            latent_distance: latent_mean_distance(g.value(ls), g.value(ld)),
        };
        report.total = report.weighted_total(&cfg);
        Ok(report)
    }

    /// Writes model checkpoint plus optimizer/discriminator state into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.model.save(
            dir,
            CheckpointInfo {
                iteration: self.iteration,
                seed: self.cfg.seed,
            },
        )?;
        let mut arrays: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
        let push_adam = |arrays: &mut Vec<_>, prefix: &str, params: &ParamStore<f32>, st: &AdamState| {
            for (k, (_, name, t)) in params.iter().enumerate() {
                arrays.push((format!("{prefix}.m.{name}"), t.shape().to_vec(), st.m[k].clone()));
                arrays.push((format!("{prefix}.v.{name}"), t.shape().to_vec(), st.v[k].clone()));
            }
        };
        push_adam(&mut arrays, "adam", self.model.params(), &self.adam);
        if let Some(gs) = &self.gan {
            for (_, name, t) in gs.disc.params().iter() {
                arrays.push((name.to_string(), t.shape().to_vec(), t.data().to_vec()));
            }
            push_adam(&mut arrays, "disc_adam", gs.disc.params(), &gs.adam);
        }
        let tensors = write_bundle(
            &dir.join(TRAIN_STATE_BIN),
            arrays.iter().map(|(n, s, d)| (n.as_str(), s.as_slice(), d.as_slice())),
        )?;
        let manifest = TrainStateManifest {
            iteration: self.iteration,
            config: self.cfg,
            adam_t: self.adam.t,
            disc_adam_t: self.gan.as_ref().map(|g| g.adam.t),
            tensors,
        };
        let path = dir.join(TRAIN_STATE_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Saves into a sibling temporary directory and swaps it into place.
    pub fn save_atomic(&self, dir: &Path) -> Result<()> {
        let tmp = dir.with_extension("tmp");
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        self.save(&tmp)?;
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
    }

    /// Restores a session saved with [`TrainSession::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let (model, info) = Model::load(dir)?;
        let path = dir.join(TRAIN_STATE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: TrainStateManifest = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        if m.iteration != info.iteration {
            return Err(Error::CorruptCheckpoint("training state and weights disagree on iteration".into()));
        }
        let arrays = read_bundle(&dir.join(TRAIN_STATE_BIN), &m.tensors)?;
        let lookup = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let i = m
                .tensors
                .iter()
                .position(|e| e.name == name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
            if m.tensors[i].shape != shape {
                return Err(Error::CheckpointShape {
                    name: name.to_string(),
                    expected: shape.to_vec(),
                    found: m.tensors[i].shape.clone(),
                });
            }
            Ok(arrays[i].clone())
        };
        let read_adam = |prefix: &str, params: &ParamStore<f32>, t: u64| -> Result<AdamState> {
            let mut st = AdamState::new(params);
            st.t = t;
            for (k, (_, name, tensor)) in params.iter().enumerate() {
                st.m[k] = lookup(&format!("{prefix}.m.{name}"), tensor.shape())?;
                st.v[k] = lookup(&format!("{prefix}.v.{name}"), tensor.shape())?;
            }
            Ok(st)
        };
        let mut session = Self::from_model(model, m.config)?;
        session.iteration = m.iteration;
        session.adam = read_adam("adam", session.model.params(), m.adam_t)?;
        if let Some(gs) = &mut session.gan {
            let ids: Vec<_> = gs.disc.params().ids().collect();
            for id in ids {
                let name = gs.disc.params().name(id).to_string();
                let shape = gs.disc.params().get(id).shape().to_vec();
                *gs.disc.params_mut().get_mut(id) = Tensor::new(&shape, lookup(&name, &shape)?)?;
            }
            let t = m
                .disc_adam_t
                .ok_or_else(|| Error::CorruptCheckpoint("missing discriminator optimizer state".into()))?;
            gs.adam = read_adam("disc_adam", gs.disc.params(), t)?;
        }
        Ok(session)
    }
}

/// Runs `session` until it reaches `until` iterations, passing every report
/// to `sink`. With `checkpoint_dir` the session is saved every
/// `checkpoint_every` iterations and once at the end.
pub fn train(
    session: &mut TrainSession,
    src: &FaceSet,
    dst: &FaceSet,
    until: u64,
    checkpoint_dir: Option<&Path>,
    mut sink: impl FnMut(&LossReport) -> Result<()>,
) -> Result<()> {
    let every = session.cfg.checkpoint_every;
    while session.iteration < until {
        let report = session.step(src, dst)?;
        sink(&report)?;
        if let Some(dir) = checkpoint_dir {
            if every > 0 && session.iteration % every == 0 && session.iteration < until {
                session.save_atomic(dir)?;
            }
        }
    }
    if let Some(dir) = checkpoint_dir {
        session.save_atomic(dir)?;
    }
    Ok(())
}

/// Appends one JSON line per report.
pub fn append_loss_log(path: &Path, report: &LossReport) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(report).map_err(|e| Error::json(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

/// `‖μ_src − μ_dst‖` of the TrueFace latent pair over entire face sets.
pub fn dataset_latent_distance(model: &Model<f32>, src: &FaceSet, dst: &FaceSet) -> Result<f64> {
    let s: Vec<_> = src.samples().iter().map(|s| &s.face).collect();
    let d: Vec<_> = dst.samples().iter().map(|s| &s.face).collect();
    let mut g = Graph::new();
    let xs = g.input(images_to_tensor::<f32>(&s)?);
    let xd = g.input(images_to_tensor::<f32>(&d)?);
    let out = forward_train(&mut g, model, xs, xd)?;
    let (a, b) = out.latents.trueface_pair();
    Ok(latent_mean_distance(g.value(a), g.value(b)))
}
