use facelab_autograd::{Graph, ParamId, ParamStore, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensors::{images_to_tensor, tensor_to_images};
use crate::error::{invalid, Result};
use crate::imgcore::Image;

pub const LEAKY_SLOPE: f64 = 0.1;
const ENC_KERNEL: usize = 5;
const DEC_KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Df,
    Liae,
}

impl std::str::FromStr for Structure {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "df" => Ok(Structure::Df),
            "liae" => Ok(Structure::Liae),
            other => Err(invalid(format!("unknown model structure {other}"))),
        }
    }
}

/// Which identity the swapped face should carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Put the source identity onto destination footage.
    Src2dst,
    Dst2src,
}

impl std::str::FromStr for Direction {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "src2dst" => Ok(Direction::Src2dst),
            "dst2src" => Ok(Direction::Dst2src),
            other => Err(invalid(format!("unknown swap direction {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub structure: Structure,
    pub hd: bool,
    pub resolution: usize,
    pub base_channels: usize,
    pub ae_dims: usize,
    pub mask_head: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            structure: Structure::Df,
            hd: false,
            resolution: 96,
            base_channels: 64,
            ae_dims: 256,
            mask_head: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution % 16 != 0 {
            return Err(invalid(format!(
                "resolution must be a positive multiple of 16, got {}",
                self.resolution
            )));
        }
        if self.base_channels == 0 || self.ae_dims == 0 {
            return Err(invalid("channel counts must be positive"));
        }
        Ok(())
    }

    /// Side of the latent map.
    pub fn latent_side(&self) -> usize {
        self.resolution / 16
    }

    /// Channel count of one latent code.
    pub fn latent_channels(&self) -> usize {
        self.ae_dims
    }

    fn encoder_channels(&self) -> [usize; 4] {
        let b = self.base_channels;
        [b, 2 * b, 4 * b, 8 * b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Glorot-uniform weights, zero biases.
    Glorot,
    /// Convolution-aware (orthogonal) conv kernels, Glorot dense layers.
    ConvAware,
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct ResIds {
    a: ConvIds,
    b: ConvIds,
}

#[derive(Debug, Clone)]
struct EncoderIds {
    convs: Vec<ConvIds>,
    res: Vec<ResIds>,
}

#[derive(Debug, Clone)]
struct InterIds {
    d0: ConvIds,
    d1: ConvIds,
}

#[derive(Debug, Clone)]
struct DecoderIds {
    ups: Vec<ConvIds>,
    res: Vec<ResIds>,
    out: ConvIds,
    mask: Option<ConvIds>,
}

#[derive(Debug, Clone)]
enum Topology {
    Df {
        encoder: EncoderIds,
        inter: InterIds,
        dec_src: DecoderIds,
        dec_dst: DecoderIds,
    },
    Liae {
        encoder: EncoderIds,
        inter_ab: InterIds,
        inter_b: InterIds,
        decoder: DecoderIds,
    },
}

/// Network weights plus the wiring that uses them.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    config: ModelConfig,
    params: ParamStore<T>,
    topo: Topology,
}

struct Builder<'a, T: Scalar> {
    store: ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
    init: InitScheme,
}

impl<T: Scalar> Builder<'_, T> {
    fn glorot(&mut self, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::from_f64(self.rng.random_range(-limit..limit))).collect();
        Tensor::new(shape, data).expect("shape matches data")
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> ConvIds {
        let shape = [cout, cin, k, k];
        let w = match self.init {
            InitScheme::Glorot => self.glorot(&shape, cin * k * k, cout * k * k),
            InitScheme::ConvAware => crate::training::cai_init(&shape, self.rng)
                .expect("4-d conv shape")
                .cast(),
        };
        ConvIds {
            w: self.store.register(format!("{name}.weight"), w),
            b: self.store.register(format!("{name}.bias"), Tensor::zeros(&[cout])),
        }
    }

    fn dense(&mut self, name: &str, inp: usize, out: usize) -> ConvIds {
        let w = self.glorot(&[out, inp], inp, out);
        ConvIds {
            w: self.store.register(format!("{name}.weight"), w),
            b: self.store.register(format!("{name}.bias"), Tensor::zeros(&[out])),
        }
    }

    fn res(&mut self, name: &str, c: usize) -> ResIds {
        ResIds {
            a: self.conv(&format!("{name}.conv_a"), c, c, DEC_KERNEL),
            b: self.conv(&format!("{name}.conv_b"), c, c, DEC_KERNEL),
        }
    }

    fn encoder(&mut self, cfg: &ModelConfig) -> EncoderIds {
        let ch = cfg.encoder_channels();
        let mut convs = Vec::new();
        let mut res = Vec::new();
        let mut cin = 3;
        for (i, &c) in ch.iter().enumerate() {
            convs.push(self.conv(&format!("encoder.conv{i}"), cin, c, ENC_KERNEL));
            if cfg.hd {
                res.push(self.res(&format!("encoder.res{i}"), c));
            }
            cin = c;
        }
        EncoderIds { convs, res }
    }

    fn inter(&mut self, name: &str, cfg: &ModelConfig) -> InterIds {
        let r = cfg.latent_side();
        let flat = cfg.encoder_channels()[3] * r * r;
        InterIds {
            d0: self.dense(&format!("{name}.dense0"), flat, cfg.ae_dims),
            d1: self.dense(&format!("{name}.dense1"), cfg.ae_dims, r * r * cfg.latent_channels()),
        }
    }

    fn decoder(&mut self, name: &str, cfg: &ModelConfig, cin: usize) -> DecoderIds {
        let b = cfg.base_channels;
        let mut ups = Vec::new();
        let mut res = Vec::new();
        let mut c_in = cin;
        for (i, c) in [8 * b, 4 * b, 2 * b, b].into_iter().enumerate() {
            ups.push(self.conv(&format!("{name}.up{i}"), c_in, 4 * c, DEC_KERNEL));
            if cfg.hd {
                res.push(self.res(&format!("{name}.res{i}"), c));
            }
            c_in = c;
        }
        let out = self.conv(&format!("{name}.out"), b, 3, DEC_KERNEL);
        let mask = cfg.mask_head.then(|| self.conv(&format!("{name}.mask"), b, 1, DEC_KERNEL));
        DecoderIds { ups, res, out, mask }
    }
}

fn bind<T: Scalar>(g: &mut Graph<T>, p: &ParamStore<T>, c: ConvIds) -> (Var, Var) {
    (g.param(p, c.w), g.param(p, c.b))
}

fn encode<T: Scalar>(g: &mut Graph<T>, p: &ParamStore<T>, e: &EncoderIds, x: Var) -> Result<Var> {
    let mut h = x;
    for (i, c) in e.convs.iter().enumerate() {
        let (w, b) = bind(g, p, *c);
        h = g.conv2d(h, w, 2)?;
        h = g.add_channel_bias(h, b)?;
        h = g.leaky_relu(h, LEAKY_SLOPE);
        if let Some(r) = e.res.get(i) {
            let (a, b) = (bind(g, p, r.a), bind(g, p, r.b));
            h = g.residual_block(h, a, b, LEAKY_SLOPE)?;
        }
    }
    Ok(h)
}

fn inter<T: Scalar>(g: &mut Graph<T>, p: &ParamStore<T>, ids: &InterIds, cfg: &ModelConfig, h: Var) -> Result<Var> {
    let n = g.shape(h)[0];
    let flat = g.flatten(h)?;
    let (w0, b0) = bind(g, p, ids.d0);
    let z = g.dense(flat, w0, b0)?;
    let (w1, b1) = bind(g, p, ids.d1);
    let z = g.dense(z, w1, b1)?;
    let r = cfg.latent_side();
    Ok(g.reshape(z, &[n, cfg.latent_channels(), r, r])?)
}

fn decode<T: Scalar>(g: &mut Graph<T>, p: &ParamStore<T>, d: &DecoderIds, z: Var) -> Result<(Var, Option<Var>)> {
    let mut h = z;
    for (i, c) in d.ups.iter().enumerate() {
        let (w, b) = bind(g, p, *c);
        h = g.upscale2x(h, w, b, LEAKY_SLOPE)?;
        if let Some(r) = d.res.get(i) {
            let (a, b) = (bind(g, p, r.a), bind(g, p, r.b));
            h = g.residual_block(h, a, b, LEAKY_SLOPE)?;
        }
    }
    let (w, b) = bind(g, p, d.out);
    let img = g.conv2d(h, w, 1)?;
    let img = g.add_channel_bias(img, b)?;
    let img = g.sigmoid(img);
    let mask = match d.mask {
        Some(m) => {
            let (w, b) = bind(g, p, m);
            let y = g.conv2d(h, w, 1)?;
            let y = g.add_channel_bias(y, b)?;
            Some(g.sigmoid(y))
        }
        None => None,
    };
    Ok((img, mask))
}

/// Latent codes produced during a training pass.
#[derive(Debug, Clone, Copy)]
pub enum Latents {
    Df { src: Var, dst: Var },
    Liae { src_ab: Var, dst_ab: Var, dst_b: Var },
}

impl Latents {
    /// The pair that TrueFace pulls together: `(src side, dst side)`.
    pub fn trueface_pair(&self) -> (Var, Var) {
        match *self {
            Latents::Df { src, dst } => (src, dst),
            Latents::Liae { src_ab, dst_ab, .. } => (src_ab, dst_ab),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOutputs {
    pub pred_src: Var,
    pub pred_src_mask: Option<Var>,
    pub pred_dst: Var,
    pub pred_dst_mask: Option<Var>,
    pub latents: Latents,
}

/// Reconstruction pass over both identities, recorded on `g`.
pub fn forward_train<T: Scalar>(g: &mut Graph<T>, model: &Model<T>, src: Var, dst: Var) -> Result<TrainOutputs> {
    model.check_input(g.shape(src))?;
    model.check_input(g.shape(dst))?;
    let (p, cfg) = (&model.params, &model.config);
    match &model.topo {
        Topology::Df {
            encoder,
            inter: it,
            dec_src,
            dec_dst,
        } => {
            let hs = encode(g, p, encoder, src)?;
            let zs = inter(g, p, it, cfg, hs)?;
            let hd = encode(g, p, encoder, dst)?;
            let zd = inter(g, p, it, cfg, hd)?;
            let (pred_src, pred_src_mask) = decode(g, p, dec_src, zs)?;
            let (pred_dst, pred_dst_mask) = decode(g, p, dec_dst, zd)?;
            Ok(TrainOutputs {
                pred_src,
                pred_src_mask,
                pred_dst,
                pred_dst_mask,
                latents: Latents::Df { src: zs, dst: zd },
            })
        }
        Topology::Liae {
            encoder,
            inter_ab,
            inter_b,
            decoder,
        } => {
            let hs = encode(g, p, encoder, src)?;
            let src_ab = inter(g, p, inter_ab, cfg, hs)?;
            let hd = encode(g, p, encoder, dst)?;
            let dst_ab = inter(g, p, inter_ab, cfg, hd)?;
            let dst_b = inter(g, p, inter_b, cfg, hd)?;
            let zs = g.concat_channels(src_ab, src_ab)?;
            let zd = g.concat_channels(dst_ab, dst_b)?;
            let (pred_src, pred_src_mask) = decode(g, p, decoder, zs)?;
            let (pred_dst, pred_dst_mask) = decode(g, p, decoder, zd)?;
            Ok(TrainOutputs {
                pred_src,
                pred_src_mask,
                pred_dst,
                pred_dst_mask,
                latents: Latents::Liae { src_ab, dst_ab, dst_b },
            })
        }
    }
}

impl<T: Scalar> Model<T> {
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::build_with(config, seed, InitScheme::Glorot)
    }

    pub fn build_with(config: ModelConfig, seed: u64, init: InitScheme) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            store: ParamStore::new(),
            rng: &mut rng,
            init,
        };
        let encoder = b.encoder(&config);
        let topo = match config.structure {
            Structure::Df => {
                let inter = b.inter("inter", &config);
                let dec_src = b.decoder("decoder_src", &config, config.latent_channels());
                let dec_dst = b.decoder("decoder_dst", &config, config.latent_channels());
                Topology::Df {
                    encoder,
                    inter,
                    dec_src,
                    dec_dst,
                }
            }
            Structure::Liae => {
                let inter_ab = b.inter("inter_ab", &config);
                let inter_b = b.inter("inter_b", &config);
                let decoder = b.decoder("decoder", &config, 2 * config.latent_channels());
                Topology::Liae {
                    encoder,
                    inter_ab,
                    inter_b,
                    decoder,
                }
            }
        };
        Ok(Self {
            config,
            params: b.store,
            topo,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Same topology with parameters converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config,
            params: self.params.cast(),
            topo: self.topo.clone(),
        }
    }

    /// Replaces all parameters; names and shapes must match exactly.
    pub fn with_params(&self, params: ParamStore<T>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(invalid("parameter count mismatch"));
        }
        for ((_, a, ta), (_, b, tb)) in self.params.iter().zip(params.iter()) {
            if a != b || ta.shape() != tb.shape() {
                return Err(invalid(format!("parameter {a} does not match {b}")));
            }
        }
        Ok(Self {
            config: self.config,
            params,
            topo: self.topo.clone(),
        })
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let r = self.config.resolution;
        if shape.len() != 4 || shape[1] != 3 || shape[2] != r || shape[3] != r {
            return Err(invalid(format!(
                "model expects (N, 3, {r}, {r}) input, got {shape:?}"
            )));
        }
        Ok(())
    }

    /// Swap pass recorded on `g`; returns image and (if present) mask nodes.
    pub fn swap_graph(&self, g: &mut Graph<T>, faces: Var, direction: Direction) -> Result<(Var, Option<Var>)> {
        self.check_input(g.shape(faces))?;
        let (p, cfg) = (&self.params, &self.config);
        match (&self.topo, direction) {
            (Topology::Df { encoder, inter: it, dec_src, dec_dst }, dir) => {
                let h = encode(g, p, encoder, faces)?;
                let z = inter(g, p, it, cfg, h)?;
                decode(g, p, if dir == Direction::Src2dst { dec_src } else { dec_dst }, z)
            }
            (Topology::Liae { encoder, inter_ab, inter_b, decoder }, dir) => {
                let h = encode(g, p, encoder, faces)?;
                let ab = inter(g, p, inter_ab, cfg, h)?;
                let z = if dir == Direction::Src2dst {
                    g.concat_channels(ab, ab)?
                } else {
                    let b = inter(g, p, inter_b, cfg, h)?;
                    g.concat_channels(ab, b)?
                };
                decode(g, p, decoder, z)
            }
        }
    }

    /// Swapped faces and masks for a batch of aligned faces. Without a mask
    /// head the mask is all ones.
    pub fn predict_swap_batch(&self, faces: &[&Image], direction: Direction) -> Result<Vec<(Image, Image)>> {
        let x = images_to_tensor::<T>(faces)?;
        let mut g = Graph::new();
        let xv = g.input(x);
        let (img, mask) = self.swap_graph(&mut g, xv, direction)?;
        let imgs = tensor_to_images(g.value(img))?;
        let masks = match mask {
            Some(m) => tensor_to_images(g.value(m))?,
            None => imgs
                .iter()
                .map(|i| Image::filled(i.height(), i.width(), &[1.0]))
                .collect(),
        };
        Ok(imgs.into_iter().zip(masks).collect())
    }

    pub fn predict_swap(&self, face: &Image, direction: Direction) -> Result<(Image, Image)> {
        let mut v = self.predict_swap_batch(&[face], direction)?;
        Ok(v.pop().expect("one output per input"))
    }
}
