use facelab_autograd::{Graph, ParamId, ParamStore, Scalar, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::LEAKY_SLOPE;

const KERNEL: usize = 5;

/// Patch discriminator: three stride-2 convolutions (3 → c → 2c → 1), leaky
/// ReLU between them, raw scores out. A 96×96 input yields a 12×12 map.
#[derive(Debug, Clone)]
pub struct Discriminator<T: Scalar = f32> {
    params: ParamStore<T>,
    layers: Vec<(ParamId, ParamId)>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let widths = [3, channels, 2 * channels, 1];
        let layers = (0..3)
            .map(|i| {
                let (cin, cout) = (widths[i], widths[i + 1]);
                let fan = (cin + cout) * KERNEL * KERNEL;
                let limit = (6.0 / fan as f64).sqrt();
                let n = cout * cin * KERNEL * KERNEL;
                let w: Vec<T> = (0..n).map(|_| T::from_f64(rng.random_range(-limit..limit))).collect();
                let w = params.register(
                    format!("disc.conv{i}.weight"),
                    Tensor::new(&[cout, cin, KERNEL, KERNEL], w).expect("shape matches"),
                );
                let b = params.register(format!("disc.conv{i}.bias"), Tensor::zeros(&[cout]));
                (w, b)
            })
            .collect();
        Self { params, layers }
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Score map for `x`. With `trainable` false the weights enter as
    /// constants, so only `x` receives gradients.
    pub fn forward(&self, g: &mut Graph<T>, x: Var, trainable: bool) -> Result<Var> {
        let mut h = x;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let (w, b) = if trainable {
                (g.param(&self.params, w), g.param(&self.params, b))
            } else {
                (g.frozen_param(&self.params, w), g.frozen_param(&self.params, b))
            };
            h = g.conv2d(h, w, 2)?;
            h = g.add_channel_bias(h, b)?;
            if i + 1 < self.layers.len() {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }
}

fn mean_sq_offset<T: Scalar>(g: &mut Graph<T>, d: Var, target: f64) -> Var {
    let e = g.add_scalar(d, -target);
    let sq = g.square(e);
    g.mean(sq)
}

/// Least-squares generator term `mean((D(fake) − 1)²)`.
pub fn lsgan_generator<T: Scalar>(g: &mut Graph<T>, d_fake: Var) -> Var {
    mean_sq_offset(g, d_fake, 1.0)
}

/// Least-squares discriminator loss `½·[mean((D(real) − 1)²) + mean(D(fake)²)]`.
pub fn lsgan_discriminator<T: Scalar>(g: &mut Graph<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    let r = mean_sq_offset(g, d_real, 1.0);
    let f = mean_sq_offset(g, d_fake, 0.0);
    let s = g.add(r, f)?;
    Ok(g.mul_scalar(s, 0.5))
}
