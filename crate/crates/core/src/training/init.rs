use facelab_autograd::Tensor;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Convolution-aware initialization for an `(O, C, k, k)` kernel.
///
/// When `O ≤ C·k²` the flattened filters are the orthonormal columns of the
/// QR factorization of a Gaussian matrix, so each filter has unit norm and a
/// conv layer preserves the variance of unit-variance white input. With more
/// filters than basis vectors the filters are Gaussian with variance
/// `1/(C·k²)`, which has the same expected norm.
pub fn cai_init<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Tensor<f64>> {
    let &[o, c, kh, kw] = shape else {
        return Err(invalid(format!("convolution-aware init needs a 4-d shape, got {shape:?}")));
    };
    let n = c * kh * kw;
    if o == 0 || n == 0 {
        return Err(invalid("empty kernel shape"));
    }
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let data = if o <= n {
        let a = DMatrix::<f64>::from_fn(n, o, |_, _| draw());
        let qr = a.qr();
        let q = qr.q();
        let r = qr.r();
        let mut out = Vec::with_capacity(o * n);
        for j in 0..o {
            // Sign fix makes the result independent of the QR routine's convention.
            let s = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
            out.extend((0..n).map(|i| s * q[(i, j)]));
        }
        out
    } else {
        let std = 1.0 / (n as f64).sqrt();
        (0..o * n).map(|_| std * draw()).collect()
    };
    Ok(Tensor::new(shape, data)?)
}
