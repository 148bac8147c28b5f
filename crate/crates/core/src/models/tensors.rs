use facelab_autograd::{Scalar, Tensor};

use crate::error::{invalid, Result};
use crate::imgcore::Image;

/// Stacks equally sized images into an NCHW tensor.
pub fn images_to_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| invalid("empty image batch"))?;
    let (h, w, c) = (first.height(), first.width(), first.channels());
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if !img.same_dims(first) {
            return Err(invalid("images in a batch must share dimensions"));
        }
        let d = img.data();
        for ch in 0..c {
            data.extend((0..h * w).map(|p| T::from_f64(d[p * c + ch])));
        }
    }
    Ok(Tensor::new(&[images.len(), c, h, w], data)?)
}

/// One-channel images as an `(N, 1, H, W)` tensor.
pub fn masks_to_tensor<T: Scalar>(masks: &[&Image]) -> Result<Tensor<T>> {
    if masks.iter().any(|m| m.channels() != 1) {
        return Err(invalid("masks must have one channel"));
    }
    images_to_tensor(masks)
}

/// Splits an NCHW tensor back into HWC images (values are not clamped).
pub fn tensor_to_images<T: Scalar>(t: &Tensor<T>) -> Result<Vec<Image>> {
    let (n, c, h, w) = t.dims4();
    let d = t.data();
    (0..n)
        .map(|i| {
            let base = i * c * h * w;
            let mut data = vec![0.0; c * h * w];
            for ch in 0..c {
                for p in 0..h * w {
                    data[p * c + ch] = d[base + ch * h * w + p].to_f64();
                }
            }
            Image::new(h, w, c, data)
        })
        .collect()
}
