//! Raw compute kernels on flat NCHW buffers. Shapes are validated by the graph.

use crate::scalar::Scalar;

/// Geometry of a "same"-padded strided convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub h_out: usize,
    pub w_out: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    pub fn new(c_in: usize, c_out: usize, h: usize, w: usize, k: usize, stride: usize) -> Self {
        let h_out = h.div_ceil(stride);
        let w_out = w.div_ceil(stride);
        let pad_h = ((h_out - 1) * stride + k).saturating_sub(h);
        let pad_w = ((w_out - 1) * stride + k).saturating_sub(w);
        Self {
            c_in,
            c_out,
            h,
            w,
            k,
            stride,
            h_out,
            w_out,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
        }
    }

    fn rows(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.h_out * self.w_out
    }

    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.stride == 1
    }
}

fn im2col<T: Scalar>(g: &ConvGeom, x: &[T], cols: &mut [T]) {
    let p = g.cols();
    for c in 0..g.c_in {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.h_out {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    let out_row = &mut dst[oy * g.w_out..(oy + 1) * g.w_out];
                    if iy < 0 || iy >= g.h as isize {
                        out_row.fill(T::ZERO);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        *o = if ix < 0 || ix >= g.w as isize {
                            T::ZERO
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(g: &ConvGeom, cols: &[T], dx: &mut [T]) {
    let p = g.cols();
    for c in 0..g.c_in {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.h_out {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.w_out {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.w_out + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Scalar>(g: &ConvGeom, n: usize, x: &[T], w: &[T]) -> Vec<T> {
    let (kk, p) = (g.rows(), g.cols());
    let in_sz = g.c_in * g.h * g.w;
    let out_sz = g.c_out * p;
    let mut out = vec![T::ZERO; n * out_sz];
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::ZERO; kk * p]
    };
    for b in 0..n {
        let xb = &x[b * in_sz..(b + 1) * in_sz];
        let cols_ref: &[T] = if g.is_pointwise() {
            xb
        } else {
            im2col(g, xb, &mut cols);
            &cols
        };
        T::gemm(
            g.c_out,
            kk,
            p,
            T::ONE,
            w,
            kk,
            1,
            cols_ref,
            p,
            1,
            T::ZERO,
            &mut out[b * out_sz..(b + 1) * out_sz],
            p,
            1,
        );
    }
    out
}

/// Returns `(dx, dw)`; `dx` is skipped (empty) when `want_dx` is false.
pub(crate) fn conv2d_backward<T: Scalar>(
    g: &ConvGeom,
    n: usize,
    x: &[T],
    w: &[T],
    dout: &[T],
    want_dx: bool,
    want_dw: bool,
) -> (Vec<T>, Vec<T>) {
    let (kk, p) = (g.rows(), g.cols());
    let in_sz = g.c_in * g.h * g.w;
    let out_sz = g.c_out * p;
    let mut dw = if want_dw {
        vec![T::ZERO; g.c_out * kk]
    } else {
        Vec::new()
    };
    let mut dx = if want_dx {
        vec![T::ZERO; n * in_sz]
    } else {
        Vec::new()
    };
    let mut cols = vec![T::ZERO; if g.is_pointwise() { 0 } else { kk * p }];
    let mut dcols = vec![T::ZERO; if want_dx && !g.is_pointwise() { kk * p } else { 0 }];
    for b in 0..n {
        let db = &dout[b * out_sz..(b + 1) * out_sz];
        if want_dw {
            let xb = &x[b * in_sz..(b + 1) * in_sz];
            let cols_ref: &[T] = if g.is_pointwise() {
                xb
            } else {
                im2col(g, xb, &mut cols);
                &cols
            };
            // dw[O,K] += dout[O,P] · cols[K,P]^T
            T::gemm(
                g.c_out, p, kk, T::ONE, db, p, 1, cols_ref, 1, p, T::ONE, &mut dw, kk, 1,
            );
        }
        if want_dx {
            let dxb = &mut dx[b * in_sz..(b + 1) * in_sz];
            if g.is_pointwise() {
                T::gemm(kk, g.c_out, p, T::ONE, w, 1, kk, db, p, 1, T::ZERO, dxb, p, 1);
            } else {
                // dcols[K,P] = w[O,K]^T · dout[O,P]
                T::gemm(
                    kk, g.c_out, p, T::ONE, w, 1, kk, db, p, 1, T::ZERO, &mut dcols, p, 1,
                );
                col2im(g, &dcols, dxb);
            }
        }
    }
    (dx, dw)
}

/// Pixel shuffle: `(N, 4C, H, W)` to `(N, C, 2H, 2W)`, with
/// `out[c, 2y+i, 2x+j] = in[4c + 2i + j, y, x]`.
pub(crate) fn depth_to_space<T: Scalar>(
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    x: &[T],
    inverse: bool,
) -> Vec<T> {
    let mut out = vec![T::ZERO; x.len()];
    let (h2, w2) = (2 * h, 2 * w);
    for b in 0..n {
        for co in 0..c {
            for i in 0..2 {
                for j in 0..2 {
                    let ci = 4 * co + 2 * i + j;
                    for y in 0..h {
                        for xx in 0..w {
                            let src = ((b * 4 * c + ci) * h + y) * w + xx;
                            let dst = ((b * c + co) * h2 + 2 * y + i) * w2 + 2 * xx + j;
                            if inverse {
                                out[src] = x[dst];
                            } else {
                                out[dst] = x[src];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Separable same-size filter with replicated borders, applied per plane.
pub(crate) fn separable_filter<T: Scalar>(
    planes: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    x: &[T],
) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![T::ZERO; x.len()];
    let mut out = vec![T::ZERO; x.len()];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let t = &mut tmp[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let mut acc = T::ZERO;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let ix = (xx as isize + ki as isize - r).clamp(0, w as isize - 1) as usize;
                    acc += kv * src[y * w + ix];
                }
                t[y * w + xx] = acc;
            }
        }
        let o = &mut out[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let mut acc = T::ZERO;
                for (ki, &kv) in kernel.iter().enumerate() {
                    let iy = (y as isize + ki as isize - r).clamp(0, h as isize - 1) as usize;
                    acc += kv * t[iy * w + xx];
                }
                o[y * w + xx] = acc;
            }
        }
    }
    out
}

/// Adjoint of [`separable_filter`].
pub(crate) fn separable_filter_adjoint<T: Scalar>(
    planes: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    dout: &[T],
) -> Vec<T> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![T::ZERO; dout.len()];
    let mut dx = vec![T::ZERO; dout.len()];
    for p in 0..planes {
        let d = &dout[p * h * w..(p + 1) * h * w];
        let t = &mut tmp[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let g = d[y * w + xx];
                for (ki, &kv) in kernel.iter().enumerate() {
                    let iy = (y as isize + ki as isize - r).clamp(0, h as isize - 1) as usize;
                    t[iy * w + xx] += kv * g;
                }
            }
        }
        let o = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                let g = t[y * w + xx];
                for (ki, &kv) in kernel.iter().enumerate() {
                    let ix = (xx as isize + ki as isize - r).clamp(0, w as isize - 1) as usize;
                    o[y * w + ix] += kv * g;
                }
            }
        }
    }
    dx
}
