use std::collections::HashMap;

use crate::error::{AutogradError, Result};
use crate::kernels::{self, ConvGeom};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    Param,
    Conv2d { x: Var, w: Var, stride: usize },
    AddChannelBias { x: Var, b: Var },
    Dense { x: Var, w: Var, b: Var },
    LeakyRelu { x: Var, slope: T },
    Sigmoid { x: Var },
    DepthToSpace { x: Var },
    ConcatChannels { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Div { a: Var, b: Var },
    AddScalar { x: Var },
    MulScalar { x: Var, s: T },
    Square { x: Var },
    Reshape { x: Var },
    Filter { x: Var, kernel: Vec<T> },
    Mean { x: Var },
    Sum { x: Var },
    WeightedMean { x: Var, weights: Tensor<T> },
    ChannelStats { x: Var },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Operation tape for one forward pass.
///
/// Nodes are appended in execution order, so the tape is a topological order
/// by construction and [`Graph::backward`] simply walks it in reverse.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    bound: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(AutogradError::ShapeMismatch {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(())
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            bound: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Constant leaf; never receives a gradient.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Constant copy of `v`'s current value (stop-gradient).
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.input(value)
    }

    /// Binds a trainable parameter. Binding the same id twice returns the same
    /// node, so every use contributes to one gradient.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.bound.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param, true);
        self.bound.insert(id, v);
        v
    }

    /// Binds a parameter's value as a constant (no gradient flows to it).
    pub fn frozen_param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.input(store.get(id).clone())
    }

    /// "Same"-padded 2-d convolution, NCHW input, `(O, C, k, k)` weight, odd `k`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(AutogradError::ShapeMismatch {
                op: "conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        if ws[2] != ws[3] || ws[2] % 2 == 0 {
            return Err(AutogradError::InvalidShape {
                op: "conv2d",
                shape: ws,
                reason: "kernel must be square with odd size",
            });
        }
        if stride != 1 && stride != 2 {
            return Err(AutogradError::InvalidShape {
                op: "conv2d",
                shape: ws,
                reason: "stride must be 1 or 2",
            });
        }
        let g = ConvGeom::new(xs[1], ws[0], xs[2], xs[3], ws[2], stride);
        let out = kernels::conv2d_forward(&g, xs[0], self.value(x).data(), self.value(w).data());
        let value = Tensor::from_parts(vec![xs[0], ws[0], g.h_out, g.w_out], out);
        let ng = self.needs(x) || self.needs(w);
        Ok(self.push(value, Op::Conv2d { x, w, stride }, ng))
    }

    /// Adds a per-channel bias to an `(N, C, ...)` tensor.
    pub fn add_channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4();
        if self.shape(b) != [c] {
            return Err(AutogradError::ShapeMismatch {
                op: "add_channel_bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let hw = h * w;
        let bias = self.value(b).data().to_vec();
        let mut out = self.value(x).data().to_vec();
        for i in 0..n {
            for (ci, &bv) in bias.iter().enumerate() {
                for v in &mut out[(i * c + ci) * hw..(i * c + ci + 1) * hw] {
                    *v += bv;
                }
            }
        }
        let value = Tensor::from_parts(self.shape(x).to_vec(), out);
        let ng = self.needs(x) || self.needs(b);
        Ok(self.push(value, Op::AddChannelBias { x, b }, ng))
    }

    /// Affine map `x · wᵀ + b` with `x: (N, I)`, `w: (O, I)`, `b: (O)`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(AutogradError::ShapeMismatch {
                op: "dense",
                lhs: xs,
                rhs: ws,
            });
        }
        if self.shape(b) != [ws[0]] {
            return Err(AutogradError::ShapeMismatch {
                op: "dense",
                lhs: ws,
                rhs: self.shape(b).to_vec(),
            });
        }
        let (n, i, o) = (xs[0], xs[1], ws[0]);
        let mut out = Vec::with_capacity(n * o);
        for _ in 0..n {
            out.extend_from_slice(self.value(b).data());
        }
        T::gemm(
            n,
            i,
            o,
            T::ONE,
            self.value(x).data(),
            i,
            1,
            self.value(w).data(),
            1,
            i,
            T::ONE,
            &mut out,
            o,
            1,
        );
        let value = Tensor::from_parts(vec![n, o], out);
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(value, Op::Dense { x, w, b }, ng))
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_parts(src.shape().to_vec(), data);
        let ng = self.needs(x);
        self.push(value, op, ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        self.unary(x, Op::LeakyRelu { x, slope: s }, |v| {
            if v > T::ZERO {
                v
            } else {
                v * s
            }
        })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid { x }, |v| T::ONE / (T::ONE + (-v).exp()))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        self.unary(x, Op::AddScalar { x }, |v| v + s)
    }

    pub fn mul_scalar(&mut self, x: Var, s: f64) -> Var {
        let s = T::from_f64(s);
        self.unary(x, Op::MulScalar { x, s }, |v| v * s)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square { x }, |v| v * v)
    }

    /// Pixel shuffle `(N, 4C, H, W)` to `(N, C, 2H, 2W)`.
    pub fn depth_to_space(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || xs[1] % 4 != 0 {
            return Err(AutogradError::InvalidShape {
                op: "depth_to_space",
                shape: xs,
                reason: "expected NCHW with channels divisible by 4",
            });
        }
        let c = xs[1] / 4;
        let out = kernels::depth_to_space(xs[0], c, xs[2], xs[3], self.value(x).data(), false);
        let value = Tensor::from_parts(vec![xs[0], c, xs[2] * 2, xs[3] * 2], out);
        let ng = self.needs(x);
        Ok(self.push(value, Op::DepthToSpace { x }, ng))
    }

    /// Concatenates two tensors along the channel axis (axis 1).
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() != sb.len() || sa.len() < 2 || sa[0] != sb[0] || sa[2..] != sb[2..] {
            return Err(AutogradError::ShapeMismatch {
                op: "concat_channels",
                lhs: sa,
                rhs: sb,
            });
        }
        let (n, ca, h, w) = self.value(a).dims4();
        let cb = sb[1];
        let hw = h * w;
        let mut out = Vec::with_capacity(n * (ca + cb) * hw);
        for i in 0..n {
            out.extend_from_slice(&self.value(a).data()[i * ca * hw..(i + 1) * ca * hw]);
            out.extend_from_slice(&self.value(b).data()[i * cb * hw..(i + 1) * cb * hw]);
        }
        let mut shape = sa.clone();
        shape[1] = ca + cb;
        let value = Tensor::from_parts(shape, out);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::ConcatChannels { a, b }, ng))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var> {
        same_shape(name, self.shape(a), self.shape(b))?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::from_parts(self.shape(a).to_vec(), data);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, Op::Add { a, b }, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, Op::Sub { a, b }, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, Op::Mul { a, b }, |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, Op::Div { a, b }, |x, y| x / y)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let ng = self.needs(x);
        Ok(self.push(value, Op::Reshape { x }, ng))
    }

    /// Flattens `(N, ...)` to `(N, rest)`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x);
        let n = s[0];
        let rest = s[1..].iter().product::<usize>().max(1);
        self.reshape(x, &[n, rest])
    }

    /// Same-size separable filtering of every `(H, W)` plane with replicated
    /// borders. `kernel` is the 1-d tap vector (odd length).
    pub fn separable_filter(&mut self, x: Var, kernel: &[f64]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || kernel.len() % 2 == 0 {
            return Err(AutogradError::InvalidShape {
                op: "separable_filter",
                shape: xs,
                reason: "expected NCHW input and odd kernel",
            });
        }
        let k: Vec<T> = kernel.iter().map(|&v| T::from_f64(v)).collect();
        let out = kernels::separable_filter(xs[0] * xs[1], xs[2], xs[3], &k, self.value(x).data());
        let value = Tensor::from_parts(xs, out);
        let ng = self.needs(x);
        Ok(self.push(value, Op::Filter { x, kernel: k }, ng))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let n = T::from_f64(src.len() as f64);
        let s: T = src.data().iter().copied().sum();
        let ng = self.needs(x);
        self.push(Tensor::scalar(s / n), Op::Mean { x }, ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, ng)
    }

    /// `Σ w[n,p]·x[n,c,p] / (C·Σ w)` for `x: (N, C, H, W)` and constant
    /// per-pixel weights `(N, H, W)` shared across channels.
    pub fn weighted_mean(&mut self, x: Var, weights: &Tensor<T>) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4();
        if weights.shape() != [n, h, w] {
            return Err(AutogradError::ShapeMismatch {
                op: "weighted_mean",
                lhs: self.shape(x).to_vec(),
                rhs: weights.shape().to_vec(),
            });
        }
        let hw = h * w;
        let wsum: T = weights.data().iter().copied().sum();
        let xd = self.value(x).data();
        let mut acc = T::ZERO;
        for i in 0..n {
            let wrow = &weights.data()[i * hw..(i + 1) * hw];
            for ci in 0..c {
                let plane = &xd[(i * c + ci) * hw..(i * c + ci + 1) * hw];
                for (&wv, &xv) in wrow.iter().zip(plane) {
                    acc += wv * xv;
                }
            }
        }
        let value = Tensor::scalar(acc / (T::from_f64(c as f64) * wsum));
        let ng = self.needs(x);
        Ok(self.push(
            value,
            Op::WeightedMean {
                x,
                weights: weights.clone(),
            },
            ng,
        ))
    }

    /// Per-channel mean and standard deviation over batch and spatial axes.
    ///
    /// Output has shape `(2, C)`: row 0 holds means, row 1 holds
    /// `sqrt(var + 1e-8)`.
    pub fn channel_stats(&mut self, x: Var) -> Var {
        let (n, c, h, w) = self.value(x).dims4();
        let hw = h * w;
        let m = T::from_f64((n * hw) as f64);
        let xd = self.value(x).data();
        let mut out = vec![T::ZERO; 2 * c];
        for ci in 0..c {
            let mut s = T::ZERO;
            for i in 0..n {
                s += xd[(i * c + ci) * hw..(i * c + ci + 1) * hw]
                    .iter()
                    .copied()
                    .sum::<T>();
            }
            let mu = s / m;
            let mut v = T::ZERO;
            for i in 0..n {
                for &xv in &xd[(i * c + ci) * hw..(i * c + ci + 1) * hw] {
                    v += (xv - mu) * (xv - mu);
                }
            }
            out[ci] = mu;
            out[c + ci] = (v / m + T::from_f64(STATS_EPS)).sqrt();
        }
        let ng = self.needs(x);
        self.push(Tensor::from_parts(vec![2, c], out), Op::ChannelStats { x }, ng)
    }

    /// Conv to `4·C_out` channels, bias, leaky ReLU, then pixel shuffle.
    pub fn upscale2x(&mut self, x: Var, w: Var, b: Var, slope: f64) -> Result<Var> {
        let y = self.conv2d(x, w, 1)?;
        let y = self.add_channel_bias(y, b)?;
        let y = self.leaky_relu(y, slope);
        self.depth_to_space(y)
    }

    /// `lrelu(x + conv(lrelu(conv(x) + b1)) + b2)` with stride-1 convolutions.
    pub fn residual_block(
        &mut self,
        x: Var,
        (w1, b1): (Var, Var),
        (w2, b2): (Var, Var),
        slope: f64,
    ) -> Result<Var> {
        let y = self.conv2d(x, w1, 1)?;
        let y = self.add_channel_bias(y, b1)?;
        let y = self.leaky_relu(y, slope);
        let y = self.conv2d(y, w2, 1)?;
        let y = self.add_channel_bias(y, b2)?;
        let y = self.add(x, y)?;
        Ok(self.leaky_relu(y, slope))
    }

    /// Reverse pass from a one-element loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(AutogradError::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(ls, T::ONE));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let (lower, upper) = grads.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            self.backward_node(node, g, lower);
        }
        let params = self
            .bound
            .iter()
            .map(|(&id, &v)| (id, v))
            .collect::<Vec<_>>();
        Ok(Gradients { grads, params })
    }

    fn backward_node(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let mut acc = |v: Var, data: Vec<T>| {
            if !self.needs(v) {
                return;
            }
            let t = Tensor::from_parts(self.shape(v).to_vec(), data);
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Input | Op::Param => {}
            Op::Conv2d { x, w, stride } => {
                let xs = self.shape(*x);
                let ws = self.shape(*w);
                let geom = ConvGeom::new(xs[1], ws[0], xs[2], xs[3], ws[2], *stride);
                let (dx, dw) = kernels::conv2d_backward(
                    &geom,
                    xs[0],
                    self.value(*x).data(),
                    self.value(*w).data(),
                    gd,
                    self.needs(*x),
                    self.needs(*w),
                );
                if self.needs(*x) {
                    acc(*x, dx);
                }
                if self.needs(*w) {
                    acc(*w, dw);
                }
            }
            Op::AddChannelBias { x, b } => {
                let (n, c, h, w) = g.dims4();
                let hw = h * w;
                if self.needs(*b) {
                    let mut db = vec![T::ZERO; c];
                    for i in 0..n {
                        for (ci, d) in db.iter_mut().enumerate() {
                            *d += gd[(i * c + ci) * hw..(i * c + ci + 1) * hw]
                                .iter()
                                .copied()
                                .sum::<T>();
                        }
                    }
                    acc(*b, db);
                }
                acc(*x, gd.to_vec());
            }
            Op::Dense { x, w, b } => {
                let (n, i) = (self.shape(*x)[0], self.shape(*x)[1]);
                let o = self.shape(*w)[0];
                if self.needs(*x) {
                    let mut dx = vec![T::ZERO; n * i];
                    T::gemm(
                        n,
                        o,
                        i,
                        T::ONE,
                        gd,
                        o,
                        1,
                        self.value(*w).data(),
                        i,
                        1,
                        T::ZERO,
                        &mut dx,
                        i,
                        1,
                    );
                    acc(*x, dx);
                }
                if self.needs(*w) {
                    let mut dw = vec![T::ZERO; o * i];
                    T::gemm(
                        o,
                        n,
                        i,
                        T::ONE,
                        gd,
                        1,
                        o,
                        self.value(*x).data(),
                        i,
                        1,
                        T::ZERO,
                        &mut dw,
                        i,
                        1,
                    );
                    acc(*w, dw);
                }
                if self.needs(*b) {
                    let mut db = vec![T::ZERO; o];
                    for row in gd.chunks(o) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    acc(*b, db);
                }
            }
            Op::LeakyRelu { x, slope } => {
                let xd = self.value(*x).data();
                let dx = gd
                    .iter()
                    .zip(xd)
                    .map(|(&gv, &xv)| if xv > T::ZERO { gv } else { gv * *slope })
                    .collect();
                acc(*x, dx);
            }
            Op::Sigmoid { x } => {
                let yd = node.value.data();
                let dx = gd
                    .iter()
                    .zip(yd)
                    .map(|(&gv, &y)| gv * y * (T::ONE - y))
                    .collect();
                acc(*x, dx);
            }
            Op::DepthToSpace { x } => {
                let (n, c4, h, w) = self.value(*x).dims4();
                acc(*x, kernels::depth_to_space(n, c4 / 4, h, w, gd, true));
            }
            Op::ConcatChannels { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4();
                let cb = self.value(*b).dims4().1;
                let hw = h * w;
                let mut da = Vec::with_capacity(n * ca * hw);
                let mut db = Vec::with_capacity(n * cb * hw);
                for i in 0..n {
                    let base = i * (ca + cb) * hw;
                    da.extend_from_slice(&gd[base..base + ca * hw]);
                    db.extend_from_slice(&gd[base + ca * hw..base + (ca + cb) * hw]);
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::Add { a, b } => {
                acc(*a, gd.to_vec());
                acc(*b, gd.to_vec());
            }
            Op::Sub { a, b } => {
                acc(*a, gd.to_vec());
                acc(*b, gd.iter().map(|&v| -v).collect());
            }
            Op::Mul { a, b } => {
                let ad = self.value(*a).data();
                let bd = self.value(*b).data();
                if self.needs(*a) {
                    acc(*a, gd.iter().zip(bd).map(|(&gv, &y)| gv * y).collect());
                }
                if self.needs(*b) {
                    acc(*b, gd.iter().zip(ad).map(|(&gv, &x)| gv * x).collect());
                }
            }
            Op::Div { a, b } => {
                let ad = self.value(*a).data();
                let bd = self.value(*b).data();
                if self.needs(*a) {
                    acc(*a, gd.iter().zip(bd).map(|(&gv, &y)| gv / y).collect());
                }
                if self.needs(*b) {
                    let db = gd
                        .iter()
                        .zip(ad.iter().zip(bd))
                        .map(|(&gv, (&x, &y))| -gv * x / (y * y))
                        .collect();
                    acc(*b, db);
                }
            }
            Op::AddScalar { x } => acc(*x, gd.to_vec()),
            Op::MulScalar { x, s } => acc(*x, gd.iter().map(|&v| v * *s).collect()),
            Op::Square { x } => {
                let xd = self.value(*x).data();
                let two = T::from_f64(2.0);
                acc(*x, gd.iter().zip(xd).map(|(&gv, &v)| two * v * gv).collect());
            }
            Op::Reshape { x } => acc(*x, gd.to_vec()),
            Op::Filter { x, kernel } => {
                let (n, c, h, w) = self.value(*x).dims4();
                acc(
                    *x,
                    kernels::separable_filter_adjoint(n * c, h, w, kernel, gd),
                );
            }
            Op::Mean { x } => {
                let len = self.value(*x).len();
                let v = gd[0] / T::from_f64(len as f64);
                acc(*x, vec![v; len]);
            }
            Op::Sum { x } => {
                let len = self.value(*x).len();
                acc(*x, vec![gd[0]; len]);
            }
            Op::WeightedMean { x, weights } => {
                let (n, c, h, w) = self.value(*x).dims4();
                let hw = h * w;
                let wsum: T = weights.data().iter().copied().sum();
                let scale = gd[0] / (T::from_f64(c as f64) * wsum);
                let mut dx = Vec::with_capacity(n * c * hw);
                for i in 0..n {
                    let wrow = &weights.data()[i * hw..(i + 1) * hw];
                    for _ in 0..c {
                        dx.extend(wrow.iter().map(|&wv| wv * scale));
                    }
                }
                acc(*x, dx);
            }
            Op::ChannelStats { x } => {
                let (n, c, h, w) = self.value(*x).dims4();
                let hw = h * w;
                let m = T::from_f64((n * hw) as f64);
                let xd = self.value(*x).data();
                let stats = node.value.data();
                let mut dx = vec![T::ZERO; xd.len()];
                for ci in 0..c {
                    let (mu, sigma) = (stats[ci], stats[c + ci]);
                    let (gmu, gsig) = (gd[ci], gd[c + ci]);
                    for i in 0..n {
                        let range = (i * c + ci) * hw..(i * c + ci + 1) * hw;
                        for (d, &xv) in dx[range.clone()].iter_mut().zip(&xd[range]) {
                            *d = gmu / m + gsig * (xv - mu) / (m * sigma);
                        }
                    }
                }
                acc(*x, dx);
            }
        }
    }
}

const STATS_EPS: f64 = 1e-8;

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(ParamId, Var)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to any recorded node; `None` when no gradient
    /// reached it (constants, or nodes not on a path to the loss).
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.wrt(*v))
    }

    /// Gradients of all bound parameters, sorted by id.
    pub fn params(&self) -> Vec<(ParamId, &Tensor<T>)> {
        let mut out: Vec<_> = self
            .params
            .iter()
            .filter_map(|&(id, v)| self.wrt(v).map(|g| (id, g)))
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}
