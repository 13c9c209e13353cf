//! Minimal CPU layers with hand-written backward passes.
//!
//! Spatial activations are stored channel-major as a `(C, N * H * W)` matrix
//! so that a 3x3 convolution is one matrix product against its im2col
//! expansion and the product lands directly in the activation layout.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use crate::rng::StreamRng;

/// Weight matrix `(out, in)` plus bias `(out)`. Convolutions use `in = C_in * k * k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, input: usize) -> Self {
        Dense {
            w: Array2::zeros((out, input)),
            b: Array1::zeros(out),
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    pub fn init(out: usize, input: usize, rng: &mut StreamRng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Dense {
            w: Array2::from_shape_simple_fn((out, input), || rng.random_range(-bound..bound)),
            b: Array1::from_shape_simple_fn(out, || rng.random_range(-bound..bound)),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `W x + b` for column-batched input `(in, N)`.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = self.w.dot(x);
        y += &self.b.view().insert_axis(Axis(1));
        y
    }

    pub fn forward_vec(&self, x: &Array1<f64>) -> Array1<f64> {
        self.w.dot(x) + &self.b
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Dense, need_input: bool) -> Option<Array2<f64>> {
        grad.w += &dy.dot(&x.t());
        grad.b += &dy.sum_axis(Axis(1));
        need_input.then(|| self.w.t().dot(dy))
    }

    pub fn backward_vec(&self, x: &Array1<f64>, dy: &Array1<f64>, grad: &mut Dense) -> Array1<f64> {
        let dyc = dy.view().insert_axis(Axis(1));
        let xr = x.view().insert_axis(Axis(0));
        grad.w += &dyc.dot(&xr);
        grad.b += dy;
        self.w.t().dot(dy)
    }

    pub fn tensors(&self) -> [&[f64]; 2] {
        [self.w.as_slice().expect("standard layout"), self.b.as_slice().expect("standard layout")]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.w.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Spatial activations `(C, N * H * W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Maps {
    pub data: Array2<f64>,
    pub n: usize,
    pub h: usize,
    pub w: usize,
}

impl Maps {
    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// im2col for a 3x3 kernel with zero padding 1. Row `ci * 9 + ky * 3 + kx`.
pub fn im2col3(x: &Maps) -> Array2<f64> {
    let (c, n, h, w) = (x.channels(), x.n, x.h, x.w);
    let plane = h * w;
    let mut cols = Array2::<f64>::zeros((c * 9, n * plane));
    let src = x.data.as_slice().expect("standard layout");
    let stride = n * plane;
    let dst = cols.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * stride;
                for s in 0..n {
                    let base_in = ci * stride + s * plane;
                    let base_out = row + s * plane;
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { w - 1 } else { w };
                        for xx in x0..x1 {
                            let sx = xx + kx - 1;
                            dst[base_out + y * w + xx] = src[base_in + sy * w + sx];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col3`].
pub fn col2im3(cols: &Array2<f64>, c: usize, n: usize, h: usize, w: usize) -> Array2<f64> {
    let plane = h * w;
    let stride = n * plane;
    let mut out = Array2::<f64>::zeros((c, stride));
    let src = cols.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = (ci * 9 + ky * 3 + kx) * stride;
                for s in 0..n {
                    let base_out = ci * stride + s * plane;
                    let base_in = row + s * plane;
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let x0 = if kx == 0 { 1 } else { 0 };
                        let x1 = if kx == 2 { w - 1 } else { w };
                        for xx in x0..x1 {
                            let sx = xx + kx - 1;
                            dst[base_out + sy * w + sx] += src[base_in + y * w + xx];
                        }
                    }
                }
            }
        }
    }
    out
}

/// 3x3 convolution, stride 1, zero padding 1. Returns output and the im2col buffer.
pub fn conv3_forward(layer: &Dense, x: &Maps) -> (Maps, Array2<f64>) {
    let cols = im2col3(x);
    let data = layer.forward(&cols);
    (
        Maps {
            data,
            n: x.n,
            h: x.h,
            w: x.w,
        },
        cols,
    )
}

pub fn conv3_backward(
    layer: &Dense,
    cols: &Array2<f64>,
    in_channels: usize,
    shape: (usize, usize, usize),
    dy: &Array2<f64>,
    grad: &mut Dense,
    need_input: bool,
) -> Option<Array2<f64>> {
    let dcols = layer.backward(cols, dy, grad, need_input)?;
    let (n, h, w) = shape;
    Some(col2im3(&dcols, in_channels, n, h, w))
}

pub fn relu_inplace(x: &mut Array2<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

pub fn relu_vec(x: Array1<f64>) -> Array1<f64> {
    x.mapv_into(|v| v.max(0.0))
}

/// Zeroes `dy` wherever the ReLU output was not positive.
pub fn relu_backward<D: ndarray::Dimension>(dy: &mut ndarray::Array<f64, D>, out: &ndarray::Array<f64, D>) {
    ndarray::Zip::from(dy).and(out).for_each(|d, &o| {
        if o <= 0.0 {
            *d = 0.0;
        }
    });
}

/// 2x2 max pooling, stride 2. Returns output and the flat argmax per output cell.
pub fn maxpool2_forward(x: &Maps) -> (Maps, Vec<u32>) {
    let (c, n, h, w) = (x.channels(), x.n, x.h, x.w);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Array2::<f64>::zeros((c, n * oh * ow));
    let mut arg = vec![0u32; c * n * oh * ow];
    let src = x.data.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for s in 0..n {
            let base_in = ci * n * h * w + s * h * w;
            let base_out = ci * n * oh * ow + s * oh * ow;
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = base_in + 2 * y * w + 2 * xx;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base_in + (2 * y + dy) * w + 2 * xx + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    dst[base_out + y * ow + xx] = src[best];
                    arg[base_out + y * ow + xx] = best as u32;
                }
            }
        }
    }
    (Maps { data: out, n, h: oh, w: ow }, arg)
}

pub fn maxpool2_backward(dy: &Array2<f64>, arg: &[u32], in_shape: (usize, usize)) -> Array2<f64> {
    let mut dx = Array2::<f64>::zeros(in_shape);
    let dst = dx.as_slice_mut().expect("standard layout");
    for (g, &i) in dy.iter().zip(arg) {
        dst[i as usize] += g;
    }
    dx
}

/// Nearest-neighbour x2 upsampling.
pub fn upsample2_forward(x: &Maps) -> Maps {
    let (c, n, h, w) = (x.channels(), x.n, x.h, x.w);
    let (oh, ow) = (h * 2, w * 2);
    let mut out = Array2::<f64>::zeros((c, n * oh * ow));
    let src = x.data.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for s in 0..n {
            let base_in = ci * n * h * w + s * h * w;
            let base_out = ci * n * oh * ow + s * oh * ow;
            for y in 0..oh {
                for xx in 0..ow {
                    dst[base_out + y * ow + xx] = src[base_in + (y / 2) * w + xx / 2];
                }
            }
        }
    }
    Maps { data: out, n, h: oh, w: ow }
}

pub fn upsample2_backward(dy: &Array2<f64>, c: usize, n: usize, h: usize, w: usize) -> Array2<f64> {
    let (oh, ow) = (h * 2, w * 2);
    let mut dx = Array2::<f64>::zeros((c, n * h * w));
    let src = dy.as_slice().expect("standard layout");
    let dst = dx.as_slice_mut().expect("standard layout");
    for ci in 0..c {
        for s in 0..n {
            let base_in = ci * n * h * w + s * h * w;
            let base_out = ci * n * oh * ow + s * oh * ow;
            for y in 0..oh {
                for xx in 0..ow {
                    dst[base_in + (y / 2) * w + xx / 2] += src[base_out + y * ow + xx];
                }
            }
        }
    }
    dx
}

/// `(C, N * P)` maps to `(C * P, N)` feature columns.
pub fn flatten(x: &Maps) -> Array2<f64> {
    let (c, n, p) = (x.channels(), x.n, x.plane());
    let mut out = Array2::<f64>::zeros((c * p, n));
    for ci in 0..c {
        for s in 0..n {
            let src = x.data.slice(s![ci, s * p..(s + 1) * p]);
            out.slice_mut(s![ci * p..(ci + 1) * p, s]).assign(&src);
        }
    }
    out
}

/// Inverse of [`flatten`].
pub fn unflatten(x: &Array2<f64>, c: usize, h: usize, w: usize) -> Maps {
    let n = x.ncols();
    let p = h * w;
    let mut out = Array2::<f64>::zeros((c, n * p));
    for ci in 0..c {
        for s in 0..n {
            let src = x.slice(s![ci * p..(ci + 1) * p, s]);
            out.slice_mut(s![ci, s * p..(s + 1) * p]).assign(&src);
        }
    }
    Maps { data: out, n, h, w }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Single LSTM cell with gate order (input, forget, cell, output).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub b: Array1<f64>,
}

/// Intermediate values of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
    pub h: Array1<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            w_ih: Array2::zeros((4 * hidden, input)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut StreamRng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmCell {
            w_ih: Array2::from_shape_simple_fn((4 * hidden, input), || rng.random_range(-bound..bound)),
            w_hh: Array2::from_shape_simple_fn((4 * hidden, hidden), || rng.random_range(-bound..bound)),
            b: Array1::from_shape_simple_fn(4 * hidden, || rng.random_range(-bound..bound)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn forward(&self, x: &Array1<f64>, h_prev: &Array1<f64>, c_prev: &Array1<f64>) -> LstmStep {
        let hd = self.hidden();
        let a = self.w_ih.dot(x) + self.w_hh.dot(h_prev) + &self.b;
        let i = a.slice(s![0..hd]).mapv(sigmoid);
        let f = a.slice(s![hd..2 * hd]).mapv(sigmoid);
        let g = a.slice(s![2 * hd..3 * hd]).mapv(f64::tanh);
        let o = a.slice(s![3 * hd..4 * hd]).mapv(sigmoid);
        let c = &f * c_prev + &i * &g;
        let h = &o * &c.mapv(f64::tanh);
        LstmStep {
            x: x.clone(),
            h_prev: h_prev.clone(),
            c_prev: c_prev.clone(),
            i,
            f,
            g,
            o,
            c,
            h,
        }
    }

    /// Backward through one step. Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        step: &LstmStep,
        dh: &Array1<f64>,
        dc_next: &Array1<f64>,
        grad: &mut LstmCell,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        let hd = self.hidden();
        let tc = step.c.mapv(f64::tanh);
        let d_o = dh * &tc;
        let dc = dc_next + &(dh * &step.o * &tc.mapv(|t| 1.0 - t * t));
        let di = &dc * &step.g;
        let dg = &dc * &step.i;
        let df = &dc * &step.c_prev;
        let dc_prev = &dc * &step.f;
        let mut da = Array1::<f64>::zeros(4 * hd);
        da.slice_mut(s![0..hd]).assign(&(&di * &step.i.mapv(|v| v * (1.0 - v))));
        da.slice_mut(s![hd..2 * hd]).assign(&(&df * &step.f.mapv(|v| v * (1.0 - v))));
        da.slice_mut(s![2 * hd..3 * hd]).assign(&(&dg * &step.g.mapv(|v| 1.0 - v * v)));
        da.slice_mut(s![3 * hd..4 * hd]).assign(&(&d_o * &step.o.mapv(|v| v * (1.0 - v))));
        let dac = da.view().insert_axis(Axis(1));
        grad.w_ih += &dac.dot(&step.x.view().insert_axis(Axis(0)));
        grad.w_hh += &dac.dot(&step.h_prev.view().insert_axis(Axis(0)));
        grad.b += &da;
        (self.w_ih.t().dot(&da), self.w_hh.t().dot(&da), dc_prev)
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [
            self.w_ih.as_slice().expect("standard layout"),
            self.w_hh.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.w_ih.as_slice_mut().expect("standard layout"),
            self.w_hh.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Adam over a flat parameter list.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update<'a>(&mut self, params: impl IntoIterator<Item = &'a mut [f64]>, grads: impl IntoIterator<Item = &'a [f64]>) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut k = 0;
        for (p, g) in params.into_iter().zip(grads) {
            debug_assert_eq!(p.len(), g.len());
            for (pi, &gi) in p.iter_mut().zip(g) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let mh = self.m[k] / bc1;
                let vh = self.v[k] / bc2;
                *pi -= self.lr * mh / (vh.sqrt() + self.eps);
                k += 1;
            }
        }
        debug_assert_eq!(k, self.m.len());
    }
}
