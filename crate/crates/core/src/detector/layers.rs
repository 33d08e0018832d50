//! NCHW tensors and the handful of layers the residual network needs, each
//! with an explicit backward pass. Training-mode forwards cache what their
//! backward needs; `infer` paths take `&self` and cache nothing.

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w, data: vec![0.0; n * c * h * w] }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    fn plane_slice(&self, n: usize, c: usize) -> &[f64] {
        let p = self.plane();
        let off = (n * self.c + c) * p;
        &self.data[off..off + p]
    }

    fn plane_slice_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let p = self.plane();
        let off = (n * self.c + c) * p;
        &mut self.data[off..off + p]
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

fn conv_out(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

/// Output range `[lo, hi)` along one axis for kernel offset `k`, such that
/// `o * stride + k - pad` is a valid input index.
fn valid_range(out_len: usize, in_len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if in_len + pad > k { ((in_len + pad - k - 1) / stride + 1).min(out_len) } else { 0 };
    (lo, hi.max(lo))
}

/// 2-D convolution without bias (batch norm follows every convolution).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(in_c: usize, out_c: usize, kernel: usize, stride: usize, pad: usize, weight: Vec<f64>) -> Self {
        assert_eq!(weight.len(), out_c * in_c * kernel * kernel);
        Self { in_c, out_c, kernel, stride, pad, weight: Param::new(weight), input: None }
    }

    pub fn output_len(&self, len: usize) -> usize {
        conv_out(len, self.kernel, self.stride, self.pad)
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        debug_assert_eq!(x.c, self.in_c);
        let (oh, ow) = (self.output_len(x.h), self.output_len(x.w));
        let mut out = Tensor::zeros(x.n, self.out_c, oh, ow);
        let k = self.kernel;
        for n in 0..x.n {
            for oc in 0..self.out_c {
                let dst = out.plane_slice_mut(n, oc);
                for ic in 0..self.in_c {
                    let src = x.plane_slice(n, ic);
                    let wbase = (oc * self.in_c + ic) * k * k;
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(oh, x.h, ky, self.stride, self.pad);
                        for kx in 0..k {
                            let wv = self.weight.value[wbase + ky * k + kx];
                            let (ox_lo, ox_hi) = valid_range(ow, x.w, kx, self.stride, self.pad);
                            for oy in oy_lo..oy_hi {
                                let iy = oy * self.stride + ky - self.pad;
                                let row_in = &src[iy * x.w..(iy + 1) * x.w];
                                let row_out = &mut dst[oy * ow + ox_lo..oy * ow + ox_hi];
                                let ix0 = ox_lo * self.stride + kx - self.pad;
                                if self.stride == 1 {
                                    let seg = &row_in[ix0..ix0 + row_out.len()];
                                    row_out.iter_mut().zip(seg).for_each(|(o, i)| *o += wv * i);
                                } else {
                                    for (j, o) in row_out.iter_mut().enumerate() {
                                        *o += wv * row_in[ix0 + j * self.stride];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward_train(&mut self, x: Tensor) -> Tensor {
        let out = self.infer(&x);
        self.input = Some(x);
        out
    }

    /// Accumulates the weight gradient; returns the input gradient when
    /// `want_input_grad` is set.
    pub fn backward(&mut self, g: &Tensor, want_input_grad: bool) -> Option<Tensor> {
        let x = self.input.take().expect("conv backward without forward");
        let (oh, ow) = (g.h, g.w);
        let k = self.kernel;
        let mut gx = want_input_grad.then(|| Tensor::zeros(x.n, x.c, x.h, x.w));
        for n in 0..x.n {
            for oc in 0..self.out_c {
                let gplane = g.plane_slice(n, oc);
                for ic in 0..self.in_c {
                    let src = x.plane_slice(n, ic);
                    let wbase = (oc * self.in_c + ic) * k * k;
                    for ky in 0..k {
                        let (oy_lo, oy_hi) = valid_range(oh, x.h, ky, self.stride, self.pad);
                        for kx in 0..k {
                            let widx = wbase + ky * k + kx;
                            let wv = self.weight.value[widx];
                            let (ox_lo, ox_hi) = valid_range(ow, x.w, kx, self.stride, self.pad);
                            let ix0 = ox_lo * self.stride + kx - self.pad;
                            let mut acc = 0.0;
                            for oy in oy_lo..oy_hi {
                                let iy = oy * self.stride + ky - self.pad;
                                let grow = &gplane[oy * ow + ox_lo..oy * ow + ox_hi];
                                let row_in = &src[iy * x.w..(iy + 1) * x.w];
                                if self.stride == 1 {
                                    let seg = &row_in[ix0..ix0 + grow.len()];
                                    acc += grow.iter().zip(seg).map(|(a, b)| a * b).sum::<f64>();
                                    if let Some(gx) = gx.as_mut() {
                                        let dst = &mut gx.plane_slice_mut(n, ic)[iy * x.w + ix0..iy * x.w + ix0 + grow.len()];
                                        dst.iter_mut().zip(grow).for_each(|(d, gv)| *d += wv * gv);
                                    }
                                } else {
                                    for (j, gv) in grow.iter().enumerate() {
                                        acc += gv * row_in[ix0 + j * self.stride];
                                    }
                                    if let Some(gx) = gx.as_mut() {
                                        let dst = &mut gx.plane_slice_mut(n, ic)[iy * x.w..(iy + 1) * x.w];
                                        for (j, gv) in grow.iter().enumerate() {
                                            dst[ix0 + j * self.stride] += wv * gv;
                                        }
                                    }
                                }
                            }
                            self.weight.grad[widx] += acc;
                        }
                    }
                }
            }
        }
        gx
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    cache: Option<(Tensor, Vec<f64>)>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for n in 0..x.n {
            for c in 0..x.c {
                let inv = 1.0 / (self.running_var[c] + BN_EPS).sqrt();
                let (g, b, m) = (self.gamma.value[c], self.beta.value[c], self.running_mean[c]);
                out.plane_slice_mut(n, c).iter_mut().for_each(|v| *v = g * (*v - m) * inv + b);
            }
        }
        out
    }

    /// Normalizes with batch statistics and updates the running estimates.
    pub fn forward_train(&mut self, x: Tensor) -> Tensor {
        let count = (x.n * x.plane()) as f64;
        let mut x_hat = x;
        let mut inv_std = vec![0.0; x_hat.c];
        let mut out = Tensor::zeros(x_hat.n, x_hat.c, x_hat.h, x_hat.w);
        for c in 0..x_hat.c {
            let mut sum = 0.0;
            for n in 0..x_hat.n {
                sum += x_hat.plane_slice(n, c).iter().sum::<f64>();
            }
            let mean = sum / count;
            let mut sq = 0.0;
            for n in 0..x_hat.n {
                sq += x_hat.plane_slice(n, c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            let var = sq / count;
            let inv = 1.0 / (var + BN_EPS).sqrt();
            inv_std[c] = inv;
            let (g, b) = (self.gamma.value[c], self.beta.value[c]);
            for n in 0..x_hat.n {
                let xs = x_hat.plane_slice_mut(n, c);
                xs.iter_mut().for_each(|v| *v = (*v - mean) * inv);
                let xs = x_hat.plane_slice(n, c);
                let os = out.plane_slice_mut(n, c);
                os.iter_mut().zip(xs).for_each(|(o, v)| *o = g * v + b);
            }
            let unbiased = if count > 1.0 { sq / (count - 1.0) } else { var };
            self.running_mean[c] = (1.0 - BN_MOMENTUM) * self.running_mean[c] + BN_MOMENTUM * mean;
            self.running_var[c] = (1.0 - BN_MOMENTUM) * self.running_var[c] + BN_MOMENTUM * unbiased;
        }
        self.cache = Some((x_hat, inv_std));
        out
    }

    pub fn backward(&mut self, g: &Tensor) -> Tensor {
        let (x_hat, inv_std) = self.cache.take().expect("batch norm backward without forward");
        let count = (g.n * g.plane()) as f64;
        let mut gx = Tensor::zeros(g.n, g.c, g.h, g.w);
        for c in 0..g.c {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for n in 0..g.n {
                let gs = g.plane_slice(n, c);
                let xs = x_hat.plane_slice(n, c);
                sum_g += gs.iter().sum::<f64>();
                sum_gx += gs.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
            }
            self.gamma.grad[c] += sum_gx;
            self.beta.grad[c] += sum_g;
            let scale = self.gamma.value[c] * inv_std[c] / count;
            for n in 0..g.n {
                let gs = g.plane_slice(n, c);
                let xs = x_hat.plane_slice(n, c);
                let dst = gx.plane_slice_mut(n, c);
                for ((d, gv), xv) in dst.iter_mut().zip(gs).zip(xs) {
                    *d = scale * (count * gv - sum_g - xv * sum_gx);
                }
            }
        }
        gx
    }
}

/// In-place ReLU; returns the mask of active units.
pub fn relu_in_place(x: &mut Tensor) -> Vec<bool> {
    x.data
        .iter_mut()
        .map(|v| {
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            on
        })
        .collect()
}

pub fn relu_backward(g: &mut Tensor, mask: &[bool]) {
    g.data.iter_mut().zip(mask).for_each(|(v, &on)| {
        if !on {
            *v = 0.0
        }
    });
}

/// 3x3 max pooling, stride 2, padding 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaxPool {
    argmax: Option<(Vec<usize>, [usize; 4])>,
}

impl MaxPool {
    const K: usize = 3;
    const S: usize = 2;
    const P: usize = 1;

    pub fn output_len(len: usize) -> usize {
        conv_out(len, Self::K, Self::S, Self::P)
    }

    fn run(x: &Tensor, mut record: Option<&mut Vec<usize>>) -> Tensor {
        let (oh, ow) = (Self::output_len(x.h), Self::output_len(x.w));
        let mut out = Tensor::zeros(x.n, x.c, oh, ow);
        for n in 0..x.n {
            for c in 0..x.c {
                let base = (n * x.c + c) * x.plane();
                let src = x.plane_slice(n, c);
                let dst = out.plane_slice_mut(n, c);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = 0;
                        for ky in 0..Self::K {
                            let iy = (oy * Self::S + ky) as isize - Self::P as isize;
                            if iy < 0 || iy >= x.h as isize {
                                continue;
                            }
                            for kx in 0..Self::K {
                                let ix = (ox * Self::S + kx) as isize - Self::P as isize;
                                if ix < 0 || ix >= x.w as isize {
                                    continue;
                                }
                                let i = iy as usize * x.w + ix as usize;
                                if src[i] > best {
                                    best = src[i];
                                    at = i;
                                }
                            }
                        }
                        dst[oy * ow + ox] = best;
                        if let Some(r) = record.as_deref_mut() {
                            r.push(base + at);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        Self::run(x, None)
    }

    /// Winning input index per output from the last training forward.
    pub fn argmax(&self) -> Option<&[usize]> {
        self.argmax.as_ref().map(|a| a.0.as_slice())
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let mut idx = Vec::new();
        let out = Self::run(x, Some(&mut idx));
        self.argmax = Some((idx, [x.n, x.c, x.h, x.w]));
        out
    }

    pub fn backward(&mut self, g: &Tensor) -> Tensor {
        let (idx, [n, c, h, w]) = self.argmax.take().expect("max pool backward without forward");
        let mut gx = Tensor::zeros(n, c, h, w);
        for (gv, &i) in g.data.iter().zip(&idx) {
            gx.data[i] += gv;
        }
        gx
    }
}

/// Mean over the spatial plane: `[n, c, h, w] -> [n, c]`.
pub fn global_avg_pool(x: &Tensor) -> Vec<f64> {
    let p = x.plane() as f64;
    x.data.chunks_exact(x.plane()).map(|s| s.iter().sum::<f64>() / p).collect()
}

pub fn global_avg_pool_backward(g: &[f64], n: usize, c: usize, h: usize, w: usize) -> Tensor {
    let p = (h * w) as f64;
    let mut out = Tensor::zeros(n, c, h, w);
    for (plane, gv) in out.data.chunks_exact_mut(h * w).zip(g) {
        plane.iter_mut().for_each(|v| *v = gv / p);
    }
    out
}

/// Fully connected layer, weight stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_f: usize,
    pub out_f: usize,
    pub weight: Param,
    pub bias: Param,
    input: Option<Vec<f64>>,
}

impl Linear {
    pub fn new(in_f: usize, out_f: usize, weight: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weight.len(), in_f * out_f);
        assert_eq!(bias.len(), out_f);
        Self { in_f, out_f, weight: Param::new(weight), bias: Param::new(bias), input: None }
    }

    /// `x` holds `batch` rows of `in_f` features.
    pub fn infer(&self, x: &[f64]) -> Vec<f64> {
        x.chunks_exact(self.in_f)
            .flat_map(|row| {
                (0..self.out_f).map(move |o| {
                    let w = &self.weight.value[o * self.in_f..(o + 1) * self.in_f];
                    self.bias.value[o] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
                })
            })
            .collect()
    }

    pub fn forward_train(&mut self, x: Vec<f64>) -> Vec<f64> {
        let out = self.infer(&x);
        self.input = Some(x);
        out
    }

    pub fn backward(&mut self, g: &[f64]) -> Vec<f64> {
        let x = self.input.take().expect("linear backward without forward");
        let mut gx = vec![0.0; x.len()];
        for (b, (row, grow)) in x.chunks_exact(self.in_f).zip(g.chunks_exact(self.out_f)).enumerate() {
            for (o, &gv) in grow.iter().enumerate() {
                self.bias.grad[o] += gv;
                let w = &self.weight.value[o * self.in_f..(o + 1) * self.in_f];
                let gw = &mut self.weight.grad[o * self.in_f..(o + 1) * self.in_f];
                gw.iter_mut().zip(row).for_each(|(d, xv)| *d += gv * xv);
                gx[b * self.in_f..(b + 1) * self.in_f].iter_mut().zip(w).for_each(|(d, wv)| *d += gv * wv);
            }
        }
        gx
    }
}
