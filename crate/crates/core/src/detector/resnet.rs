//! A width- and depth-reduced ResNet-18 with the same block grammar:
//!
//! ```text
//! input block   conv(k x k, stride s) -> BN -> ReLU -> maxpool(3, 2)
//! layer 1       Basic -> Basic                         (identity shortcuts)
//! layers 2..4   Basic(stride 2, downsample shortcut) -> Basic
//! output block  global average pool -> linear -> softmax
//! ```
//!
//! A Basic block is `conv3x3 -> BN -> ReLU -> conv3x3 -> BN`, added to its
//! shortcut and passed through a ReLU. The downsample block is the
//! `conv1x1(stride 2) -> BN` projection that adapts the shortcut to the new
//! width and resolution.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::layers::{
    global_avg_pool, global_avg_pool_backward, relu_backward, relu_in_place, BatchNorm2d, Conv2d, Linear, MaxPool,
    Param, Tensor,
};
use super::weights::ProbPair;
use super::{DetectorError, DetectorModel, Result};
use crate::windowing::GrayscaleImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniResNetConfig {
    pub input_size: usize,
    pub stem_channels: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub layer_widths: [usize; 4],
    pub num_classes: usize,
    pub seed: u64,
}

impl Default for MiniResNetConfig {
    fn default() -> Self {
        Self {
            input_size: 256,
            stem_channels: 4,
            stem_kernel: 7,
            stem_stride: 2,
            layer_widths: [4, 8, 16, 32],
            num_classes: 2,
            seed: 0,
        }
    }
}

impl MiniResNetConfig {
    /// Spatial side length entering each of the four layers.
    pub fn layer_input_sizes(&self) -> [usize; 4] {
        let pad = self.stem_kernel / 2;
        let stem = (self.input_size + 2 * pad - self.stem_kernel) / self.stem_stride + 1;
        let l1 = MaxPool::output_len(stem);
        let l2 = (l1 - 1) / 2 + 1;
        let l3 = (l2 - 1) / 2 + 1;
        let l4 = (l3 - 1) / 2 + 1;
        [l1, l2, l3, l4]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DetectorError::InvalidConfig(m));
        if self.num_classes != 2 {
            return bad(format!("num_classes must be 2, got {}", self.num_classes));
        }
        if self.stem_channels == 0 || self.layer_widths.contains(&0) {
            return bad("channel widths must be positive".into());
        }
        if self.stem_kernel == 0 || self.stem_kernel % 2 == 0 || self.stem_stride == 0 {
            return bad("stem kernel must be odd and stride positive".into());
        }
        if self.input_size < self.stem_kernel || self.input_size < 8 {
            return bad(format!("input size {} is too small", self.input_size));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        build_mini_resnet(self).map(|mut m| m.param_count()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Projection {
    pub conv: Conv2d,
    pub bn: BatchNorm2d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub(crate) conv1: Conv2d,
    pub(crate) bn1: BatchNorm2d,
    pub(crate) conv2: Conv2d,
    pub(crate) bn2: BatchNorm2d,
    pub(crate) shortcut: Option<Projection>,
    masks: Option<(Vec<bool>, Vec<bool>)>,
}

impl BasicBlock {
    pub fn has_projection(&self) -> bool {
        self.shortcut.is_some()
    }

    /// Zeroes both 3x3 convolution kernels (the shortcut is untouched).
    pub fn zero_conv_weights(&mut self) {
        self.conv1.weight.value.iter_mut().for_each(|w| *w = 0.0);
        self.conv2.weight.value.iter_mut().for_each(|w| *w = 0.0);
    }

    /// The shortcut path alone followed by the output ReLU.
    pub fn shortcut_infer(&self, x: &Tensor) -> Tensor {
        let mut s = match &self.shortcut {
            Some(p) => p.bn.infer(&p.conv.infer(x)),
            None => x.clone(),
        };
        relu_in_place(&mut s);
        s
    }

    pub fn infer(&self, x: &Tensor) -> Tensor {
        let mut h = self.bn1.infer(&self.conv1.infer(x));
        relu_in_place(&mut h);
        let mut h = self.bn2.infer(&self.conv2.infer(&h));
        match &self.shortcut {
            Some(p) => h.add_assign(&p.bn.infer(&p.conv.infer(x))),
            None => h.add_assign(x),
        }
        relu_in_place(&mut h);
        h
    }

    fn forward_train(&mut self, x: Tensor) -> Tensor {
        let shortcut = match self.shortcut.as_mut() {
            Some(p) => {
                let c = p.conv.forward_train(x.clone());
                p.bn.forward_train(c)
            }
            None => x.clone(),
        };
        let h = self.conv1.forward_train(x);
        let mut h = self.bn1.forward_train(h);
        let m1 = relu_in_place(&mut h);
        let h = self.conv2.forward_train(h);
        let mut h = self.bn2.forward_train(h);
        h.add_assign(&shortcut);
        let m2 = relu_in_place(&mut h);
        self.masks = Some((m1, m2));
        h
    }

    fn backward(&mut self, mut g: Tensor) -> Tensor {
        let (m1, m2) = self.masks.take().expect("block backward without forward");
        relu_backward(&mut g, &m2);
        let mut gh = self.conv2.backward(&self.bn2.backward(&g), true).unwrap();
        relu_backward(&mut gh, &m1);
        let mut gx = self.conv1.backward(&self.bn1.backward(&gh), true).unwrap();
        match self.shortcut.as_mut() {
            Some(p) => gx.add_assign(&p.conv.backward(&p.bn.backward(&g), true).unwrap()),
            None => gx.add_assign(&g),
        }
        gx
    }

    fn for_each_state(&mut self, f: &mut dyn FnMut(StateRef<'_>)) {
        visit_conv(&mut self.conv1, f);
        visit_bn(&mut self.bn1, f);
        visit_conv(&mut self.conv2, f);
        visit_bn(&mut self.bn2, f);
        if let Some(p) = self.shortcut.as_mut() {
            visit_conv(&mut p.conv, f);
            visit_bn(&mut p.bn, f);
        }
    }
}

/// One tensor of model state, visited in the model's fixed topological order.
pub enum StateRef<'a> {
    Param(&'a mut Param),
    /// Batch-norm running mean or variance (not trained by gradient).
    Buffer(&'a mut Vec<f64>),
}

impl StateRef<'_> {
    pub fn values(&self) -> &[f64] {
        match self {
            StateRef::Param(p) => &p.value,
            StateRef::Buffer(b) => b,
        }
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        match self {
            StateRef::Param(p) => &mut p.value,
            StateRef::Buffer(b) => b,
        }
    }
}

fn visit_conv(c: &mut Conv2d, f: &mut dyn FnMut(StateRef<'_>)) {
    f(StateRef::Param(&mut c.weight));
}

fn visit_bn(bn: &mut BatchNorm2d, f: &mut dyn FnMut(StateRef<'_>)) {
    f(StateRef::Param(&mut bn.gamma));
    f(StateRef::Param(&mut bn.beta));
    f(StateRef::Buffer(&mut bn.running_mean));
    f(StateRef::Buffer(&mut bn.running_var));
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniResNet {
    config: MiniResNetConfig,
    stem_conv: Conv2d,
    stem_bn: BatchNorm2d,
    stem_mask: Option<Vec<bool>>,
    pool: MaxPool,
    pub(crate) blocks: Vec<BasicBlock>,
    fc: Linear,
    pooled_shape: Option<[usize; 4]>,
}

fn kaiming(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize, k: usize) -> Vec<f64> {
    let std = (2.0 / (out_c * k * k) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    (0..out_c * in_c * k * k).map(|_| normal.sample(rng)).collect()
}

fn make_block(rng: &mut ChaCha8Rng, in_c: usize, out_c: usize, stride: usize) -> BasicBlock {
    let shortcut = (stride != 1 || in_c != out_c).then(|| Projection {
        conv: Conv2d::new(in_c, out_c, 1, stride, 0, kaiming(rng, out_c, in_c, 1)),
        bn: BatchNorm2d::new(out_c),
    });
    BasicBlock {
        conv1: Conv2d::new(in_c, out_c, 3, stride, 1, kaiming(rng, out_c, in_c, 3)),
        bn1: BatchNorm2d::new(out_c),
        conv2: Conv2d::new(out_c, out_c, 3, 1, 1, kaiming(rng, out_c, out_c, 3)),
        bn2: BatchNorm2d::new(out_c),
        shortcut,
        masks: None,
    }
}

/// Builds a freshly initialized network: Kaiming-normal convolutions,
/// unit/zero batch norm, uniform linear head, all drawn from `cfg.seed`.
/// Parameters are rounded to f32 precision so the model survives the f32
/// exchange format unchanged.
pub fn build_mini_resnet(cfg: &MiniResNetConfig) -> Result<MiniResNet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stem_pad = cfg.stem_kernel / 2;
    let stem_conv = Conv2d::new(
        1,
        cfg.stem_channels,
        cfg.stem_kernel,
        cfg.stem_stride,
        stem_pad,
        kaiming(&mut rng, cfg.stem_channels, 1, cfg.stem_kernel),
    );
    let mut blocks = Vec::with_capacity(8);
    let mut in_c = cfg.stem_channels;
    for (layer, &width) in cfg.layer_widths.iter().enumerate() {
        let stride = if layer == 0 { 1 } else { 2 };
        blocks.push(make_block(&mut rng, in_c, width, stride));
        blocks.push(make_block(&mut rng, width, width, 1));
        in_c = width;
    }
    let bound = 1.0 / (in_c as f64).sqrt();
    let uni = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
    let weight = (0..2 * in_c).map(|_| uni.sample(&mut rng)).collect();
    let bias = (0..2).map(|_| uni.sample(&mut rng)).collect();
    let mut model = MiniResNet {
        config: cfg.clone(),
        stem_conv,
        stem_bn: BatchNorm2d::new(cfg.stem_channels),
        stem_mask: None,
        pool: MaxPool::default(),
        blocks,
        fc: Linear::new(in_c, 2, weight, bias),
        pooled_shape: None,
    };
    model.round_to_f32();
    Ok(model)
}

pub fn softmax2(z: &[f64]) -> ProbPair {
    let m = z[0].max(z[1]);
    let (a, b) = ((z[0] - m).exp(), (z[1] - m).exp());
    [a / (a + b), b / (a + b)]
}

impl MiniResNet {
    pub fn config(&self) -> &MiniResNetConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[BasicBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [BasicBlock] {
        &mut self.blocks
    }

    /// Visits every parameter and buffer in exchange-format order.
    pub fn for_each_state(&mut self, f: &mut dyn FnMut(StateRef<'_>)) {
        visit_conv(&mut self.stem_conv, f);
        visit_bn(&mut self.stem_bn, f);
        for b in &mut self.blocks {
            b.for_each_state(f);
        }
        f(StateRef::Param(&mut self.fc.weight));
        f(StateRef::Param(&mut self.fc.bias));
    }

    pub fn for_each_param(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.for_each_state(&mut |s| {
            if let StateRef::Param(p) = s {
                f(p)
            }
        });
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |p| n += p.value.len());
        n
    }

    pub fn state_len(&mut self) -> usize {
        let mut n = 0;
        self.for_each_state(&mut |s| n += s.values().len());
        n
    }

    pub fn zero_grad(&mut self) {
        self.for_each_param(&mut |p| p.zero_grad());
    }

    pub fn round_to_f32(&mut self) {
        self.for_each_state(&mut |mut s| s.values_mut().iter_mut().for_each(|v| *v = *v as f32 as f64));
    }

    /// Zeroes the linear head so every input yields equal logits.
    pub fn zero_head(&mut self) {
        self.fc.weight.value.iter_mut().for_each(|w| *w = 0.0);
        self.fc.bias.value.iter_mut().for_each(|w| *w = 0.0);
    }

    /// Maps images to a `[n, 1, s, s]` tensor with pixels in [-1, 1].
    pub fn images_to_tensor(&self, images: &[&GrayscaleImage]) -> Result<Tensor> {
        let s = self.config.input_size;
        let mut t = Tensor::zeros(images.len(), 1, s, s);
        for (i, img) in images.iter().enumerate() {
            if img.height() != s || img.width() != s {
                return Err(DetectorError::InputShape { expected: s, height: img.height(), width: img.width() });
            }
            let dst = &mut t.data[i * s * s..(i + 1) * s * s];
            dst.iter_mut().zip(img.pixels()).for_each(|(d, &p)| *d = p as f64 / 127.5 - 1.0);
        }
        Ok(t)
    }

    /// Stem output (after max pooling) in inference mode.
    pub fn stem_infer(&self, x: &Tensor) -> Tensor {
        let mut h = self.stem_bn.infer(&self.stem_conv.infer(x));
        relu_in_place(&mut h);
        self.pool.infer(&h)
    }

    /// Logits `[n * 2]` in inference mode (running batch-norm statistics).
    pub fn logits(&self, x: &Tensor) -> Vec<f64> {
        let mut h = self.stem_infer(x);
        for b in &self.blocks {
            h = b.infer(&h);
        }
        self.fc.infer(&global_avg_pool(&h))
    }

    /// Training-mode forward: batch statistics, caches kept for backward.
    pub fn forward_train(&mut self, x: Tensor) -> Vec<f64> {
        let h = self.stem_conv.forward_train(x);
        let mut h = self.stem_bn.forward_train(h);
        self.stem_mask = Some(relu_in_place(&mut h));
        let mut h = self.pool.forward_train(&h);
        for b in &mut self.blocks {
            h = b.forward_train(h);
        }
        self.pooled_shape = Some([h.n, h.c, h.h, h.w]);
        self.fc.forward_train(global_avg_pool(&h))
    }

    /// Hash of every ReLU mask and max-pool selection recorded by the last
    /// [`forward_train`](Self::forward_train). Two forwards with the same
    /// signature ran through the same piecewise-linear region.
    pub fn activation_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.stem_mask.hash(&mut h);
        self.pool.argmax().hash(&mut h);
        for b in &self.blocks {
            b.masks.hash(&mut h);
        }
        h.finish()
    }

    /// Backpropagates `d loss / d logits`, accumulating parameter gradients.
    pub fn backward(&mut self, grad_logits: &[f64]) {
        let [n, c, h, w] = self.pooled_shape.take().expect("backward without forward");
        let g = self.fc.backward(grad_logits);
        let mut g = global_avg_pool_backward(&g, n, c, h, w);
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(g);
        }
        let mut g = self.pool.backward(&g);
        relu_backward(&mut g, &self.stem_mask.take().expect("stem mask"));
        let g = self.stem_bn.backward(&g);
        self.stem_conv.backward(&g, false);
    }

    pub fn predict_tensor(&self, x: &Tensor) -> Vec<ProbPair> {
        self.logits(x).chunks_exact(2).map(softmax2).collect()
    }
}

impl DetectorModel for MiniResNet {
    fn input_size(&self) -> usize {
        self.config.input_size
    }

    fn predict_batch(&self, images: &[&GrayscaleImage]) -> Result<Vec<ProbPair>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.predict_tensor(&self.images_to_tensor(images)?))
    }
}
