//! Small convolutional feature extractor with a removable linear head,
//! trained by hand-written backpropagation.
//!
//! All parameters live in one flat vector so gradients, SGD steps and
//! per-sample gradient norms are plain slice arithmetic. Layer order in the
//! vector: each conv layer (weights `c_out x c_in x ks x ks`, then bias),
//! the feature layer (`d_feat x flat`, bias), the head (`k x d_feat`, bias).

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{RngStream, Tensor};
use crate::snn::PseudoLabels;

/// One convolution stage: `ks x ks` kernel with same-padding, ReLU, and an
/// optional 2x2 max-pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub pool: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvNetSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub convs: Vec<ConvSpec>,
    pub d_feat: usize,
    /// Head width (number of pseudo-classes).
    pub k: usize,
}

impl ConvNetSpec {
    /// conv3x3(1->8) -> pool -> conv3x3(8->16) -> pool -> FC(64), head FC(64->k).
    pub fn reference(height: usize, width: usize, k: usize) -> Self {
        Self {
            channels: 1,
            height,
            width,
            convs: vec![
                ConvSpec {
                    out_channels: 8,
                    kernel: 3,
                    pool: true,
                },
                ConvSpec {
                    out_channels: 16,
                    kernel: 3,
                    pool: true,
                },
            ],
            d_feat: 64,
            k,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::invalid("image shape must be positive"));
        }
        if self.d_feat == 0 || self.k == 0 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let (mut h, mut w) = (self.height, self.width);
        for c in &self.convs {
            if c.out_channels == 0 || c.kernel == 0 || c.kernel % 2 == 0 {
                return Err(Error::invalid(
                    "conv layers need positive width and odd kernels",
                ));
            }
            if c.pool {
                h /= 2;
                w /= 2;
            }
            if h == 0 || w == 0 {
                return Err(Error::invalid("image too small for the pooling stack"));
            }
        }
        Ok(())
    }

    pub fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Restricts which parameters a gradient norm covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParamMask {
    #[default]
    All,
    /// Conv and feature layers only.
    Features,
    Head,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ConvGeom {
    c_in: usize,
    c_out: usize,
    ks: usize,
    h: usize,
    w: usize,
    pool: bool,
    w_off: usize,
    b_off: usize,
}

impl ConvGeom {
    fn out_hw(&self) -> (usize, usize) {
        if self.pool {
            (self.h / 2, self.w / 2)
        } else {
            (self.h, self.w)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct DenseGeom {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    convs: Vec<ConvGeom>,
    fc: DenseGeom,
    head: DenseGeom,
    total: usize,
}

impl Layout {
    fn new(spec: &ConvNetSpec) -> Self {
        let mut off = 0;
        let (mut c, mut h, mut w) = (spec.channels, spec.height, spec.width);
        let mut convs = Vec::new();
        for cs in &spec.convs {
            let w_off = off;
            off += cs.out_channels * c * cs.kernel * cs.kernel;
            let b_off = off;
            off += cs.out_channels;
            let g = ConvGeom {
                c_in: c,
                c_out: cs.out_channels,
                ks: cs.kernel,
                h,
                w,
                pool: cs.pool,
                w_off,
                b_off,
            };
            (h, w) = g.out_hw();
            c = cs.out_channels;
            convs.push(g);
        }
        let flat = c * h * w;
        let fc = DenseGeom {
            n_in: flat,
            n_out: spec.d_feat,
            w_off: off,
            b_off: off + flat * spec.d_feat,
        };
        off = fc.b_off + spec.d_feat;
        let head = DenseGeom {
            n_in: spec.d_feat,
            n_out: spec.k,
            w_off: off,
            b_off: off + spec.d_feat * spec.k,
        };
        off = head.b_off + spec.k;
        Self {
            convs,
            fc,
            head,
            total: off,
        }
    }
}

/// Intermediate values of one forward pass, kept for backprop.
struct Trace {
    /// Input to each conv layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each conv layer.
    pre: Vec<Vec<f64>>,
    /// For pooled layers, flat index into the activation chosen per output.
    argmax: Vec<Vec<usize>>,
    flat: Vec<f64>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

/// Feature extractor plus classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    spec: ConvNetSpec,
    layout: Layout,
    params: Vec<f64>,
}

/// Averaged batch loss and gradient, plus per-sample squared gradient norms.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGrads {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub per_sample_sq_norm: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Passes over the data per pseudo-label assignment.
    pub epochs_per_reassign: usize,
    pub batch: usize,
    /// Redraw the head before training on a new assignment.
    pub head_reinit: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            epochs_per_reassign: 1,
            batch: 32,
            head_reinit: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("train: lr must be positive".into()));
        }
        if self.batch == 0 || self.epochs_per_reassign == 0 {
            return Err(Error::Config(
                "train: batch and epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn fill_uniform(dst: &mut [f64], bound: f64, rng: &mut RngStream) {
    for v in dst {
        *v = rng.uniform_range(-bound, bound);
    }
}

impl ConvNet {
    /// Random network: every layer uniform in `+-1/sqrt(fan_in)`.
    pub fn new(spec: ConvNetSpec, rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for g in net.layout.convs.clone() {
            let bound = 1.0 / ((g.c_in * g.ks * g.ks) as f64).sqrt();
            fill_uniform(&mut net.params[g.w_off..g.b_off + g.c_out], bound, rng);
        }
        let fc = net.layout.fc.clone();
        let bound = 1.0 / (fc.n_in as f64).sqrt();
        fill_uniform(&mut net.params[fc.w_off..fc.b_off + fc.n_out], bound, rng);
        net.reinit_head(rng);
        Ok(net)
    }

    pub fn zeros(spec: ConvNetSpec) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::new(&spec);
        let params = vec![0.0; layout.total];
        Ok(Self {
            spec,
            layout,
            params,
        })
    }

    pub fn from_params(spec: ConvNetSpec, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if params.len() != net.params.len() {
            return Err(Error::dim(
                "parameter vector",
                net.params.len(),
                params.len(),
            ));
        }
        ensure_finite(&params, "network parameters")?;
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &ConvNetSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter index range covered by the head.
    pub fn head_range(&self) -> std::ops::Range<usize> {
        self.layout.head.w_off..self.layout.total
    }

    fn mask_range(&self, mask: ParamMask) -> std::ops::Range<usize> {
        match mask {
            ParamMask::All => 0..self.layout.total,
            ParamMask::Features => 0..self.layout.head.w_off,
            ParamMask::Head => self.head_range(),
        }
    }

    /// Redraws head weights and biases uniformly in `+-1/sqrt(d_feat)`.
    pub fn reinit_head(&mut self, rng: &mut RngStream) {
        let bound = 1.0 / (self.layout.head.n_in as f64).sqrt();
        let r = self.head_range();
        fill_uniform(&mut self.params[r], bound, rng);
    }

    /// Replaces the head with a freshly drawn one of width `k`.
    pub fn resize_head(&mut self, k: usize, rng: &mut RngStream) -> Result<()> {
        if k == 0 {
            return Err(Error::invalid("head width must be positive"));
        }
        let keep = self.layout.head.w_off;
        self.spec.k = k;
        self.layout = Layout::new(&self.spec);
        self.params.truncate(keep);
        self.params.resize(self.layout.total, 0.0);
        self.reinit_head(rng);
        Ok(())
    }

    /// `p <- p - lr * grads`.
    pub fn sgd_step(&mut self, grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::dim(
                "gradient vector",
                self.params.len(),
                grads.len(),
            ));
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            *p -= lr * g;
        }
        Ok(())
    }

    fn check_image(&self, image: &[f64]) -> Result<()> {
        if image.len() != self.spec.image_len() {
            return Err(Error::dim("image size", self.spec.image_len(), image.len()));
        }
        Ok(())
    }

    fn check_batch(&self, images: &Tensor) -> Result<()> {
        if images.nrows() > 0 && images.ncols() != self.spec.image_len() {
            return Err(Error::dim(
                "image size",
                self.spec.image_len(),
                images.ncols(),
            ));
        }
        Ok(())
    }

    fn forward_trace(&self, image: &[f64]) -> Trace {
        let p = &self.params;
        let mut x = image.to_vec();
        let mut inputs = Vec::with_capacity(self.layout.convs.len());
        let mut pre = Vec::with_capacity(self.layout.convs.len());
        let mut argmax = Vec::with_capacity(self.layout.convs.len());
        for g in &self.layout.convs {
            let z = conv_forward(g, &p[g.w_off..g.b_off], &p[g.b_off..g.b_off + g.c_out], &x);
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let (out, idx) = if g.pool {
                max_pool(&a, g.c_out, g.h, g.w)
            } else {
                (a, Vec::new())
            };
            inputs.push(std::mem::replace(&mut x, out));
            pre.push(z);
            argmax.push(idx);
        }
        let flat = x;
        let features = dense_forward(&self.layout.fc, p, &flat);
        let logits = dense_forward(&self.layout.head, p, &features);
        Trace {
            inputs,
            pre,
            argmax,
            flat,
            features,
            logits,
        }
    }

    /// Feature-layer output for one image (head not applied).
    pub fn forward_features(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.check_image(image)?;
        Ok(self.forward_trace(image).features)
    }

    pub fn forward_logits(&self, image: &[f64]) -> Result<Vec<f64>> {
        self.check_image(image)?;
        Ok(self.forward_trace(image).logits)
    }

    /// Features for a batch, `N x d_feat`.
    pub fn extract_features(&self, images: &Tensor) -> Result<Tensor> {
        self.check_batch(images)?;
        let rows: Vec<Vec<f64>> = (0..images.nrows())
            .into_par_iter()
            .map(|i| self.forward_trace(images.row(i)).features)
            .collect();
        let mut data = Vec::with_capacity(rows.len() * self.spec.d_feat);
        rows.into_iter().for_each(|r| data.extend(r));
        Tensor::new(vec![images.nrows(), self.spec.d_feat], data)
    }

    /// Softmax output for a batch, `N x k`.
    pub fn predict_proba(&self, images: &Tensor) -> Result<Tensor> {
        self.check_batch(images)?;
        let rows: Vec<Vec<f64>> = (0..images.nrows())
            .into_par_iter()
            .map(|i| softmax(&self.forward_trace(images.row(i)).logits))
            .collect();
        let mut data = Vec::with_capacity(rows.len() * self.spec.k);
        rows.into_iter().for_each(|r| data.extend(r));
        Tensor::new(vec![images.nrows(), self.spec.k], data)
    }

    /// Cross-entropy loss and the full parameter gradient for one sample.
    fn sample_grad(&self, image: &[f64], label: usize) -> (f64, Vec<f64>) {
        let tr = self.forward_trace(image);
        let probs = softmax(&tr.logits);
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        let mut grad = vec![0.0; self.layout.total];
        let mut dlogits = probs;
        dlogits[label] -= 1.0;

        let dfeat = dense_backward(
            &self.layout.head,
            &self.params,
            &tr.features,
            &dlogits,
            &mut grad,
        );
        let mut dx = dense_backward(&self.layout.fc, &self.params, &tr.flat, &dfeat, &mut grad);
        for (li, g) in self.layout.convs.iter().enumerate().rev() {
            let mut da = if g.pool {
                let mut full = vec![0.0; g.c_out * g.h * g.w];
                for (o, &src) in tr.argmax[li].iter().enumerate() {
                    full[src] += dx[o];
                }
                full
            } else {
                dx
            };
            for (d, z) in da.iter_mut().zip(&tr.pre[li]) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            dx = conv_backward(g, &self.params, &tr.inputs[li], &da, &mut grad, li > 0);
        }
        (loss, grad)
    }

    fn check_labels(&self, n: usize, labels: &PseudoLabels) -> Result<()> {
        if labels.len() != n {
            return Err(Error::dim("label count", n, labels.len()));
        }
        if labels.k() > self.spec.k {
            return Err(Error::LabelOutOfRange {
                label: labels.k() - 1,
                k: self.spec.k,
            });
        }
        Ok(())
    }

    /// Mean cross-entropy over the batch, its gradient, and for each sample
    /// the squared norm of the gradient of `log p(label | image)`.
    pub fn loss_and_grads(&self, images: &Tensor, labels: &PseudoLabels) -> Result<BatchGrads> {
        self.check_batch(images)?;
        self.check_labels(images.nrows(), labels)?;
        let n = images.nrows();
        if n == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let per: Vec<(f64, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| self.sample_grad(images.row(i), labels.as_slice()[i]))
            .collect();
        let mut grads = vec![0.0; self.layout.total];
        let mut loss = 0.0;
        let mut norms = Vec::with_capacity(n);
        for (l, g) in &per {
            loss += l;
            norms.push(g.iter().map(|v| v * v).sum());
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        let scale = 1.0 / n as f64;
        grads.iter_mut().for_each(|g| *g *= scale);
        Ok(BatchGrads {
            loss: loss * scale,
            grads,
            per_sample_sq_norm: norms,
        })
    }

    /// Per-sample squared norms of `grad log p(label | image)` restricted to
    /// `mask`, without materializing the batch gradient.
    pub fn per_sample_sq_grad_norms(
        &self,
        images: &Tensor,
        labels: &PseudoLabels,
        mask: ParamMask,
    ) -> Result<Vec<f64>> {
        self.check_batch(images)?;
        self.check_labels(images.nrows(), labels)?;
        let range = self.mask_range(mask);
        Ok((0..images.nrows())
            .into_par_iter()
            .map(|i| {
                let (_, g) = self.sample_grad(images.row(i), labels.as_slice()[i]);
                g[range.clone()].iter().map(|v| v * v).sum()
            })
            .collect())
    }

    /// One shuffled pass of minibatch SGD on cross-entropy; returns the mean
    /// batch loss.
    pub fn train_pass(
        &mut self,
        images: &Tensor,
        labels: &PseudoLabels,
        cfg: &TrainConfig,
        rng: &mut RngStream,
    ) -> Result<f64> {
        cfg.validate()?;
        self.check_batch(images)?;
        self.check_labels(images.nrows(), labels)?;
        let n = images.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let len = self.spec.image_len();
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let mut data = Vec::with_capacity(chunk.len() * len);
            chunk
                .iter()
                .for_each(|&i| data.extend_from_slice(images.row(i)));
            let mut dims = images.dims().to_vec();
            dims[0] = chunk.len();
            let batch = Tensor::new(dims, data)?;
            let y = PseudoLabels::new(
                chunk.iter().map(|&i| labels.as_slice()[i]).collect(),
                labels.k(),
            )?;
            let bg = self.loss_and_grads(&batch, &y)?;
            self.sgd_step(&bg.grads, cfg.lr)?;
            total += bg.loss;
            batches += 1;
        }
        Ok(total / batches.max(1) as f64)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

fn dense_forward(g: &DenseGeom, p: &[f64], x: &[f64]) -> Vec<f64> {
    let w = &p[g.w_off..g.b_off];
    let b = &p[g.b_off..g.b_off + g.n_out];
    (0..g.n_out)
        .map(|o| {
            b[o] + w[o * g.n_in..(o + 1) * g.n_in]
                .iter()
                .zip(x)
                .map(|(a, v)| a * v)
                .sum::<f64>()
        })
        .collect()
}

/// Accumulates weight and bias gradients; returns the input gradient.
fn dense_backward(g: &DenseGeom, p: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let w = &p[g.w_off..g.b_off];
    let mut dx = vec![0.0; g.n_in];
    for o in 0..g.n_out {
        let d = dy[o];
        grad[g.b_off + o] += d;
        if d == 0.0 {
            continue;
        }
        let row = &w[o * g.n_in..(o + 1) * g.n_in];
        let grow = &mut grad[g.w_off + o * g.n_in..g.w_off + (o + 1) * g.n_in];
        for i in 0..g.n_in {
            grow[i] += d * x[i];
            dx[i] += d * row[i];
        }
    }
    dx
}

fn conv_forward(g: &ConvGeom, w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let (h, wd, ks) = (g.h as isize, g.w as isize, g.ks);
    let pad = (ks / 2) as isize;
    let mut out = vec![0.0; g.c_out * g.h * g.w];
    for co in 0..g.c_out {
        let plane = &mut out[co * g.h * g.w..(co + 1) * g.h * g.w];
        plane.fill(b[co]);
        for ci in 0..g.c_in {
            let xin = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            let kern = &w[(co * g.c_in + ci) * ks * ks..(co * g.c_in + ci + 1) * ks * ks];
            for ky in 0..ks {
                let dy = ky as isize - pad;
                for kx in 0..ks {
                    let dxo = kx as isize - pad;
                    let kv = kern[ky * ks + kx];
                    let y0 = (-dy).max(0);
                    let y1 = (h - dy).min(h);
                    let x0 = (-dxo).max(0);
                    let x1 = (wd - dxo).min(wd);
                    for y in y0..y1 {
                        let src = ((y + dy) * wd) as usize;
                        let dst = (y * wd) as usize;
                        for xx in x0..x1 {
                            plane[dst + xx as usize] += kv * xin[src + (xx + dxo) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates kernel and bias gradients from `dz`; returns the input
/// gradient when `need_dx`.
fn conv_backward(
    g: &ConvGeom,
    p: &[f64],
    x: &[f64],
    dz: &[f64],
    grad: &mut [f64],
    need_dx: bool,
) -> Vec<f64> {
    let (h, wd, ks) = (g.h as isize, g.w as isize, g.ks);
    let pad = (ks / 2) as isize;
    let w = &p[g.w_off..g.b_off];
    let mut dx = if need_dx {
        vec![0.0; g.c_in * g.h * g.w]
    } else {
        Vec::new()
    };
    for co in 0..g.c_out {
        let dplane = &dz[co * g.h * g.w..(co + 1) * g.h * g.w];
        grad[g.b_off + co] += dplane.iter().sum::<f64>();
        for ci in 0..g.c_in {
            let xin = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
            let kbase = (co * g.c_in + ci) * ks * ks;
            for ky in 0..ks {
                let dy = ky as isize - pad;
                for kx in 0..ks {
                    let dxo = kx as isize - pad;
                    let y0 = (-dy).max(0);
                    let y1 = (h - dy).min(h);
                    let x0 = (-dxo).max(0);
                    let x1 = (wd - dxo).min(wd);
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let src = ((y + dy) * wd) as usize;
                        let dst = (y * wd) as usize;
                        for xx in x0..x1 {
                            acc += dplane[dst + xx as usize] * xin[src + (xx + dxo) as usize];
                        }
                    }
                    grad[g.w_off + kbase + ky * ks + kx] += acc;
                    if need_dx {
                        let kv = w[kbase + ky * ks + kx];
                        let dxin = &mut dx[ci * g.h * g.w..(ci + 1) * g.h * g.w];
                        for y in y0..y1 {
                            let src = ((y + dy) * wd) as usize;
                            let dst = (y * wd) as usize;
                            for xx in x0..x1 {
                                dxin[src + (xx + dxo) as usize] += kv * dplane[dst + xx as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// 2x2 max-pool (floor); returns pooled values and the source index of each.
fn max_pool(a: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = ch * h * w + 2 * y * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let cand = ch * h * w + (2 * y + dy) * w + 2 * x + dx;
                    if a[cand] > a[best] {
                        best = cand;
                    }
                }
                out.push(a[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}
