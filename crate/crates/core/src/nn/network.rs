use super::kernels::{col2im3, gemm_nn, gemm_nt, gemm_tn, im2col3};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Layer kinds. Convolutions are fixed to 3×3 kernels, stride 1, padding 1;
/// pooling to 2×2 windows with stride 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
    },
    Relu,
    MaxPool2x2,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        in_features: usize,
        out_features: usize,
    },
}

/// Uniform Kaiming initialisation in fan-in mode with the ReLU gain `√2`:
/// samples from `[−b, b]` with `b = √2·√(3/fan_in)`.
#[derive(Debug, Clone, Copy)]
pub struct KaimingUniform {
    bound: f64,
}

impl KaimingUniform {
    pub fn new(fan_in: usize) -> Result<Self> {
        if fan_in == 0 {
            return Err(Error::domain("fan-in must be at least 1"));
        }
        Ok(Self {
            bound: std::f64::consts::SQRT_2 * (3.0 / fan_in as f64).sqrt(),
        })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        (2.0 * rng.next_f64() - 1.0) * self.bound
    }

    pub fn fill(&self, values: &mut [f64], rng: &mut SplitMix64) {
        for v in values {
            *v = self.sample(rng);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    /// weight `[out, in, 3, 3]`, bias `[out]`
    Conv2d {
        weight: Tensor,
        bias: Tensor,
    },
    Relu,
    MaxPool2x2,
    Dropout {
        rate: f64,
    },
    Flatten,
    /// weight `[out, in]`, bias `[out]`
    Dense {
        weight: Tensor,
        bias: Tensor,
    },
}

/// Whether a forward pass trains (dropout active, drawing from `rng`) or
/// evaluates.
pub enum Pass<'a> {
    Train(&'a mut SplitMix64),
    Eval,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv { cols: Vec<f64> },
    Relu { mask: Vec<bool>, min_margin: f64 },
    Pool { argmax: Vec<u32>, min_gap: f64 },
    Dropout { mask: Option<Vec<f64>> },
    Flatten,
    Dense { input: Vec<f64> },
}

/// Activations kept by [`Network::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Smallest `|z|` over all ReLU pre-activations in the batch.
    pub fn min_relu_margin(&self) -> f64 {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerCache::Relu { min_margin, .. } => Some(*min_margin),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest gap between the largest and second-largest value of any
    /// pooling window whose maximum is non-zero.
    pub fn min_pool_gap(&self) -> f64 {
        self.layers
            .iter()
            .filter_map(|l| match l {
                LayerCache::Pool { min_gap, .. } => Some(*min_gap),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// The piecewise-linear region the pass fell in: every ReLU on/off bit
    /// and every pooling argmax, in layer order.
    pub fn activation_pattern(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                LayerCache::Relu { mask, .. } => out.extend(mask.iter().map(|&b| u32::from(b))),
                LayerCache::Pool { argmax, .. } => out.extend_from_slice(argmax),
                _ => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    /// `shapes[i]` is the per-sample input shape of layer `i`; the last entry
    /// is the output shape.
    shapes: Vec<Vec<usize>>,
    seed: u64,
}

fn infer_shape(spec: &LayerSpec, input: &[usize]) -> Result<Vec<usize>> {
    let bad = |what: &str| {
        Err(Error::shape(format!(
            "{what} cannot follow activation shape {input:?}"
        )))
    };
    match *spec {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
        } => match *input {
            [c, h, w] if c == in_channels && out_channels > 0 => Ok(vec![out_channels, h, w]),
            _ => bad(&format!("Conv2d({in_channels}->{out_channels})")),
        },
        LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
        LayerSpec::MaxPool2x2 => match *input {
            [c, h, w] if h % 2 == 0 && w % 2 == 0 => Ok(vec![c, h / 2, w / 2]),
            _ => bad("MaxPool2x2 (needs even spatial extents)"),
        },
        LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        LayerSpec::Dense {
            in_features,
            out_features,
        } => match *input {
            [f] if f == in_features && out_features > 0 => Ok(vec![out_features]),
            _ => bad(&format!("Dense({in_features}->{out_features})")),
        },
    }
}

impl Network {
    /// Build a network for per-sample inputs of `input_shape` and initialise
    /// its weights from `seed`. Biases start at zero.
    pub fn new(input_shape: &[usize], specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        for spec in &specs {
            if let LayerSpec::Dropout { rate } = *spec {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::domain(format!(
                        "dropout rate must lie in [0, 1), got {rate}"
                    )));
                }
            }
            let next = infer_shape(spec, shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        if shapes.last().is_none_or(|s| s.len() != 1) {
            return Err(Error::shape("network must end in a flat class vector"));
        }

        let mut rng = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in &specs {
            let layer = match *spec {
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                } => {
                    let mut weight = Tensor::zeros(&[out_channels, in_channels, 3, 3]);
                    KaimingUniform::new(in_channels * 9)?.fill(weight.data_mut(), &mut rng);
                    Layer::Conv2d {
                        weight,
                        bias: Tensor::zeros(&[out_channels]),
                    }
                }
                LayerSpec::Dense {
                    in_features,
                    out_features,
                } => {
                    let mut weight = Tensor::zeros(&[out_features, in_features]);
                    KaimingUniform::new(in_features)?.fill(weight.data_mut(), &mut rng);
                    Layer::Dense {
                        weight,
                        bias: Tensor::zeros(&[out_features]),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::MaxPool2x2 => Layer::MaxPool2x2,
                LayerSpec::Dropout { rate } => Layer::Dropout { rate },
                LayerSpec::Flatten => Layer::Flatten,
            };
            layers.push(layer);
        }
        Ok(Self {
            specs,
            layers,
            shapes,
            seed,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().expect("non-empty")[0]
    }

    /// Per-sample activation shape entering layer `i` (`i == len` is the output).
    pub fn activation_shape(&self, i: usize) -> &[usize] {
        &self.shapes[i]
    }

    /// Number of layers that carry a weight and a bias.
    pub fn parameterized_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Conv2d { .. } | Layer::Dense { .. }))
            .count()
    }

    /// Weight then bias of every parameterised layer, in layer order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            if let Layer::Conv2d { weight, bias } | Layer::Dense { weight, bias } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Conv2d { weight, bias } | Layer::Dense { weight, bias } = l {
                out.push(weight);
                out.push(bias);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Replace all parameters; shapes must match [`Network::params`].
    pub fn set_params(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(Error::shape(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter().zip(&values) {
            if slot.shape() != v.shape() {
                return Err(Error::shape(format!(
                    "parameter shape {:?} does not match {:?}",
                    v.shape(),
                    slot.shape()
                )));
            }
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            **slot = v;
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != self.shapes[0].len() + 1 || shape[1..] != self.shapes[0][..] {
            return Err(Error::shape(format!(
                "input {:?} does not match N x {:?}",
                shape, self.shapes[0]
            )));
        }
        Ok(shape[0])
    }

    /// Logits `[N, classes]` plus the activations needed by [`Network::backward`].
    pub fn forward(&self, input: &Tensor, mut pass: Pass<'_>) -> Result<(Tensor, ForwardCache)> {
        let n = self.check_input(input)?;
        let mut x = input.data().to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let in_shape = &self.shapes[i];
            let out_shape = &self.shapes[i + 1];
            let (y, cache) = match layer {
                Layer::Conv2d { weight, bias } => {
                    conv_forward(&x, n, in_shape, out_shape[0], weight, bias)
                }
                Layer::Relu => relu_forward(x),
                Layer::MaxPool2x2 => pool_forward(&x, n, in_shape),
                Layer::Dropout { rate } => match &mut pass {
                    Pass::Train(rng) => dropout_forward(x, *rate, rng),
                    Pass::Eval => (x, LayerCache::Dropout { mask: None }),
                },
                Layer::Flatten => (x, LayerCache::Flatten),
                Layer::Dense { weight, bias } => {
                    dense_forward(x, n, in_shape[0], out_shape[0], weight, bias)
                }
            };
            x = y;
            caches.push(cache);
        }
        let logits = Tensor::new(vec![n, self.num_classes()], x)?;
        Ok((
            logits,
            ForwardCache {
                batch: n,
                layers: caches,
            },
        ))
    }

    /// Evaluation-mode logits.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.forward(input, Pass::Eval).map(|(logits, _)| logits)
    }

    /// Gradients of the loss with respect to every parameter, in the order of
    /// [`Network::params`].
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::State(format!(
                "cache holds {} layers but the network has {}",
                cache.layers.len(),
                self.layers.len()
            )));
        }
        let n = cache.batch;
        if grad_logits.shape() != [n, self.num_classes()] {
            return Err(Error::shape(format!(
                "logit gradient {:?} does not match [{n}, {}]",
                grad_logits.shape(),
                self.num_classes()
            )));
        }

        let mut grads: Vec<Tensor> = Vec::new();
        let mut g = grad_logits.data().to_vec();
        for i in (0..self.layers.len()).rev() {
            let in_shape = &self.shapes[i];
            let out_shape = &self.shapes[i + 1];
            let mismatch = || Error::State(format!("cache entry {i} does not match layer kind"));
            // The first layer never needs an input gradient.
            let need_input = i > 0;
            g = match (&self.layers[i], &cache.layers[i]) {
                (Layer::Conv2d { weight, bias }, LayerCache::Conv { cols }) => {
                    let (gx, gw, gb) =
                        conv_backward(&g, cols, n, in_shape, out_shape[0], weight, need_input);
                    grads.push(Tensor::new(bias.shape().to_vec(), gb)?);
                    grads.push(Tensor::new(weight.shape().to_vec(), gw)?);
                    gx
                }
                (Layer::Dense { weight, bias }, LayerCache::Dense { input }) => {
                    let (gx, gw, gb) =
                        dense_backward(&g, input, n, in_shape[0], out_shape[0], weight, need_input);
                    grads.push(Tensor::new(bias.shape().to_vec(), gb)?);
                    grads.push(Tensor::new(weight.shape().to_vec(), gw)?);
                    gx
                }
                (Layer::Relu, LayerCache::Relu { mask, .. }) => {
                    if mask.len() != g.len() {
                        return Err(mismatch());
                    }
                    for (gi, &m) in g.iter_mut().zip(mask) {
                        if !m {
                            *gi = 0.0;
                        }
                    }
                    g
                }
                (Layer::MaxPool2x2, LayerCache::Pool { argmax, .. }) => {
                    let mut gx = vec![0.0; n * in_shape.iter().product::<usize>()];
                    for (&src, &gi) in argmax.iter().zip(&g) {
                        gx[src as usize] += gi;
                    }
                    gx
                }
                (Layer::Dropout { .. }, LayerCache::Dropout { mask }) => {
                    if let Some(mask) = mask {
                        for (gi, m) in g.iter_mut().zip(mask) {
                            *gi *= m;
                        }
                    }
                    g
                }
                (Layer::Flatten, LayerCache::Flatten) => g,
                _ => return Err(mismatch()),
            };
        }
        grads.reverse();
        Ok(grads)
    }
}

/// The CNN used for the MNIST experiments: two 3×3 conv blocks (16 and 32
/// channels) with ReLU and 2×2 max pooling, dropout 0.25 after flattening,
/// then dense 1568→128→10. 206,922 trainable parameters.
pub fn build_appendix_cnn(seed: u64) -> Network {
    Network::new(&[1, 28, 28], appendix_specs(), seed).expect("appendix architecture is consistent")
}

pub fn appendix_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2d {
            in_channels: 1,
            out_channels: 16,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::Conv2d {
            in_channels: 16,
            out_channels: 32,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::Flatten,
        LayerSpec::Dropout { rate: 0.25 },
        LayerSpec::Dense {
            in_features: 32 * 7 * 7,
            out_features: 128,
        },
        LayerSpec::Relu,
        LayerSpec::Dense {
            in_features: 128,
            out_features: 10,
        },
    ]
}

fn conv_forward(
    x: &[f64],
    n: usize,
    in_shape: &[usize],
    out_c: usize,
    weight: &Tensor,
    bias: &Tensor,
) -> (Vec<f64>, LayerCache) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let hw = h * w;
    let k = c * 9;
    let mut cols = vec![0.0; n * k * hw];
    let mut y = vec![0.0; n * out_c * hw];
    for s in 0..n {
        let col = &mut cols[s * k * hw..(s + 1) * k * hw];
        im2col3(&x[s * c * hw..(s + 1) * c * hw], c, h, w, col);
        let out = &mut y[s * out_c * hw..(s + 1) * out_c * hw];
        for (o, plane) in out.chunks_exact_mut(hw).enumerate() {
            plane.fill(bias.data()[o]);
        }
        gemm_nn(out_c, k, hw, weight.data(), col, out);
    }
    (y, LayerCache::Conv { cols })
}

fn conv_backward(
    g: &[f64],
    cols: &[f64],
    n: usize,
    in_shape: &[usize],
    out_c: usize,
    weight: &Tensor,
    need_input: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let hw = h * w;
    let k = c * 9;
    let mut gw = vec![0.0; out_c * k];
    let mut gb = vec![0.0; out_c];
    let mut gx = if need_input {
        vec![0.0; n * c * hw]
    } else {
        Vec::new()
    };
    let mut gcols = vec![0.0; k * hw];
    for s in 0..n {
        let gs = &g[s * out_c * hw..(s + 1) * out_c * hw];
        for (o, plane) in gs.chunks_exact(hw).enumerate() {
            gb[o] += plane.iter().sum::<f64>();
        }
        let col = &cols[s * k * hw..(s + 1) * k * hw];
        gemm_nt(out_c, hw, k, gs, col, &mut gw);
        if need_input {
            gcols.fill(0.0);
            gemm_tn(k, out_c, hw, weight.data(), gs, &mut gcols);
            col2im3(&gcols, c, h, w, &mut gx[s * c * hw..(s + 1) * c * hw]);
        }
    }
    (gx, gw, gb)
}

fn relu_forward(mut x: Vec<f64>) -> (Vec<f64>, LayerCache) {
    let mut min_margin = f64::INFINITY;
    let mask = x
        .iter_mut()
        .map(|v| {
            min_margin = min_margin.min(v.abs());
            let on = *v > 0.0;
            if !on {
                *v = 0.0;
            }
            on
        })
        .collect();
    (x, LayerCache::Relu { mask, min_margin })
}

fn pool_forward(x: &[f64], n: usize, in_shape: &[usize]) -> (Vec<f64>, LayerCache) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let mut min_gap = f64::INFINITY;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                // row-major window order; strict '>' keeps the first maximum
                let idx = [top, top + 1, top + w, top + w + 1];
                let mut best = idx[0];
                for &j in &idx[1..] {
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                let runner_up = idx
                    .iter()
                    .filter(|&&j| j != best)
                    .map(|&j| x[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                // an all-zero window is dead ReLU output: no gradient flows either way
                if x[best] != 0.0 {
                    min_gap = min_gap.min(x[best] - runner_up);
                }
                y.push(x[best]);
                argmax.push(best as u32);
            }
        }
    }
    (y, LayerCache::Pool { argmax, min_gap })
}

fn dropout_forward(mut x: Vec<f64>, rate: f64, rng: &mut SplitMix64) -> (Vec<f64>, LayerCache) {
    let scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() < rate { 0.0 } else { scale })
        .collect();
    for (v, m) in x.iter_mut().zip(&mask) {
        *v *= m;
    }
    (x, LayerCache::Dropout { mask: Some(mask) })
}

fn dense_forward(
    x: Vec<f64>,
    n: usize,
    fan_in: usize,
    fan_out: usize,
    weight: &Tensor,
    bias: &Tensor,
) -> (Vec<f64>, LayerCache) {
    let mut y = Vec::with_capacity(n * fan_out);
    for _ in 0..n {
        y.extend_from_slice(bias.data());
    }
    gemm_nt(n, fan_in, fan_out, &x, weight.data(), &mut y);
    (y, LayerCache::Dense { input: x })
}

fn dense_backward(
    g: &[f64],
    input: &[f64],
    n: usize,
    fan_in: usize,
    fan_out: usize,
    weight: &Tensor,
    need_input: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gw = vec![0.0; fan_out * fan_in];
    let mut gb = vec![0.0; fan_out];
    for row in g.chunks_exact(fan_out) {
        for (b, r) in gb.iter_mut().zip(row) {
            *b += r;
        }
    }
    gemm_tn(fan_out, n, fan_in, g, input, &mut gw);
    let mut gx = Vec::new();
    if need_input {
        gx = vec![0.0; n * fan_in];
        gemm_nn(n, fan_out, fan_in, g, weight.data(), &mut gx);
    }
    (gx, gw, gb)
}

/// Mean cross-entropy (nats) of `logits [N, K]` against `labels`, and its
/// gradient `(softmax − onehot)/N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::shape(format!(
            "logits {:?} do not match {} labels",
            shape,
            labels.len()
        )));
    }
    let (n, k) = (shape[0], shape[1]);
    let mut grad = vec![0.0; n * k];
    let mut total = 0.0;
    for (s, (row, &label)) in logits.data().chunks_exact(k).zip(labels).enumerate() {
        if label >= k {
            return Err(Error::domain(format!("label {label} outside [0, {k})")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut grad[s * k..(s + 1) * k];
        let mut z = 0.0;
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - max).exp();
            z += *o;
        }
        total += z.ln() - (row[label] - max);
        for o in out.iter_mut() {
            *o /= z;
        }
        out[label] -= 1.0;
        for o in out.iter_mut() {
            *o /= n as f64;
        }
    }
    Ok((total / n as f64, Tensor::new(vec![n, k], grad)?))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
