//! Layer stack, training loop, freezing and gradient checking.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::adam::{adam_update, AdamConfig, Moments};
use super::metrics::ConfusionMatrix;
use super::ops::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool2x2_backward,
    maxpool2x2_forward, pooled_shape, softmax_cross_entropy, Activation, ConvGeometry,
};
use super::tensor::{Shape, Tensor};
use crate::error::{contract, Error, Result};
use crate::rng::{seeded, streams, Rng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvLayer {
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub activation: Activation,
    /// `[ky][kx][in][out]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub frozen: bool,
}

impl ConvLayer {
    fn geometry(&self) -> ConvGeometry {
        ConvGeometry {
            kernel: self.kernel,
            in_ch: self.in_ch,
            out_ch: self.out_ch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// `[out][in]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Layer {
    Conv(ConvLayer),
    MaxPool,
    Flatten,
    Dense(DenseLayer),
}

impl Layer {
    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Conv(c) => c.weights.len() + c.bias.len(),
            Layer::Dense(d) => d.weights.len() + d.bias.len(),
            Layer::MaxPool | Layer::Flatten => 0,
        }
    }

    pub fn is_frozen(&self) -> bool {
        match self {
            Layer::Conv(c) => c.frozen,
            Layer::Dense(d) => d.frozen,
            Layer::MaxPool | Layer::Flatten => true,
        }
    }

    fn trainable(&self) -> bool {
        self.parameter_count() > 0 && !self.is_frozen()
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Layer::Conv(c) => {
                if input.channels != c.in_ch {
                    return Err(contract!("conv expects {} channels, got shape {input}", c.in_ch));
                }
                Ok(Shape::new(input.rows, input.cols, c.out_ch))
            }
            Layer::MaxPool => {
                let s = pooled_shape(input);
                if s.rows == 0 || s.cols == 0 {
                    return Err(contract!("cannot pool shape {input}"));
                }
                Ok(s)
            }
            Layer::Flatten => Ok(Shape::flat(input.len())),
            Layer::Dense(d) => {
                if input.len() != d.inputs || input.rows != 1 || input.cols != 1 {
                    return Err(contract!("dense layer expects a flat {}-vector, got {input}", d.inputs));
                }
                Ok(Shape::flat(d.outputs))
            }
        }
    }

    fn params_mut(&mut self) -> Option<(&mut Vec<f64>, &mut Vec<f64>)> {
        match self {
            Layer::Conv(c) => Some((&mut c.weights, &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            Layer::MaxPool | Layer::Flatten => None,
        }
    }
}

/// Knobs of the default architecture.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    /// One `conv -> max-pool` block per entry.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    /// Width of the hidden dense layer.
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_rows: 200,
            input_cols: 100,
            conv_channels: vec![8, 16, 32, 32],
            kernel: 3,
            hidden: 16,
        }
    }
}

impl Architecture {
    /// Trainable parameters after the flatten layer, as a closed form.
    pub fn head_parameter_count(&self, n_classes: usize) -> Result<usize> {
        let flat = self.flatten_len()?;
        Ok(flat * self.hidden + self.hidden + self.hidden * n_classes + n_classes)
    }

    pub fn flatten_len(&self) -> Result<usize> {
        let (mut r, mut c) = (self.input_rows, self.input_cols);
        for _ in &self.conv_channels {
            r /= 2;
            c /= 2;
        }
        if r == 0 || c == 0 {
            return Err(contract!("input {}x{} is too small for {} pooling blocks", self.input_rows, self.input_cols, self.conv_channels.len()));
        }
        Ok(r * c * self.conv_channels.last().copied().unwrap_or(1))
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
fn glorot(rng: &mut Rng, len: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    (0..len).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * limit).collect()
}

fn new_conv(rng: &mut Rng, kernel: usize, in_ch: usize, out_ch: usize) -> ConvLayer {
    let kk = kernel * kernel;
    ConvLayer {
        kernel,
        in_ch,
        out_ch,
        activation: Activation::Swish,
        weights: glorot(rng, kk * in_ch * out_ch, kk * in_ch, kk * out_ch),
        bias: vec![0.0; out_ch],
        frozen: false,
    }
}

fn new_dense(rng: &mut Rng, inputs: usize, outputs: usize, activation: Activation) -> DenseLayer {
    DenseLayer {
        inputs,
        outputs,
        activation,
        weights: glorot(rng, inputs * outputs, inputs, outputs),
        bias: vec![0.0; outputs],
        frozen: false,
    }
}

/// Adam state; rebuilt whenever the layer stack changes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub step: u64,
    moments: Vec<Option<(Moments, Moments)>>,
}

impl OptimizerState {
    fn for_layers(layers: &[Layer]) -> Self {
        Self {
            step: 0,
            moments: layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(c) => Some((Moments::zeros(c.weights.len()), Moments::zeros(c.bias.len()))),
                    Layer::Dense(d) => Some((Moments::zeros(d.weights.len()), Moments::zeros(d.bias.len()))),
                    _ => None,
                })
                .collect(),
        }
    }
}

/// Convolutional readout: an ordered layer stack plus its optimizer state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReadoutModel {
    pub input: Shape,
    pub layers: Vec<Layer>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub optimizer: OptimizerState,
}

enum Cache {
    Conv { input: Tensor, pre: Tensor },
    Pool { mask: Vec<usize>, input: Shape },
    Flatten { input: Shape },
    Dense { input: Vec<f64>, pre: Vec<f64> },
}

/// Parameter gradients of one layer: `(weights, bias)`.
pub type LayerGrads = Option<(Vec<f64>, Vec<f64>)>;

impl ReadoutModel {
    pub fn new(input: Shape, layers: Vec<Layer>) -> Result<Self> {
        let model = Self {
            input,
            optimizer: OptimizerState::for_layers(&layers),
            layers,
        };
        model.output_shape()?;
        Ok(model)
    }

    /// Shape after the last layer; fails if any adjacent pair does not compose.
    pub fn output_shape(&self) -> Result<Shape> {
        self.layers.iter().try_fold(self.input, |s, l| l.output_shape(s))
    }

    pub fn n_outputs(&self) -> Result<usize> {
        Ok(self.output_shape()?.len())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    pub fn trainable_parameter_count(&self) -> usize {
        self.layers.iter().filter(|l| l.trainable()).map(Layer::parameter_count).sum()
    }

    /// Set the frozen flag on every convolution layer.
    pub fn freeze_convolutions(&mut self, frozen: bool) {
        for l in &mut self.layers {
            if let Layer::Conv(c) = l {
                c.frozen = frozen;
            }
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape != self.input {
            return Err(contract!("input shape {} does not match model input {}", x.shape, self.input));
        }
        Ok(())
    }

    /// Class scores for one input.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_prefix(x, self.layers.len())?.data)
    }

    /// Output of the first `n` layers.
    fn forward_prefix(&self, x: &Tensor, n: usize) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers[..n] {
            cur = match layer {
                Layer::Conv(c) => {
                    let mut t = conv2d_forward(&cur, c.geometry(), &c.weights, &c.bias)?;
                    t.data.iter_mut().for_each(|v| *v = c.activation.apply(*v));
                    t
                }
                Layer::MaxPool => maxpool2x2_forward(&cur).0,
                Layer::Flatten => Tensor {
                    shape: Shape::flat(cur.shape.len()),
                    data: cur.data,
                },
                Layer::Dense(d) => {
                    let z = dense_forward(&cur.data, &d.weights, &d.bias)?;
                    Tensor {
                        shape: Shape::flat(z.len()),
                        data: z.into_iter().map(|v| d.activation.apply(v)).collect(),
                    }
                }
            };
        }
        Ok(cur)
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let scores = self.forward(x)?;
        Ok(argmax(&scores))
    }

    fn forward_cached(&self, x: &Tensor) -> Result<(Vec<f64>, Vec<Cache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Conv(c) => {
                    let pre = conv2d_forward(&cur, c.geometry(), &c.weights, &c.bias)?;
                    let out = Tensor {
                        shape: pre.shape,
                        data: pre.data.iter().map(|&v| c.activation.apply(v)).collect(),
                    };
                    caches.push(Cache::Conv { input: cur, pre });
                    out
                }
                Layer::MaxPool => {
                    let (out, mask) = maxpool2x2_forward(&cur);
                    caches.push(Cache::Pool { mask, input: cur.shape });
                    out
                }
                Layer::Flatten => {
                    caches.push(Cache::Flatten { input: cur.shape });
                    Tensor {
                        shape: Shape::flat(cur.shape.len()),
                        data: cur.data,
                    }
                }
                Layer::Dense(d) => {
                    let pre = dense_forward(&cur.data, &d.weights, &d.bias)?;
                    let out: Vec<f64> = pre.iter().map(|&v| d.activation.apply(v)).collect();
                    caches.push(Cache::Dense { input: cur.data, pre });
                    Tensor {
                        shape: Shape::flat(out.len()),
                        data: out,
                    }
                }
            };
        }
        Ok((cur.data, caches))
    }

    /// Loss and per-layer parameter gradients for one labelled input.
    /// Frozen layers get `None`, and backpropagation stops below the
    /// lowest trainable layer.
    pub fn loss_and_gradients(&self, x: &Tensor, label: usize) -> Result<(f64, Vec<LayerGrads>)> {
        let (logits, caches) = self.forward_cached(x)?;
        let (loss, grad_logits) = softmax_cross_entropy(&logits, label)?;
        let mut grads: Vec<LayerGrads> = vec![None; self.layers.len()];
        let Some(lowest) = self.layers.iter().position(Layer::trainable) else {
            return Ok((loss, grads));
        };
        let mut g = Tensor {
            shape: Shape::flat(grad_logits.len()),
            data: grad_logits,
        };
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            if i < lowest {
                break;
            }
            let need_input = i > lowest;
            g = match (layer, cache) {
                (Layer::Conv(c), Cache::Conv { input, pre }) => {
                    let mut gp = g;
                    for (d, z) in gp.data.iter_mut().zip(&pre.data) {
                        *d *= c.activation.grad(*z);
                    }
                    let cg = conv2d_backward(&input, c.geometry(), &c.weights, &gp, need_input)?;
                    if !c.frozen {
                        grads[i] = Some((cg.weights, cg.bias));
                    }
                    match cg.input {
                        Some(t) => t,
                        None => break,
                    }
                }
                (Layer::MaxPool, Cache::Pool { mask, input }) => maxpool2x2_backward(&g, &mask, input),
                (Layer::Flatten, Cache::Flatten { input }) => Tensor { shape: input, data: g.data },
                (Layer::Dense(d), Cache::Dense { input, pre }) => {
                    let gp: Vec<f64> = g.data.iter().zip(&pre).map(|(d0, z)| d0 * d.activation.grad(*z)).collect();
                    let dg = dense_backward(&input, &d.weights, &gp, need_input)?;
                    if !d.frozen {
                        grads[i] = Some((dg.weights, dg.bias));
                    }
                    match dg.input {
                        Some(v) => Tensor {
                            shape: Shape::flat(v.len()),
                            data: v,
                        },
                        None => break,
                    }
                }
                _ => unreachable!("cache kinds follow the layer kinds"),
            };
        }
        Ok((loss, grads))
    }

    /// One Adam step on every trainable layer using `grads`.
    pub fn apply_gradients(&mut self, grads: &[LayerGrads], cfg: &AdamConfig) {
        if self.optimizer.moments.len() != self.layers.len() {
            self.optimizer = OptimizerState::for_layers(&self.layers);
        }
        self.optimizer.step += 1;
        let step = self.optimizer.step;
        for ((layer, g), state) in self.layers.iter_mut().zip(grads).zip(self.optimizer.moments.iter_mut()) {
            if layer.is_frozen() {
                continue;
            }
            if let (Some((gw, gb)), Some((w, b)), Some((mw, mb))) = (g, layer.params_mut(), state.as_mut()) {
                adam_update(w, gw, mw, step, cfg);
                adam_update(b, gb, mb, step, cfg);
            }
        }
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// The default readout: four `conv 3x3 (Swish) -> max-pool 2x2` blocks
/// with 8, 16, 32 and 32 channels, then flatten, a 16-unit Swish dense layer
/// and a linear output layer.
pub fn build_default_model(n_classes: usize, seed: u64) -> Result<ReadoutModel> {
    build_model(&Architecture::default(), n_classes, seed)
}

pub fn build_model(arch: &Architecture, n_classes: usize, seed: u64) -> Result<ReadoutModel> {
    if n_classes == 0 {
        return Err(contract!("a readout needs at least one class"));
    }
    if arch.kernel.is_multiple_of(2) || arch.hidden == 0 {
        return Err(contract!("kernel must be odd and the hidden layer non-empty"));
    }
    let mut rng = seeded(seed, streams::INIT);
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for &out_ch in &arch.conv_channels {
        layers.push(Layer::Conv(new_conv(&mut rng, arch.kernel, in_ch, out_ch)));
        layers.push(Layer::MaxPool);
        in_ch = out_ch;
    }
    layers.push(Layer::Flatten);
    let flat = arch.flatten_len()?;
    layers.push(Layer::Dense(new_dense(&mut rng, flat, arch.hidden, Activation::Swish)));
    layers.push(Layer::Dense(new_dense(&mut rng, arch.hidden, n_classes, Activation::Identity)));
    ReadoutModel::new(Shape::new(arch.input_rows, arch.input_cols, 1), layers)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 5,
            epochs: 100,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(contract!("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(contract!("batch size must be at least 1"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Mini-batch Adam on the mean cross-entropy. Returns the mean batch loss
/// of every epoch. Zero epochs leaves the model untouched.
pub fn train(model: &mut ReadoutModel, inputs: &[Tensor], labels: &[usize], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(contract!("training needs a non-empty set with one label per input"));
    }
    let n_out = model.n_outputs()?;
    if let Some(&l) = labels.iter().find(|&&l| l >= n_out) {
        return Err(contract!("label {l} out of range for {n_out} outputs"));
    }
    for x in inputs {
        model.check_input(x)?;
    }
    let adam = cfg.adam();
    let mut rng = seeded(cfg.seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut acc: Vec<LayerGrads> = vec![None; model.layers.len()];
            let mut batch_loss = 0.0;
            // Summed in batch order so results do not depend on scheduling.
            for &i in batch {
                let (loss, grads) = model.loss_and_gradients(&inputs[i], labels[i])?;
                batch_loss += loss;
                for (a, g) in acc.iter_mut().zip(grads) {
                    match (a.as_mut(), g) {
                        (Some((aw, ab)), Some((gw, gb))) => {
                            aw.iter_mut().zip(&gw).for_each(|(x, y)| *x += y);
                            ab.iter_mut().zip(&gb).for_each(|(x, y)| *x += y);
                        }
                        (None, Some(g)) => *a = Some(g),
                        _ => {}
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDivergence { epoch, batch: b });
            }
            for (gw, gb) in acc.iter_mut().flatten() {
                gw.iter_mut().for_each(|v| *v *= scale);
                gb.iter_mut().for_each(|v| *v *= scale);
            }
            model.apply_gradients(&acc, &adam);
            loss_sum += batch_loss;
            batches += 1;
        }
        history.push(loss_sum / batches as f64);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
}

/// Argmax predictions and the confusion matrix over a labelled set.
pub fn evaluate(model: &ReadoutModel, inputs: &[Tensor], labels: &[usize]) -> Result<Evaluation> {
    if inputs.len() != labels.len() {
        return Err(contract!("{} inputs but {} labels", inputs.len(), labels.len()));
    }
    let n = model.n_outputs()?;
    let mut confusion = ConfusionMatrix::new(n);
    let mut predictions = Vec::with_capacity(inputs.len());
    for (x, &l) in inputs.iter().zip(labels) {
        if l >= n {
            return Err(contract!("label {l} out of range for {n} outputs"));
        }
        let p = model.predict(x)?;
        confusion.record(l, p);
        predictions.push(p);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadRetrain {
    pub trainable_parameters: usize,
    pub loss_history: Vec<f64>,
}

/// Freeze every convolution, rebuild the dense head for `n_classes` outputs
/// with fresh weights, and train only the head.
pub fn freeze_and_retrain_head(
    model: &mut ReadoutModel,
    inputs: &[Tensor],
    labels: &[usize],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<HeadRetrain> {
    if n_classes == 0 {
        return Err(contract!("a readout needs at least one class"));
    }
    let flatten = model
        .layers
        .iter()
        .position(|l| matches!(l, Layer::Flatten))
        .ok_or_else(|| contract!("model has no flatten layer to split the head at"))?;
    let dense: Vec<(usize, Activation)> = model.layers[flatten + 1..]
        .iter()
        .map(|l| match l {
            Layer::Dense(d) => Ok((d.outputs, d.activation)),
            _ => Err(contract!("head may only contain dense layers")),
        })
        .collect::<Result<_>>()?;
    if dense.is_empty() {
        return Err(contract!("model has no dense head"));
    }
    let flat_shape = model.layers[..=flatten]
        .iter()
        .try_fold(model.input, |s, l| l.output_shape(s))?;

    model.freeze_convolutions(true);
    let mut rng = seeded(cfg.seed ^ 0x005e_ed0f_4ead, streams::INIT);
    let mut width = flat_shape.len();
    let last = dense.len() - 1;
    let mut head = Vec::with_capacity(dense.len());
    for (k, (outputs, activation)) in dense.into_iter().enumerate() {
        let outputs = if k == last { n_classes } else { outputs };
        head.push(Layer::Dense(new_dense(&mut rng, width, outputs, activation)));
        width = outputs;
    }
    // The frozen part is fixed, so run it once per input and train the head
    // on its output. The head sees exactly the values it would see inside
    // the full model.
    let mut head_model = ReadoutModel::new(flat_shape, head)?;
    let features = inputs
        .iter()
        .map(|x| {
            model.check_input(x)?;
            model.forward_prefix(x, flatten + 1)
        })
        .collect::<Result<Vec<_>>>()?;
    let loss_history = train(&mut head_model, &features, labels, cfg)?;

    model.layers.truncate(flatten + 1);
    model.layers.extend(head_model.layers);
    model.optimizer = OptimizerState::for_layers(&model.layers);
    model.output_shape()?;
    Ok(HeadRetrain {
        trainable_parameters: model.trainable_parameter_count(),
        loss_history,
    })
}

/// Central-difference step used by [`gradcheck`].
pub const GRADCHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Largest relative error between backpropagated and central-difference
/// gradients over every trainable parameter. Frozen layers are skipped.
pub fn gradcheck(model: &ReadoutModel, x: &Tensor, label: usize) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradients(x, label)?;
    let mut probe = model.clone();
    let loss_at = |m: &ReadoutModel| -> Result<f64> {
        let logits = m.forward(x)?;
        Ok(softmax_cross_entropy(&logits, label)?.0)
    };
    let mut worst: f64 = 0.0;
    for (i, grads) in analytic.iter().enumerate() {
        let Some((gw, gb)) = grads else { continue };
        for (which, g) in [gw, gb].into_iter().enumerate() {
            for (j, &a) in g.iter().enumerate() {
                let orig = param(&mut probe.layers[i], which, j);
                *param_mut(&mut probe.layers[i], which, j) = orig + GRADCHECK_STEP;
                let up = loss_at(&probe)?;
                *param_mut(&mut probe.layers[i], which, j) = orig - GRADCHECK_STEP;
                let down = loss_at(&probe)?;
                *param_mut(&mut probe.layers[i], which, j) = orig;
                let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
                worst = worst.max(err);
            }
        }
    }
    if !worst.is_finite() {
        return Err(Error::NumericDomain(format!("gradient check produced {worst}")));
    }
    Ok(worst)
}

fn param(layer: &mut Layer, which: usize, j: usize) -> f64 {
    *param_mut(layer, which, j)
}

fn param_mut(layer: &mut Layer, which: usize, j: usize) -> &mut f64 {
    let (w, b) = layer.params_mut().expect("parameterized layer");
    if which == 0 {
        &mut w[j]
    } else {
        &mut b[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64) -> ReadoutModel {
        let arch = Architecture {
            input_rows: 8,
            input_cols: 8,
            conv_channels: vec![2],
            kernel: 3,
            hidden: 5,
        };
        build_model(&arch, 3, seed).unwrap()
    }

    fn random_input(shape: Shape, seed: u64) -> Tensor {
        let mut rng = seeded(seed, 99);
        Tensor::from_vec(shape, (0..shape.len()).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn default_shape_trace_and_head_count() {
        let m = build_default_model(4, 1).unwrap();
        let mut s = m.input;
        let mut spatial = vec![(s.rows, s.cols)];
        for l in &m.layers {
            s = l.output_shape(s).unwrap();
            if matches!(l, Layer::MaxPool) {
                spatial.push((s.rows, s.cols));
            }
            if matches!(l, Layer::Flatten) {
                assert_eq!(s.len(), 2304);
            }
        }
        assert_eq!(spatial, vec![(200, 100), (100, 50), (50, 25), (25, 12), (12, 6)]);
        assert_eq!(Architecture::default().head_parameter_count(4).unwrap(), 36_948);
        assert_eq!(m.n_outputs().unwrap(), 4);
        assert_eq!(build_default_model(10, 1).unwrap().n_outputs().unwrap(), 10);
        let head: usize = m.layers.iter().skip_while(|l| !matches!(l, Layer::Flatten)).map(Layer::parameter_count).sum();
        assert_eq!(head, 36_948);
    }

    #[test]
    fn tiny_model_gradcheck() {
        let m = tiny_model(2);
        let x = random_input(m.input, 3);
        let err = gradcheck(&m, &x, 1).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn dense_only_gradcheck() {
        let mut rng = seeded(4, 0);
        let layers = vec![
            Layer::Flatten,
            Layer::Dense(new_dense(&mut rng, 12, 6, Activation::Swish)),
            Layer::Dense(new_dense(&mut rng, 6, 3, Activation::Identity)),
        ];
        let m = ReadoutModel::new(Shape::new(3, 4, 1), layers).unwrap();
        let err = gradcheck(&m, &random_input(m.input, 5), 2).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn frozen_layers_are_skipped_by_gradcheck() {
        let mut m = tiny_model(6);
        m.freeze_convolutions(true);
        let x = random_input(m.input, 7);
        let (_, grads) = m.loss_and_gradients(&x, 0).unwrap();
        assert!(grads[0].is_none());
        assert!(grads.iter().any(Option::is_some));
        assert!(gradcheck(&m, &x, 0).unwrap() < 1e-5);
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut m = tiny_model(1);
        let before = m.clone();
        let xs = vec![random_input(m.input, 1)];
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        assert!(train(&mut m, &xs, &[0], &cfg).unwrap().is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn frozen_layers_stay_bitwise_identical() {
        let mut m = tiny_model(8);
        m.freeze_convolutions(true);
        let conv_before = m.layers[0].clone();
        let xs: Vec<Tensor> = (0..6).map(|i| random_input(m.input, i)).collect();
        let labels = [0, 1, 2, 0, 1, 2];
        train(&mut m, &xs, &labels, &TrainConfig { epochs: 5, ..Default::default() }).unwrap();
        assert_eq!(m.layers[0], conv_before);
    }

    #[test]
    fn training_rejects_bad_labels_and_shapes() {
        let mut m = tiny_model(1);
        let x = random_input(m.input, 1);
        assert!(train(&mut m, core::slice::from_ref(&x), &[7], &TrainConfig::default()).is_err());
        let wrong = random_input(Shape::new(4, 4, 1), 1);
        assert!(train(&mut m, &[wrong], &[0], &TrainConfig::default()).is_err());
        assert!(train(&mut m, &[], &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn retrain_head_rebuilds_output_layer() {
        let mut m = tiny_model(3);
        let xs: Vec<Tensor> = (0..10).map(|i| random_input(m.input, i)).collect();
        let labels: Vec<usize> = (0..10).map(|i| i % 5).collect();
        let Layer::Conv(before) = m.layers[0].clone() else { panic!() };
        let cfg = TrainConfig { epochs: 2, ..Default::default() };
        let r = freeze_and_retrain_head(&mut m, &xs, &labels, 5, &cfg).unwrap();
        assert_eq!(m.n_outputs().unwrap(), 5);
        let Layer::Conv(after) = &m.layers[0] else { panic!() };
        assert!(after.frozen);
        assert_eq!((&after.weights, &after.bias), (&before.weights, &before.bias));
        // flatten(4x4x2 = 32) -> 5 -> 5
        assert_eq!(r.trainable_parameters, 32 * 5 + 5 + 5 * 5 + 5);
        assert_eq!(r.loss_history.len(), 2);
    }
}
