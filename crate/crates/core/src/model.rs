//! Causal TCN for V̇O₂ regression.
//!
//! Residual blocks of dilated causal convolutions (conv → layer norm → ReLU →
//! dropout per layer), dilations `1, 2, …, 2^(N−1)` grouped pairwise with an
//! odd count folding its first three dilations into the first block. The first
//! block carries a biased 1×1 convolution on the skip path when the input
//! width differs from the filter count. The features at the last time step
//! feed a biased dense layer with linear output.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::ops::LAYER_NORM_EPS;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Default hyperparameter search grid.
pub const GRID_FILTERS: [usize; 5] = [2, 4, 8, 16, 24];
pub const GRID_KERNELS: [usize; 8] = [1, 2, 3, 4, 5, 6, 7, 8];
pub const GRID_DILATIONS: [usize; 5] = [1, 2, 3, 4, 5];

const MAX_DILATION_DEPTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcnConfig {
    pub num_filters: usize,
    pub kernel_size: usize,
    pub dilation_depth: usize,
    pub input_features: usize,
    pub dropout_rate: f64,
}

impl TcnConfig {
    pub const DEFAULT_INPUT_FEATURES: usize = 5;
    pub const DEFAULT_DROPOUT: f64 = 0.2;

    pub fn new(num_filters: usize, kernel_size: usize, dilation_depth: usize) -> Self {
        Self {
            num_filters,
            kernel_size,
            dilation_depth,
            input_features: Self::DEFAULT_INPUT_FEATURES,
            dropout_rate: Self::DEFAULT_DROPOUT,
        }
    }

    pub fn with_input_features(mut self, n: usize) -> Self {
        self.input_features = n;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_filters == 0 || self.kernel_size == 0 || self.input_features == 0 {
            return Err(Error::Config(format!("filters, kernel and input features must be positive: {:?}", self)));
        }
        if self.dilation_depth == 0 || self.dilation_depth > MAX_DILATION_DEPTH {
            return Err(Error::Config(format!(
                "dilation depth must be in 1..={}, got {}",
                MAX_DILATION_DEPTH, self.dilation_depth
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }

    pub fn receptive_field(&self) -> usize {
        1 + (self.kernel_size - 1) * ((1usize << self.dilation_depth) - 1)
    }

    /// Every (filters, kernel, dilations) combination of the default grid, 200 in total.
    pub fn full_grid() -> Vec<TcnConfig> {
        let mut out = Vec::with_capacity(200);
        for &f in &GRID_FILTERS {
            for &k in &GRID_KERNELS {
                for &n in &GRID_DILATIONS {
                    out.push(TcnConfig::new(f, k, n));
                }
            }
        }
        out
    }
}

/// Number of past steps, including the current one, that can reach the output.
pub fn receptive_field(kernel_size: usize, dilation_depth: usize) -> Result<usize> {
    if kernel_size == 0 || dilation_depth == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size and dilation depth must be positive, got ({}, {})",
            kernel_size, dilation_depth
        )));
    }
    if dilation_depth > MAX_DILATION_DEPTH {
        return Err(Error::InvalidArgument(format!("dilation depth {} too large", dilation_depth)));
    }
    Ok(1 + (kernel_size - 1) * ((1usize << dilation_depth) - 1))
}

/// Dilations per residual block.
pub fn block_dilations(dilation_depth: usize) -> Vec<Vec<usize>> {
    let all: Vec<usize> = (0..dilation_depth).map(|i| 1usize << i).collect();
    let (head, rest) = if dilation_depth % 2 == 1 { all.split_at(dilation_depth.min(3)) } else { all.split_at(0) };
    let mut blocks = Vec::new();
    if !head.is_empty() {
        blocks.push(head.to_vec());
    }
    blocks.extend(rest.chunks(2).map(<[usize]>::to_vec));
    blocks
}

/// Trainable scalar count, computed from the layer accounting alone.
pub fn param_count(config: &TcnConfig) -> usize {
    let (f, k, n) = (config.num_filters, config.kernel_size, config.input_features);
    let mut total = 0;
    let mut cin = n;
    for block in block_dilations(config.dilation_depth) {
        for _ in block {
            total += cin * k * f + f + 2 * f;
            cin = f;
        }
    }
    if n != f {
        total += n * f + f;
    }
    total + f + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSlot {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter store. Slots appear in block order: for each block, each
/// layer's kernel, bias, layer-norm gain and shift; then the block's skip
/// kernel and bias if any; finally the head weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    slots: Vec<ParamSlot>,
    values: Vec<f64>,
}

impl ModelWeights {
    fn push_slot(slots: &mut Vec<ParamSlot>, total: &mut usize, name: String, shape: Vec<usize>) -> usize {
        let len: usize = shape.iter().product();
        slots.push(ParamSlot { name, shape, offset: *total });
        *total += len;
        slots.len() - 1
    }

    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot_values(&self, i: usize) -> &[f64] {
        let s = &self.slots[i];
        &self.values[s.offset..s.offset + s.len()]
    }

    pub fn slot_values_mut(&mut self, i: usize) -> &mut [f64] {
        let (o, l) = (self.slots[i].offset, self.slots[i].len());
        &mut self.values[o..o + l]
    }

    pub fn tensor(&self, i: usize) -> Tensor {
        Tensor::from_parts(self.slots[i].shape.clone(), self.slot_values(i).to_vec())
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    /// Put every slot on `tape` as a differentiable leaf, in slot order.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        (0..self.slots.len()).map(|i| tape.param(self.tensor(i))).collect()
    }

    /// Flatten per-slot gradients from a backward pass into slot order.
    pub fn collect_grads(&self, grads: &crate::autodiff::Gradients, vars: &[Var]) -> Vec<f64> {
        let mut flat = vec![0.0; self.values.len()];
        for (slot, &v) in self.slots.iter().zip(vars) {
            grads.accumulate_into(v, &mut flat[slot.offset..slot.offset + slot.len()]);
        }
        flat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub dilation: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub bias: usize,
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipConv {
    pub kernel: usize,
    pub bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub layers: Vec<ConvLayer>,
    /// `None` is an identity skip.
    pub skip: Option<SkipConv>,
}

/// Whether dropout is active.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut RngStream),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    config: TcnConfig,
    blocks: Vec<ResidualBlock>,
    head_weight: usize,
    head_bias: usize,
    weights: ModelWeights,
}

impl TcnModel {
    /// Build with Glorot-uniform kernels, zero biases, unit gains.
    pub fn build(config: TcnConfig, rng: &mut RngStream) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        let k = config.kernel_size;
        for i in 0..model.weights.slots.len() {
            let slot = &model.weights.slots[i];
            let name = slot.name.clone();
            let shape = slot.shape.clone();
            let values = model.weights.slot_values_mut(i);
            if name.ends_with("ln_gamma") {
                values.fill(1.0);
            } else if name.ends_with("kernel") || name == "head.weight" {
                let (fan_in, fan_out) = match *shape.as_slice() {
                    [kk, cin, cout] => (kk * cin, kk * cout),
                    [cin, cout] => (cin, cout),
                    _ => unreachable!(),
                };
                debug_assert!(!name.ends_with("kernel") || shape[0] == k || name.contains("skip"));
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in values.iter_mut() {
                    *v = rng.uniform_range(-limit, limit);
                }
            }
        }
        Ok(model)
    }

    /// Correct structure with every parameter set to zero.
    pub fn zeroed(config: TcnConfig) -> Result<Self> {
        config.validate()?;
        let (f, k, n) = (config.num_filters, config.kernel_size, config.input_features);
        let mut slots = Vec::new();
        let mut total = 0;
        let mut blocks = Vec::new();
        let mut cin = n;
        for (b, dilations) in block_dilations(config.dilation_depth).into_iter().enumerate() {
            let mut layers = Vec::new();
            for (l, d) in dilations.into_iter().enumerate() {
                let p = format!("block{}.layer{}", b, l);
                let kernel = ModelWeights::push_slot(&mut slots, &mut total, format!("{}.kernel", p), vec![k, cin, f]);
                let bias = ModelWeights::push_slot(&mut slots, &mut total, format!("{}.bias", p), vec![f]);
                let gamma = ModelWeights::push_slot(&mut slots, &mut total, format!("{}.ln_gamma", p), vec![f]);
                let beta = ModelWeights::push_slot(&mut slots, &mut total, format!("{}.ln_beta", p), vec![f]);
                layers.push(ConvLayer { dilation: d, in_channels: cin, kernel, bias, gamma, beta });
                cin = f;
            }
            let skip = if b == 0 && n != f {
                let kernel =
                    ModelWeights::push_slot(&mut slots, &mut total, format!("block{}.skip.kernel", b), vec![1, n, f]);
                let bias = ModelWeights::push_slot(&mut slots, &mut total, format!("block{}.skip.bias", b), vec![f]);
                Some(SkipConv { kernel, bias })
            } else {
                None
            };
            blocks.push(ResidualBlock { layers, skip });
        }
        let head_weight = ModelWeights::push_slot(&mut slots, &mut total, "head.weight".into(), vec![f, 1]);
        let head_bias = ModelWeights::push_slot(&mut slots, &mut total, "head.bias".into(), vec![1]);
        Ok(Self { config, blocks, head_weight, head_bias, weights: ModelWeights { slots, values: vec![0.0; total] } })
    }

    /// Rebuild from a flat parameter vector in slot order.
    pub fn from_values(config: TcnConfig, values: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeroed(config)?;
        if values.len() != model.weights.values.len() {
            return Err(Error::Data(format!(
                "configuration needs {} parameters, got {}",
                model.weights.values.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        model.weights.values = values;
        Ok(model)
    }

    pub fn config(&self) -> &TcnConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }

    pub fn weights(&self) -> &ModelWeights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut ModelWeights {
        &mut self.weights
    }

    pub fn head_slots(&self) -> (usize, usize) {
        (self.head_weight, self.head_bias)
    }

    pub fn receptive_field(&self) -> usize {
        self.config.receptive_field()
    }

    /// Output steps each conv layer must produce (flattened layer order) for
    /// an input of `len` steps, when only the last step is needed.
    fn layer_keeps(&self, len: usize, last_only: bool) -> Vec<usize> {
        let dilations: Vec<usize> = self.blocks.iter().flat_map(|b| b.layers.iter().map(|l| l.dilation)).collect();
        if !last_only {
            return vec![len; dilations.len()];
        }
        let k = self.config.kernel_size;
        let mut need = 1;
        let mut keeps = vec![0; dilations.len()];
        for (i, d) in dilations.iter().enumerate().rev() {
            keeps[i] = need.min(len);
            need += (k - 1) * d;
        }
        keeps
    }

    /// Residual stack on a `[B×T×n]` input; returns block output features
    /// for the last `keep` steps, where `keep` is 1 when `last_only`.
    fn features(&self, tape: &mut Tape, params: &[Var], input: Var, mode: &mut Mode, last_only: bool) -> Result<Var> {
        let shape = tape.value(input).shape().to_vec();
        let [_, len, n] = *shape.as_slice() else {
            return Err(Error::shape("tcn forward", format!("input must be [B×T×n], got {:?}", shape)));
        };
        if n != self.config.input_features {
            return Err(Error::shape(
                "tcn forward",
                format!("model expects {} features, window has {}", self.config.input_features, n),
            ));
        }
        if len == 0 {
            return Err(Error::shape("tcn forward", "window has no rows"));
        }
        let keeps = self.layer_keeps(len, last_only);
        let crop = if last_only { self.receptive_field().min(len) } else { len };
        let mut x = tape.take_last(input, crop)?;
        let mut li = 0;
        for block in &self.blocks {
            let block_in = x;
            let mut h = x;
            for layer in &block.layers {
                let keep = keeps[li];
                li += 1;
                h = tape.causal_conv1d(h, params[layer.kernel], params[layer.bias], layer.dilation, keep)?;
                h = tape.layer_norm(h, params[layer.gamma], params[layer.beta], LAYER_NORM_EPS)?;
                h = tape.relu(h);
                if let Mode::Train(rng) = mode {
                    h = tape.dropout(h, self.config.dropout_rate, rng)?;
                }
            }
            let keep_out = keeps[li - 1];
            let skip = match &block.skip {
                Some(s) => tape.causal_conv1d(block_in, params[s.kernel], params[s.bias], 1, keep_out)?,
                None => tape.take_last(block_in, keep_out)?,
            };
            x = tape.add(h, skip)?;
        }
        Ok(x)
    }

    /// Prediction at the final step of each window in a `[B×T×n]` batch; returns a `[B×1]` node.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], input: Var, mode: &mut Mode) -> Result<Var> {
        let x = self.features(tape, params, input, mode, true)?;
        let s = tape.splice(x)?;
        tape.dense(s, params[self.head_weight], params[self.head_bias])
    }

    /// Standardized prediction for a `[T×n]` window (inference mode). Only the
    /// last `receptive_field()` rows are read.
    pub fn predict(&self, window: &Tensor) -> Result<f64> {
        let [t, n] = *window.shape() else {
            return Err(Error::shape("predict", format!("window must be [T×n], got {:?}", window.shape())));
        };
        if t == 0 {
            return Err(Error::shape("predict", "window has no rows"));
        }
        let batch = window.clone().reshape(&[1, t, n])?;
        Ok(self.predict_batch(&batch)?[0])
    }

    pub fn predict_batch(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let params = self.weights.register(&mut tape);
        let x = tape.constant(inputs.clone());
        let y = self.forward(&mut tape, &params, x, &mut Mode::Eval)?;
        Ok(tape.value(y).data().to_vec())
    }

    /// One causal pass over a whole `[L×n]` sequence in inference mode;
    /// element `t` is the prediction for the window ending at step `t`.
    /// Entries before `receptive_field() − 1` see zero padding.
    pub fn predict_sequence(&self, sequence: &Tensor) -> Result<Vec<f64>> {
        let [len, n] = *sequence.shape() else {
            return Err(Error::shape("predict_sequence", format!("expected [L×n], got {:?}", sequence.shape())));
        };
        let mut tape = Tape::new();
        let params = self.weights.register(&mut tape);
        let x = tape.constant(sequence.clone().reshape(&[1, len, n])?);
        let h = self.features(&mut tape, &params, x, &mut Mode::Eval, false)?;
        let f = self.config.num_filters;
        let rows = tape.value(h).clone().reshape(&[len, f])?;
        let out =
            crate::ops::dense(&rows, &self.weights.tensor(self.head_weight), &self.weights.tensor(self.head_bias))?;
        Ok(out.into_data())
    }
}
