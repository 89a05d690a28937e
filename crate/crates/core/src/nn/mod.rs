//! Layers, initializers, loss, and the model container.
//!
//! Backprop is hand-written per layer; there is no autodiff graph. A
//! [`Model`] owns its parameters and a forward cache, validates its
//! architecture at build time, and exposes the per-neuron weight vectors
//! that the reconnection optimizer permutes.

mod init;
mod layers;
mod presets;
mod views;

pub use init::{init_weights, InitScheme};
pub use presets::{preset, preset_names};
pub use views::{WeightMatrixView, WeightVectorView};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Padding, Rng, Scalar, Tensor};

/// One layer of an architecture. Dense and conv layers carry their own
/// bias/regularization settings; the other kinds are parameter-free or, for
/// batch norm, carry their parameters implicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        units: usize,
        #[serde(default = "default_true")]
        use_bias: bool,
        #[serde(default)]
        l2_rate: f32,
    },
    Conv2d {
        filters: usize,
        kernel: [usize; 2],
        #[serde(default = "default_stride")]
        stride: usize,
        #[serde(default = "default_padding")]
        padding: Padding,
        #[serde(default = "default_true")]
        use_bias: bool,
        #[serde(default)]
        l2_rate: f32,
    },
    Maxpool,
    Flatten,
    Relu,
    Dropout {
        rate: f32,
    },
    Batchnorm,
    SoftmaxOutput,
}

fn default_true() -> bool {
    true
}
fn default_stride() -> usize {
    1
}
fn default_padding() -> Padding {
    Padding::Same
}

impl LayerSpec {
    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense {
            units,
            use_bias: true,
            l2_rate: 0.0,
        }
    }

    pub fn dense_no_bias(units: usize) -> Self {
        LayerSpec::Dense {
            units,
            use_bias: false,
            l2_rate: 0.0,
        }
    }

    pub fn conv(filters: usize, kernel: usize, stride: usize, padding: Padding) -> Self {
        LayerSpec::Conv2d {
            filters,
            kernel: [kernel, kernel],
            stride,
            padding,
            use_bias: true,
            l2_rate: 0.0,
        }
    }

    pub fn with_l2(mut self, rate: f32) -> Self {
        match &mut self {
            LayerSpec::Dense { l2_rate, .. } | LayerSpec::Conv2d { l2_rate, .. } => {
                *l2_rate = rate
            }
            _ => {}
        }
        self
    }

    pub fn without_bias(mut self) -> Self {
        match &mut self {
            LayerSpec::Dense { use_bias, .. } | LayerSpec::Conv2d { use_bias, .. } => {
                *use_bias = false
            }
            _ => {}
        }
        self
    }

    pub fn l2_rate(&self) -> f32 {
        match self {
            LayerSpec::Dense { l2_rate, .. } | LayerSpec::Conv2d { l2_rate, .. } => *l2_rate,
            _ => 0.0,
        }
    }
}

/// A full architecture: the per-sample input shape plus the layer chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Per-sample input shape, e.g. `[28, 28, 1]` for HWC images.
    pub input: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn new(input: Vec<usize>, layers: Vec<LayerSpec>) -> Self {
        Architecture { input, layers }
    }

    /// Walk the layer chain and return each layer's per-sample output shape.
    /// Fails when shapes do not line up or a layer is used out of place.
    pub fn plan(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.is_empty() || self.input.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "input shape {:?} must be non-empty and positive",
                self.input
            )));
        }
        let mut shape = self.input.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, spec) in self.layers.iter().enumerate() {
            let tag = format!("layer {i} ({spec:?})");
            match spec {
                LayerSpec::Dense { units, .. } => {
                    if shape.len() != 1 {
                        return Err(Error::Dimension(format!(
                            "{tag}: dense input must be flat, got {shape:?}"
                        )));
                    }
                    if *units == 0 {
                        return Err(Error::Parameter(format!("{tag}: units must be positive")));
                    }
                    shape = vec![*units];
                }
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    if shape.len() != 3 {
                        return Err(Error::Dimension(format!(
                            "{tag}: conv input must be HWC, got {shape:?}"
                        )));
                    }
                    if *filters == 0 || kernel[0] == 0 || kernel[1] == 0 {
                        return Err(Error::Parameter(format!(
                            "{tag}: filters and kernel must be positive"
                        )));
                    }
                    if *stride == 0 {
                        return Err(Error::Parameter(format!("{tag}: stride must be positive")));
                    }
                    if *padding == Padding::Valid && (shape[0] < kernel[0] || shape[1] < kernel[1])
                    {
                        return Err(Error::Dimension(format!(
                            "{tag}: kernel {kernel:?} does not fit input {shape:?}"
                        )));
                    }
                    shape = vec![
                        crate::tensor::conv_output_dim(shape[0], kernel[0], *stride, *padding),
                        crate::tensor::conv_output_dim(shape[1], kernel[1], *stride, *padding),
                        *filters,
                    ];
                }
                LayerSpec::Maxpool => {
                    if shape.len() != 3 || shape[0] < 2 || shape[1] < 2 {
                        return Err(Error::Dimension(format!(
                            "{tag}: maxpool needs HWC input with spatial dims >= 2, got {shape:?}"
                        )));
                    }
                    shape = vec![(shape[0] - 2) / 2 + 1, (shape[1] - 2) / 2 + 1, shape[2]];
                }
                LayerSpec::Flatten => {
                    shape = vec![shape.iter().product()];
                }
                LayerSpec::Relu | LayerSpec::Batchnorm => {}
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::Parameter(format!(
                            "{tag}: dropout rate must be in [0, 1), got {rate}"
                        )));
                    }
                }
                LayerSpec::SoftmaxOutput => {
                    if i != self.layers.len() - 1 {
                        return Err(Error::Dimension(format!(
                            "{tag}: softmax_output must be the final layer"
                        )));
                    }
                    if shape.len() != 1 {
                        return Err(Error::Dimension(format!(
                            "{tag}: softmax_output input must be flat, got {shape:?}"
                        )));
                    }
                }
            }
            if spec.l2_rate() < 0.0 {
                return Err(Error::Parameter(format!("{tag}: l2_rate must be >= 0")));
            }
            out.push(shape.clone());
        }
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOutput) => {}
            _ => {
                return Err(Error::Dimension(
                    "architecture must end with a softmax_output layer".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Lengths of all weight vectors (dense columns and flattened conv
    /// filters) in layer order. Biases never contribute.
    pub fn weight_vector_lengths(&self) -> Result<Vec<usize>> {
        let plan = self.plan()?;
        let mut lens = Vec::new();
        let mut shape = self.input.clone();
        for (spec, out_shape) in self.layers.iter().zip(&plan) {
            match spec {
                LayerSpec::Dense { units, .. } => {
                    lens.extend(std::iter::repeat(shape[0]).take(*units));
                }
                LayerSpec::Conv2d {
                    filters, kernel, ..
                } => {
                    lens.extend(std::iter::repeat(kernel[0] * kernel[1] * shape[2]).take(*filters));
                }
                _ => {}
            }
            shape = out_shape.clone();
        }
        Ok(lens)
    }

    /// FNV-1a over the canonical JSON encoding; identifies an architecture in
    /// checkpoint and permutation files.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("architecture serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Parameters owned by one layer.
#[derive(Debug, Clone)]
pub(crate) enum Params<T: Scalar> {
    None,
    /// `w` is `[out, in]` row-major: row j holds neuron j's incoming weights.
    Dense {
        w: Vec<T>,
        b: Option<Vec<T>>,
        in_dim: usize,
        out_dim: usize,
    },
    /// `w` is `[cout, kh*kw*cin]` row-major: row j is filter j flattened over
    /// `(kh, kw, cin)`.
    Conv {
        w: Vec<T>,
        b: Option<Vec<T>>,
        kh: usize,
        kw: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        padding: Padding,
    },
    BatchNorm {
        gamma: Vec<T>,
        beta: Vec<T>,
        running_mean: Vec<T>,
        running_var: Vec<T>,
    },
}

/// Forward-pass byproducts a layer needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Cache<T: Scalar> {
    None,
    Dense {
        input: Tensor<T>,
    },
    Conv {
        patches: Tensor<T>,
        in_shape: [usize; 4],
    },
    MaxPool {
        arg: Vec<u32>,
        in_shape: [usize; 4],
    },
    Relu {
        keep: Vec<bool>,
    },
    /// `None` mask means the layer ran at rate zero and was an identity.
    Dropout {
        mask: Option<Vec<T>>,
    },
    BatchNorm {
        xhat: Vec<T>,
        invstd: Vec<T>,
        rows: usize,
    },
    Flatten {
        in_shape: Vec<usize>,
    },
    Softmax {
        probs: Tensor<T>,
        labels: Vec<u32>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct LayerState<T: Scalar> {
    pub spec: LayerSpec,
    pub out_shape: Vec<usize>,
    pub params: Params<T>,
    pub cache: Cache<T>,
    /// Index of this layer's first trainable-parameter slot.
    pub slot_base: usize,
}

/// Gradients for every trainable parameter, in [`Model::visit_trainable`]
/// order.
#[derive(Debug, Clone)]
pub struct Gradients<T: Scalar = f32> {
    pub slots: Vec<Vec<T>>,
}

/// Forward mode: `Train` runs dropout and batch statistics and records the
/// backward cache; `Eval` is deterministic and cache-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A network: architecture, parameters, and the forward cache for backprop.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    arch: Architecture,
    pub(crate) layers: Vec<LayerState<T>>,
    dropout_rng: Rng,
    cache_valid: bool,
    slot_count: usize,
}

impl Model<f32> {
    /// Build and initialize a model; see [`init_weights`].
    pub fn build(arch: &Architecture, scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        init_weights(arch, scheme, rng)
    }

    /// Lift an `f32` model into `f64` for finite-difference gradient checks.
    pub fn to_f64(&self) -> Model<f64> {
        Model {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerState {
                    spec: l.spec.clone(),
                    out_shape: l.out_shape.clone(),
                    params: match &l.params {
                        Params::None => Params::None,
                        Params::Dense {
                            w,
                            b,
                            in_dim,
                            out_dim,
                        } => Params::Dense {
                            w: w.iter().map(|&v| v as f64).collect(),
                            b: b.as_ref().map(|b| b.iter().map(|&v| v as f64).collect()),
                            in_dim: *in_dim,
                            out_dim: *out_dim,
                        },
                        Params::Conv {
                            w,
                            b,
                            kh,
                            kw,
                            cin,
                            cout,
                            stride,
                            padding,
                        } => Params::Conv {
                            w: w.iter().map(|&v| v as f64).collect(),
                            b: b.as_ref().map(|b| b.iter().map(|&v| v as f64).collect()),
                            kh: *kh,
                            kw: *kw,
                            cin: *cin,
                            cout: *cout,
                            stride: *stride,
                            padding: *padding,
                        },
                        Params::BatchNorm {
                            gamma,
                            beta,
                            running_mean,
                            running_var,
                        } => Params::BatchNorm {
                            gamma: gamma.iter().map(|&v| v as f64).collect(),
                            beta: beta.iter().map(|&v| v as f64).collect(),
                            running_mean: running_mean.iter().map(|&v| v as f64).collect(),
                            running_var: running_var.iter().map(|&v| v as f64).collect(),
                        },
                    },
                    cache: Cache::None,
                    slot_base: l.slot_base,
                })
                .collect(),
            dropout_rng: self.dropout_rng.clone(),
            cache_valid: false,
            slot_count: self.slot_count,
        }
    }
}

impl<T: Scalar> Model<T> {
    pub(crate) fn from_states(
        arch: Architecture,
        layers: Vec<LayerState<T>>,
        slot_count: usize,
    ) -> Self {
        Model {
            arch,
            layers,
            dropout_rng: Rng::new(0),
            cache_valid: false,
            slot_count,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn arch_hash(&self) -> u64 {
        self.arch.hash()
    }

    /// Seed the dropout stream; training runs derive this from the run seed.
    pub fn set_dropout_rng(&mut self, rng: Rng) {
        self.dropout_rng = rng;
    }

    /// Number of classes produced by the output layer.
    pub fn num_classes(&self) -> usize {
        let n = self.layers.len();
        if n >= 2 {
            self.layers[n - 2].out_shape[0]
        } else {
            self.arch.input[0]
        }
    }

    /// Total parameter count, trainable plus batch-norm running statistics.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match &l.params {
                Params::None => 0,
                Params::Dense { w, b, .. } => w.len() + b.as_ref().map_or(0, |b| b.len()),
                Params::Conv { w, b, .. } => w.len() + b.as_ref().map_or(0, |b| b.len()),
                Params::BatchNorm {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                } => gamma.len() + beta.len() + running_mean.len() + running_var.len(),
            })
            .sum()
    }

    /// Trainable parameter count (weights, biases, batch-norm gamma/beta).
    pub fn trainable_count(&self) -> usize {
        let mut n = 0;
        self.visit_trainable(|_, p| n += p.len());
        n
    }

    pub fn trainable_slot_count(&self) -> usize {
        self.slot_count
    }

    /// Visit every trainable parameter tensor in fixed order: layers in
    /// sequence; within a layer, weights then bias (dense/conv) or gamma then
    /// beta (batch norm). Running statistics are not trainable.
    pub fn visit_trainable(&self, mut f: impl FnMut(usize, &[T])) {
        for layer in &self.layers {
            let base = layer.slot_base;
            match &layer.params {
                Params::None => {}
                Params::Dense { w, b, .. } | Params::Conv { w, b, .. } => {
                    f(base, w);
                    if let Some(b) = b {
                        f(base + 1, b);
                    }
                }
                Params::BatchNorm { gamma, beta, .. } => {
                    f(base, gamma);
                    f(base + 1, beta);
                }
            }
        }
    }

    /// Mutable variant of [`Model::visit_trainable`]; invalidates the
    /// backward cache since parameters may change.
    pub fn visit_trainable_mut(&mut self, mut f: impl FnMut(usize, &mut [T])) {
        self.cache_valid = false;
        for layer in &mut self.layers {
            let base = layer.slot_base;
            match &mut layer.params {
                Params::None => {}
                Params::Dense { w, b, .. } | Params::Conv { w, b, .. } => {
                    f(base, w);
                    if let Some(b) = b {
                        f(base + 1, b);
                    }
                }
                Params::BatchNorm { gamma, beta, .. } => {
                    f(base, gamma);
                    f(base + 1, beta);
                }
            }
        }
    }

    /// Snapshot of all trainable parameters, aligned with slot order.
    pub fn trainable_snapshot(&self) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = vec![Vec::new(); self.slot_count];
        self.visit_trainable(|slot, p| out[slot] = p.to_vec());
        out
    }

    /// Restore a snapshot taken with [`Model::trainable_snapshot`].
    pub fn load_trainable_snapshot(&mut self, snap: &[Vec<T>]) {
        assert_eq!(snap.len(), self.slot_count);
        self.visit_trainable_mut(|slot, p| p.copy_from_slice(&snap[slot]));
    }

    /// Reset every batch-norm gamma to 1 and beta to 0, leaving running
    /// statistics untouched. No-op for models without batch norm.
    pub fn bn_reset_gamma_beta(&mut self) {
        self.cache_valid = false;
        for layer in &mut self.layers {
            if let Params::BatchNorm { gamma, beta, .. } = &mut layer.params {
                gamma.fill(T::ONE);
                beta.fill(T::ZERO);
            }
        }
    }

    /// Sum of `(l2_rate / 2) * ||W||^2` over the regularized layers.
    pub fn l2_penalty(&self) -> T {
        let mut total = T::ZERO;
        for layer in &self.layers {
            let rate = layer.spec.l2_rate();
            if rate > 0.0 {
                let w = match &layer.params {
                    Params::Dense { w, .. } | Params::Conv { w, .. } => w,
                    _ => continue,
                };
                let mut sq = T::ZERO;
                for &v in w {
                    sq += v * v;
                }
                total += T::from_f64(rate as f64 / 2.0) * sq;
            }
        }
        total
    }

    pub(crate) fn invalidate_cache(&mut self) {
        self.cache_valid = false;
    }

    pub(crate) fn cache_valid(&self) -> bool {
        self.cache_valid
    }

    pub(crate) fn set_cache_valid(&mut self) {
        self.cache_valid = true;
    }

    pub(crate) fn dropout_rng_mut(&mut self) -> &mut Rng {
        &mut self.dropout_rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp_arch() -> Architecture {
        preset("mlp_784_100_100_10").unwrap()
    }

    #[test]
    fn plan_validates_chains() {
        let arch = mlp_arch();
        assert!(arch.plan().is_ok());

        let bad = Architecture::new(
            vec![28, 28, 1],
            vec![LayerSpec::dense(10), LayerSpec::SoftmaxOutput],
        );
        assert!(matches!(bad.plan(), Err(Error::Dimension(_))));

        let no_softmax = Architecture::new(vec![4], vec![LayerSpec::dense(2)]);
        assert!(no_softmax.plan().is_err());

        let early_softmax = Architecture::new(
            vec![4],
            vec![
                LayerSpec::SoftmaxOutput,
                LayerSpec::dense(2),
                LayerSpec::SoftmaxOutput,
            ],
        );
        assert!(early_softmax.plan().is_err());
    }

    #[test]
    fn mlp_parameter_count_matches_analytic() {
        let mut rng = Rng::new(1);
        let model = Model::build(&mlp_arch(), InitScheme::HeUniform, &mut rng).unwrap();
        assert_eq!(model.param_count(), 89_610);
    }

    #[test]
    fn arch_hash_is_stable_and_discriminates() {
        let a = mlp_arch();
        assert_eq!(a.hash(), mlp_arch().hash());
        let mut b = mlp_arch();
        b.layers[1] = LayerSpec::dense(101);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn vector_lengths_mlp() {
        let lens = mlp_arch().weight_vector_lengths().unwrap();
        assert_eq!(lens.len(), 210);
        assert_eq!(lens.iter().filter(|&&l| l == 784).count(), 100);
        assert_eq!(lens.iter().filter(|&&l| l == 100).count(), 110);
    }

    #[test]
    fn bn_reset_restores_ones_and_zeros() {
        let arch = Architecture::new(
            vec![4, 4, 2],
            vec![
                LayerSpec::conv(3, 3, 1, Padding::Same),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::dense(2),
                LayerSpec::SoftmaxOutput,
            ],
        );
        let mut rng = Rng::new(5);
        let mut model = Model::build(&arch, InitScheme::HeUniform, &mut rng).unwrap();
        // Scribble on gamma/beta as training would.
        model.visit_trainable_mut(|_, p| {
            for v in p.iter_mut() {
                *v += 0.25;
            }
        });
        model.bn_reset_gamma_beta();
        for layer in &model.layers {
            if let Params::BatchNorm { gamma, beta, .. } = &layer.params {
                assert!(gamma.iter().all(|&g| g == 1.0));
                assert!(beta.iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn bn_reset_without_bn_changes_nothing() {
        let mut rng = Rng::new(2);
        let mut model = Model::build(&mlp_arch(), InitScheme::HeUniform, &mut rng).unwrap();
        let before = model.trainable_snapshot();
        model.bn_reset_gamma_beta();
        assert_eq!(before, model.trainable_snapshot());
    }
}
