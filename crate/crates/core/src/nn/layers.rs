//! Per-layer forward and backward passes. All kernels defer to the
//! deterministic tensor ops, so repeated runs are bit-identical.

use crate::error::{Error, Result};
use crate::nn::{Cache, Gradients, LayerSpec, LayerState, Mode, Model, Params};
use crate::tensor::ops::{col2im_acc, im2col, matmul_acc, transpose_flat};
use crate::tensor::{Rng, Scalar, Tensor};

const BN_EPS: f64 = 1e-3;
const BN_MOMENTUM: f64 = 0.99;

impl<T: Scalar> Model<T> {
    /// Run the network on a batch, returning the mean cross-entropy loss
    /// (plus any L2 penalty) and the pre-softmax logits.
    ///
    /// `Train` mode applies dropout, uses batch statistics for batch norm,
    /// and records the caches consumed by [`Model::backward`]. `Eval` mode is
    /// deterministic: dropout is an identity and batch norm uses running
    /// statistics. A non-finite loss is reported as a divergence error.
    pub fn forward(
        &mut self,
        batch: &Tensor<T>,
        labels: &[u32],
        mode: Mode,
    ) -> Result<(T, Tensor<T>)> {
        {
            let expected = &self.architecture().input;
            if batch.shape().len() != expected.len() + 1 || batch.shape()[1..] != expected[..] {
                return Err(Error::Dimension(format!(
                    "batch shape {:?} does not match input shape {:?}",
                    batch.shape(),
                    expected
                )));
            }
        }
        let n = batch.shape()[0];
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for a batch of {n}",
                labels.len()
            )));
        }
        let classes = self.num_classes() as u32;
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }

        let penalty = self.l2_penalty();
        let mut cur = batch.clone();
        let mut logits = None;
        let mut data_loss = T::ZERO;
        let layers = &mut self.layers;
        let rng = &mut self.dropout_rng;
        for layer in layers.iter_mut() {
            if matches!(layer.spec, LayerSpec::SoftmaxOutput) {
                let (loss, probs) = softmax_xent(&cur, labels);
                data_loss = loss;
                if mode == Mode::Train {
                    layer.cache = Cache::Softmax {
                        probs,
                        labels: labels.to_vec(),
                    };
                }
                logits = Some(cur);
                break;
            }
            cur = forward_layer(layer, cur, mode, rng)?;
        }
        let loss = data_loss + penalty;
        if !loss.is_finite() {
            self.cache_valid = false;
            return Err(Error::Divergence(format!(
                "loss became non-finite ({:?})",
                loss.to_f64()
            )));
        }
        if mode == Mode::Train {
            self.cache_valid = true;
        }
        Ok((loss, logits.expect("architectures end with softmax_output")))
    }

    /// Gradients of the loss from the last `Train`-mode forward pass with
    /// respect to every trainable parameter, L2 terms included. Dropout masks
    /// from that pass are reused.
    pub fn backward(&mut self) -> Result<Gradients<T>> {
        if !self.cache_valid {
            return Err(Error::Usage(
                "backward requires a train-mode forward pass since the last parameter change"
                    .into(),
            ));
        }
        let mut slots: Vec<Vec<T>> = vec![Vec::new(); self.trainable_slot_count()];
        let mut grad: Option<Tensor<T>> = None;
        for layer in self.layers.iter_mut().rev() {
            grad = Some(backward_layer(layer, grad, &mut slots)?);
        }
        Ok(Gradients { slots })
    }
}

fn forward_layer<T: Scalar>(
    layer: &mut LayerState<T>,
    input: Tensor<T>,
    mode: Mode,
    rng: &mut Rng,
) -> Result<Tensor<T>> {
    let train = mode == Mode::Train;
    let n = input.shape()[0];
    match (&layer.spec, &mut layer.params) {
        (LayerSpec::Dense { .. }, Params::Dense { w, b, in_dim, out_dim }) => {
            let (in_dim, out_dim) = (*in_dim, *out_dim);
            // w is [out, in]; transpose once so the product is x . w^T.
            let mut wt = Vec::new();
            transpose_flat(w, out_dim, in_dim, &mut wt);
            let mut out = Tensor::zeros(&[n, out_dim]);
            matmul_acc(out.as_mut_slice(), input.as_slice(), &wt, n, in_dim, out_dim);
            if let Some(b) = b {
                for row in out.as_mut_slice().chunks_exact_mut(out_dim) {
                    for (v, &bv) in row.iter_mut().zip(b.iter()) {
                        *v += bv;
                    }
                }
            }
            if train {
                layer.cache = Cache::Dense { input };
            }
            Ok(out)
        }
        (
            LayerSpec::Conv2d { .. },
            Params::Conv {
                w,
                b,
                kh,
                kw,
                cin,
                cout,
                stride,
                padding,
            },
        ) => {
            let (kh, kw, cin, cout) = (*kh, *kw, *cin, *cout);
            let in_shape = [
                input.shape()[0],
                input.shape()[1],
                input.shape()[2],
                input.shape()[3],
            ];
            let patches = im2col(&input, kh, kw, *stride, *padding);
            let rows = patches.shape()[0];
            let kcols = kh * kw * cin;
            let mut wt = Vec::new();
            transpose_flat(w, cout, kcols, &mut wt);
            let mut out = Tensor::zeros(&[rows, cout]);
            matmul_acc(out.as_mut_slice(), patches.as_slice(), &wt, rows, kcols, cout);
            if let Some(b) = b {
                for row in out.as_mut_slice().chunks_exact_mut(cout) {
                    for (v, &bv) in row.iter_mut().zip(b.iter()) {
                        *v += bv;
                    }
                }
            }
            let oh = crate::tensor::conv_output_dim(in_shape[1], kh, *stride, *padding);
            let ow = crate::tensor::conv_output_dim(in_shape[2], kw, *stride, *padding);
            if train {
                layer.cache = Cache::Conv { patches, in_shape };
            }
            out.reshape(&[n, oh, ow, cout])
        }
        (LayerSpec::Maxpool, _) => {
            let in_shape = [
                input.shape()[0],
                input.shape()[1],
                input.shape()[2],
                input.shape()[3],
            ];
            let (out, arg) = crate::tensor::maxpool2d(&input, 2, 2)?;
            if train {
                layer.cache = Cache::MaxPool { arg, in_shape };
            }
            Ok(out)
        }
        (LayerSpec::Flatten, _) => {
            let in_shape = input.shape().to_vec();
            let flat: usize = in_shape[1..].iter().product();
            let out = input.reshape(&[n, flat])?;
            if train {
                layer.cache = Cache::Flatten { in_shape };
            }
            Ok(out)
        }
        (LayerSpec::Relu, _) => {
            let mut out = input;
            let keep: Vec<bool> = out.as_slice().iter().map(|&v| v > T::ZERO).collect();
            for v in out.as_mut_slice() {
                if !(*v > T::ZERO) {
                    *v = T::ZERO;
                }
            }
            if train {
                layer.cache = Cache::Relu { keep };
            }
            Ok(out)
        }
        (LayerSpec::Dropout { rate }, _) => {
            let rate = *rate;
            if !train || rate == 0.0 {
                if train {
                    layer.cache = Cache::Dropout { mask: None };
                }
                return Ok(input);
            }
            // Inverted dropout: surviving activations are scaled so eval
            // needs no correction.
            let scale = T::from_f64(1.0 / (1.0 - rate as f64));
            let mut out = input;
            let mask: Vec<T> = out
                .as_slice()
                .iter()
                .map(|_| {
                    if rng.next_unit_f32() < rate {
                        T::ZERO
                    } else {
                        scale
                    }
                })
                .collect();
            for (v, &m) in out.as_mut_slice().iter_mut().zip(mask.iter()) {
                *v *= m;
            }
            layer.cache = Cache::Dropout { mask: Some(mask) };
            Ok(out)
        }
        (LayerSpec::Batchnorm, Params::BatchNorm { gamma, beta, running_mean, running_var }) => {
            let channels = gamma.len();
            let rows = input.numel() / channels;
            let mut out = input;
            let data = out.as_mut_slice();
            let eps = T::from_f64(BN_EPS);
            if train {
                let mut xhat = vec![T::ZERO; data.len()];
                let mut invstd = vec![T::ZERO; channels];
                for c in 0..channels {
                    let mut sum = T::ZERO;
                    for r in 0..rows {
                        sum += data[r * channels + c];
                    }
                    let mean = sum / T::from_f64(rows as f64);
                    let mut var = T::ZERO;
                    for r in 0..rows {
                        let d = data[r * channels + c] - mean;
                        var += d * d;
                    }
                    var = var / T::from_f64(rows as f64);
                    let istd = T::ONE / (var + eps).sqrt();
                    invstd[c] = istd;
                    let m = T::from_f64(BN_MOMENTUM);
                    running_mean[c] = m * running_mean[c] + (T::ONE - m) * mean;
                    running_var[c] = m * running_var[c] + (T::ONE - m) * var;
                    for r in 0..rows {
                        let xh = (data[r * channels + c] - mean) * istd;
                        xhat[r * channels + c] = xh;
                        data[r * channels + c] = gamma[c] * xh + beta[c];
                    }
                }
                layer.cache = Cache::BatchNorm { xhat, invstd, rows };
            } else {
                for c in 0..channels {
                    let istd = T::ONE / (running_var[c] + eps).sqrt();
                    for r in 0..rows {
                        let xh = (data[r * channels + c] - running_mean[c]) * istd;
                        data[r * channels + c] = gamma[c] * xh + beta[c];
                    }
                }
            }
            Ok(out)
        }
        (spec, _) => Err(Error::Usage(format!(
            "layer {spec:?} has inconsistent parameters"
        ))),
    }
}

/// Numerically safe row-wise softmax plus mean cross-entropy.
fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &[u32]) -> (T, Tensor<T>) {
    let n = logits.shape()[0];
    let c = logits.shape()[1];
    let mut probs = logits.clone();
    let mut loss_sum = 0.0f64;
    for (row, &label) in probs.as_mut_slice().chunks_exact_mut(c).zip(labels.iter()) {
        let mut max = row[0];
        for &v in row.iter() {
            if v > max {
                max = v;
            }
        }
        let mut denom = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            denom += *v;
        }
        for v in row.iter_mut() {
            *v = *v / denom;
        }
        loss_sum += -(row[label as usize].to_f64().ln());
    }
    (T::from_f64(loss_sum / n as f64), probs)
}

fn backward_layer<T: Scalar>(
    layer: &mut LayerState<T>,
    upstream: Option<Tensor<T>>,
    slots: &mut [Vec<T>],
) -> Result<Tensor<T>> {
    let slot_base = layer.slot_base;
    match (&layer.spec, &mut layer.params, &layer.cache) {
        (LayerSpec::SoftmaxOutput, _, Cache::Softmax { probs, labels }) => {
            // d(mean CE)/d(logits) = (softmax - onehot) / batch.
            let n = probs.shape()[0];
            let c = probs.shape()[1];
            let mut grad = probs.clone();
            let scale = T::ONE / T::from_f64(n as f64);
            for (row, &label) in grad.as_mut_slice().chunks_exact_mut(c).zip(labels.iter()) {
                row[label as usize] -= T::ONE;
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
            Ok(grad)
        }
        (LayerSpec::Dense { l2_rate, .. }, Params::Dense { w, b, in_dim, out_dim }, Cache::Dense { input }) => {
            let dy = upstream.expect("dense backward needs an upstream gradient");
            let (in_dim, out_dim) = (*in_dim, *out_dim);
            let n = dy.shape()[0];
            // dW[out,in] = dy^T . x
            let mut dyt = Vec::new();
            transpose_flat(dy.as_slice(), n, out_dim, &mut dyt);
            let mut dw = vec![T::ZERO; out_dim * in_dim];
            matmul_acc(&mut dw, &dyt, input.as_slice(), out_dim, n, in_dim);
            if *l2_rate > 0.0 {
                let lambda = T::from_f64(*l2_rate as f64);
                for (g, &wv) in dw.iter_mut().zip(w.iter()) {
                    *g += lambda * wv;
                }
            }
            slots[slot_base] = dw;
            if b.is_some() {
                let mut db = vec![T::ZERO; out_dim];
                for row in dy.as_slice().chunks_exact(out_dim) {
                    for (g, &v) in db.iter_mut().zip(row.iter()) {
                        *g += v;
                    }
                }
                slots[slot_base + 1] = db;
            }
            // dX[n,in] = dy . W  (W already stored [out,in]).
            let mut dx = Tensor::zeros(&[n, in_dim]);
            matmul_acc(dx.as_mut_slice(), dy.as_slice(), w, n, out_dim, in_dim);
            Ok(dx)
        }
        (
            LayerSpec::Conv2d { l2_rate, .. },
            Params::Conv { w, b, kh, kw, cin, cout, stride, padding },
            Cache::Conv { patches, in_shape },
        ) => {
            let dy = upstream.expect("conv backward needs an upstream gradient");
            let (kh, kw, cin, cout) = (*kh, *kw, *cin, *cout);
            let kcols = kh * kw * cin;
            let rows = patches.shape()[0];
            let dyf = dy.reshape(&[rows, cout])?;
            // dW[cout,kcols] = dy^T . patches
            let mut dyt = Vec::new();
            transpose_flat(dyf.as_slice(), rows, cout, &mut dyt);
            let mut dw = vec![T::ZERO; cout * kcols];
            matmul_acc(&mut dw, &dyt, patches.as_slice(), cout, rows, kcols);
            if *l2_rate > 0.0 {
                let lambda = T::from_f64(*l2_rate as f64);
                for (g, &wv) in dw.iter_mut().zip(w.iter()) {
                    *g += lambda * wv;
                }
            }
            slots[slot_base] = dw;
            if b.is_some() {
                let mut db = vec![T::ZERO; cout];
                for row in dyf.as_slice().chunks_exact(cout) {
                    for (g, &v) in db.iter_mut().zip(row.iter()) {
                        *g += v;
                    }
                }
                slots[slot_base + 1] = db;
            }
            // dPatches = dy . W, then scatter back onto the input image.
            let mut dpatches = vec![T::ZERO; rows * kcols];
            matmul_acc(&mut dpatches, dyf.as_slice(), w, rows, cout, kcols);
            Ok(col2im_acc(&dpatches, in_shape, kh, kw, *stride, *padding))
        }
        (LayerSpec::Maxpool, _, Cache::MaxPool { arg, in_shape }) => {
            let dy = upstream.expect("maxpool backward needs an upstream gradient");
            let mut dx = Tensor::zeros(in_shape);
            let dxs = dx.as_mut_slice();
            for (&src, &g) in arg.iter().zip(dy.as_slice().iter()) {
                dxs[src as usize] += g;
            }
            Ok(dx)
        }
        (LayerSpec::Flatten, _, Cache::Flatten { in_shape }) => {
            let dy = upstream.expect("flatten backward needs an upstream gradient");
            dy.reshape(in_shape)
        }
        (LayerSpec::Relu, _, Cache::Relu { keep }) => {
            let mut dy = upstream.expect("relu backward needs an upstream gradient");
            for (v, &k) in dy.as_mut_slice().iter_mut().zip(keep.iter()) {
                if !k {
                    *v = T::ZERO;
                }
            }
            Ok(dy)
        }
        (LayerSpec::Dropout { .. }, _, Cache::Dropout { mask }) => {
            let mut dy = upstream.expect("dropout backward needs an upstream gradient");
            if let Some(mask) = mask {
                for (v, &m) in dy.as_mut_slice().iter_mut().zip(mask.iter()) {
                    *v *= m;
                }
            }
            Ok(dy)
        }
        (
            LayerSpec::Batchnorm,
            Params::BatchNorm { gamma, .. },
            Cache::BatchNorm { xhat, invstd, rows },
        ) => {
            let dy = upstream.expect("batchnorm backward needs an upstream gradient");
            let rows = *rows;
            let channels = gamma.len();
            let shape = dy.shape().to_vec();
            let dyf = dy.as_slice();
            let mut dgamma = vec![T::ZERO; channels];
            let mut dbeta = vec![T::ZERO; channels];
            let mut dx = Tensor::zeros(&shape);
            let dxs = dx.as_mut_slice();
            let m = T::from_f64(rows as f64);
            for c in 0..channels {
                let mut sum_dy = T::ZERO;
                let mut sum_dyxh = T::ZERO;
                for r in 0..rows {
                    let i = r * channels + c;
                    sum_dy += dyf[i];
                    sum_dyxh += dyf[i] * xhat[i];
                }
                dgamma[c] = sum_dyxh;
                dbeta[c] = sum_dy;
                let scale = gamma[c] * invstd[c] / m;
                for r in 0..rows {
                    let i = r * channels + c;
                    dxs[i] = scale * (m * dyf[i] - sum_dy - xhat[i] * sum_dyxh);
                }
            }
            slots[slot_base] = dgamma;
            slots[slot_base + 1] = dbeta;
            Ok(dx)
        }
        (spec, _, _) => Err(Error::Usage(format!(
            "layer {spec:?} is missing its forward cache"
        ))),
    }
}
