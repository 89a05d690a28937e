use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Architecture, LayerSpec, LayerState, Model, Params};
use crate::tensor::{Rng, Scalar};

/// Weight initialization schemes. Uniform bounds and normal standard
/// deviations follow the usual fan-based formulas:
///
/// - `he_uniform`:     U(-sqrt(6/fan_in), +sqrt(6/fan_in))
/// - `he_normal`:      N(0, 2/fan_in)
/// - `glorot_uniform`: U(+-sqrt(6/(fan_in+fan_out)))
/// - `glorot_normal`:  N(0, 2/(fan_in+fan_out))
///
/// For conv layers fan_in = kh*kw*cin and fan_out = kh*kw*cout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    HeUniform,
    HeNormal,
    GlorotUniform,
    GlorotNormal,
}

impl InitScheme {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "he_uniform" => Ok(InitScheme::HeUniform),
            "he_normal" => Ok(InitScheme::HeNormal),
            "glorot_uniform" => Ok(InitScheme::GlorotUniform),
            "glorot_normal" => Ok(InitScheme::GlorotNormal),
            other => Err(Error::Parameter(format!(
                "unknown init scheme \"{other}\" (expected he_uniform, he_normal, glorot_uniform or glorot_normal)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitScheme::HeUniform => "he_uniform",
            InitScheme::HeNormal => "he_normal",
            InitScheme::GlorotUniform => "glorot_uniform",
            InitScheme::GlorotNormal => "glorot_normal",
        }
    }

    /// Draw one weight for the given fan pair.
    pub fn draw(&self, rng: &mut Rng, fan_in: usize, fan_out: usize) -> f32 {
        match self {
            InitScheme::HeUniform => {
                let bound = (6.0 / fan_in as f64).sqrt() as f32;
                rng.uniform(-bound, bound)
            }
            InitScheme::HeNormal => {
                let std = (2.0 / fan_in as f64).sqrt() as f32;
                rng.normal(0.0, std)
            }
            InitScheme::GlorotUniform => {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                rng.uniform(-bound, bound)
            }
            InitScheme::GlorotNormal => {
                let std = (2.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                rng.normal(0.0, std)
            }
        }
    }
}

/// Build a model with weights drawn from `scheme` in storage order (row-major
/// per layer, layers in sequence), zero biases, and batch-norm gamma=1,
/// beta=0, running mean 0, running variance 1.
pub fn init_weights(arch: &Architecture, scheme: InitScheme, rng: &mut Rng) -> Result<Model<f32>> {
    let states = build_states(arch, |fan_in, fan_out, w| {
        for v in w.iter_mut() {
            *v = scheme.draw(rng, fan_in, fan_out);
        }
    })?;
    Ok(finish(arch, states))
}

/// Build a model with every weight equal to `value` (used by the
/// weight-agnostic path, which prunes afterwards).
pub fn init_constant_weights(arch: &Architecture, value: f32) -> Result<Model<f32>> {
    let states = build_states(arch, |_, _, w| w.fill(value))?;
    Ok(finish(arch, states))
}

fn finish(arch: &Architecture, states: Vec<LayerState<f32>>) -> Model<f32> {
    let slot_count = states
        .last()
        .map(|l| {
            l.slot_base
                + match &l.params {
                    Params::None => 0,
                    Params::Dense { b, .. } | Params::Conv { b, .. } => {
                        1 + usize::from(b.is_some())
                    }
                    Params::BatchNorm { .. } => 2,
                }
        })
        .unwrap_or(0);
    Model::from_states(arch.clone(), states, slot_count)
}

fn build_states(
    arch: &Architecture,
    mut fill_weights: impl FnMut(usize, usize, &mut [f32]),
) -> Result<Vec<LayerState<f32>>> {
    let plan = arch.plan()?;
    let mut states = Vec::with_capacity(arch.layers.len());
    let mut in_shape = arch.input.clone();
    let mut slot_base = 0usize;
    for (spec, out_shape) in arch.layers.iter().zip(plan) {
        let params = match spec {
            LayerSpec::Dense {
                units, use_bias, ..
            } => {
                let in_dim = in_shape[0];
                let mut w = vec![0.0f32; units * in_dim];
                fill_weights(in_dim, *units, &mut w);
                Params::Dense {
                    w,
                    b: use_bias.then(|| vec![0.0; *units]),
                    in_dim,
                    out_dim: *units,
                }
            }
            LayerSpec::Conv2d {
                filters,
                kernel,
                stride,
                padding,
                use_bias,
                ..
            } => {
                let cin = in_shape[2];
                let (kh, kw) = (kernel[0], kernel[1]);
                let mut w = vec![0.0f32; filters * kh * kw * cin];
                fill_weights(kh * kw * cin, kh * kw * filters, &mut w);
                Params::Conv {
                    w,
                    b: use_bias.then(|| vec![0.0; *filters]),
                    kh,
                    kw,
                    cin,
                    cout: *filters,
                    stride: *stride,
                    padding: *padding,
                }
            }
            LayerSpec::Batchnorm => {
                let c = *in_shape.last().unwrap();
                Params::BatchNorm {
                    gamma: vec![1.0; c],
                    beta: vec![0.0; c],
                    running_mean: vec![0.0; c],
                    running_var: vec![1.0; c],
                }
            }
            _ => Params::None,
        };
        let slots = match &params {
            Params::None => 0,
            Params::Dense { b, .. } | Params::Conv { b, .. } => 1 + usize::from(b.is_some()),
            Params::BatchNorm { .. } => 2,
        };
        states.push(LayerState {
            spec: spec.clone(),
            out_shape: out_shape.clone(),
            params,
            cache: crate::nn::Cache::None,
            slot_base,
        });
        slot_base += slots;
        in_shape = out_shape;
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::views::vector_slice;

    #[test]
    fn he_uniform_bound_fan_in_six() {
        // sqrt(6/6) = 1.
        let arch = Architecture::new(
            vec![6],
            vec![LayerSpec::dense(4), LayerSpec::SoftmaxOutput],
        );
        let mut rng = Rng::new(9);
        let model = init_weights(&arch, InitScheme::HeUniform, &mut rng).unwrap();
        for view in model.weight_vectors() {
            for &v in vector_slice(&model, &view) {
                assert!((-1.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn glorot_uniform_bound_three_three() {
        // sqrt(6/(3+3)) = 1.
        let arch = Architecture::new(
            vec![3],
            vec![LayerSpec::dense(3), LayerSpec::SoftmaxOutput],
        );
        let mut rng = Rng::new(11);
        let model = init_weights(&arch, InitScheme::GlorotUniform, &mut rng).unwrap();
        for view in model.weight_vectors() {
            for &v in vector_slice(&model, &view) {
                assert!((-1.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn he_normal_sample_std() {
        // fan_in 8 -> std 0.5; a million draws should sit within 1%.
        let arch = Architecture::new(
            vec![8],
            vec![
                LayerSpec::dense(125_000),
                LayerSpec::SoftmaxOutput,
            ],
        );
        let mut rng = Rng::new(13);
        let model = init_weights(&arch, InitScheme::HeNormal, &mut rng).unwrap();
        let mut sum = 0.0f64;
        let mut sq = 0.0f64;
        let mut n = 0usize;
        model.visit_trainable(|_, p| {
            if p.len() > 1 {
                for &v in p {
                    sum += v as f64;
                    sq += (v as f64) * (v as f64);
                    n += 1;
                }
            }
        });
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!((std - 0.5).abs() < 0.005, "std {std}");
    }

    #[test]
    fn same_seed_same_weights() {
        let arch = Architecture::new(
            vec![12],
            vec![LayerSpec::dense(7), LayerSpec::SoftmaxOutput],
        );
        let a = init_weights(&arch, InitScheme::GlorotNormal, &mut Rng::new(3)).unwrap();
        let b = init_weights(&arch, InitScheme::GlorotNormal, &mut Rng::new(3)).unwrap();
        assert_eq!(a.trainable_snapshot(), b.trainable_snapshot());
    }

    #[test]
    fn unknown_scheme_name_errors() {
        assert!(InitScheme::parse("lecun_uniform").is_err());
    }
}
