//! Per-neuron weight-vector views.
//!
//! A weight vector is the incoming weights of one neuron: a column of a
//! dense weight matrix, or one conv filter flattened over `(kh, kw, cin)`.
//! Both are stored as contiguous rows here, so a view is `(layer, neuron,
//! offset, len)` into the layer's weight buffer. The views of a layer
//! partition its weight entries exactly; biases and batch-norm parameters
//! never appear.

use crate::nn::{Model, Params};
use crate::tensor::Scalar;

/// Locator for one neuron's incoming-weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightVectorView {
    /// Index into the model's layer list.
    pub layer: usize,
    /// Neuron index within the layer.
    pub neuron: usize,
    /// Length of the vector.
    pub len: usize,
}

/// One weight matrix: all weight vectors of a dense or conv layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightMatrixView {
    pub layer: usize,
    pub vectors: usize,
    pub vector_len: usize,
}

impl<T: Scalar> Model<T> {
    /// All weight vectors in deterministic order: layers in sequence, then
    /// neuron index.
    pub fn weight_vectors(&self) -> Vec<WeightVectorView> {
        let mut views = Vec::new();
        for m in self.weight_matrices() {
            for neuron in 0..m.vectors {
                views.push(WeightVectorView {
                    layer: m.layer,
                    neuron,
                    len: m.vector_len,
                });
            }
        }
        views
    }

    /// All weight matrices in layer order.
    pub fn weight_matrices(&self) -> Vec<WeightMatrixView> {
        let mut out = Vec::new();
        for (layer, state) in self.layers.iter().enumerate() {
            match &state.params {
                Params::Dense { in_dim, out_dim, .. } => out.push(WeightMatrixView {
                    layer,
                    vectors: *out_dim,
                    vector_len: *in_dim,
                }),
                Params::Conv { kh, kw, cin, cout, .. } => out.push(WeightMatrixView {
                    layer,
                    vectors: *cout,
                    vector_len: kh * kw * cin,
                }),
                _ => {}
            }
        }
        out
    }

    /// The full weight buffer of one matrix, rows = weight vectors.
    pub fn matrix_weights(&self, m: &WeightMatrixView) -> &[T] {
        match &self.layers[m.layer].params {
            Params::Dense { w, .. } | Params::Conv { w, .. } => w,
            _ => panic!("layer {} holds no weight matrix", m.layer),
        }
    }

    pub fn matrix_weights_mut(&mut self, m: &WeightMatrixView) -> &mut [T] {
        self.invalidate_cache();
        match &mut self.layers[m.layer].params {
            Params::Dense { w, .. } | Params::Conv { w, .. } => w,
            _ => panic!("layer {} holds no weight matrix", m.layer),
        }
    }
}

/// Read access to one weight vector.
pub fn vector_slice<'m, T: Scalar>(model: &'m Model<T>, view: &WeightVectorView) -> &'m [T] {
    match &model.layers[view.layer].params {
        Params::Dense { w, .. } | Params::Conv { w, .. } => {
            &w[view.neuron * view.len..(view.neuron + 1) * view.len]
        }
        _ => panic!("layer {} holds no weight vectors", view.layer),
    }
}

/// Write access to one weight vector; invalidates the backward cache.
pub fn vector_slice_mut<'m, T: Scalar>(
    model: &'m mut Model<T>,
    view: &WeightVectorView,
) -> &'m mut [T] {
    model.invalidate_cache();
    match &mut model.layers[view.layer].params {
        Params::Dense { w, .. } | Params::Conv { w, .. } => {
            &mut w[view.neuron * view.len..(view.neuron + 1) * view.len]
        }
        _ => panic!("layer {} holds no weight vectors", view.layer),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{preset, Architecture, InitScheme, LayerSpec, Model};
    use crate::tensor::{Padding, Rng};

    #[test]
    fn mlp_views_match_spec_counts() {
        let mut rng = Rng::new(1);
        let model = Model::build(
            &preset("mlp_784_100_100_10").unwrap(),
            InitScheme::HeUniform,
            &mut rng,
        )
        .unwrap();
        let views = model.weight_vectors();
        assert_eq!(views.len(), 210);
        assert_eq!(views.iter().filter(|v| v.len == 784).count(), 100);
        assert_eq!(views.iter().filter(|v| v.len == 100).count(), 110);
    }

    #[test]
    fn conv_filters_flatten_to_27() {
        let arch = Architecture::new(
            vec![8, 8, 3],
            vec![
                LayerSpec::conv(64, 3, 1, Padding::Same),
                LayerSpec::Flatten,
                LayerSpec::dense(4),
                LayerSpec::SoftmaxOutput,
            ],
        );
        let mut rng = Rng::new(2);
        let model = Model::build(&arch, InitScheme::HeUniform, &mut rng).unwrap();
        let conv_views: Vec<_> = model
            .weight_vectors()
            .into_iter()
            .filter(|v| v.layer == 0)
            .collect();
        assert_eq!(conv_views.len(), 64);
        assert!(conv_views.iter().all(|v| v.len == 27));
    }

    #[test]
    fn views_partition_weight_entries() {
        let mut rng = Rng::new(3);
        let model = Model::build(
            &preset("mlp_784_100_100_10").unwrap(),
            InitScheme::HeUniform,
            &mut rng,
        )
        .unwrap();
        let view_total: usize = model.weight_vectors().iter().map(|v| v.len).sum();
        let matrix_total: usize = model
            .weight_matrices()
            .iter()
            .map(|m| model.matrix_weights(m).len())
            .sum();
        assert_eq!(view_total, matrix_total);
        assert_eq!(view_total, 784 * 100 + 100 * 100 + 100 * 10);
    }

    #[test]
    fn writes_through_views_round_trip() {
        let arch = Architecture::new(
            vec![5],
            vec![LayerSpec::dense(3), LayerSpec::SoftmaxOutput],
        );
        let mut rng = Rng::new(4);
        let mut model = Model::build(&arch, InitScheme::HeUniform, &mut rng).unwrap();
        let views = model.weight_vectors();
        for (i, view) in views.iter().enumerate() {
            let s = vector_slice_mut(&mut model, view);
            for (j, v) in s.iter_mut().enumerate() {
                *v = (i * 10 + j) as f32;
            }
        }
        let m = model.weight_matrices()[0];
        let flat = model.matrix_weights(&m);
        let expect: Vec<f32> = (0..3)
            .flat_map(|i| (0..5).map(move |j| (i * 10 + j) as f32))
            .collect();
        assert_eq!(flat, expect.as_slice());
    }
}
