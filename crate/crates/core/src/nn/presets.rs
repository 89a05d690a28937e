use crate::error::{Error, Result};
use crate::nn::{Architecture, LayerSpec};
use crate::tensor::Padding;

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &["mlp_784_100_100_10", "conv7", "conv2", "conv4", "f1", "f2"]
}

/// Built-in architectures.
///
/// - `mlp_784_100_100_10`: two 100-unit ReLU hidden layers on MNIST.
/// - `conv7`: seven conv layers (3x3 same, plus two 5x5/stride-2 and a final
///   4x4 valid stage that collapses to 1x1) into a 10-way output, for MNIST.
/// - `conv2` / `conv4`: the 2- and 4-conv CIFAR-10 stacks (64/128 filters,
///   2x2 pooling, 256-256-10 dense head) with batch norm and 1e-4 L2.
/// - `f1`: bias-free linear 784-10.
/// - `f2`: bias-free 784-128-64-10 ReLU stack with 1e-4 L2 on hidden layers.
pub fn preset(name: &str) -> Result<Architecture> {
    match name {
        "mlp_784_100_100_10" => Ok(Architecture::new(
            vec![28, 28, 1],
            vec![
                LayerSpec::Flatten,
                LayerSpec::dense(100),
                LayerSpec::Relu,
                LayerSpec::dense(100),
                LayerSpec::Relu,
                LayerSpec::dense(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        "conv7" => Ok(Architecture::new(
            vec![28, 28, 1],
            vec![
                LayerSpec::conv(32, 3, 1, Padding::Same),
                LayerSpec::Relu,
                LayerSpec::conv(32, 3, 1, Padding::Same),
                LayerSpec::Relu,
                LayerSpec::conv(32, 5, 2, Padding::Valid),
                LayerSpec::Relu,
                LayerSpec::conv(64, 3, 1, Padding::Same),
                LayerSpec::Relu,
                LayerSpec::conv(64, 3, 1, Padding::Same),
                LayerSpec::Relu,
                LayerSpec::conv(64, 5, 2, Padding::Valid),
                LayerSpec::Relu,
                LayerSpec::conv(128, 4, 1, Padding::Valid),
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::dense(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        "conv2" => Ok(Architecture::new(
            vec![32, 32, 3],
            vec![
                LayerSpec::conv(64, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::conv(64, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Maxpool,
                LayerSpec::Flatten,
                LayerSpec::dense(256).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense(256).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        "conv4" => Ok(Architecture::new(
            vec![32, 32, 3],
            vec![
                LayerSpec::conv(64, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::conv(64, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Maxpool,
                LayerSpec::conv(128, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::conv(128, 3, 1, Padding::Same)
                    .without_bias()
                    .with_l2(1e-4),
                LayerSpec::Batchnorm,
                LayerSpec::Relu,
                LayerSpec::Maxpool,
                LayerSpec::Flatten,
                LayerSpec::dense(256).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense(256).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        "f1" => Ok(Architecture::new(
            vec![28, 28, 1],
            vec![
                LayerSpec::Flatten,
                LayerSpec::dense_no_bias(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        "f2" => Ok(Architecture::new(
            vec![28, 28, 1],
            vec![
                LayerSpec::Flatten,
                LayerSpec::dense_no_bias(128).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense_no_bias(64).with_l2(1e-4),
                LayerSpec::Relu,
                LayerSpec::dense_no_bias(10),
                LayerSpec::SoftmaxOutput,
            ],
        )),
        other => Err(Error::Parameter(format!(
            "unknown preset \"{other}\" (expected one of {:?})",
            preset_names()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_plan() {
        for name in preset_names() {
            let arch = preset(name).unwrap();
            arch.plan().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn conv7_collapses_to_one_by_one() {
        let arch = preset("conv7").unwrap();
        let plan = arch.plan().unwrap();
        // Before flatten: the final 4x4 valid conv leaves a 1x1x128 map.
        let before_flatten = &plan[plan.len() - 4];
        assert_eq!(before_flatten, &vec![1, 1, 128]);
    }

    #[test]
    fn f2_matrix_sizes_match_paper_counts() {
        let lens = preset("f2").unwrap().weight_vector_lengths().unwrap();
        let total: usize = lens.iter().sum();
        assert_eq!(total, 100_352 + 8_192 + 640);
    }
}
