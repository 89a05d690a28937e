use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Convolution padding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Valid,
    Same,
}

/// `c += a x b` for row-major `a: [m,k]`, `b: [k,n]`, `c: [m,n]`.
///
/// The k loop is outermost per row, so each output element accumulates its
/// products in ascending-k order; auto-vectorization over the n lanes keeps
/// that order, which keeps results bit-identical to a naive triple loop.
pub(crate) fn matmul_acc<T: Scalar>(c: &mut [T], a: &[T], b: &[T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (kk, &aik) in a_row.iter().enumerate() {
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row.iter()) {
                *cv += aik * bv;
            }
        }
    }
}

/// Standard matrix product of two rank-2 tensors.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::Dimension(format!(
            "matmul expects rank-2 tensors, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner dimensions disagree: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m, n]);
    matmul_acc(out.as_mut_slice(), a.as_slice(), b.as_slice(), m, k, n);
    Ok(out)
}

/// Transpose of a rank-2 tensor.
pub fn transpose2<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    assert_eq!(t.rank(), 2, "transpose2 expects rank 2");
    let (m, n) = (t.shape()[0], t.shape()[1]);
    let src = t.as_slice();
    let mut out = Tensor::zeros(&[n, m]);
    let dst = out.as_mut_slice();
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
    out
}

pub(crate) fn transpose_flat<T: Scalar>(src: &[T], m: usize, n: usize, dst: &mut Vec<T>) {
    dst.clear();
    dst.resize(m * n, T::ZERO);
    for i in 0..m {
        for j in 0..n {
            dst[j * m + i] = src[i * n + j];
        }
    }
}

/// Output spatial size for one convolution axis.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        // Floor division handles inputs the stride does not divide.
        Padding::Valid => (input.saturating_sub(kernel)) / stride + 1,
        Padding::Same => (input + stride - 1) / stride,
    }
}

/// Total padding budget on one axis under `same` padding, split with the
/// extra cell on the trailing side (the common convention).
fn same_pad_before(input: usize, kernel: usize, stride: usize) -> isize {
    let out = (input + stride - 1) / stride;
    let total = ((out - 1) * stride + kernel).saturating_sub(input) as isize;
    total / 2
}

/// Gather convolution patches: output rows are `(batch, oh, ow)` positions,
/// columns run over `(kh, kw, cin)` in row-major order. Out-of-bounds taps
/// contribute zero.
pub(crate) fn im2col<T: Scalar>(
    input: &Tensor<T>,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Tensor<T> {
    let (n, h, w, cin) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let oh = conv_output_dim(h, kh, stride, padding);
    let ow = conv_output_dim(w, kw, stride, padding);
    let (pad_h, pad_w) = match padding {
        Padding::Valid => (0, 0),
        Padding::Same => (same_pad_before(h, kh, stride), same_pad_before(w, kw, stride)),
    };
    let src = input.as_slice();
    let kcols = kh * kw * cin;
    let mut out = Tensor::zeros(&[n * oh * ow, kcols]);
    let dst = out.as_mut_slice();
    let mut row = 0usize;
    for b in 0..n {
        let img = &src[b * h * w * cin..(b + 1) * h * w * cin];
        for oy in 0..oh {
            for ox in 0..ow {
                let base = row * kcols;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_h;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_w;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let soff = (iy as usize * w + ix as usize) * cin;
                        let doff = base + (ky * kw + kx) * cin;
                        dst[doff..doff + cin].copy_from_slice(&img[soff..soff + cin]);
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// Scatter-add of patch gradients back onto the input image, inverse of
/// [`im2col`]'s gather.
pub(crate) fn col2im_acc<T: Scalar>(
    dpatches: &[T],
    input_shape: &[usize],
    kh: usize,
    kw: usize,
    stride: usize,
    padding: Padding,
) -> Tensor<T> {
    let (n, h, w, cin) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    let oh = conv_output_dim(h, kh, stride, padding);
    let ow = conv_output_dim(w, kw, stride, padding);
    let (pad_h, pad_w) = match padding {
        Padding::Valid => (0, 0),
        Padding::Same => (same_pad_before(h, kh, stride), same_pad_before(w, kw, stride)),
    };
    let kcols = kh * kw * cin;
    let mut out = Tensor::zeros(input_shape);
    let dst = out.as_mut_slice();
    let mut row = 0usize;
    for b in 0..n {
        let img = &mut dst[b * h * w * cin..(b + 1) * h * w * cin];
        for oy in 0..oh {
            for ox in 0..ow {
                let base = row * kcols;
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_h;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_w;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let doff = (iy as usize * w + ix as usize) * cin;
                        let soff = base + (ky * kw + kx) * cin;
                        for c in 0..cin {
                            img[doff + c] += dpatches[soff + c];
                        }
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// 2-D cross-correlation (no kernel flip) of an NHWC input with filters
/// shaped `[kh, kw, cin, cout]`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    filters: &Tensor<T>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    if input.rank() != 4 || filters.rank() != 4 {
        return Err(Error::Dimension(format!(
            "conv2d expects NHWC input and [kh,kw,cin,cout] filters, got {:?} and {:?}",
            input.shape(),
            filters.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::Parameter("conv2d stride must be positive".into()));
    }
    let (kh, kw, cin, cout) = (
        filters.shape()[0],
        filters.shape()[1],
        filters.shape()[2],
        filters.shape()[3],
    );
    if input.shape()[3] != cin {
        return Err(Error::Dimension(format!(
            "conv2d channel mismatch: input has {} channels, filters expect {}",
            input.shape()[3],
            cin
        )));
    }
    let (n, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let oh = conv_output_dim(h, kh, stride, padding);
    let ow = conv_output_dim(w, kw, stride, padding);
    let patches = im2col(input, kh, kw, stride, padding);
    // Filters arrive kcols-major over (kh, kw, cin) already, so they are
    // directly the right-hand matrix of the patch product.
    let mut out = Tensor::zeros(&[n * oh * ow, cout]);
    matmul_acc(
        out.as_mut_slice(),
        patches.as_slice(),
        filters.as_slice(),
        n * oh * ow,
        kh * kw * cin,
        cout,
    );
    out.reshape(&[n, oh, ow, cout])
}

/// 2x2/stride-2 max pooling. Returns the pooled tensor and, per output
/// element, the flat index of its source element in the input, with ties
/// resolved to the first element in row-major window order.
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, window: usize, stride: usize) -> Result<(Tensor<T>, Vec<u32>)> {
    if input.rank() != 4 {
        return Err(Error::Dimension(format!(
            "maxpool2d expects NHWC input, got {:?}",
            input.shape()
        )));
    }
    let (n, h, w, c) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    if h < window || w < window {
        return Err(Error::Dimension(format!(
            "maxpool2d window {window} does not fit spatial dims {h}x{w}"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let src = input.as_slice();
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let mut arg = vec![0u32; n * oh * ow * c];
    let dst = out.as_mut_slice();
    let mut o = 0usize;
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best_idx = ((b * h + oy * stride) * w + ox * stride) * c + ch;
                    let mut best = src[best_idx];
                    for ky in 0..window {
                        for kx in 0..window {
                            let idx = ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
                            if src[idx] > best {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    dst[o] = best;
                    arg[o] = best_idx as u32;
                    o += 1;
                }
            }
        }
    }
    Ok((out, arg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let i2 = Tensor::from_vec(&[2, 2], vec![1.0f32, 0.0, 0.0, 1.0]).unwrap();
        let m = Tensor::from_vec(&[2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(matmul(&i2, &m).unwrap(), m);
    }

    #[test]
    fn matmul_projector() {
        let p = Tensor::from_vec(&[2, 2], vec![1.0f32, 0.0, 0.0, 0.0]).unwrap();
        let m = Tensor::from_vec(&[2, 2], vec![5.0f32, 6.0, 7.0, 8.0]).unwrap();
        let out = matmul(&p, &m).unwrap();
        assert_eq!(out.as_slice(), &[5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[4, 2]);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn conv_all_ones_valid_is_window_sum() {
        let input = Tensor::from_vec(&[1, 3, 3, 1], vec![1.0f32; 9]).unwrap();
        let filt = Tensor::from_vec(&[3, 3, 1, 1], vec![1.0f32; 9]).unwrap();
        let out = conv2d(&input, &filt, 1, Padding::Valid).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1]);
        assert_eq!(out.as_slice()[0], 9.0);
    }

    #[test]
    fn conv_delta_kernel_same_is_identity() {
        let data: Vec<f32> = (0..25).map(|v| v as f32 * 0.5 - 3.0).collect();
        let input = Tensor::from_vec(&[1, 5, 5, 1], data.clone()).unwrap();
        let mut kernel = vec![0.0f32; 9];
        kernel[4] = 1.0; // center tap
        let filt = Tensor::from_vec(&[3, 3, 1, 1], kernel).unwrap();
        let out = conv2d(&input, &filt, 1, Padding::Same).unwrap();
        assert_eq!(out.shape(), &[1, 5, 5, 1]);
        assert_eq!(out.as_slice(), data.as_slice());
    }

    #[test]
    fn conv_rejects_bad_args() {
        let input = Tensor::<f32>::zeros(&[1, 5, 5, 2]);
        let filt = Tensor::<f32>::zeros(&[3, 3, 3, 4]);
        assert!(matches!(
            conv2d(&input, &filt, 1, Padding::Valid),
            Err(Error::Dimension(_))
        ));
        let filt2 = Tensor::<f32>::zeros(&[3, 3, 2, 4]);
        assert!(matches!(
            conv2d(&input, &filt2, 0, Padding::Valid),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn maxpool_single_window() {
        let input = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let (out, arg) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.as_slice(), &[4.0]);
        assert_eq!(arg, vec![3]); // row-major (1,1)
    }

    #[test]
    fn maxpool_tie_takes_first_in_window() {
        let input = Tensor::from_vec(&[1, 4, 4, 1], vec![7.0f32; 16]).unwrap();
        let (out, arg) = maxpool2d(&input, 2, 2).unwrap();
        assert_eq!(out.as_slice(), &[7.0; 4]);
        // First element of each window in row-major order.
        assert_eq!(arg, vec![0, 2, 8, 10]);
    }

    #[test]
    fn transpose_round_trip() {
        let t = Tensor::from_vec(&[2, 3], vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let tt = transpose2(&transpose2(&t));
        assert_eq!(tt, t);
    }
}
