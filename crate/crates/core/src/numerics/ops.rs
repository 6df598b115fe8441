//! Forward kernels shared by the plain-tensor API and the tape.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default LeakyReLU negative slope.
pub const LEAKY_SLOPE: f64 = 0.01;
/// Layer-norm variance stabilizer.
pub const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Gelu,
    Sigmoid,
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu(LEAKY_SLOPE)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Gelu => gelu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                cdf + x * pdf
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `c (+)= op(a) · op(b)` for row-major buffers, where `op` optionally
/// transposes. `a` is `m×k` after `op`, `b` is `k×n` after `op`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above guarantee that every strided access stays
    // within the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Standardizes one row in place and returns `1/sqrt(var + eps)`.
pub(crate) fn layer_norm_row(row: &[f64], out: &mut [f64], eps: f64) -> f64 {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv = 1.0 / (var + eps).sqrt();
    for (o, v) in out.iter_mut().zip(row) {
        *o = (v - mean) * inv;
    }
    inv
}

fn as_matrix_shape(t: &Tensor) -> [usize; 2] {
    [t.rows(), t.cols()]
}

/// Matrix product of a `m×k` and a `k×n` tensor.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [m, k] = as_matrix_shape(a);
    let [k2, n] = as_matrix_shape(b);
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.data(), false, b.data(), false, &mut out, false);
    Ok(Tensor::from_raw(m, n, out))
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    x.map(|v| kind.apply(v))
}

/// Softmax over all entries of `scores`, computed with max subtraction.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Row-wise layer normalization with optional affine `(gamma, beta)`, each
/// of length `d`.
pub fn layer_norm(x: &Tensor, affine: Option<(&[f64], &[f64])>) -> Result<Tensor> {
    let [n, d] = as_matrix_shape(x);
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "layer norm needs at least 2 features, got {d}"
        )));
    }
    if let Some((g, b)) = affine {
        if g.len() != d || b.len() != d {
            return Err(Error::shape("layer_norm affine", &[d], &[g.len(), b.len()]));
        }
    }
    let mut out = vec![0.0; n * d];
    for r in 0..n {
        let row = &x.data()[r * d..(r + 1) * d];
        let dst = &mut out[r * d..(r + 1) * d];
        layer_norm_row(row, dst, LN_EPS);
        if let Some((g, b)) = affine {
            for c in 0..d {
                dst[c] = dst[c] * g[c] + b[c];
            }
        }
    }
    Ok(Tensor::from_raw(n, d, out))
}
