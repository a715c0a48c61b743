//! Dense row-major `f64` tensors and the numeric kernels the network is built on.
//!
//! # Convolution orientation
//!
//! Every "convolution" in this crate is a *cross-correlation*:
//!
//! ```text
//! conv_valid(x, k)[p, q] = sum_{u, v} x[p + u, q + v] * k[u, v]
//! ```
//!
//! [`conv_full`] is the same correlation applied to `x` zero-padded by
//! `(h - 1, w - 1)` on every border, so its central window reproduces
//! [`conv_valid`]. The adjoint of the forward correlation with respect to its
//! input is `conv_full(y, flip(k))`, which is what the backward passes use
//! (see [`convolve_full_scatter`]). The adjointness test in this module pins
//! that pairing down.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!("extents must all be >= 1, got {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Panics on a zero extent; use [`Tensor::new`] for validated construction.
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, 1.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "invalid tensor shape {shape:?}"
        );
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading extent, i.e. the batch size for batch tensors.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of scalars per leading index.
    pub fn row_len(&self) -> usize {
        self.data.len() / self.shape[0]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Tensor, c: f64) -> Result<()> {
        same_shape(self, other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        same_shape(self, other, "dot")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Selects leading-axis rows by index, e.g. to gather a mini-batch.
    pub fn select_rows(&self, indices: &[usize]) -> Tensor {
        let w = self.row_len();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor { shape, data }
    }
}

fn same_shape(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::shape(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape, b.shape
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Matrix product of `a` (m×k) and `b` (k×n).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape.len() != 2 || b.shape.len() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::shape(format!(
            "matmul: cannot multiply {:?} by {:?}",
            a.shape, b.shape
        )));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, &a.data, Layout::RowMajor, &b.data, Layout::RowMajor, &mut out, false);
    Tensor::new(vec![m, n], out)
}

/// How a flat buffer is read as a matrix by [`gemm`].
#[derive(Clone, Copy, Debug)]
pub(crate) enum Layout {
    RowMajor,
    /// The buffer holds the row-major transpose of the logical matrix.
    Transposed,
}

/// `c = a·b` (or `c += a·b` when `accumulate`), with `a` logically m×k and
/// `b` logically k×n. Single-threaded, so the summation order is fixed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_layout: Layout,
    b: &[f64],
    b_layout: Layout,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = match a_layout {
        Layout::RowMajor => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_layout {
        Layout::RowMajor => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the strides describe exactly the m×k, k×n and m×n buffers whose
    // lengths are checked above; `c` is uniquely borrowed.
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

fn as_map(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [h, w] => Ok((*h, *w)),
        other => Err(Error::shape(format!("{what} must be 2-D, got {other:?}"))),
    }
}

/// Valid-mode cross-correlation of a 2-D map with a 2-D kernel.
pub fn conv_valid(input: &Tensor, filter: &Tensor) -> Result<Tensor> {
    let (h, w) = as_map(input, "conv_valid input")?;
    let (kh, kw) = as_map(filter, "conv_valid filter")?;
    if kh > h || kw > w {
        return Err(Error::shape(format!(
            "conv_valid: kernel {kh}x{kw} larger than input {h}x{w}"
        )));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let mut out = vec![0.0; oh * ow];
    correlate_valid_acc(&input.data, h, w, &filter.data, kh, kw, &mut out);
    Tensor::new(vec![oh, ow], out)
}

/// Full-mode cross-correlation: `conv_valid` of the input zero-padded by
/// `(h - 1, w - 1)` on each border.
pub fn conv_full(input: &Tensor, filter: &Tensor) -> Result<Tensor> {
    let (h, w) = as_map(input, "conv_full input")?;
    let (kh, kw) = as_map(filter, "conv_full filter")?;
    let (oh, ow) = (h + kh - 1, w + kw - 1);
    let mut out = vec![0.0; oh * ow];
    for p in 0..oh {
        for q in 0..ow {
            let mut acc = 0.0;
            for u in 0..kh {
                // padded row p + u maps to input row p + u - (kh - 1)
                let r = p + u;
                if r < kh - 1 || r - (kh - 1) >= h {
                    continue;
                }
                let r = r - (kh - 1);
                for v in 0..kw {
                    let c = q + v;
                    if c < kw - 1 || c - (kw - 1) >= w {
                        continue;
                    }
                    acc += input.data[r * w + c - (kw - 1)] * filter.data[u * kw + v];
                }
            }
            out[p * ow + q] = acc;
        }
    }
    Tensor::new(vec![oh, ow], out)
}

/// Reverses a 2-D kernel along both axes.
pub fn flip(filter: &Tensor) -> Result<Tensor> {
    let (kh, kw) = as_map(filter, "flip")?;
    Ok(Tensor::from_fn(&[kh, kw], |i| {
        let (u, v) = (i / kw, i % kw);
        filter.data[(kh - 1 - u) * kw + (kw - 1 - v)]
    }))
}

/// Elementwise product.
pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape(a, b, "hadamard")?;
    Ok(Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

/// `out += conv_valid(input, kernel)` on raw buffers.
pub(crate) fn correlate_valid_acc(
    input: &[f64],
    h: usize,
    w: usize,
    kernel: &[f64],
    kh: usize,
    kw: usize,
    out: &mut [f64],
) {
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    for u in 0..kh {
        for v in 0..kw {
            let k = kernel[u * kw + v];
            if k == 0.0 {
                continue;
            }
            for p in 0..oh {
                let src = &input[(p + u) * w + v..(p + u) * w + v + ow];
                let dst = &mut out[p * ow..(p + 1) * ow];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
}

/// Adjoint of [`correlate_valid_acc`] with respect to its input:
/// `out += conv_full(err, flip(kernel))`, where `err` is `eh×ew` and `out` is
/// `(eh + kh - 1)×(ew + kw - 1)`.
pub(crate) fn convolve_full_scatter(
    err: &[f64],
    eh: usize,
    ew: usize,
    kernel: &[f64],
    kh: usize,
    kw: usize,
    out: &mut [f64],
) {
    let w = ew + kw - 1;
    for u in 0..kh {
        for v in 0..kw {
            let k = kernel[u * kw + v];
            if k == 0.0 {
                continue;
            }
            for p in 0..eh {
                let src = &err[p * ew..(p + 1) * ew];
                let dst = &mut out[(p + u) * w + v..(p + u) * w + v + ew];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
}
