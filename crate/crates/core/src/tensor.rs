//! Dense row-major `f64` tensors and the handful of kernels needed to run
//! small MLPs and CNNs.
//!
//! All kernels are pure and accumulate in a fixed order (row-major,
//! left-to-right), so identical inputs give bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting a length mismatch or any non-finite value.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {numel} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape(format!(
                "non-finite value {} at flat index {i}",
                data[i]
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    /// One-dimensional tensor.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
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

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    /// Elementwise map. The caller is responsible for keeping values finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "add: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, k: f64) -> Tensor {
        self.map(|v| v * k)
    }
}

/// `[m, k] x [k, n] -> [m, n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = dims2(a, "matmul lhs")?;
    let (k2, n) = dims2(b, "matmul rhs")?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dims disagree: [{m}x{k}] x [{k2}x{n}]"
        )));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &a.data[i * k..(i + 1) * k];
        for j in 0..n {
            let mut acc = 0.0;
            for (p, &av) in row.iter().enumerate() {
                acc += av * b.data[p * n + j];
            }
            out[i * n + j] = acc;
        }
    }
    Ok(Tensor {
        shape: vec![m, n],
        data: out,
    })
}

/// Fully connected layer: `weights [out, in]`, `x` of `in` elements,
/// `bias [out]`. Returns a vector of `out` elements.
pub fn dense(weights: &Tensor, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (out, inp) = dims2(weights, "dense weights")?;
    if x.len() != inp {
        return Err(Error::shape(format!(
            "dense expects {inp} inputs, got shape {:?}",
            x.shape
        )));
    }
    if bias.len() != out {
        return Err(Error::shape(format!(
            "dense bias has {} values for {out} outputs",
            bias.len()
        )));
    }
    let mut y = Vec::with_capacity(out);
    for o in 0..out {
        let row = &weights.data[o * inp..(o + 1) * inp];
        let mut acc = 0.0;
        for (w, v) in row.iter().zip(&x.data) {
            acc += w * v;
        }
        y.push(acc + bias.data[o]);
    }
    Ok(Tensor {
        shape: vec![out],
        data: y,
    })
}

/// Output spatial size of a strided window, or `None` if it is not integral
/// or the window does not fit.
pub fn conv_out_dim(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if stride == 0 || kernel == 0 || kernel > padded || !(padded - kernel).is_multiple_of(stride) {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// 2-D cross-correlation. `x [C, H, W]`, `w [O, C, kh, kw]`, `b [O]`.
pub fn conv2d(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let [c, h, wd] = dims3(x, "conv2d input")?;
    if w.shape.len() != 4 {
        return Err(Error::shape(format!(
            "conv2d kernel must be [O,C,kh,kw], got {:?}",
            w.shape
        )));
    }
    let (o, wc, kh, kw) = (w.shape[0], w.shape[1], w.shape[2], w.shape[3]);
    if wc != c {
        return Err(Error::shape(format!(
            "conv2d kernel expects {wc} channels, input has {c}"
        )));
    }
    if b.len() != o {
        return Err(Error::shape(format!(
            "conv2d bias has {} values for {o} channels",
            b.len()
        )));
    }
    let oh = conv_out_dim(h, kh, stride, pad).ok_or_else(|| {
        Error::config(format!(
            "conv2d: H={h}, kh={kh}, stride={stride}, pad={pad} gives non-integral output"
        ))
    })?;
    let ow = conv_out_dim(wd, kw, stride, pad).ok_or_else(|| {
        Error::config(format!(
            "conv2d: W={wd}, kw={kw}, stride={stride}, pad={pad} gives non-integral output"
        ))
    })?;
    let mut out = vec![0.0; o * oh * ow];
    for oc in 0..o {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ic in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            acc += w.data[((oc * c + ic) * kh + ky) * kw + kx]
                                * x.data[(ic * h + iy as usize) * wd + ix as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc + b.data[oc];
            }
        }
    }
    Ok(Tensor {
        shape: vec![o, oh, ow],
        data: out,
    })
}

/// Average pooling over `[C, H, W]`. Trailing rows/columns that do not fill
/// a window are dropped.
pub fn avgpool2d(x: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let [c, h, w] = dims3(x, "avgpool2d input")?;
    let (oh, ow) = pool_out(h, w, kernel, stride)?;
    let norm = (kernel * kernel) as f64;
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        acc += x.data[(ch * h + oy * stride + ky) * w + ox * stride + kx];
                    }
                }
                out[(ch * oh + oy) * ow + ox] = acc / norm;
            }
        }
    }
    Ok(Tensor {
        shape: vec![c, oh, ow],
        data: out,
    })
}

pub(crate) fn pool_out(h: usize, w: usize, kernel: usize, stride: usize) -> Result<(usize, usize)> {
    if kernel == 0 || stride == 0 || kernel > h || kernel > w {
        return Err(Error::shape(format!(
            "avgpool2d kernel {kernel} stride {stride} does not fit {h}x{w}"
        )));
    }
    Ok(((h - kernel) / stride + 1, (w - kernel) / stride + 1))
}

pub fn flatten(x: &Tensor) -> Tensor {
    Tensor {
        shape: vec![x.data.len()],
        data: x.data.clone(),
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::shape(format!(
            "{what} must be 2-D, got {:?}",
            t.shape
        ))),
    }
}

fn dims3(t: &Tensor, what: &str) -> Result<[usize; 3]> {
    match t.shape[..] {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::shape(format!(
            "{what} must be [C,H,W], got {:?}",
            t.shape
        ))),
    }
}
