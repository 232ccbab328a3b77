//! Feedforward network description and its JSON file format.
//!
//! ```json
//! {
//!   "format": "tmn-network",
//!   "version": 1,
//!   "input_shape": [2],
//!   "layers": [
//!     {"kind": "dense", "in_features": 2, "out_features": 16,
//!      "weights": [...out*in, row-major...], "bias": [...out...]},
//!     {"kind": "relu"},
//!     {"kind": "conv2d", "in_channels": 1, "out_channels": 8, "kernel": [3, 3],
//!      "stride": 1, "pad": 1, "weights": [...O*C*kh*kw...], "bias": [...O...]},
//!     {"kind": "avgpool", "kernel": 2, "stride": 2},
//!     {"kind": "flatten"}
//!   ]
//! }
//! ```
//!
//! Numeric arrays accept JSON numbers plus the strings `"NaN"`, `"Infinity"`
//! and `"-Infinity"`, so that a non-finite weight is reported against its
//! layer rather than as a parse failure.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{self, conv_out_dim, Tensor};

pub const NETWORK_FORMAT: &str = "tmn-network";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `weights [out, in]`, `bias [out]`.
    Dense {
        weights: Tensor,
        bias: Tensor,
    },
    /// `weights [O, C, kh, kw]`, `bias [O]`.
    Conv2d {
        weights: Tensor,
        bias: Tensor,
        stride: usize,
        pad: usize,
    },
    AvgPool {
        kernel: usize,
        stride: usize,
    },
    Flatten,
    Relu,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv2d { .. } => "conv2d",
            Layer::AvgPool { .. } => "avgpool",
            Layer::Flatten => "flatten",
            Layer::Relu => "relu",
        }
    }

    pub fn is_relu(&self) -> bool {
        matches!(self, Layer::Relu)
    }

    pub fn has_bias(&self) -> bool {
        matches!(self, Layer::Dense { .. } | Layer::Conv2d { .. })
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense { weights, bias } => tensor::dense(weights, x, bias),
            Layer::Conv2d {
                weights,
                bias,
                stride,
                pad,
            } => tensor::conv2d(x, weights, bias, *stride, *pad),
            Layer::AvgPool { kernel, stride } => tensor::avgpool2d(x, *kernel, *stride),
            Layer::Flatten => Ok(tensor::flatten(x)),
            Layer::Relu => Ok(tensor::relu(x)),
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Dense { weights, .. } => {
                let (out, inp) = (weights.shape()[0], weights.shape()[1]);
                let n: usize = input.iter().product();
                if input.len() != 1 || n != inp {
                    return Err(Error::shape(format!(
                        "dense expects [{inp}], got {input:?}"
                    )));
                }
                Ok(vec![out])
            }
            Layer::Conv2d {
                weights,
                stride,
                pad,
                ..
            } => {
                let &[c, h, w] = input else {
                    return Err(Error::shape(format!(
                        "conv2d expects [C,H,W], got {input:?}"
                    )));
                };
                let ws = weights.shape();
                if ws[1] != c {
                    return Err(Error::shape(format!(
                        "conv2d expects {} channels, got {c}",
                        ws[1]
                    )));
                }
                let oh = conv_out_dim(h, ws[2], *stride, *pad);
                let ow = conv_out_dim(w, ws[3], *stride, *pad);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![ws[0], oh, ow]),
                    _ => Err(Error::config(format!(
                        "conv2d on {input:?} has a non-integral output size"
                    ))),
                }
            }
            Layer::AvgPool { kernel, stride } => {
                let &[c, h, w] = input else {
                    return Err(Error::shape(format!(
                        "avgpool expects [C,H,W], got {input:?}"
                    )));
                };
                let (oh, ow) = tensor::pool_out(h, w, *kernel, *stride)?;
                Ok(vec![c, oh, ow])
            }
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Relu => Ok(input.to_vec()),
        }
    }

    /// Number of multiply-accumulates per application, biases excluded.
    pub fn mac_cost(&self, input: &[usize]) -> Result<u64> {
        let out: usize = self.output_shape(input)?.iter().product();
        Ok(match self {
            Layer::Dense { weights, .. } => (weights.shape()[0] * weights.shape()[1]) as u64,
            Layer::Conv2d { weights, .. } => {
                let ws = weights.shape();
                (out * ws[1] * ws[2] * ws[3]) as u64
            }
            Layer::AvgPool { kernel, .. } => (out * kernel * kernel) as u64,
            Layer::Flatten | Layer::Relu => 0,
        })
    }

    /// Number of output elements that receive a bias add per application.
    pub fn bias_adds(&self, input: &[usize]) -> Result<u64> {
        if !self.has_bias() {
            return Ok(0);
        }
        Ok(self.output_shape(input)?.iter().product::<usize>() as u64)
    }

    /// Flat output indices structurally connected to flat input index `i`.
    pub fn reach(&self, input: &[usize], i: usize) -> Result<Vec<usize>> {
        let out = self.output_shape(input)?;
        Ok(match self {
            Layer::Dense { .. } => (0..out[0]).collect(),
            Layer::Conv2d {
                weights,
                stride,
                pad,
                ..
            } => {
                let (h, w) = (input[1], input[2]);
                let (y, x) = ((i / w) % h, i % w);
                let ws = weights.shape();
                let ys = window_hits(y + pad, ws[2], *stride, out[1]);
                let xs = window_hits(x + pad, ws[3], *stride, out[2]);
                let mut v = Vec::with_capacity(out[0] * ys.len() * xs.len());
                for o in 0..out[0] {
                    for &oy in &ys {
                        for &ox in &xs {
                            v.push((o * out[1] + oy) * out[2] + ox);
                        }
                    }
                }
                v
            }
            Layer::AvgPool { kernel, stride } => {
                let (h, w) = (input[1], input[2]);
                let (c, y, x) = (i / (h * w), (i / w) % h, i % w);
                let ys = window_hits(y, *kernel, *stride, out[1]);
                let xs = window_hits(x, *kernel, *stride, out[2]);
                let mut v = Vec::new();
                for &oy in &ys {
                    for &ox in &xs {
                        v.push((c * out[1] + oy) * out[2] + ox);
                    }
                }
                v
            }
            Layer::Flatten | Layer::Relu => vec![i],
        })
    }
}

/// Window indices `o < n_out` with `o*stride <= pos < o*stride + kernel`.
fn window_hits(pos: usize, kernel: usize, stride: usize, n_out: usize) -> Vec<usize> {
    (0..n_out)
        .filter(|&o| o * stride <= pos && pos < o * stride + kernel)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    /// Validates the shape chain; returns the network on success.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = NetworkSpec {
            input_shape,
            layers,
        };
        net.shapes()?;
        Ok(net)
    }

    /// Output shape after every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut cur = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer
                .output_shape(&cur)
                .map_err(|e| Error::load(Some(i), e.to_string()))?;
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(self
            .shapes()?
            .pop()
            .unwrap_or_else(|| self.input_shape.clone()))
    }

    /// Indices of the ReLU layers, in order.
    pub fn relu_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_relu())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::shape(format!(
                "input shape {:?} does not match network input {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.layers
            .iter()
            .try_fold(x.clone(), |acc, l| l.apply(&acc))
    }

    /// Output of every layer, in order.
    pub fn forward_trace(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut outs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.apply(outs.last().unwrap_or(x))?;
            outs.push(next);
        }
        Ok(outs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::load(None, format!("schema: {e}")))?;
        file.into_spec()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&NetworkFile::from_spec(self))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct NetworkFile {
    pub format: String,
    pub version: u32,
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub(crate) enum LayerFile {
    Dense {
        in_features: usize,
        out_features: usize,
        #[serde(deserialize_with = "lenient_floats")]
        weights: Vec<f64>,
        #[serde(deserialize_with = "lenient_floats")]
        bias: Vec<f64>,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        stride: usize,
        pad: usize,
        #[serde(deserialize_with = "lenient_floats")]
        weights: Vec<f64>,
        #[serde(deserialize_with = "lenient_floats")]
        bias: Vec<f64>,
    },
    Avgpool {
        kernel: usize,
        stride: usize,
    },
    Flatten,
    Relu,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LenientFloat {
    Num(f64),
    Text(String),
}

pub(crate) fn lenient_floats<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<f64>, D::Error> {
    let raw = Vec::<LenientFloat>::deserialize(d)?;
    raw.into_iter()
        .map(|v| match v {
            LenientFloat::Num(x) => Ok(x),
            LenientFloat::Text(s) => match s.as_str() {
                "NaN" | "nan" => Ok(f64::NAN),
                "Infinity" | "inf" => Ok(f64::INFINITY),
                "-Infinity" | "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other:?}"))),
            },
        })
        .collect()
}

fn finite_tensor(layer: usize, what: &str, shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::load(
            Some(layer),
            format!("non-finite {what} value {} at index {i}", data[i]),
        ));
    }
    Tensor::new(shape, data).map_err(|e| Error::load(Some(layer), format!("{what}: {e}")))
}

impl NetworkFile {
    fn into_spec(self) -> Result<NetworkSpec> {
        if self.format != NETWORK_FORMAT {
            return Err(Error::load(
                None,
                format!("format is {:?}, expected {NETWORK_FORMAT:?}", self.format),
            ));
        }
        if self.version != NETWORK_VERSION {
            return Err(Error::load(
                None,
                format!("unsupported network version {}", self.version),
            ));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.into_iter().enumerate() {
            layers.push(match l {
                LayerFile::Dense {
                    in_features,
                    out_features,
                    weights,
                    bias,
                } => Layer::Dense {
                    weights: finite_tensor(i, "weight", vec![out_features, in_features], weights)?,
                    bias: finite_tensor(i, "bias", vec![out_features], bias)?,
                },
                LayerFile::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    pad,
                    weights,
                    bias,
                } => {
                    if stride == 0 {
                        return Err(Error::load(Some(i), "stride must be positive"));
                    }
                    Layer::Conv2d {
                        weights: finite_tensor(
                            i,
                            "weight",
                            vec![out_channels, in_channels, kernel[0], kernel[1]],
                            weights,
                        )?,
                        bias: finite_tensor(i, "bias", vec![out_channels], bias)?,
                        stride,
                        pad,
                    }
                }
                LayerFile::Avgpool { kernel, stride } => Layer::AvgPool { kernel, stride },
                LayerFile::Flatten => Layer::Flatten,
                LayerFile::Relu => Layer::Relu,
            });
        }
        NetworkSpec::new(self.input_shape, layers)
    }

    fn from_spec(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weights, bias } => LayerFile::Dense {
                    in_features: weights.shape()[1],
                    out_features: weights.shape()[0],
                    weights: weights.data().to_vec(),
                    bias: bias.data().to_vec(),
                },
                Layer::Conv2d {
                    weights,
                    bias,
                    stride,
                    pad,
                } => {
                    let s = weights.shape();
                    LayerFile::Conv2d {
                        in_channels: s[1],
                        out_channels: s[0],
                        kernel: [s[2], s[3]],
                        stride: *stride,
                        pad: *pad,
                        weights: weights.data().to_vec(),
                        bias: bias.data().to_vec(),
                    }
                }
                Layer::AvgPool { kernel, stride } => LayerFile::Avgpool {
                    kernel: *kernel,
                    stride: *stride,
                },
                Layer::Flatten => LayerFile::Flatten,
                Layer::Relu => LayerFile::Relu,
            })
            .collect();
        NetworkFile {
            format: NETWORK_FORMAT.to_string(),
            version: NETWORK_VERSION,
            input_shape: spec.input_shape.clone(),
            layers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_DENSE: &str = r#"{"format":"tmn-network","version":1,"input_shape":[2],
        "layers":[{"kind":"dense","in_features":2,"out_features":1,"weights":[1.0,-1.0],"bias":[0.5]}]}"#;

    #[test]
    fn loads_minimal_network() {
        let net = NetworkSpec::from_json(ONE_DENSE).unwrap();
        assert_eq!(net.layers.len(), 1);
        let y = net
            .forward(&Tensor::vector(vec![3.0, 1.0]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn nan_weight_names_the_layer() {
        let text = r#"{"format":"tmn-network","version":1,"input_shape":[2],"layers":[
            {"kind":"dense","in_features":2,"out_features":2,"weights":[1,0,0,1],"bias":[0,0]},
            {"kind":"relu"},
            {"kind":"dense","in_features":2,"out_features":1,"weights":["NaN",1],"bias":[0]}]}"#;
        match NetworkSpec::from_json(text) {
            Err(Error::Load {
                layer: Some(2),
                msg,
            }) => assert!(msg.contains("non-finite")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_break_names_the_layer() {
        let text = r#"{"format":"tmn-network","version":1,"input_shape":[3],"layers":[
            {"kind":"relu"},
            {"kind":"dense","in_features":2,"out_features":1,"weights":[1,1],"bias":[0]}]}"#;
        assert!(matches!(
            NetworkSpec::from_json(text),
            Err(Error::Load { layer: Some(1), .. })
        ));
    }

    #[test]
    fn schema_violations_are_load_errors() {
        let wrong_format = ONE_DENSE.replace("tmn-network", "other");
        assert!(matches!(
            NetworkSpec::from_json(&wrong_format),
            Err(Error::Load { .. })
        ));
        let unknown_kind = ONE_DENSE.replace("\"dense\"", "\"maxpool\"");
        assert!(matches!(
            NetworkSpec::from_json(&unknown_kind),
            Err(Error::Load { .. })
        ));
        let short = ONE_DENSE.replace("[1.0,-1.0]", "[1.0]");
        assert!(matches!(
            NetworkSpec::from_json(&short),
            Err(Error::Load { layer: Some(0), .. })
        ));
    }

    #[test]
    fn json_round_trip_preserves_weights() {
        let net = NetworkSpec::from_json(ONE_DENSE).unwrap();
        let again = NetworkSpec::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn conv_reach_counts_edges() {
        let conv = Layer::Conv2d {
            weights: Tensor::zeros(vec![2, 1, 3, 3]),
            bias: Tensor::zeros(vec![2]),
            stride: 1,
            pad: 1,
        };
        let shape = [1, 4, 4];
        // Corner pixel feeds a 2x2 patch of outputs per channel, interior 3x3.
        assert_eq!(conv.reach(&shape, 0).unwrap().len(), 2 * 4);
        assert_eq!(conv.reach(&shape, 5).unwrap().len(), 2 * 9);
        let pool = Layer::AvgPool {
            kernel: 2,
            stride: 2,
        };
        assert_eq!(pool.reach(&[1, 4, 4], 5).unwrap(), vec![0]);
        assert_eq!(pool.reach(&[1, 5, 5], 24).unwrap(), Vec::<usize>::new());
    }
}
