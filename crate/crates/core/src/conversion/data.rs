//! Batched sample container shared by calibration and evaluation.
//!
//! ```json
//! {"format": "tmn-dataset", "version": 1, "sample_shape": [2],
//!  "batches": [{"inputs": [[0.1, 0.2], ...], "labels": [0, ...]}]}
//! ```
//!
//! `labels` is optional per batch. Each input is the flattened sample in
//! row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DATASET_FORMAT: &str = "tmn-dataset";

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Tensor>,
    pub labels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_shape: Vec<usize>,
    pub batches: Vec<Batch>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    version: u32,
    sample_shape: Vec<usize>,
    batches: Vec<BatchFile>,
}

#[derive(Serialize, Deserialize)]
struct BatchFile {
    inputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(sample_shape: Vec<usize>, batches: Vec<Batch>) -> Result<Self> {
        for (b, batch) in batches.iter().enumerate() {
            if let Some(x) = batch
                .inputs
                .iter()
                .find(|x| x.shape() != sample_shape.as_slice())
            {
                return Err(Error::load(
                    None,
                    format!(
                        "batch {b}: sample shape {:?} != {sample_shape:?}",
                        x.shape()
                    ),
                ));
            }
            if let Some(l) = &batch.labels {
                if l.len() != batch.inputs.len() {
                    return Err(Error::load(
                        None,
                        format!(
                            "batch {b}: {} labels for {} inputs",
                            l.len(),
                            batch.inputs.len()
                        ),
                    ));
                }
            }
        }
        Ok(Dataset {
            sample_shape,
            batches,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile =
            serde_json::from_str(text).map_err(|e| Error::load(None, format!("schema: {e}")))?;
        if file.format != DATASET_FORMAT || file.version != 1 {
            return Err(Error::load(
                None,
                format!(
                    "expected {DATASET_FORMAT} v1, got {} v{}",
                    file.format, file.version
                ),
            ));
        }
        let mut batches = Vec::with_capacity(file.batches.len());
        for (b, bf) in file.batches.into_iter().enumerate() {
            let inputs = bf
                .inputs
                .into_iter()
                .map(|v| Tensor::new(file.sample_shape.clone(), v))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::load(None, format!("batch {b}: {e}")))?;
            batches.push(Batch {
                inputs,
                labels: bf.labels,
            });
        }
        Dataset::new(file.sample_shape, batches)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            format: DATASET_FORMAT.to_string(),
            version: 1,
            sample_shape: self.sample_shape.clone(),
            batches: self
                .batches
                .iter()
                .map(|b| BatchFile {
                    inputs: b.inputs.iter().map(|x| x.data().to_vec()).collect(),
                    labels: b.labels.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn len(&self) -> usize {
        self.batches.iter().map(|b| b.inputs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All samples in order, with their labels when present.
    pub fn samples(&self) -> impl Iterator<Item = (&Tensor, Option<usize>)> {
        self.batches.iter().flat_map(|b| {
            b.inputs
                .iter()
                .enumerate()
                .map(move |(i, x)| (x, b.labels.as_ref().map(|l| l[i])))
        })
    }
}
