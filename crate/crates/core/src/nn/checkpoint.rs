use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, DenseNetwork};
use crate::error::{Error, Result};
use crate::format::to_lossless_json;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    /// Row-major, `rows x cols`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub input_dim: usize,
    pub layers: Vec<LayerRecord>,
}

impl From<&DenseLayer> for LayerRecord {
    fn from(layer: &DenseLayer) -> Self {
        Self {
            rows: layer.out_dim(),
            cols: layer.in_dim(),
            activation: layer.activation(),
            weights: layer.weights().data().to_vec(),
            biases: layer.biases().to_vec(),
        }
    }
}

impl TryFrom<LayerRecord> for DenseLayer {
    type Error = Error;

    fn try_from(rec: LayerRecord) -> Result<Self> {
        let weights = Tensor2::from_vec(rec.rows, rec.cols, rec.weights)?;
        if !weights.all_finite() || rec.biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::Numeric(
                "checkpoint contains non-finite parameters".into(),
            ));
        }
        DenseLayer::new(weights, rec.biases, rec.activation)
    }
}

impl From<&DenseNetwork> for NetworkCheckpoint {
    fn from(net: &DenseNetwork) -> Self {
        Self {
            input_dim: net.input_dim(),
            layers: net.layers().iter().map(LayerRecord::from).collect(),
        }
    }
}

impl TryFrom<NetworkCheckpoint> for DenseNetwork {
    type Error = Error;

    fn try_from(ckpt: NetworkCheckpoint) -> Result<Self> {
        let layers = ckpt
            .layers
            .into_iter()
            .map(DenseLayer::try_from)
            .collect::<Result<Vec<_>>>()?;
        DenseNetwork::from_layers(ckpt.input_dim, layers)
    }
}

impl DenseNetwork {
    /// Compact JSON checkpoint with 17-significant-digit floats.
    pub fn to_checkpoint_json(&self) -> Result<String> {
        Ok(to_lossless_json(&NetworkCheckpoint::from(self))? + "\n")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let ckpt: NetworkCheckpoint = serde_json::from_str(text)?;
        ckpt.try_into()
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_json(&text)
    }
}
