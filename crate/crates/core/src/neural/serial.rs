use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Layer, LayerSpec, MlpParams};
use crate::{Error, Result};

/// JSON form of one layer: spec plus row-major `out_dim × in_dim` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layers: Vec<LayerRecord>,
}

impl From<&MlpParams> for MlpRecord {
    fn from(p: &MlpParams) -> Self {
        MlpRecord {
            layers: p
                .specs
                .iter()
                .zip(&p.layers)
                .map(|(s, l)| LayerRecord {
                    in_dim: s.in_dim,
                    out_dim: s.out_dim,
                    activation: s.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<&MlpRecord> for MlpParams {
    type Error = Error;

    fn try_from(r: &MlpRecord) -> Result<Self> {
        let mut specs = Vec::new();
        let mut layers = Vec::new();
        for (l, rec) in r.layers.iter().enumerate() {
            specs.push(LayerSpec {
                in_dim: rec.in_dim,
                out_dim: rec.out_dim,
                activation: rec.activation,
            });
            let weights = Array2::from_shape_vec((rec.out_dim, rec.in_dim), rec.weights.clone())
                .map_err(|_| Error::Shape(format!("layer {l}: weight count")))?;
            layers.push(Layer {
                weights,
                bias: Array1::from(rec.bias.clone()),
            });
        }
        MlpParams::from_layers(specs, layers)
    }
}

/// Serialized autoencoder: encoder and decoder plus the seed that initialized them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderRecord {
    pub architecture: Architecture,
    pub encoder: MlpRecord,
    pub decoder: MlpRecord,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl AutoencoderRecord {
    pub fn new(encoder: &MlpParams, decoder: &MlpParams, seed: u64) -> Self {
        AutoencoderRecord {
            architecture: Architecture {
                encoder: encoder.specs.clone(),
                decoder: decoder.specs.clone(),
            },
            encoder: encoder.into(),
            decoder: decoder.into(),
            seed,
        }
    }

    pub fn networks(&self) -> Result<(MlpParams, MlpParams)> {
        Ok((
            MlpParams::try_from(&self.encoder)?,
            MlpParams::try_from(&self.decoder)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{default_architecture, init_params};

    #[test]
    fn json_roundtrip_is_exact() {
        let (e, d) = default_architecture(9, 3);
        let enc = init_params(&e, 1).unwrap();
        let dec = init_params(&d, 2).unwrap();
        let rec = AutoencoderRecord::new(&enc, &dec, 1);
        let text = serde_json::to_string(&rec).unwrap();
        let back: AutoencoderRecord = serde_json::from_str(&text).unwrap();
        let (e2, d2) = back.networks().unwrap();
        assert_eq!(e2, enc);
        assert_eq!(d2, dec);
    }

    #[test]
    fn bad_weight_count_rejected() {
        let rec = MlpRecord {
            layers: vec![LayerRecord {
                in_dim: 2,
                out_dim: 2,
                activation: Activation::Linear,
                weights: vec![1.0; 3],
                bias: vec![0.0; 2],
            }],
        };
        assert!(MlpParams::try_from(&rec).is_err());
    }
}
