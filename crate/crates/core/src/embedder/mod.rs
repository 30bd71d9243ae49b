//! Embedding backends and the cosine comparison score.
//!
//! Every backend maps a [`SpatialImage`] to an [`Embedding`] deterministically.
//! Two analytic backends ship for testing and smoke runs; real face
//! recognition networks are loaded from ONNX files with a JSON sidecar.

#[cfg(feature = "onnx")]
mod onnx;
mod preprocess;
mod projection;
mod toy;

#[cfg(feature = "onnx")]
pub use onnx::{sidecar_path, OnnxEmbedder};
pub use preprocess::{ModelSidecar, PerChannel, PreprocessConfig};
pub use projection::SeededProjectionEmbedder;
pub use toy::{SpectralToyEmbedder, TOY_MAGNITUDE_QUANTUM};

use crate::spectral::SpatialImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
    model_id: String,
}

impl Embedding {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("embedding must have dimension >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("embedding contains non-finite values".into()));
        }
        Ok(Self {
            values,
            model_id: model_id.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// What a backend is and what input it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendDescriptor {
    pub model_id: String,
    pub embedding_dim: usize,
    pub preprocess: PreprocessConfig,
}

pub trait EmbeddingBackend: Send + Sync {
    fn descriptor(&self) -> &BackendDescriptor;

    fn embed(&self, img: &SpatialImage) -> Result<Embedding>;

    /// Backends that cannot be called concurrently return `true`; callers
    /// then evaluate sequentially.
    fn serialize_calls(&self) -> bool {
        false
    }

    fn model_id(&self) -> &str {
        &self.descriptor().model_id
    }
}

/// Cosine similarity of two embeddings.
///
/// Fails on a zero vector instead of returning NaN.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::EmbeddingDimension {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let norm_a = a.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_a == 0.0 {
        return Err(Error::DegenerateEmbedding {
            model_id: a.model_id.clone(),
        });
    }
    let norm_b = b.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Err(Error::DegenerateEmbedding {
            model_id: b.model_id.clone(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (norm_a * norm_b))
}

pub(crate) fn l2_normalize(values: &mut [f64]) {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
}
