use std::path::{Path, PathBuf};
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::{BackendDescriptor, Embedding, EmbeddingBackend, ModelSidecar, PreprocessConfig};
use crate::imaging::ResizePolicy;
use crate::spectral::SpatialImage;
use crate::{Error, Result};

/// Face recognition network loaded from an ONNX file.
///
/// Input is a `1×3×S×S` float tensor built with the sidecar's
/// preprocessing; the first output is flattened into the embedding.
pub struct OnnxEmbedder {
    plan: Arc<TypedRunnableModel>,
    descriptor: BackendDescriptor,
    path: PathBuf,
}

impl std::fmt::Debug for OnnxEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxEmbedder")
            .field("path", &self.path)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

/// `model.onnx` → `model.json`.
pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

impl OnnxEmbedder {
    /// Loads `model_file` and the sidecar next to it.
    pub fn load(model_file: &Path, resize_policy: ResizePolicy) -> Result<Self> {
        let sidecar = ModelSidecar::read(&sidecar_path(model_file))?;
        let cfg = sidecar.preprocess_config(resize_policy);
        Self::with_config(model_file, &sidecar.model_id, sidecar.embedding_dim, cfg)
    }

    pub fn with_config(
        model_file: &Path,
        model_id: &str,
        embedding_dim: usize,
        cfg: PreprocessConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let size = cfg.expected_size.ok_or_else(|| {
            Error::Parameter("ONNX backends need a fixed input size".into())
        })?;
        if !model_file.is_file() {
            return Err(Error::Model(format!(
                "model file {} does not exist",
                model_file.display()
            )));
        }
        let plan = tract_onnx::onnx()
            .model_for_path(model_file)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, size, size]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| {
                Error::Model(format!("cannot load {}: {e:#}", model_file.display()))
            })?;
        Ok(Self {
            plan,
            descriptor: BackendDescriptor {
                model_id: model_id.to_string(),
                embedding_dim,
                preprocess: cfg,
            },
            path: model_file.to_path_buf(),
        })
    }
}

impl EmbeddingBackend for OnnxEmbedder {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn embed(&self, img: &SpatialImage) -> Result<Embedding> {
        let (n, input) = self.descriptor.preprocess.apply(img)?;
        let data: Vec<f32> = input.iter().map(|&v| v as f32).collect();
        let tensor = Tensor::from_shape(&[1, 3, n, n], &data)
            .map_err(|e| Error::Model(format!("input tensor: {e}")))?;
        let outputs = self
            .plan
            .run(tvec!(tensor.into()))
            .map_err(|e| Error::Model(format!("inference failed: {e:#}")))?;
        let view = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| Error::Model(format!("unexpected output type: {e}")))?;
        let values: Vec<f64> = view.iter().map(|&v| v as f64).collect();
        if values.len() != self.descriptor.embedding_dim {
            return Err(Error::Model(format!(
                "expected a {}-dimensional embedding, model produced {}",
                self.descriptor.embedding_dim,
                values.len()
            )));
        }
        Embedding::new(values, self.descriptor.model_id.clone())
    }
}
