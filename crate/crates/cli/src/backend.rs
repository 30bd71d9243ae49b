use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use freqxplain::embedder::{EmbeddingBackend, SeededProjectionEmbedder, SpectralToyEmbedder};
use freqxplain::imaging::ResizePolicy;
use freqxplain::spectral::BandPartition;

pub const MODEL_DIR_ENV: &str = "FREQXPLAIN_MODEL_DIR";

/// Embedding backend selection; exactly one of the selectors must be given.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// ONNX face-embedding model; the JSON sidecar is read from the same
    /// location with a `.json` extension. Relative paths that do not exist
    /// are looked up in $FREQXPLAIN_MODEL_DIR.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Analytic toy backend reading only these band indices (comma separated).
    #[arg(long, value_name = "BANDS", value_delimiter = ',')]
    pub toy_bands: Option<Vec<usize>>,

    /// Seeded random-projection backend.
    #[arg(long, value_name = "SEED")]
    pub projection_seed: Option<u64>,

    #[arg(long, default_value_t = 512, value_name = "DIM")]
    pub projection_dim: usize,

    /// How to handle images whose size differs from the model input.
    #[arg(long, value_enum, default_value = "error")]
    pub resize: ResizeArg,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum ResizeArg {
    #[default]
    Error,
    Bilinear,
}

impl From<ResizeArg> for ResizePolicy {
    fn from(r: ResizeArg) -> Self {
        match r {
            ResizeArg::Error => ResizePolicy::Error,
            ResizeArg::Bilinear => ResizePolicy::Bilinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Model(PathBuf),
    Toy(Vec<usize>),
    Projection { seed: u64, dim: usize },
}

impl BackendArgs {
    pub fn choice(&self) -> anyhow::Result<BackendChoice> {
        let selected = [
            self.model.is_some(),
            self.toy_bands.is_some(),
            self.projection_seed.is_some(),
        ]
        .iter()
        .filter(|s| **s)
        .count();
        if selected != 1 {
            bail!("select exactly one backend: --model, --toy-bands or --projection-seed");
        }
        if let Some(path) = &self.model {
            return Ok(BackendChoice::Model(resolve_model_path(path)));
        }
        if let Some(bands) = &self.toy_bands {
            return Ok(BackendChoice::Toy(bands.clone()));
        }
        Ok(BackendChoice::Projection {
            seed: self.projection_seed.expect("checked above"),
            dim: self.projection_dim,
        })
    }
}

fn resolve_model_path(path: &PathBuf) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(MODEL_DIR_ENV) {
            return PathBuf::from(dir).join(path);
        }
    }
    path.clone()
}

/// A backend loaded before images are read. The toy backend depends on the
/// image size, so it is only built once the partition is known.
pub enum Prepared {
    Ready(Box<dyn EmbeddingBackend>),
    Toy(Vec<usize>),
}

impl Prepared {
    pub fn load(choice: &BackendChoice, resize: ResizePolicy) -> anyhow::Result<Self> {
        match choice {
            BackendChoice::Model(path) => load_model(path, resize),
            BackendChoice::Toy(bands) => Ok(Prepared::Toy(bands.clone())),
            BackendChoice::Projection { seed, dim } => Ok(Prepared::Ready(Box::new(
                SeededProjectionEmbedder::new(*seed, *dim)?,
            ))),
        }
    }

    /// Side length images must be loaded at, if the backend fixes one.
    pub fn expected_size(&self) -> Option<usize> {
        match self {
            Prepared::Ready(b) => b.descriptor().preprocess.expected_size,
            Prepared::Toy(_) => None,
        }
    }

    pub fn finish(self, partition: &BandPartition) -> anyhow::Result<Box<dyn EmbeddingBackend>> {
        match self {
            Prepared::Ready(b) => Ok(b),
            Prepared::Toy(bands) => Ok(Box::new(SpectralToyEmbedder::new(
                bands,
                partition.clone(),
            )?)),
        }
    }
}

#[cfg(feature = "onnx")]
fn load_model(path: &std::path::Path, resize: ResizePolicy) -> anyhow::Result<Prepared> {
    let model = freqxplain::embedder::OnnxEmbedder::load(path, resize)
        .with_context(|| format!("loading model {}", path.display()))?;
    Ok(Prepared::Ready(Box::new(model)))
}

#[cfg(not(feature = "onnx"))]
fn load_model(path: &std::path::Path, _resize: ResizePolicy) -> anyhow::Result<Prepared> {
    bail!(
        "cannot load {}: built without ONNX support (enable the `onnx` feature)",
        path.display()
    )
}
