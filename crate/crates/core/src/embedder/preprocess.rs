use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::imaging::{resize_bilinear, ResizePolicy};
use crate::spectral::{ChannelOrder, SpatialImage};
use crate::{Error, Result};

/// Per-channel constant, written either as one number or as three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerChannel {
    Uniform(f64),
    Channels([f64; 3]),
}

impl PerChannel {
    pub fn get(&self, channel: usize) -> f64 {
        match self {
            PerChannel::Uniform(v) => *v,
            PerChannel::Channels(v) => v[channel],
        }
    }
}

/// Maps pixel values to network input: `((v / 255) - mean[c]) / std[c]`,
/// with channels reordered to `channel_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Required side length; `None` accepts any square image.
    pub expected_size: Option<usize>,
    pub channel_order: ChannelOrder,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub resize_policy: ResizePolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            expected_size: Some(112),
            channel_order: ChannelOrder::Rgb,
            mean: [0.5; 3],
            std: [0.5; 3],
            resize_policy: ResizePolicy::Error,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|s| *s == 0.0 || !s.is_finite()) {
            return Err(Error::Parameter("preprocessing scale must be non-zero".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Parameter("preprocessing shift must be finite".into()));
        }
        Ok(())
    }

    /// Returns the side length used and the NCHW tensor (batch of one,
    /// three channels) in the configured channel order.
    pub fn apply(&self, img: &SpatialImage) -> Result<(usize, Vec<f64>)> {
        let resized;
        let img = match self.expected_size {
            Some(n) if img.size() != n => match self.resize_policy {
                ResizePolicy::Error => {
                    return Err(Error::Dimension(format!(
                        "model expects {n}x{n} input, got {0}x{0}",
                        img.size()
                    )))
                }
                ResizePolicy::Bilinear => {
                    resized = resize_bilinear(img, n)?;
                    &resized
                }
            },
            _ => img,
        };
        let n = img.size();
        let plane = n * n;
        let mut out = Vec::with_capacity(3 * plane);
        for target in 0..3 {
            let source = if img.channels() == 1 {
                0
            } else if img.channel_order() == self.channel_order {
                target
            } else {
                2 - target
            };
            let (mean, std) = (self.mean[target], self.std[target]);
            out.extend(
                img.channel(source)
                    .iter()
                    .map(|&v| (v / 255.0 - mean) / std),
            );
        }
        Ok((n, out))
    }
}

/// JSON sidecar stored next to an ONNX model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub model_id: String,
    pub embedding_dim: usize,
    pub input_size: usize,
    pub channel_order: ChannelOrder,
    pub mean: PerChannel,
    pub std: PerChannel,
}

impl ModelSidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Model(format!("invalid sidecar {}: {e}", path.display())))
    }

    pub fn preprocess_config(&self, resize_policy: ResizePolicy) -> PreprocessConfig {
        PreprocessConfig {
            expected_size: Some(self.input_size),
            channel_order: self.channel_order,
            mean: [0, 1, 2].map(|c| self.mean.get(c)),
            std: [0, 1, 2].map(|c| self.std.get(c)),
            resize_policy,
        }
    }
}
