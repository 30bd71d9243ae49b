use std::collections::BTreeSet;

use super::{l2_normalize, BackendDescriptor, Embedding, EmbeddingBackend, PreprocessConfig};
use crate::imaging::ResizePolicy;
use crate::spectral::{forward_transform, BandPartition, SpatialImage};
use crate::{Error, Result};

/// Grid the toy embedder snaps coefficient magnitudes to.
///
/// A forward/inverse round trip perturbs untouched coefficients by ~1e-14;
/// snapping makes the embedding of an image with an unread band removed
/// bit-identical to the embedding of the original.
pub const TOY_MAGNITUDE_QUANTUM: f64 = 1.0 / 4096.0;

/// Analytic backend that only "sees" a chosen set of frequency bands.
///
/// The embedding is the L2-normalized vector of (snapped) spectral
/// magnitudes at every coordinate whose band is supported, channel by
/// channel in row-major order. Masking any other band cannot change it.
#[derive(Debug, Clone)]
pub struct SpectralToyEmbedder {
    supported: BTreeSet<usize>,
    partition: BandPartition,
    descriptor: BackendDescriptor,
}

impl SpectralToyEmbedder {
    pub fn new(
        supported: impl IntoIterator<Item = usize>,
        partition: BandPartition,
    ) -> Result<Self> {
        let supported: BTreeSet<usize> = supported.into_iter().collect();
        if supported.is_empty() {
            return Err(Error::Parameter(
                "toy embedder needs at least one supported band".into(),
            ));
        }
        if let Some(&j) = supported.iter().find(|&&j| j >= partition.len()) {
            return Err(Error::Parameter(format!(
                "supported band {j} out of range (partition has {} bands)",
                partition.len()
            )));
        }
        let band_list = supported
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let dim = partition
            .assignment()
            .iter()
            .filter(|&&slot| supported.contains(&(slot as usize)))
            .count();
        let descriptor = BackendDescriptor {
            model_id: format!(
                "toy-spectral[{band_list}]/{}/{}/{}",
                partition.size(),
                partition.band_size(),
                partition.norm()
            ),
            // three-channel input
            embedding_dim: 3 * dim,
            preprocess: PreprocessConfig {
                expected_size: Some(partition.size()),
                resize_policy: ResizePolicy::Error,
                ..Default::default()
            },
        };
        Ok(Self {
            supported,
            partition,
            descriptor,
        })
    }

    pub fn supported(&self) -> &BTreeSet<usize> {
        &self.supported
    }

    pub fn partition(&self) -> &BandPartition {
        &self.partition
    }
}

impl EmbeddingBackend for SpectralToyEmbedder {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn embed(&self, img: &SpatialImage) -> Result<Embedding> {
        if img.size() != self.partition.size() {
            return Err(Error::Dimension(format!(
                "toy embedder built for {0}x{0} images, got {1}x{1}",
                self.partition.size(),
                img.size()
            )));
        }
        let spec = forward_transform(img)?;
        let assignment = self.partition.assignment();
        let mut values = Vec::with_capacity(self.descriptor.embedding_dim / 3 * img.channels());
        for c in 0..spec.channels() {
            for (z, &slot) in spec.channel(c).iter().zip(assignment) {
                if self.supported.contains(&(slot as usize)) {
                    values.push((z.norm() / TOY_MAGNITUDE_QUANTUM).round() * TOY_MAGNITUDE_QUANTUM);
                }
            }
        }
        l2_normalize(&mut values);
        Embedding::new(values, self.descriptor.model_id.clone())
    }
}
