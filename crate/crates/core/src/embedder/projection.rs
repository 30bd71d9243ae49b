use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{l2_normalize, BackendDescriptor, Embedding, EmbeddingBackend, PreprocessConfig};
use crate::spectral::SpatialImage;
use crate::{Error, Result};

/// Random ±1 linear map from the flattened preprocessed image to `dim`
/// outputs, L2-normalized. Row `i` of the map is drawn from ChaCha8 stream
/// `i` under `seed`, so the map depends only on `(seed, dim, input length)`.
pub struct SeededProjectionEmbedder {
    seed: u64,
    descriptor: BackendDescriptor,
    // sign bits per input length, row-major, rows padded to whole words
    signs: Mutex<HashMap<usize, Arc<Vec<u64>>>>,
}

impl SeededProjectionEmbedder {
    pub fn new(seed: u64, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!(
                "projection dimension must be >= 2, got {dim}"
            )));
        }
        Ok(Self {
            seed,
            descriptor: BackendDescriptor {
                model_id: format!("projection-{seed}-{dim}"),
                embedding_dim: dim,
                preprocess: PreprocessConfig {
                    expected_size: None,
                    ..Default::default()
                },
            },
            signs: Mutex::new(HashMap::new()),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn signs_for(&self, len: usize) -> Arc<Vec<u64>> {
        let mut cache = self.signs.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(len)
            .or_insert_with(|| {
                let words = len.div_ceil(64);
                let mut bits = Vec::with_capacity(words * self.descriptor.embedding_dim);
                for row in 0..self.descriptor.embedding_dim {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    rng.set_stream(row as u64);
                    bits.extend((0..words).map(|_| rng.next_u64()));
                }
                Arc::new(bits)
            })
            .clone()
    }
}

impl EmbeddingBackend for SeededProjectionEmbedder {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn embed(&self, img: &SpatialImage) -> Result<Embedding> {
        let (_, input) = self.descriptor.preprocess.apply(img)?;
        let signs = self.signs_for(input.len());
        let words = input.len().div_ceil(64);
        let scale = 1.0 / (input.len() as f64).sqrt();
        let mut values: Vec<f64> = signs
            .chunks_exact(words)
            .map(|row| {
                let mut acc = 0.0;
                for (chunk, &word) in input.chunks(64).zip(row) {
                    for (bit, &x) in chunk.iter().enumerate() {
                        if word >> bit & 1 == 1 {
                            acc += x;
                        } else {
                            acc -= x;
                        }
                    }
                }
                acc * scale
            })
            .collect();
        l2_normalize(&mut values);
        Embedding::new(values, self.descriptor.model_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::cosine_similarity;
    use rand::Rng;

    fn random_image(rng: &mut ChaCha8Rng, n: usize) -> SpatialImage {
        SpatialImage::from_fn(n, 3, |_, _, _| rng.random_range(0.0..255.0)).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = random_image(&mut rng, 16);
        let a = SeededProjectionEmbedder::new(7, 64).unwrap();
        let b = SeededProjectionEmbedder::new(7, 64).unwrap();
        let c = SeededProjectionEmbedder::new(8, 64).unwrap();
        let ea = a.embed(&img).unwrap();
        assert_eq!(ea, b.embed(&img).unwrap());
        assert_eq!(ea, a.embed(&img).unwrap());
        assert_ne!(ea.values(), c.embed(&img).unwrap().values());
        assert!((cosine_similarity(&ea, &ea).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ea.dim(), 64);
    }

    #[test]
    fn rejects_tiny_dimension() {
        assert!(SeededProjectionEmbedder::new(1, 1).is_err());
    }

    #[test]
    fn independent_images_are_nearly_orthogonal() {
        // 1000 seeded trials of two independent random images, d = 512
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let backend = SeededProjectionEmbedder::new(5, 512).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let a = random_image(&mut rng, 8);
            let b = random_image(&mut rng, 8);
            let cs = cosine_similarity(&backend.embed(&a).unwrap(), &backend.embed(&b).unwrap()).unwrap();
            worst = worst.max(cs.abs());
        }
        assert!(worst < 0.5, "worst |cs| = {worst}");
    }
}
