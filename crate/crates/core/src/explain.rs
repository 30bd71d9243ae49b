//! Per-band influence of an image pair and frequency heat plots.
//!
//! Both images of a pair always receive the same band mask. The influence of
//! band `B` is the change `cs_B - cs_ref` of the cosine similarity; the
//! absolute FHP normalizes `|cs_B - cs_ref|` to unit sum and the directed
//! FHP keeps the sign under the same normalizer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedder::{cosine_similarity, EmbeddingBackend};
use crate::spectral::{
    forward_transform, masked_reconstruction, BandPartition, BandSpec, Norm, SpatialImage,
    SpectralImage,
};
use crate::{par, precision, Error, Result};

/// Profiles whose summed absolute change falls below this are flagged
/// degenerate and carry all-zero FHPs.
pub const DEGENERATE_TOTAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfluenceMode {
    Absolute,
    Directed,
}

impl fmt::Display for InfluenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfluenceMode::Absolute => "absolute",
            InfluenceMode::Directed => "directed",
        })
    }
}

impl FromStr for InfluenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(InfluenceMode::Absolute),
            "directed" => Ok(InfluenceMode::Directed),
            other => Err(Error::Parameter(format!(
                "unknown mode `{other}` (expected absolute or directed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceProfile {
    pub partition: BandPartition,
    pub reference_score: f64,
    /// `cs_B - cs_ref` per band; negative means the band supported the match.
    pub raw_deltas: Vec<f64>,
    pub absolute: Vec<f64>,
    pub directed: Vec<f64>,
    pub degenerate: bool,
}

impl InfluenceProfile {
    pub fn from_deltas(
        partition: BandPartition,
        reference_score: f64,
        raw_deltas: Vec<f64>,
    ) -> Result<Self> {
        if raw_deltas.len() != partition.len() {
            return Err(Error::PartitionMismatch(format!(
                "{} deltas for {} bands",
                raw_deltas.len(),
                partition.len()
            )));
        }
        let total: f64 = raw_deltas.iter().map(|d| d.abs()).sum();
        let degenerate = !(total >= DEGENERATE_TOTAL);
        let (absolute, directed) = if degenerate {
            (vec![0.0; raw_deltas.len()], vec![0.0; raw_deltas.len()])
        } else {
            (
                raw_deltas.iter().map(|d| d.abs() / total).collect(),
                raw_deltas.iter().map(|d| d / total).collect(),
            )
        };
        Ok(Self {
            partition,
            reference_score,
            raw_deltas,
            absolute,
            directed,
            degenerate,
        })
    }

    pub fn values(&self, mode: InfluenceMode) -> &[f64] {
        match mode {
            InfluenceMode::Absolute => &self.absolute,
            InfluenceMode::Directed => &self.directed,
        }
    }

    pub fn to_record(&self, model_id: &str) -> FhpRecord {
        FhpRecord {
            model_id: model_id.to_string(),
            norm: self.partition.norm(),
            band_size: self.partition.band_size(),
            bands: self.partition.bands().to_vec(),
            reference_score: precision::round9(self.reference_score),
            absolute: precision::round9_all(&self.absolute),
            directed: precision::round9_all(&self.directed),
            degenerate: self.degenerate,
        }
    }
}

/// Serialized frequency heat plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhpRecord {
    pub model_id: String,
    pub norm: Norm,
    pub band_size: f64,
    pub bands: Vec<BandSpec>,
    pub reference_score: f64,
    pub absolute: Vec<f64>,
    pub directed: Vec<f64>,
    pub degenerate: bool,
}

/// Cosine similarity of two (possibly masked) images. If masking removed
/// everything the backend reads, the empty embedding is taken to carry no
/// evidence of a match and the score is 0.
pub fn masked_score(
    backend: &dyn EmbeddingBackend,
    a: &SpatialImage,
    b: &SpatialImage,
) -> Result<f64> {
    let ea = backend.embed(a)?;
    let eb = backend.embed(b)?;
    match cosine_similarity(&ea, &eb) {
        Err(Error::DegenerateEmbedding { .. }) => Ok(0.0),
        other => other,
    }
}

/// An image pair together with its spectra, ready for repeated masking.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub a: SpatialImage,
    pub b: SpatialImage,
    spec_a: SpectralImage,
    spec_b: SpectralImage,
}

impl PreparedPair {
    pub fn new(a: SpatialImage, b: SpatialImage) -> Result<Self> {
        if !a.same_shape(&b) {
            return Err(Error::ShapeMismatch(format!(
                "pair images differ: {}x{}x{} vs {}x{}x{}",
                a.size(),
                a.size(),
                a.channels(),
                b.size(),
                b.size(),
                b.channels()
            )));
        }
        let spec_a = forward_transform(&a)?;
        let spec_b = forward_transform(&b)?;
        Ok(Self {
            a,
            b,
            spec_a,
            spec_b,
        })
    }

    pub fn size(&self) -> usize {
        self.a.size()
    }

    /// Score of the unaltered pair. Degenerate embeddings are errors here.
    pub fn reference_score(&self, backend: &dyn EmbeddingBackend) -> Result<f64> {
        cosine_similarity(&backend.embed(&self.a)?, &backend.embed(&self.b)?)
    }

    /// Score with the union of `bands` removed from both images. An empty
    /// band list yields the unaltered images themselves.
    pub fn score_without(
        &self,
        backend: &dyn EmbeddingBackend,
        partition: &BandPartition,
        bands: &[usize],
    ) -> Result<f64> {
        if bands.is_empty() {
            return masked_score(backend, &self.a, &self.b);
        }
        let mask = partition.union_mask(bands)?;
        let a = masked_reconstruction(&self.spec_a, &mask)?;
        let b = masked_reconstruction(&self.spec_b, &mask)?;
        masked_score(backend, &a, &b)
    }

    pub fn influence(
        &self,
        backend: &dyn EmbeddingBackend,
        partition: &BandPartition,
    ) -> Result<InfluenceProfile> {
        if partition.size() != self.size() {
            return Err(Error::PartitionMismatch(format!(
                "partition built for {0}x{0}, images are {1}x{1}",
                partition.size(),
                self.size()
            )));
        }
        let reference = self.reference_score(backend)?;
        let deltas = par::map_indexed(partition.len(), backend.serialize_calls(), |j| {
            self.score_without(backend, partition, &[j])
                .map(|score| score - reference)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        InfluenceProfile::from_deltas(partition.clone(), reference, deltas)
    }
}

/// Per-band influence of the pair `(a, b)` under `backend`.
pub fn pair_influence(
    a: &SpatialImage,
    b: &SpatialImage,
    backend: &dyn EmbeddingBackend,
    partition: &BandPartition,
) -> Result<InfluenceProfile> {
    PreparedPair::new(a.clone(), b.clone())?.influence(backend, partition)
}

/// Band indices from most to least influential (absolute FHP); ties go to
/// the lower band.
pub fn influence_ordering(profile: &InfluenceProfile) -> Result<Vec<usize>> {
    if profile.degenerate {
        return Err(Error::OrderingUnavailable);
    }
    let mut order: Vec<usize> = (0..profile.absolute.len()).collect();
    // stable sort keeps lower indices first among equals
    order.sort_by(|&i, &j| profile.absolute[j].total_cmp(&profile.absolute[i]));
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateProfile {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub count: usize,
    pub mode: InfluenceMode,
}

/// Per-band mean and population standard deviation of one FHP mode.
pub fn aggregate_profiles(
    profiles: &[InfluenceProfile],
    mode: InfluenceMode,
) -> Result<AggregateProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::Parameter("cannot aggregate an empty profile list".into()))?;
    if let Some(i) = profiles.iter().position(|p| p.partition != first.partition) {
        return Err(Error::PartitionMismatch(format!(
            "profile {i} uses a different band partition"
        )));
    }
    let bands = first.partition.len();
    let count = profiles.len() as f64;
    let mut mean = vec![0.0; bands];
    for p in profiles {
        for (m, v) in mean.iter_mut().zip(p.values(mode)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut std = vec![0.0; bands];
    for p in profiles {
        for ((s, v), m) in std.iter_mut().zip(p.values(mode)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / count).sqrt());
    Ok(AggregateProfile {
        mean,
        std,
        count: profiles.len(),
        mode,
    })
}
