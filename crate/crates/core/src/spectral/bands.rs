use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::image::SpatialImage;
use super::transform::{forward_transform, inverse_transform, SpectralImage};
use crate::{Error, Result};

/// Distance used to measure how far a frequency coordinate lies from DC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn radius(self, du: i64, dv: i64) -> f64 {
        match self {
            Norm::L1 => (du.abs() + dv.abs()) as f64,
            Norm::L2 => ((du * du + dv * dv) as f64).sqrt(),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => Err(Error::Parameter(format!(
                "unknown norm `{other}` (expected l1 or l2)"
            ))),
        }
    }
}

/// Half-open radius interval `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    #[serde(rename = "b")]
    pub lower: f64,
    #[serde(rename = "t")]
    pub upper: f64,
}

impl BandSpec {
    pub fn size(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, radius: f64) -> bool {
        radius > self.lower && radius <= self.upper
    }
}

const DC_SLOT: u16 = u16::MAX;

/// Ordered, disjoint radius bands covering every non-DC coordinate of an
/// N×N centered spectrum.
///
/// Bands have width `band_size` over `(0, N/2]`; the last one may be
/// narrower, and also absorbs every coordinate with radius above `N/2`
/// (grid corners) so the partition is exhaustive.
#[derive(Debug, Clone)]
pub struct BandPartition {
    size: usize,
    band_size: f64,
    norm: Norm,
    bands: Vec<BandSpec>,
    // Band index of every centered coordinate, row-major; DC_SLOT at DC.
    assignment: Arc<[u16]>,
}

impl PartialEq for BandPartition {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.band_size == other.band_size
            && self.norm == other.norm
            && self.bands == other.bands
    }
}

impl BandPartition {
    pub fn new(size: usize, band_size: f64, norm: Norm) -> Result<Self> {
        if size < 2 || size % 2 != 0 {
            return Err(Error::Parameter(format!(
                "band partitions need an even side length >= 2, got {size}"
            )));
        }
        let half = (size / 2) as f64;
        if !(band_size > 0.0) || band_size > half {
            return Err(Error::Parameter(format!(
                "band size must lie in (0, {half}], got {band_size}"
            )));
        }
        let count = (half / band_size).ceil() as usize;
        if count >= DC_SLOT as usize {
            return Err(Error::Parameter(format!("too many bands ({count})")));
        }
        let bands: Vec<BandSpec> = (0..count)
            .map(|j| BandSpec {
                lower: j as f64 * band_size,
                upper: ((j + 1) as f64 * band_size).min(half),
            })
            .collect();

        let center = (size / 2) as i64;
        let mut assignment = Vec::with_capacity(size * size);
        for row in 0..size as i64 {
            for col in 0..size as i64 {
                let r = norm.radius(row - center, col - center);
                let slot = if r == 0.0 {
                    DC_SLOT
                } else {
                    bands
                        .iter()
                        .position(|b| r <= b.upper)
                        .unwrap_or(count - 1) as u16
                };
                assignment.push(slot);
            }
        }
        Ok(Self {
            size,
            band_size,
            norm,
            bands,
            assignment: assignment.into(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn band_size(&self) -> f64 {
        self.band_size
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn bands(&self) -> &[BandSpec] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Band of the centered coordinate `(row, col)`, `None` at DC.
    pub fn band_of(&self, row: usize, col: usize) -> Option<usize> {
        match self.assignment[row * self.size + col] {
            DC_SLOT => None,
            j => Some(j as usize),
        }
    }

    pub(crate) fn assignment(&self) -> &[u16] {
        &self.assignment
    }

    /// Mask removing a single band.
    pub fn mask(&self, band: usize) -> Result<FrequencyMask> {
        self.union_mask(&[band])
    }

    /// Mask removing the union of the given bands. An empty list gives the
    /// identity mask.
    pub fn union_mask(&self, bands: &[usize]) -> Result<FrequencyMask> {
        let mut removed = vec![false; self.bands.len()];
        for &j in bands {
            if j >= self.bands.len() {
                return Err(Error::Parameter(format!(
                    "band index {j} out of range (partition has {} bands)",
                    self.bands.len()
                )));
            }
            removed[j] = true;
        }
        let keep = self
            .assignment
            .iter()
            .map(|&slot| slot == DC_SLOT || !removed[slot as usize])
            .collect();
        Ok(FrequencyMask {
            size: self.size,
            keep,
        })
    }

    /// Σ|F|² per band, summed over channels. DC is not counted.
    pub fn band_energy(&self, spec: &SpectralImage) -> Result<Vec<f64>> {
        if spec.size() != self.size || !spec.is_centered() {
            return Err(Error::ShapeMismatch(format!(
                "spectrum of size {} does not fit a partition of size {}",
                spec.size(),
                self.size
            )));
        }
        let mut energy = vec![0.0; self.bands.len()];
        for c in 0..spec.channels() {
            for (z, &slot) in spec.channel(c).iter().zip(self.assignment.iter()) {
                if slot != DC_SLOT {
                    energy[slot as usize] += z.norm_sqr();
                }
            }
        }
        Ok(energy)
    }
}

/// Build the partition for side length `size`, band width `band_size`.
pub fn build_partition(size: usize, band_size: f64, norm: Norm) -> Result<BandPartition> {
    BandPartition::new(size, band_size, norm)
}

/// Binary keep/remove matrix over a centered N×N spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyMask {
    size: usize,
    keep: Vec<bool>,
}

impl FrequencyMask {
    pub fn identity(size: usize) -> Self {
        Self {
            size,
            keep: vec![true; size * size],
        }
    }

    /// Wraps an arbitrary keep matrix. No symmetry is enforced here.
    pub fn from_keep(size: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != size * size {
            return Err(Error::ShapeMismatch(format!(
                "mask of {} entries for a {size}x{size} grid",
                keep.len()
            )));
        }
        Ok(Self { size, keep })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn keeps(&self, row: usize, col: usize) -> bool {
        self.keep[row * self.size + col]
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn removed_count(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }

    /// Checks `mask(u, v) == mask(-u, -v)` for centered offsets.
    pub fn is_mirror_symmetric(&self) -> bool {
        let n = self.size;
        let h = n / 2;
        (0..n).all(|row| {
            (0..n).all(|col| {
                // mirror of offset u = row - h is -u, i.e. row' = 2h - row (mod n)
                let mr = (2 * h + n - row) % n;
                let mc = (2 * h + n - col) % n;
                self.keeps(row, col) == self.keeps(mr, mc)
            })
        })
    }
}

/// Channel-wise elementwise product of a centered spectrum and a mask.
pub fn apply_mask(spec: &SpectralImage, mask: &FrequencyMask) -> Result<SpectralImage> {
    if spec.size() != mask.size() {
        return Err(Error::ShapeMismatch(format!(
            "spectrum is {0}x{0}, mask is {1}x{1}",
            spec.size(),
            mask.size()
        )));
    }
    if !spec.is_centered() {
        return Err(Error::ShapeMismatch(
            "masks address centered spectra only".into(),
        ));
    }
    let mut out = spec.clone();
    let plane = spec.size() * spec.size();
    for chunk in out.coeffs_mut().chunks_exact_mut(plane) {
        for (z, &keep) in chunk.iter_mut().zip(mask.keep()) {
            if !keep {
                *z = Default::default();
            }
        }
    }
    Ok(out)
}

/// Forward transform, mask, inverse transform.
pub fn mask_image(img: &SpatialImage, mask: &FrequencyMask) -> Result<SpatialImage> {
    let spec = forward_transform(img)?;
    inverse_transform(&apply_mask(&spec, mask)?)
}
