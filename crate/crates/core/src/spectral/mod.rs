//! Spatial/frequency transforms and radius-band masking.

mod bands;
mod image;
mod transform;

pub use bands::{
    apply_mask, build_partition, mask_image, BandPartition, BandSpec, FrequencyMask, Norm,
};
pub use image::{ChannelOrder, SpatialImage};
pub use transform::{
    forward_transform, imaginary_residue, inverse_transform, SpectralImage, SYMMETRY_TOLERANCE,
};

/// Reconstructs an image from an already computed spectrum with `mask` applied.
pub fn masked_reconstruction(
    spec: &SpectralImage,
    mask: &FrequencyMask,
) -> crate::Result<SpatialImage> {
    inverse_transform(&apply_mask(spec, mask)?)
}
