use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Order of the colour planes of a three-channel image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChannelOrder {
    #[default]
    Rgb,
    Bgr,
}

/// A square, real-valued, multi-channel image.
///
/// Pixels are stored planar: channel-major, then row-major inside a channel.
/// Values are nominally in `[0, 255]` but are never clamped, since masked
/// reconstructions legitimately leave that range.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialImage {
    size: usize,
    channels: usize,
    channel_order: ChannelOrder,
    data: Vec<f64>,
}

impl SpatialImage {
    pub fn new(
        size: usize,
        channels: usize,
        channel_order: ChannelOrder,
        data: Vec<f64>,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::Dimension("image side length must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != size * size * channels {
            return Err(Error::Dimension(format!(
                "expected {} values for a {size}x{size}x{channels} image, got {}",
                size * size * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("non-finite pixel value at index {i}")));
        }
        Ok(Self {
            size,
            channels,
            channel_order,
            data,
        })
    }

    /// Builds an RGB-ordered image from `f(channel, row, col)`.
    pub fn from_fn(
        size: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(size * size * channels);
        for c in 0..channels {
            for row in 0..size {
                for col in 0..size {
                    data.push(f(c, row, col));
                }
            }
        }
        Self::new(size, channels, ChannelOrder::Rgb, data)
    }

    pub fn constant(size: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(
            size,
            channels,
            ChannelOrder::Rgb,
            vec![value; size * size * channels],
        )
    }

    /// Side length N of the N×N grid.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn width(&self) -> usize {
        self.size
    }

    pub fn height(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn channel_order(&self) -> ChannelOrder {
        self.channel_order
    }

    pub fn with_channel_order(mut self, order: ChannelOrder) -> Self {
        self.channel_order = order;
        self
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.size + row) * self.size + col]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let plane = self.size * self.size;
        &self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub(crate) fn same_shape(&self, other: &SpatialImage) -> bool {
        self.size == other.size && self.channels == other.channels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpatialImage::new(2, 2, ChannelOrder::Rgb, vec![0.0; 8]).is_err());
        assert!(SpatialImage::new(2, 1, ChannelOrder::Rgb, vec![0.0; 3]).is_err());
        assert!(SpatialImage::new(0, 1, ChannelOrder::Rgb, vec![]).is_err());
        assert!(SpatialImage::new(1, 1, ChannelOrder::Rgb, vec![f64::NAN]).is_err());
    }

    #[test]
    fn planar_indexing() {
        let img = SpatialImage::from_fn(3, 3, |c, r, col| (100 * c + 10 * r + col) as f64).unwrap();
        assert_eq!(img.get(2, 1, 0), 210.0);
        assert_eq!(img.channel(1)[4], 111.0);
        assert_eq!(img.pixels().len(), 27);
    }
}
