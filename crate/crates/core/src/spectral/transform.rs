use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::image::{ChannelOrder, SpatialImage};
use crate::{Error, Result};

/// Inverse transforms whose imaginary part exceeds this fraction of the
/// largest output magnitude are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Per-channel complex spectrum of an N×N image.
///
/// Coefficients follow the forward convention `F(k,l) = 1/N² Σ I(x,y) e^{-i2π(kx+ly)/N}`
/// so the DC term is the channel mean. When `centered` is set, DC sits at
/// index `(N/2, N/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralImage {
    size: usize,
    channels: usize,
    channel_order: ChannelOrder,
    centered: bool,
    coeffs: Vec<Complex64>,
}

impl SpectralImage {
    pub fn new(
        size: usize,
        channels: usize,
        centered: bool,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if size == 0 || coeffs.len() != size * size * channels {
            return Err(Error::Dimension(format!(
                "expected {} coefficients for a {size}x{size}x{channels} spectrum, got {}",
                size * size * channels,
                coeffs.len()
            )));
        }
        Ok(Self {
            size,
            channels,
            channel_order: ChannelOrder::Rgb,
            centered,
            coeffs,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn channel_order(&self) -> ChannelOrder {
        self.channel_order
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> Complex64 {
        self.coeffs[(channel * self.size + row) * self.size + col]
    }

    pub fn channel(&self, channel: usize) -> &[Complex64] {
        let plane = self.size * self.size;
        &self.coeffs[channel * plane..(channel + 1) * plane]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Index of the DC coefficient inside one channel plane.
    pub fn dc_index(&self) -> usize {
        if self.centered {
            let c = self.size / 2;
            c * self.size + c
        } else {
            0
        }
    }

    /// Σ|F|² over all channels and coordinates.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let key = (len, direction == FftDirection::Forward);
        cache
            .entry(key)
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// Unnormalized in-place 2-D DFT of one row-major `n×n` plane.
fn fft2_in_place(plane: &mut [Complex64], n: usize, direction: FftDirection) {
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for row in plane.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![Complex64::default(); n];
    for col in 0..n {
        for (row, slot) in column.iter_mut().enumerate() {
            *slot = plane[row * n + col];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for (row, value) in column.iter().enumerate() {
            plane[row * n + col] = *value;
        }
    }
}

/// Moves DC from `(0,0)` to `(n/2, n/2)`.
fn shift(plane: &[Complex64], n: usize) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::default(); n * n];
    for row in 0..n {
        for col in 0..n {
            out[((row + h) % n) * n + (col + h) % n] = plane[row * n + col];
        }
    }
    out
}

/// Inverse of [`shift`].
fn unshift(plane: &[Complex64], n: usize) -> Vec<Complex64> {
    let h = n / 2;
    let mut out = vec![Complex64::default(); n * n];
    for row in 0..n {
        for col in 0..n {
            out[row * n + col] = plane[((row + h) % n) * n + (col + h) % n];
        }
    }
    out
}

/// Forward DFT of every channel with `1/N²` scaling, DC shifted to the center.
pub fn forward_transform(img: &SpatialImage) -> Result<SpectralImage> {
    let n = img.size();
    if n < 2 {
        return Err(Error::Dimension(format!(
            "transform needs N >= 2, got {n}"
        )));
    }
    let scale = 1.0 / (n * n) as f64;
    let mut coeffs = Vec::with_capacity(n * n * img.channels());
    for c in 0..img.channels() {
        let mut plane: Vec<Complex64> = img
            .channel(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2_in_place(&mut plane, n, FftDirection::Forward);
        for z in plane.iter_mut() {
            *z *= scale;
        }
        coeffs.extend(shift(&plane, n));
    }
    Ok(SpectralImage {
        size: n,
        channels: img.channels(),
        channel_order: img.channel_order(),
        centered: true,
        coeffs,
    })
}

/// Unnormalized inverse DFT (`I(x,y) = Σ F(k,l) e^{+i2π(kx+ly)/N}`).
///
/// Fails with [`Error::SymmetryViolation`] when the reconstruction is not
/// real up to [`SYMMETRY_TOLERANCE`] relative to its largest magnitude.
pub fn inverse_transform(spec: &SpectralImage) -> Result<SpatialImage> {
    let n = spec.size();
    let mut data = Vec::with_capacity(n * n * spec.channels());
    let mut max_imag = 0.0f64;
    let mut max_abs = 0.0f64;
    for c in 0..spec.channels() {
        let mut plane = if spec.is_centered() {
            unshift(spec.channel(c), n)
        } else {
            spec.channel(c).to_vec()
        };
        fft2_in_place(&mut plane, n, FftDirection::Inverse);
        for z in &plane {
            max_imag = max_imag.max(z.im.abs());
            max_abs = max_abs.max(z.norm());
            data.push(z.re);
        }
    }
    let limit = SYMMETRY_TOLERANCE * max_abs;
    if max_imag > limit {
        return Err(Error::SymmetryViolation {
            residue: max_imag,
            limit,
        });
    }
    SpatialImage::new(n, spec.channels(), spec.channel_order(), data)
}

/// Largest imaginary magnitude of the inverse transform relative to the
/// largest output magnitude. Zero for an all-zero spectrum.
pub fn imaginary_residue(spec: &SpectralImage) -> f64 {
    let n = spec.size();
    let mut max_imag = 0.0f64;
    let mut max_abs = 0.0f64;
    for c in 0..spec.channels() {
        let mut plane = if spec.is_centered() {
            unshift(spec.channel(c), n)
        } else {
            spec.channel(c).to_vec()
        };
        fft2_in_place(&mut plane, n, FftDirection::Inverse);
        for z in &plane {
            max_imag = max_imag.max(z.im.abs());
            max_abs = max_abs.max(z.norm());
        }
    }
    if max_abs == 0.0 {
        0.0
    } else {
        max_imag / max_abs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct double sum of the forward definition, uncentered.
    fn naive_dft(plane: &[f64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n];
        for k in 0..n {
            for l in 0..n {
                let mut acc = Complex64::default();
                for x in 0..n {
                    for y in 0..n {
                        let phase = -2.0 * PI * ((k * x) as f64 / n as f64 + (l * y) as f64 / n as f64);
                        acc += plane[x * n + y] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[k * n + l] = acc / (n * n) as f64;
            }
        }
        out
    }

    fn random_image(rng: &mut ChaCha8Rng, n: usize, channels: usize) -> SpatialImage {
        SpatialImage::from_fn(n, channels, |_, _, _| rng.random_range(0.0..255.0)).unwrap()
    }

    #[test]
    fn constant_image_has_only_dc() {
        let img = SpatialImage::constant(4, 1, 128.0).unwrap();
        let spec = forward_transform(&img).unwrap();
        assert!((spec.get(0, 2, 2).re - 128.0).abs() < 1e-12);
        for (i, z) in spec.channel(0).iter().enumerate() {
            if i != spec.dc_index() {
                assert!(z.norm() < 1e-12, "coefficient {i} = {z}");
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let img = SpatialImage::from_fn(4, 1, |_, r, c| if r == 0 && c == 0 { 1.0 } else { 0.0 }).unwrap();
        let spec = forward_transform(&img).unwrap();
        for z in spec.channel(0) {
            assert!((z.norm() - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 3, 4, 6, 16] {
            let img = random_image(&mut rng, n, 1);
            let spec = forward_transform(&img).unwrap();
            let expected = shift(&naive_dft(img.channel(0), n), n);
            for (got, want) in spec.channel(0).iter().zip(&expected) {
                assert!((got - want).norm() < 1e-9, "n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn dc_only_spectrum_inverts_to_constant() {
        let n = 8;
        let mut coeffs = vec![Complex64::default(); n * n];
        coeffs[(n / 2) * n + n / 2] = Complex64::new(77.0, 0.0);
        let spec = SpectralImage::new(n, 1, true, coeffs).unwrap();
        let img = inverse_transform(&spec).unwrap();
        assert!(img.pixels().iter().all(|&v| (v - 77.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_112_rgb() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 112, 3);
        let back = inverse_transform(&forward_transform(&img).unwrap()).unwrap();
        let worst = img
            .pixels()
            .iter()
            .zip(back.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let n = 4;
        let mut coeffs = vec![Complex64::default(); n * n];
        coeffs[(n / 2) * n + n / 2] = Complex64::new(10.0, 0.0);
        coeffs[(n / 2) * n + n / 2 + 1] = Complex64::new(3.0, 0.0);
        let spec = SpectralImage::new(n, 1, true, coeffs).unwrap();
        assert!(matches!(
            inverse_transform(&spec),
            Err(Error::SymmetryViolation { .. })
        ));
        assert!(imaginary_residue(&spec) > 1e-3);
    }

    #[test]
    fn odd_sizes_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 7, 1);
        let back = inverse_transform(&forward_transform(&img).unwrap()).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_tiny_images() {
        let img = SpatialImage::constant(1, 1, 0.0).unwrap();
        assert!(matches!(forward_transform(&img), Err(Error::Dimension(_))));
    }
}
