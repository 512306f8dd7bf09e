//! Test inputs: additive Gaussian noise and synthetic multiband cubes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::Image;

/// Adds i.i.d. `N(0, sigma^2)` noise to every sample. Samples are not clamped.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("noise level must be finite and non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let samples = img.samples().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Image::new(img.width(), img.height(), img.channels(), samples, img.range_max())
}

/// A linear-mixing cube: four smooth endmember spectra combined with smooth,
/// spatially varying abundances that sum to one, plus mild Gaussian noise of
/// 1% of the range. Values lie in `[0, range_max]`.
pub fn synthetic_cube(width: usize, height: usize, bands: usize, range_max: f64, seed: u64) -> Result<Image> {
    if width == 0 || height == 0 || bands == 0 {
        return Err(Error::invalid("cube dimensions must be positive"));
    }
    const ENDMEMBERS: usize = 4;
    const BLOBS: usize = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Endmember spectra in (0, 1): a baseline plus one or two bumps.
    let spectra: Vec<Vec<f64>> = (0..ENDMEMBERS)
        .map(|_| {
            let base = rng.random_range(0.1..0.3);
            let bumps: Vec<(f64, f64, f64)> = (0..2)
                .map(|_| {
                    (
                        rng.random_range(0.0..bands as f64),
                        rng.random_range(1.5..5.0),
                        rng.random_range(0.2..0.6),
                    )
                })
                .collect();
            (0..bands)
                .map(|b| {
                    let bump: f64 = bumps
                        .iter()
                        .map(|&(c, w, h)| h * (-0.5 * ((b as f64 - c) / w).powi(2)).exp())
                        .sum();
                    (base + bump).min(0.95)
                })
                .collect()
        })
        .collect();

    // Abundance fields from a few Gaussian blobs per endmember.
    let blobs: Vec<Vec<(f64, f64, f64)>> = (0..ENDMEMBERS)
        .map(|_| {
            (0..BLOBS)
                .map(|_| {
                    (
                        rng.random_range(0.0..width as f64),
                        rng.random_range(0.0..height as f64),
                        rng.random_range(0.1..0.3) * width.max(height) as f64,
                    )
                })
                .collect()
        })
        .collect();
    let npix = width * height;
    let mut abundance = vec![0.0; ENDMEMBERS * npix];
    for y in 0..height {
        for x in 0..width {
            let raw: Vec<f64> = blobs
                .iter()
                .map(|bl| {
                    0.05 + bl
                        .iter()
                        .map(|&(cx, cy, r)| {
                            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                            (-0.5 * d2 / (r * r)).exp()
                        })
                        .sum::<f64>()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            for (e, v) in raw.iter().enumerate() {
                abundance[e * npix + y * width + x] = v / total;
            }
        }
    }

    let noise = Normal::new(0.0, 0.01).map_err(|e| Error::invalid(e.to_string()))?;
    let mut samples = vec![0.0; bands * npix];
    for (b, plane) in samples.chunks_mut(npix).enumerate() {
        for (k, v) in plane.iter_mut().enumerate() {
            let mix: f64 = (0..ENDMEMBERS).map(|e| abundance[e * npix + k] * spectra[e][b]).sum();
            *v = (mix + noise.sample(&mut rng)).clamp(0.0, 1.0) * range_max;
        }
    }
    Image::new(width, height, bands, samples, range_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_statistics() {
        let img = Image::zeros(100, 100, 1, 255.0);
        let noisy = add_gaussian_noise(&img, 25.0, 1).unwrap();
        let n = noisy.samples().len() as f64;
        let mean = noisy.samples().iter().sum::<f64>() / n;
        let var = noisy.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1.0);
        assert!((var.sqrt() - 25.0).abs() < 0.5);
        assert_eq!(noisy, add_gaussian_noise(&img, 25.0, 1).unwrap());
        assert!(add_gaussian_noise(&img, -1.0, 1).is_err());
    }

    #[test]
    fn cube_is_in_range_and_reproducible() {
        let c = synthetic_cube(32, 24, 16, 255.0, 3).unwrap();
        assert_eq!((c.width(), c.height(), c.channels()), (32, 24, 16));
        assert!(c.samples().iter().all(|&v| (0.0..=255.0).contains(&v)));
        assert_eq!(c, synthetic_cube(32, 24, 16, 255.0, 3).unwrap());
    }
}
