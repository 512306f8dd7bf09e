//! MSE, PSNR and single-scale SSIM.

use crate::error::Result;
use crate::image::Image;
use crate::spatial::gaussian_weights;

/// Value reported for identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// MSE, PSNR and SSIM of one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl QualityScore {
    pub fn compute(a: &Image, b: &Image) -> Result<Self> {
        Ok(QualityScore {
            mse: mse(a, b)?,
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
        })
    }

    /// `psnr_db,ssim,mse` with four decimals.
    pub fn csv(&self) -> String {
        format!("{:.4},{:.4},{:.4}", self.psnr, self.ssim, self.mse)
    }
}

fn check(a: &Image, b: &Image) -> Result<()> {
    a.require_same_shape(b, "compared images")
}

/// Mean squared difference over all samples.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    Ok(mean_sq(a.samples(), b.samples()))
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `10 log10(R^2 / mse)` with `R = a.range_max()`, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64, range_max: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (range_max * range_max / mse).log10()).min(PSNR_CAP_DB)
}

/// PSNR of each channel separately.
pub fn psnr_per_band(a: &Image, b: &Image) -> Result<Vec<f64>> {
    check(a, b)?;
    Ok((0..a.channels())
        .map(|c| psnr_from_mse(mean_sq(a.channel(c), b.channel(c)), a.range_max()))
        .collect())
}

/// PSNR over all samples for images with up to three channels; for
/// multiband cubes, the mean of the per-band PSNRs.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    if a.channels() > 3 {
        let bands = psnr_per_band(a, b)?;
        return Ok(bands.iter().sum::<f64>() / bands.len() as f64);
    }
    Ok(psnr_from_mse(mean_sq(a.samples(), b.samples()), a.range_max()))
}

/// Mean SSIM over channels. Each channel uses an 11x11 Gaussian window
/// (`sigma = 1.5`) over the positions where the window fits entirely.
/// A channel smaller than the window is scored from its global statistics.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check(a, b)?;
    let r = a.range_max();
    let total: f64 = (0..a.channels())
        .map(|c| ssim_plane(a.channel(c), b.channel(c), a.width(), a.height(), r))
        .sum();
    Ok(total / a.channels() as f64)
}

fn ssim_term(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, range: f64) -> f64 {
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        let n = a.len() as f64;
        let mx = a.iter().sum::<f64>() / n;
        let my = b.iter().sum::<f64>() / n;
        let vx = a.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n;
        let vy = b.iter().map(|v| (v - my).powi(2)).sum::<f64>() / n;
        let cxy = a.iter().zip(b).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / n;
        return ssim_term(mx, my, vx, vy, cxy, c1, c2);
    }

    let g = gaussian_weights(SSIM_SIGMA, SSIM_WINDOW / 2);
    let norm: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / norm).collect();

    // Separable valid-region filtering of the five moment planes.
    let valid = |plane: &[f64]| -> Vec<f64> {
        let ow = w - SSIM_WINDOW + 1;
        let oh = h - SSIM_WINDOW + 1;
        let mut rows = vec![0.0; ow * h];
        for y in 0..h {
            for x in 0..ow {
                rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * plane[y * w + x + k]).sum();
            }
        }
        let mut out = vec![0.0; ow * oh];
        for y in 0..oh {
            for x in 0..ow {
                out[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
            }
        }
        out
    };
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mx, my) = (valid(a), valid(b));
    let (sxx, syy, sxy) = (valid(&aa), valid(&bb), valid(&ab));

    let mut total = 0.0;
    for i in 0..mx.len() {
        let vx = sxx[i] - mx[i] * mx[i];
        let vy = syy[i] - my[i] * my[i];
        let cxy = sxy[i] - mx[i] * my[i];
        total += ssim_term(mx[i], my[i], vx, vy, cxy, c1, c2);
    }
    total / mx.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(w: usize, h: usize, n: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, n, 255.0, |_, _, _| rng.random_range(0.0..255.0)).unwrap()
    }

    fn offset(img: &Image, d: f64) -> Image {
        let s = img.samples().iter().map(|v| v + d).collect();
        Image::new(img.width(), img.height(), img.channels(), s, img.range_max()).unwrap()
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let a = random(16, 16, 3, 1);
        assert_eq!(psnr(&a, &a).unwrap(), 99.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn off_by_one_and_two() {
        let a = Image::from_fn(20, 20, 3, 255.0, |c, x, y| ((c * 31 + x * 7 + y * 3) % 250) as f64).unwrap();
        let p1 = psnr(&a, &offset(&a, 1.0)).unwrap();
        let p2 = psnr(&a, &offset(&a, 2.0)).unwrap();
        assert!((p1 - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((p1 - 48.1308).abs() < 5e-5);
        assert!((p2 - (p1 - 20.0 * 2f64.log10())).abs() < 1e-12);
        assert!((p2 - 42.1102).abs() < 5e-5);
    }

    #[test]
    fn constant_shift_lowers_ssim_only_slightly() {
        let a = random(32, 32, 1, 2);
        let s = ssim(&a, &offset(&a, 3.0)).unwrap();
        assert!(s < 1.0 && s > 0.0);
        assert!(s > 0.9);
    }

    #[test]
    fn symmetry() {
        let a = random(24, 20, 3, 3);
        let b = random(24, 20, 3, 4);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ssim_matches_direct_windows() {
        let a = random(64, 64, 1, 5);
        let b = random(64, 64, 1, 6);
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        // Two-dimensional window built directly from the Gaussian formula.
        let mut win = [[0.0f64; 11]; 11];
        let mut sum = 0.0;
        for (i, row) in win.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                sum += *v;
            }
        }
        let mut total = 0.0;
        let mut count = 0;
        for y in 0..=53 {
            for x in 0..=53 {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let k = (y + i) * 64 + x + j;
                        mx += win[i][j] / sum * a.samples()[k];
                        my += win[i][j] / sum * b.samples()[k];
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let k = (y + i) * 64 + x + j;
                        let (da, db) = (a.samples()[k] - mx, b.samples()[k] - my);
                        vx += win[i][j] / sum * da * da;
                        vy += win[i][j] / sum * db * db;
                        cxy += win[i][j] / sum * da * db;
                    }
                }
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        let expected = total / count as f64;
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn small_images_use_global_statistics() {
        let a = random(6, 5, 1, 7);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let b = random(6, 5, 1, 8);
        let s = ssim(&a, &b).unwrap();
        assert!(s < 1.0 && s >= -1.0);
    }

    #[test]
    fn multiband_psnr_averages_bands() {
        let a = random(8, 8, 5, 9);
        let b = Image::from_fn(8, 8, 5, 255.0, |c, x, y| a.sample(c, x, y) + (c + 1) as f64).unwrap();
        let expected: f64 = (1..=5).map(|d| 10.0 * (255.0f64 * 255.0 / (d * d) as f64).log10()).sum::<f64>() / 5.0;
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-10);
        let three = Image::from_fn(8, 8, 3, 255.0, |c, x, y| a.sample(c, x, y)).unwrap();
        let three_b = Image::from_fn(8, 8, 3, 255.0, |c, x, y| b.sample(c, x, y)).unwrap();
        let global = 10.0 * (255.0f64 * 255.0 / (14.0 / 3.0)).log10();
        assert!((psnr(&three, &three_b).unwrap() - global).abs() < 1e-10);
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = random(8, 8, 3, 10);
        let b = random(8, 8, 1, 11);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn csv_format() {
        let a = random(12, 12, 1, 12);
        assert_eq!(QualityScore::compute(&a, &a).unwrap().csv(), "99.0000,1.0000,0.0000");
    }
}
