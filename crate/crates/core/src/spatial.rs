//! Spatial convolution `w * h` on 2-D planes with replicate borders.
//!
//! All kernels are unnormalized: the box has unit weights and the Gaussians
//! have peak weight one. The ratio in the kernel filter cancels any global
//! scale, so only the shape matters. Every filter is separable. Box and FIR
//! run a row pass, a transpose, a second row pass and a transpose back; the
//! recursive Gaussians run their recursion down columns on the plane and on
//! its transpose. Either way the per-pixel arithmetic never depends on the
//! thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Recursive Gaussian design used by [`SpatialKernel::GaussianRecursive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecursiveDesign {
    /// Fourth-order causal + anticausal sum (Deriche).
    #[default]
    Deriche,
    /// Third-order cascaded forward/backward recursion (Young and van Vliet).
    YoungVanVliet,
}

/// Spatial weight `w` over pixel displacements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialKernel {
    /// Unit weights on the `(2S+1)^2` window.
    Box { radius: usize },
    /// Truncated Gaussian `exp(-|t|^2 / (2 sigma^2))`, `|t|_inf <= radius`.
    GaussianFir { sigma: f64, radius: usize },
    /// Recursive approximation of the Gaussian whose cost per pixel does not
    /// depend on `sigma`. Scaled to the mass of the `3 sigma` FIR.
    GaussianRecursive { sigma: f64, design: RecursiveDesign },
}

impl SpatialKernel {
    pub fn box_kernel(radius: usize) -> Self {
        SpatialKernel::Box { radius }
    }

    pub fn gaussian_fir(sigma: f64, radius: usize) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(SpatialKernel::GaussianFir { sigma, radius })
    }

    /// Truncated Gaussian with `S = ceil(3 sigma)`.
    pub fn gaussian_fir_3sigma(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(SpatialKernel::GaussianFir {
            sigma,
            radius: three_sigma_radius(sigma),
        })
    }

    pub fn gaussian_recursive(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(SpatialKernel::GaussianRecursive {
            sigma,
            design: RecursiveDesign::default(),
        })
    }

    /// Window radius `S`. For the recursive Gaussian this is the radius of the
    /// FIR it stands in for.
    pub fn radius(&self) -> usize {
        match *self {
            SpatialKernel::Box { radius } | SpatialKernel::GaussianFir { radius, .. } => radius,
            SpatialKernel::GaussianRecursive { sigma, .. } => three_sigma_radius(sigma),
        }
    }

    /// The explicit-window kernel used by the brute-force filter.
    pub fn fir_equivalent(&self) -> SpatialKernel {
        match *self {
            SpatialKernel::GaussianRecursive { sigma, .. } => SpatialKernel::GaussianFir {
                sigma,
                radius: three_sigma_radius(sigma),
            },
            k => k,
        }
    }

    /// One-dimensional weights on `-S..=S`; the 2-D weight is their outer
    /// product.
    pub fn axis_weights(&self) -> Vec<f64> {
        match self.fir_equivalent() {
            SpatialKernel::Box { radius } => vec![1.0; 2 * radius + 1],
            SpatialKernel::GaussianFir { sigma, radius } => gaussian_weights(sigma, radius),
            SpatialKernel::GaussianRecursive { .. } => unreachable!(),
        }
    }

    /// Convolves one plane.
    pub fn apply(&self, plane: &[f64], width: usize, height: usize) -> Vec<f64> {
        match *self {
            SpatialKernel::Box { radius } => box_filter(plane, width, height, radius),
            SpatialKernel::GaussianFir { sigma, radius } => gaussian_fir(plane, width, height, sigma, radius),
            SpatialKernel::GaussianRecursive { sigma, design } => {
                gaussian_recursive_with(plane, width, height, sigma, design)
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma must be positive, got {sigma}")))
    }
}

pub fn three_sigma_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

/// `exp(-t^2 / (2 sigma^2))` for `t = -radius..=radius`.
pub fn gaussian_weights(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Box sum over the `(2S+1)^2` window using sliding sums.
pub fn box_filter(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    separable(plane, width, height, |src, dst| box_line(src, dst, radius))
}

/// Separable truncated-Gaussian convolution with unnormalized weights.
pub fn gaussian_fir(plane: &[f64], width: usize, height: usize, sigma: f64, radius: usize) -> Vec<f64> {
    let weights = gaussian_weights(sigma, radius);
    separable(plane, width, height, |src, dst| fir_line(src, dst, &weights))
}

/// Recursive Gaussian (default design). Falls back to the FIR for `sigma < 1`.
pub fn gaussian_recursive(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    gaussian_recursive_with(plane, width, height, sigma, RecursiveDesign::default())
}

pub fn gaussian_recursive_with(
    plane: &[f64],
    width: usize,
    height: usize,
    sigma: f64,
    design: RecursiveDesign,
) -> Vec<f64> {
    let radius = three_sigma_radius(sigma);
    if sigma < 1.0 {
        return gaussian_fir(plane, width, height, sigma, radius);
    }
    let mass: f64 = gaussian_weights(sigma, radius).iter().sum();
    match design {
        RecursiveDesign::Deriche => {
            let coeffs = DericheCoefficients::new(sigma);
            recursive_2d(plane, width, height, |src, w, h| coeffs.filter_columns(src, w, h, mass))
        }
        RecursiveDesign::YoungVanVliet => {
            let coeffs = YoungVanVlietCoefficients::new(sigma);
            recursive_2d(plane, width, height, |src, w, h| coeffs.filter_columns(src, w, h, mass))
        }
    }
}

fn separable<F>(plane: &[f64], width: usize, height: usize, line: F) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    assert_eq!(plane.len(), width * height, "plane size");
    let mut rows = vec![0.0; plane.len()];
    rows.par_chunks_mut(width)
        .zip(plane.par_chunks(width))
        .for_each(|(dst, src)| line(src, dst));
    let t = transpose(&rows, width, height);
    let mut cols = vec![0.0; plane.len()];
    cols.par_chunks_mut(height)
        .zip(t.par_chunks(height))
        .for_each(|(dst, src)| line(src, dst));
    transpose(&cols, height, width)
}

/// Recursive filters run down the columns with whole rows as vectors, so the
/// recursion carries no dependency across `x`. The horizontal pass is the
/// vertical pass on the transpose.
fn recursive_2d<F>(plane: &[f64], width: usize, height: usize, columns: F) -> Vec<f64>
where
    F: Fn(&[f64], usize, usize) -> Vec<f64> + Sync,
{
    assert_eq!(plane.len(), width * height, "plane size");
    let t = transpose(plane, width, height);
    let rows = in_strips(&t, height, width, &columns);
    let back = transpose(&rows, height, width);
    in_strips(&back, width, height, &columns)
}

/// Applies a column filter to independent vertical strips in parallel.
fn in_strips<F>(plane: &[f64], width: usize, height: usize, columns: &F) -> Vec<f64>
where
    F: Fn(&[f64], usize, usize) -> Vec<f64> + Sync,
{
    const STRIP: usize = 64;
    if width <= STRIP {
        return columns(plane, width, height);
    }
    let starts: Vec<usize> = (0..width).step_by(STRIP).collect();
    let parts: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&x0| {
            let sw = STRIP.min(width - x0);
            let mut strip = Vec::with_capacity(sw * height);
            for y in 0..height {
                strip.extend_from_slice(&plane[y * width + x0..y * width + x0 + sw]);
            }
            columns(&strip, sw, height)
        })
        .collect();
    let mut out = vec![0.0; plane.len()];
    for (&x0, part) in starts.iter().zip(&parts) {
        let sw = STRIP.min(width - x0);
        for y in 0..height {
            out[y * width + x0..y * width + x0 + sw].copy_from_slice(&part[y * sw..(y + 1) * sw]);
        }
    }
    out
}

/// Row `y` of a row-major plane, clamped to the valid range.
#[inline]
fn clamped_row(plane: &[f64], width: usize, height: usize, y: isize) -> &[f64] {
    let y = y.clamp(0, height as isize - 1) as usize;
    &plane[y * width..(y + 1) * width]
}

fn transpose(data: &[f64], width: usize, height: usize) -> Vec<f64> {
    const BLOCK: usize = 16;
    let mut out = vec![0.0; data.len()];
    for by in (0..height).step_by(BLOCK) {
        for bx in (0..width).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(height) {
                for x in bx..(bx + BLOCK).min(width) {
                    out[x * height + y] = data[y * width + x];
                }
            }
        }
    }
    out
}

#[inline]
fn clamped(src: &[f64], i: isize) -> f64 {
    src[i.clamp(0, src.len() as isize - 1) as usize]
}

fn box_line(src: &[f64], dst: &mut [f64], radius: usize) {
    let r = radius as isize;
    let mut sum: f64 = (-r..=r).map(|t| clamped(src, t)).sum();
    dst[0] = sum;
    for x in 1..src.len() as isize {
        sum += clamped(src, x + r) - clamped(src, x - 1 - r);
        dst[x as usize] = sum;
    }
}

fn fir_line(src: &[f64], dst: &mut [f64], weights: &[f64]) {
    let r = weights.len() / 2;
    let n = src.len();
    let mut padded = Vec::with_capacity(n + 2 * r);
    padded.extend(std::iter::repeat(src[0]).take(r));
    padded.extend_from_slice(src);
    padded.extend(std::iter::repeat(src[n - 1]).take(r));
    for (x, out) in dst.iter_mut().enumerate() {
        let window = &padded[x..x + weights.len()];
        *out = window.iter().zip(weights).map(|(v, w)| v * w).sum();
    }
}

/// Fourth-order recursive Gaussian after Deriche: the response is the sum of a
/// causal and an anticausal recursion sharing the same denominator.
#[derive(Debug, Clone)]
struct DericheCoefficients {
    causal: [f64; 4],
    anticausal: [f64; 4],
    denom: [f64; 4],
    /// Response to a unit constant, used to normalize the DC gain to one.
    dc_gain: f64,
}

impl DericheCoefficients {
    const A0: f64 = 1.680;
    const A1: f64 = 3.735;
    const B0: f64 = 1.783;
    const B1: f64 = 1.723;
    const W0: f64 = 0.6318;
    const W1: f64 = 1.997;
    const C0: f64 = -0.6803;
    const C1: f64 = -0.2598;

    fn new(sigma: f64) -> Self {
        let (a0, a1, c0, c1) = (Self::A0, Self::A1, Self::C0, Self::C1);
        let e0 = (-Self::B0 / sigma).exp();
        let e1 = (-Self::B1 / sigma).exp();
        let (sw0, cw0) = (Self::W0 / sigma).sin_cos();
        let (sw1, cw1) = (Self::W1 / sigma).sin_cos();

        let n0 = a0 + c0;
        let n1 = e1 * (c1 * sw1 - (c0 + 2.0 * a0) * cw1) + e0 * (a1 * sw0 - (2.0 * c0 + a0) * cw0);
        let n2 = 2.0 * e0 * e1 * ((a0 + c0) * cw1 * cw0 - a1 * cw1 * sw0 - c1 * cw0 * sw1)
            + c0 * e0 * e0
            + a0 * e1 * e1;
        let n3 = e1 * e0 * e0 * (c1 * sw1 - c0 * cw1) + e0 * e1 * e1 * (a1 * sw0 - a0 * cw0);

        let d1 = -2.0 * e1 * cw1 - 2.0 * e0 * cw0;
        let d2 = 4.0 * cw1 * cw0 * e0 * e1 + e1 * e1 + e0 * e0;
        let d3 = -2.0 * cw0 * e0 * e1 * e1 - 2.0 * cw1 * e1 * e0 * e0;
        let d4 = e0 * e0 * e1 * e1;

        let causal = [n0, n1, n2, n3];
        let denom = [d1, d2, d3, d4];
        let anticausal = [n1 - d1 * n0, n2 - d2 * n0, n3 - d3 * n0, -d4 * n0];
        let one_plus_d = 1.0 + denom.iter().sum::<f64>();
        let dc_gain = (causal.iter().sum::<f64>() + anticausal.iter().sum::<f64>()) / one_plus_d;
        DericheCoefficients {
            causal,
            anticausal,
            denom,
            dc_gain,
        }
    }

    /// Filters every column of a `width x height` plane.
    fn filter_columns(&self, src: &[f64], width: usize, height: usize, mass: f64) -> Vec<f64> {
        let one_plus_d = 1.0 + self.denom.iter().sum::<f64>();
        let [n0, n1, n2, n3] = self.causal;
        let [m1, m2, m3, m4] = self.anticausal;
        let [d1, d2, d3, d4] = self.denom;
        let row = |y: isize| clamped_row(src, width, height, y);

        // Causal part; rows above the top hold the steady state of the
        // replicated first row.
        let gain_c = self.causal.iter().sum::<f64>() / one_plus_d;
        let top: Vec<f64> = row(0).iter().map(|v| v * gain_c).collect();
        let mut causal = vec![0.0; src.len()];
        for y in 0..height {
            let (prev, rest) = causal.split_at_mut(y * width);
            let back = |k: usize| if y >= k { &prev[(y - k) * width..(y - k + 1) * width] } else { &top[..] };
            let (y1, y2, y3, y4) = (&back(1)[..width], &back(2)[..width], &back(3)[..width], &back(4)[..width]);
            let yi = y as isize;
            let (x0, x1, x2, x3) = (row(yi), row(yi - 1), row(yi - 2), row(yi - 3));
            let (x0, x1, x2, x3) = (&x0[..width], &x1[..width], &x2[..width], &x3[..width]);
            let out = &mut rest[..width];
            for i in 0..width {
                out[i] = n0 * x0[i] + n1 * x1[i] + n2 * x2[i] + n3 * x3[i]
                    - d1 * y1[i]
                    - d2 * y2[i]
                    - d3 * y3[i]
                    - d4 * y4[i];
            }
        }

        // Anticausal part, steady state of the replicated last row below.
        let gain_a = self.anticausal.iter().sum::<f64>() / one_plus_d;
        let bottom: Vec<f64> = row(height as isize - 1).iter().map(|v| v * gain_a).collect();
        let mut anti = vec![0.0; src.len()];
        for y in (0..height).rev() {
            let (head, next) = anti.split_at_mut((y + 1) * width);
            let ahead = |k: usize| {
                if y + k < height {
                    &next[(k - 1) * width..k * width]
                } else {
                    &bottom[..]
                }
            };
            let (y1, y2, y3, y4) = (&ahead(1)[..width], &ahead(2)[..width], &ahead(3)[..width], &ahead(4)[..width]);
            let yi = y as isize;
            let (x1, x2, x3, x4) = (row(yi + 1), row(yi + 2), row(yi + 3), row(yi + 4));
            let (x1, x2, x3, x4) = (&x1[..width], &x2[..width], &x3[..width], &x4[..width]);
            let out = &mut head[y * width..(y + 1) * width];
            for i in 0..width {
                out[i] = m1 * x1[i] + m2 * x2[i] + m3 * x3[i] + m4 * x4[i]
                    - d1 * y1[i]
                    - d2 * y2[i]
                    - d3 * y3[i]
                    - d4 * y4[i];
            }
        }

        let scale = mass / self.dc_gain;
        for (c, a) in causal.iter_mut().zip(&anti) {
            *c = (*c + a) * scale;
        }
        causal
    }
}

/// Third-order Young and van Vliet recursion: forward pass then backward pass
/// over the forward output.
#[derive(Debug, Clone)]
struct YoungVanVlietCoefficients {
    gain: f64,
    feedback: [f64; 3],
}

impl YoungVanVlietCoefficients {
    fn new(sigma: f64) -> Self {
        let q = if sigma >= 2.5 {
            0.98711 * sigma - 0.96330
        } else {
            3.97156 - 4.14554 * (1.0 - 0.26891 * sigma).sqrt()
        };
        let q2 = q * q;
        let q3 = q2 * q;
        let b0 = 1.57825 + 2.44413 * q + 1.4281 * q2 + 0.422205 * q3;
        let b1 = 2.44413 * q + 2.85619 * q2 + 1.26661 * q3;
        let b2 = -(1.4281 * q2 + 1.26661 * q3);
        let b3 = 0.422205 * q3;
        let feedback = [b1 / b0, b2 / b0, b3 / b0];
        YoungVanVlietCoefficients {
            gain: 1.0 - feedback.iter().sum::<f64>(),
            feedback,
        }
    }

    /// Filters every column of a `width x height` plane.
    fn filter_columns(&self, src: &[f64], width: usize, height: usize, mass: f64) -> Vec<f64> {
        let [f1, f2, f3] = self.feedback;
        let b = self.gain;
        // DC gain of each pass is exactly one, so replicate borders start at
        // the boundary row.
        let top = &src[..width];
        let mut fwd = vec![0.0; src.len()];
        for y in 0..height {
            let (prev, rest) = fwd.split_at_mut(y * width);
            let back = |k: usize| if y >= k { &prev[(y - k) * width..(y - k + 1) * width] } else { top };
            let (w1, w2, w3) = (&back(1)[..width], &back(2)[..width], &back(3)[..width]);
            let x = &src[y * width..(y + 1) * width];
            let out = &mut rest[..width];
            for i in 0..width {
                out[i] = b * x[i] + f1 * w1[i] + f2 * w2[i] + f3 * w3[i];
            }
        }
        let bottom = fwd[(height - 1) * width..].to_vec();
        let mut bwd = vec![0.0; src.len()];
        for y in (0..height).rev() {
            let (head, next) = bwd.split_at_mut((y + 1) * width);
            let ahead = |k: usize| {
                if y + k < height {
                    &next[(k - 1) * width..k * width]
                } else {
                    &bottom[..]
                }
            };
            let (y1, y2, y3) = (&ahead(1)[..width], &ahead(2)[..width], &ahead(3)[..width]);
            let x = &fwd[y * width..(y + 1) * width];
            let out = &mut head[y * width..(y + 1) * width];
            for i in 0..width {
                out[i] = b * x[i] + f1 * y1[i] + f2 * y2[i] + f3 * y3[i];
            }
        }
        bwd.iter_mut().for_each(|v| *v *= mass);
        bwd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(w: usize, h: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..w * h).map(|_| rng.random_range(0.0..255.0)).collect()
    }

    fn impulse(w: usize, h: usize) -> Vec<f64> {
        let mut p = vec![0.0; w * h];
        p[(h / 2) * w + w / 2] = 1.0;
        p
    }

    /// Direct 2-D weighted sum with replicate borders.
    fn direct_2d(plane: &[f64], w: usize, h: usize, weight: impl Fn(isize, isize) -> f64, r: usize) -> Vec<f64> {
        let r = r as isize;
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                        let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                        acc += weight(dx, dy) * plane[sy * w + sx];
                    }
                }
                out[y as usize * w + x as usize] = acc;
            }
        }
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn box_of_constant() {
        for s in [0, 1, 3, 7] {
            let out = box_filter(&vec![2.5; 30], 6, 5, s);
            let expected = 2.5 * ((2 * s + 1) * (2 * s + 1)) as f64;
            assert!(out.iter().all(|&v| v == expected), "S={s}");
        }
    }

    #[test]
    fn box_of_centered_impulse() {
        let out = box_filter(&impulse(7, 7), 7, 7, 1);
        for y in 0..7 {
            for x in 0..7 {
                let inside = (2..=4).contains(&x) && (2..=4).contains(&y);
                assert_eq!(out[y * 7 + x], if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn box_matches_naive_summation() {
        // Integer-valued samples make every partial sum exact, so the sliding
        // sum and the naive double loop agree bit for bit.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plane: Vec<f64> = (0..81).map(|_| rng.random_range(0..256) as f64).collect();
        let naive = direct_2d(&plane, 9, 9, |_, _| 1.0, 2);
        assert_eq!(box_filter(&plane, 9, 9, 2), naive);

        // Real-valued samples differ only by rounding.
        let plane = random_plane(9, 9, 12);
        let naive = direct_2d(&plane, 9, 9, |_, _| 1.0, 2);
        assert!(max_abs_diff(&box_filter(&plane, 9, 9, 2), &naive) < 1e-10);
    }

    #[test]
    fn fir_of_constant() {
        let w: f64 = gaussian_weights(1.5, 4).iter().sum();
        let out = gaussian_fir(&vec![3.0; 64], 8, 8, 1.5, 4);
        for v in out {
            assert!((v - 3.0 * w * w).abs() < 1e-12);
        }
    }

    #[test]
    fn fir_impulse_weight_ratio() {
        let out = gaussian_fir(&impulse(9, 9), 9, 9, 1.0, 3);
        let center = out[4 * 9 + 4];
        assert!((center - 1.0).abs() < 1e-15);
        assert!((out[4 * 9 + 5] / center - (-0.5f64).exp()).abs() < 1e-15);
        assert!((out[4 * 9 + 5] - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn fir_matches_direct_2d() {
        let plane = random_plane(11, 11, 3);
        let (sigma, r) = (1.7, 4);
        let wts = gaussian_weights(sigma, r);
        let direct = direct_2d(&plane, 11, 11, |dx, dy| wts[(dx + r as isize) as usize] * wts[(dy + r as isize) as usize], r);
        let scale = direct.iter().cloned().fold(0.0, f64::max);
        assert!(max_abs_diff(&gaussian_fir(&plane, 11, 11, sigma, r), &direct) < 1e-12 * scale);
    }

    #[test]
    fn recursive_preserves_constants() {
        for design in [RecursiveDesign::Deriche, RecursiveDesign::YoungVanVliet] {
            let sigma = 4.0;
            let w: f64 = gaussian_weights(sigma, 12).iter().sum();
            let out = gaussian_recursive_with(&vec![7.0; 40 * 30], 40, 30, sigma, design);
            for v in out {
                assert!((v / (7.0 * w * w) - 1.0).abs() < 1e-6, "{design:?}: {v}");
            }
        }
    }

    #[test]
    fn recursive_impulse_matches_fir() {
        let (w, h) = (64, 64);
        let rec = gaussian_recursive(&impulse(w, h), w, h, 4.0);
        let fir = gaussian_fir(&impulse(w, h), w, h, 4.0, 12);
        let peak = fir.iter().cloned().fold(0.0, f64::max);
        assert!(max_abs_diff(&rec, &fir) < 1e-2 * peak);
    }

    #[test]
    fn young_van_vliet_impulse_is_close_to_fir() {
        // The third-order design has heavier exponential tails than the
        // truncated Gaussian; it stays within a few percent of the peak.
        let (w, h) = (64, 64);
        let rec = gaussian_recursive_with(&impulse(w, h), w, h, 4.0, RecursiveDesign::YoungVanVliet);
        let fir = gaussian_fir(&impulse(w, h), w, h, 4.0, 12);
        assert!(max_abs_diff(&rec, &fir) < 8e-2);
    }

    #[test]
    fn recursive_small_sigma_uses_fir() {
        let plane = random_plane(10, 10, 5);
        assert_eq!(gaussian_recursive(&plane, 10, 10, 0.7), gaussian_fir(&plane, 10, 10, 0.7, 3));
    }

    #[test]
    fn impulse_responses_are_symmetric() {
        // Far enough from the borders that the boundary start-up of the
        // recursive passes has decayed.
        let (w, h) = (81, 81);
        let kernels = [
            (SpatialKernel::box_kernel(3), 1e-10),
            (SpatialKernel::gaussian_fir(2.0, 6).unwrap(), 1e-10),
            (SpatialKernel::gaussian_recursive(3.0).unwrap(), 1e-6),
            (
                SpatialKernel::GaussianRecursive {
                    sigma: 3.0,
                    design: RecursiveDesign::YoungVanVliet,
                },
                1e-6,
            ),
        ];
        for (k, tol) in kernels {
            let out = k.apply(&impulse(w, h), w, h);
            let tol = tol * out.iter().cloned().fold(0.0, f64::max);
            for y in 0..h {
                for x in 0..w {
                    let v = out[y * w + x];
                    assert!((v - out[y * w + (w - 1 - x)]).abs() < tol, "{k:?}");
                    assert!((v - out[(h - 1 - y) * w + x]).abs() < tol, "{k:?}");
                }
            }
        }
    }

    #[test]
    fn interior_shift_covariance() {
        let (w, h) = (48, 48);
        let k = SpatialKernel::gaussian_recursive(2.0).unwrap();
        let mut a = vec![0.0; w * h];
        a[20 * w + 20] = 1.0;
        let mut b = vec![0.0; w * h];
        b[23 * w + 25] = 1.0;
        let ra = k.apply(&a, w, h);
        let rb = k.apply(&b, w, h);
        for dy in -6isize..=6 {
            for dx in -6isize..=6 {
                let ia = ((20 + dy) as usize) * w + (20 + dx) as usize;
                let ib = ((23 + dy) as usize) * w + (25 + dx) as usize;
                assert!((ra[ia] - rb[ib]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kernels_are_linear() {
        let (w, h) = (17, 13);
        let u = random_plane(w, h, 1);
        let v = random_plane(w, h, 2);
        let (a, b) = (0.75, -2.5);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        for k in [
            SpatialKernel::box_kernel(4),
            SpatialKernel::gaussian_fir(2.0, 6).unwrap(),
            SpatialKernel::gaussian_recursive(2.5).unwrap(),
        ] {
            let fu = k.apply(&u, w, h);
            let fv = k.apply(&v, w, h);
            let fm = k.apply(&mix, w, h);
            for i in 0..w * h {
                let expected = a * fu[i] + b * fv[i];
                assert!((fm[i] - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{k:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(SpatialKernel::gaussian_fir(0.0, 3).is_err());
        assert!(SpatialKernel::gaussian_recursive(f64::NAN).is_err());
    }

    #[test]
    fn radius_and_fir_equivalent() {
        let k = SpatialKernel::gaussian_recursive(5.0).unwrap();
        assert_eq!(k.radius(), 15);
        assert_eq!(k.fir_equivalent(), SpatialKernel::GaussianFir { sigma: 5.0, radius: 15 });
        assert_eq!(SpatialKernel::box_kernel(10).axis_weights(), vec![1.0; 21]);
    }
}
