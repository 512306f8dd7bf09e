//! Kernel filtering: the brute-force definition and the fast low-rank path.
//!
//! For input `f`, guide `p`, spatial kernel `w` and range kernel `k`,
//!
//! ```text
//! g(x) = sum_y w(x-y) k(p(x), p(y)) f(y) / sum_y w(x-y) k(p(x), p(y))
//! ```
//!
//! The fast path replaces `k` on the range list by the Nystrom expansion
//! `sum_k alpha_k v_k v_k^T`, which turns numerator and denominator into
//! `(n + 1)` spatial convolutions per retained eigenpair.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{extract_range_list, Image, RangeList};
use crate::landmarks::{select_landmarks, LandmarkStrategy, DEFAULT_MAX_ITER};
use crate::nystrom::{fit_with_spectrum, landmark_spectrum, NystromModel, RangeKernel, DEFAULT_EPS_DROP};
use crate::spatial::SpatialKernel;
use crate::symeig::{jacobi_eig, SymMatrix};
use crate::matrix::Matrix;

/// How the guide is obtained from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Guide equals the input.
    Bilateral,
    /// Guide supplied separately; its channel count is independent of the input.
    Joint,
    /// Guide is the PCA projection of `(2r+1)^2` patches of every channel.
    Nlm { patch_radius: usize, pca_dim: usize },
}

/// Parameters for one filtering run.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub spatial: SpatialKernel,
    pub range: RangeKernel,
    pub m0: usize,
    pub seed: u64,
    pub strategy: LandmarkStrategy,
    pub max_iter: usize,
    pub eps_drop: f64,
    pub mode: FilterMode,
}

impl FilterParams {
    pub fn new(spatial: SpatialKernel, range: RangeKernel, m0: usize) -> Self {
        FilterParams {
            spatial,
            range,
            m0,
            seed: 0,
            strategy: LandmarkStrategy::KMeans,
            max_iter: DEFAULT_MAX_ITER,
            eps_drop: DEFAULT_EPS_DROP,
            mode: FilterMode::Bilateral,
        }
    }

    /// Bilateral filter with a Gaussian spatial kernel (`S = 3 sigma`),
    /// recursive convolutions.
    pub fn bilateral(sigma: f64, theta: f64, m0: usize) -> Result<Self> {
        Ok(FilterParams::new(
            SpatialKernel::gaussian_recursive(sigma)?,
            RangeKernel::gaussian(theta)?,
            m0,
        ))
    }

    /// Color bilateral defaults: `sigma = 5`, `theta = 50`, `m0 = 15`.
    pub fn bilateral_defaults() -> Self {
        FilterParams::bilateral(5.0, 50.0, 15).expect("valid defaults")
    }

    /// Hyperspectral bilateral defaults: `sigma = 3`, `theta = 100`, `m0 = 32`.
    pub fn hyperspectral_defaults() -> Self {
        FilterParams::bilateral(3.0, 100.0, 32).expect("valid defaults")
    }

    /// PCA-NLM defaults for additive Gaussian noise of standard deviation
    /// `noise`: box window `S = 10`, patch radius 3, 25 PCA components,
    /// `m0 = 31` and `theta = 3 * noise`.
    pub fn nlm_defaults(noise: f64) -> Result<Self> {
        let mut p = FilterParams::new(SpatialKernel::box_kernel(10), RangeKernel::gaussian(3.0 * noise)?, 31);
        p.mode = FilterMode::Nlm {
            patch_radius: 3,
            pca_dim: 25,
        };
        Ok(p)
    }

    pub fn with_spatial(mut self, spatial: SpatialKernel) -> Self {
        self.spatial = spatial;
        self
    }

    pub fn with_m0(mut self, m0: usize) -> Self {
        self.m0 = m0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strategy(mut self, strategy: LandmarkStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 {
            return Err(Error::invalid("m0 must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.eps_drop) {
            return Err(Error::invalid("eps_drop must lie in [0, 1)"));
        }
        if let FilterMode::Nlm { pca_dim, .. } = self.mode {
            if pca_dim == 0 {
                return Err(Error::invalid("pca_dim must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Wall-clock time per stage of the fast filter.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub clustering: Duration,
    pub eigendecomposition: Duration,
    pub extrapolation: Duration,
    pub convolutions: Duration,
    pub normalization: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.clustering + self.eigendecomposition + self.extrapolation + self.convolutions + self.normalization
    }
}

/// Output and diagnostics of [`fast_filter`].
#[derive(Debug, Clone)]
pub struct FilterReport {
    pub output: Image,
    pub timings: StageTimings,
    pub retained_rank: usize,
    pub quant_error: f64,
    /// Smallest `|eta_hat(x)|` over the image.
    pub min_denominator: f64,
    /// Pixels where the denominator guard replaced the full expansion.
    pub guarded_pixels: usize,
    pub convolutions: usize,
}

/// Direct evaluation of the kernel filter. Borders are replicated and the
/// window is the explicit FIR support of `params.spatial`.
pub fn brute_force_filter(f: &Image, p: &Image, params: &FilterParams) -> Result<Image> {
    f.require_same_grid(p, "input and guide")?;
    let (w, h) = (f.width(), f.height());
    let n = f.channels();
    let weights = params.spatial.axis_weights();
    let r = (weights.len() / 2) as isize;
    let guide = extract_range_list(p);
    let gv = guide.vectors();
    let input = pixel_major(f);
    let kernel = params.range;

    let mut out = vec![0.0; w * h * n];
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0.0; w * n];
            let mut num = vec![0.0; n];
            for x in 0..w {
                let center = gv.row(y * w + x);
                num.iter_mut().for_each(|v| *v = 0.0);
                let mut den = 0.0;
                for dy in -r..=r {
                    let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let wy = weights[(dy + r) as usize];
                    for dx in -r..=r {
                        let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                        let j = sy * w + sx;
                        let wt = wy * weights[(dx + r) as usize] * kernel.eval(center, gv.row(j));
                        den += wt;
                        for (acc, v) in num.iter_mut().zip(input.row(j)) {
                            *acc += wt * v;
                        }
                    }
                }
                for c in 0..n {
                    row[x * n + c] = num[c] / den;
                }
            }
            row
        })
        .collect();
    for (y, row) in rows.iter().enumerate() {
        for x in 0..w {
            for c in 0..n {
                out[c * w * h + y * w + x] = row[x * n + c];
            }
        }
    }
    Image::new(w, h, n, out, f.range_max())
}

fn pixel_major(img: &Image) -> Matrix {
    extract_range_list(img).vectors().clone()
}

/// Builds the guide for the requested mode.
pub fn build_guide(f: &Image, mode: FilterMode, external: Option<&Image>) -> Result<Image> {
    match mode {
        FilterMode::Bilateral => Ok(f.clone()),
        FilterMode::Joint => {
            let g = external.ok_or_else(|| Error::invalid("joint filtering needs a guide image"))?;
            f.require_same_grid(g, "input and guide")?;
            Ok(g.clone())
        }
        FilterMode::Nlm { patch_radius, pca_dim } => pca_patch_guide(f, patch_radius, pca_dim),
    }
}

/// Patch vector of pixel `(x, y)`: for every channel, the `(2r+1)^2`
/// neighbourhood in row-major order with replicate borders.
fn patch_vector(f: &Image, x: usize, y: usize, radius: usize, out: &mut [f64]) {
    let (w, h) = (f.width() as isize, f.height() as isize);
    let r = radius as isize;
    let mut k = 0;
    for c in 0..f.channels() {
        let plane = f.channel(c);
        for dy in -r..=r {
            let sy = (y as isize + dy).clamp(0, h - 1);
            for dx in -r..=r {
                let sx = (x as isize + dx).clamp(0, w - 1);
                out[k] = plane[(sy * w + sx) as usize];
                k += 1;
            }
        }
    }
}

/// Dimension of the raw patch vectors for `channels` and `radius`.
pub fn patch_dim(channels: usize, radius: usize) -> usize {
    channels * (2 * radius + 1) * (2 * radius + 1)
}

/// Projects every patch onto the top `pca_dim` principal directions of the
/// patch covariance. Guide channel `c` holds the coefficient on direction `c`.
pub fn pca_patch_guide(f: &Image, patch_radius: usize, pca_dim: usize) -> Result<Image> {
    let dim = patch_dim(f.channels(), patch_radius);
    if pca_dim == 0 || pca_dim > dim {
        return Err(Error::invalid(format!(
            "pca_dim must lie in 1..={dim} for patch radius {patch_radius}, got {pca_dim}"
        )));
    }
    let (w, h) = (f.width(), f.height());
    let m = w * h;

    // Mean, then centered covariance (upper triangle), reduced per row in a
    // fixed order.
    let row_means: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut acc = vec![0.0; dim];
            let mut buf = vec![0.0; dim];
            for x in 0..w {
                patch_vector(f, x, y, patch_radius, &mut buf);
                acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
            }
            acc
        })
        .collect();
    let mut mean = vec![0.0; dim];
    for r in &row_means {
        mean.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);

    let row_covs: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut acc = vec![0.0; dim * dim];
            let mut buf = vec![0.0; dim];
            for x in 0..w {
                patch_vector(f, x, y, patch_radius, &mut buf);
                buf.iter_mut().zip(&mean).for_each(|(b, mu)| *b -= mu);
                for i in 0..dim {
                    let bi = buf[i];
                    let row = &mut acc[i * dim..(i + 1) * dim];
                    for j in i..dim {
                        row[j] += bi * buf[j];
                    }
                }
            }
            acc
        })
        .collect();
    let mut cov = Matrix::zeros(dim, dim);
    for part in &row_covs {
        cov.as_mut_slice().iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    let inv_m = 1.0 / m as f64;
    let cov = SymMatrix::from_fn(dim, |i, j| cov.get(i, j) * inv_m);
    let eig = jacobi_eig(&cov)?;
    let basis: Vec<Vec<f64>> = (0..pca_dim).map(|k| eig.vector(k)).collect();

    let coeffs: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |buf, k| {
                patch_vector(f, k % w, k / w, patch_radius, buf);
                buf.iter_mut().zip(&mean).for_each(|(b, mu)| *b -= mu);
                basis
                    .iter()
                    .map(|e| e.iter().zip(buf.iter()).map(|(a, b)| a * b).sum())
                    .collect()
            },
        )
        .collect();
    let mut samples = vec![0.0; m * pca_dim];
    for (k, c) in coeffs.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            samples[i * m + k] = v;
        }
    }
    Image::new(w, h, pca_dim, samples, f.range_max())
}

/// Result of checking one denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuardOutcome {
    /// The full expansion is used.
    Full(f64),
    /// The leading eigenpair alone is used.
    Leading(f64),
    /// Neither denominator is usable; the input sample is passed through.
    Passthrough,
}

/// Threshold below which `|eta_hat(x)|` is treated as zero:
/// `1e-12 * (2S+1)^2 * max_k |alpha_k|`.
pub fn denominator_threshold(radius: usize, alphas: &[f64]) -> f64 {
    let side = (2 * radius + 1) as f64;
    let amax = alphas.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    1e-12 * side * side * amax
}

/// Chooses between the full denominator and the rank-one fallback.
pub fn denominator_guard(eta: f64, eta_leading: f64, threshold: f64) -> GuardOutcome {
    if eta.abs() >= threshold && eta != 0.0 {
        GuardOutcome::Full(eta)
    } else if eta_leading.abs() >= threshold && eta_leading != 0.0 {
        GuardOutcome::Leading(eta_leading)
    } else {
        GuardOutcome::Passthrough
    }
}

/// Low-rank filter output before it is wrapped in a report.
#[derive(Debug, Clone)]
pub struct AppliedModel {
    pub output: Image,
    pub min_denominator: f64,
    pub guarded_pixels: usize,
    pub convolutions: usize,
    pub convolution_time: Duration,
    pub normalization_time: Duration,
}

/// Runs the convolution stage for a fitted model:
///
/// ```text
/// d_k = v_k(iota(x)),  h_k = d_k f
/// zeta += alpha_k d_k (w * h_k),  eta += alpha_k d_k (w * d_k)
/// g_hat = zeta / eta
/// ```
///
/// Eigenpairs are accumulated in ascending `k`.
pub fn apply_model(f: &Image, range_list: &RangeList, model: &NystromModel, spatial: &SpatialKernel) -> Result<AppliedModel> {
    let (w, h) = (f.width(), f.height());
    let n = f.channels();
    let npix = w * h;
    if range_list.index_map().len() != npix {
        return Err(Error::DimensionMismatch(format!(
            "index map covers {} pixels, input has {npix}",
            range_list.index_map().len()
        )));
    }
    let conv_start = Instant::now();
    let mut zeta = vec![0.0; n * npix];
    let mut eta = vec![0.0; npix];
    let mut zeta_lead = Vec::new();
    let mut eta_lead = Vec::new();
    let mut convolutions = 0;

    for (k, &alpha) in model.alphas().iter().enumerate() {
        let v = model.extrapolated(k);
        let d: Vec<f64> = range_list.index_map().iter().map(|&i| v[i]).collect();
        // Plane 0 is d_k itself, planes 1..=n are h_k for each channel.
        let convolved: Vec<Vec<f64>> = (0..=n)
            .into_par_iter()
            .map(|plane| {
                if plane == 0 {
                    spatial.apply(&d, w, h)
                } else {
                    let hk: Vec<f64> = d.iter().zip(f.channel(plane - 1)).map(|(a, b)| a * b).collect();
                    spatial.apply(&hk, w, h)
                }
            })
            .collect();
        convolutions += n + 1;

        eta.par_iter_mut()
            .zip(d.par_iter().zip(&convolved[0]))
            .for_each(|(e, (dk, cd))| *e += alpha * dk * cd);
        zeta.par_chunks_mut(npix).enumerate().for_each(|(c, z)| {
            for ((zi, dk), ch) in z.iter_mut().zip(&d).zip(&convolved[c + 1]) {
                *zi += alpha * dk * ch;
            }
        });
        if k == 0 {
            zeta_lead = zeta.clone();
            eta_lead = eta.clone();
        }
    }
    let convolution_time = conv_start.elapsed();

    let norm_start = Instant::now();
    let threshold = denominator_threshold(spatial.radius(), model.alphas());
    let outcomes: Vec<GuardOutcome> = eta
        .par_iter()
        .zip(&eta_lead)
        .map(|(&e, &e1)| denominator_guard(e, e1, threshold))
        .collect();
    let mut out = vec![0.0; n * npix];
    out.par_chunks_mut(npix).enumerate().for_each(|(c, o)| {
        let z = &zeta[c * npix..(c + 1) * npix];
        let z1 = &zeta_lead[c * npix..(c + 1) * npix];
        let src = f.channel(c);
        for i in 0..npix {
            o[i] = match outcomes[i] {
                GuardOutcome::Full(e) => z[i] / e,
                GuardOutcome::Leading(e1) => z1[i] / e1,
                GuardOutcome::Passthrough => src[i],
            };
        }
    });
    let guarded_pixels = outcomes.iter().filter(|o| !matches!(o, GuardOutcome::Full(_))).count();
    let min_denominator = eta.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let normalization_time = norm_start.elapsed();

    Ok(AppliedModel {
        output: Image::new(w, h, n, out, f.range_max())?,
        min_denominator,
        guarded_pixels,
        convolutions,
        convolution_time,
        normalization_time,
    })
}

/// Landmarks, landmark spectrum and extrapolation for a guide, with the time
/// spent in each stage.
pub fn fit_guide(p: &Image, params: &FilterParams) -> Result<(RangeList, NystromModel, StageTimings)> {
    params.validate()?;
    let range_list = extract_range_list(p);
    if params.m0 > range_list.len() {
        return Err(Error::invalid(format!(
            "m0 = {} exceeds the number of guide vectors m = {}",
            params.m0,
            range_list.len()
        )));
    }
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let landmarks = select_landmarks(range_list.vectors(), params.m0, params.strategy, params.seed, params.max_iter)?;
    timings.clustering = t.elapsed();

    let t = Instant::now();
    let spectrum = landmark_spectrum(landmarks.centroids(), &params.range, params.eps_drop)?;
    timings.eigendecomposition = t.elapsed();

    let t = Instant::now();
    let model = fit_with_spectrum(&range_list, landmarks, spectrum, &params.range)?;
    timings.extrapolation = t.elapsed();

    Ok((range_list, model, timings))
}

/// Fast kernel filtering of `f` with guide `p`.
pub fn fast_filter(f: &Image, p: &Image, params: &FilterParams) -> Result<FilterReport> {
    f.require_same_grid(p, "input and guide")?;
    let (range_list, model, mut timings) = fit_guide(p, params)?;
    let applied = apply_model(f, &range_list, &model, &params.spatial)?;
    timings.convolutions = applied.convolution_time;
    timings.normalization = applied.normalization_time;
    Ok(FilterReport {
        output: applied.output,
        timings,
        retained_rank: model.retained_rank(),
        quant_error: model.landmarks().quant_error(),
        min_denominator: applied.min_denominator,
        guarded_pixels: applied.guarded_pixels,
        convolutions: applied.convolutions,
    })
}
