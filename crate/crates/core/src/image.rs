//! Planar multi-channel raster and the range list derived from a guide.
//!
//! Samples are stored channel by channel: all of channel 0, then channel 1,
//! and so on, each channel row-major. The same type holds inputs, guides and
//! filter outputs.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Planar real-valued image with `channels` bands on a `width x height` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f64>,
    range_max: f64,
}

impl Image {
    /// Builds an image from planar samples.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        samples: Vec<f64>,
        range_max: f64,
    ) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        let expected = width * height * channels;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} image needs {expected} samples, got {}",
                samples.len()
            )));
        }
        if !(range_max.is_finite() && range_max > 0.0) {
            return Err(Error::invalid(format!("range_max must be positive, got {range_max}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image samples"));
        }
        Ok(Image {
            width,
            height,
            channels,
            samples,
            range_max,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize, range_max: f64) -> Self {
        Image::new(
            width,
            height,
            channels,
            vec![0.0; width * height * channels],
            range_max,
        )
        .expect("zero image with positive dimensions")
    }

    /// Builds an image from `f(channel, x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        range_max: f64,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    samples.push(f(c, x, y));
                }
            }
        }
        Image::new(width, height, channels, samples, range_max)
    }

    /// Stacks single-channel planes into one image.
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>, range_max: f64) -> Result<Self> {
        let channels = planes.len();
        let mut samples = Vec::with_capacity(width * height * channels);
        for p in planes {
            if p.len() != width * height {
                return Err(Error::DimensionMismatch(format!(
                    "plane has {} samples, expected {}",
                    p.len(),
                    width * height
                )));
            }
            samples.extend(p);
        }
        Image::new(width, height, channels, samples, range_max)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn with_range_max(mut self, range_max: f64) -> Result<Self> {
        if !(range_max.is_finite() && range_max > 0.0) {
            return Err(Error::invalid(format!("range_max must be positive, got {range_max}")));
        }
        self.range_max = range_max;
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize) -> usize {
        c * self.width * self.height + y * self.width + x
    }

    #[inline]
    pub fn sample(&self, c: usize, x: usize, y: usize) -> f64 {
        self.samples[self.index(c, x, y)]
    }

    pub fn set_sample(&mut self, c: usize, x: usize, y: usize, v: f64) {
        let i = self.index(c, x, y);
        self.samples[i] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.pixel_count();
        &mut self.samples[c * n..(c + 1) * n]
    }

    /// Guide vector of the pixel with linear index `k`.
    pub fn pixel_vector(&self, k: usize) -> Vec<f64> {
        let n = self.pixel_count();
        (0..self.channels).map(|c| self.samples[c * n + k]).collect()
    }

    pub fn same_grid(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn require_same_grid(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub(crate) fn require_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        self.require_same_grid(other, what)?;
        if self.channels != other.channels {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {} vs {} channels",
                self.channels, other.channels
            )));
        }
        Ok(())
    }

    /// Per-channel (min, max).
    pub fn channel_bounds(&self) -> Vec<(f64, f64)> {
        (0..self.channels)
            .map(|c| {
                self.channel(c)
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .collect()
    }
}

/// The list of guide vectors (one row per pixel) and the pixel-to-row map.
///
/// The list is not deduplicated, so `index_map` is the identity on linear
/// pixel indices. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeList {
    vectors: Matrix,
    index_map: Vec<usize>,
}

impl RangeList {
    pub fn from_points(vectors: Matrix) -> Self {
        let index_map = (0..vectors.rows()).collect();
        RangeList { vectors, index_map }
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Rebuilds a planar image on the given grid by reading row `index_map[x]`
    /// for every pixel `x`.
    pub fn scatter(&self, width: usize, height: usize, range_max: f64) -> Result<Image> {
        let n = width * height;
        if n != self.index_map.len() {
            return Err(Error::DimensionMismatch(format!(
                "index map covers {} pixels, grid has {n}",
                self.index_map.len()
            )));
        }
        let rho = self.dim();
        let mut samples = vec![0.0; n * rho];
        for (pixel, &row) in self.index_map.iter().enumerate() {
            for (c, &v) in self.vectors.row(row).iter().enumerate() {
                samples[c * n + pixel] = v;
            }
        }
        Image::new(width, height, rho, samples, range_max)
    }
}

/// Collects the guide vector of every pixel, ordered by linear pixel index.
pub fn extract_range_list(guide: &Image) -> RangeList {
    let n = guide.pixel_count();
    let rho = guide.channels();
    let mut data = vec![0.0; n * rho];
    for c in 0..rho {
        for (k, &v) in guide.channel(c).iter().enumerate() {
            data[k * rho + c] = v;
        }
    }
    RangeList::from_points(Matrix::from_vec(n, rho, data))
}
