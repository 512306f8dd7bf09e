//! Fast high-dimensional kernel filtering with a Nystrom low-rank range kernel.
//!
//! The kernel filter averages each pixel with its spatial neighbours, weighted
//! by a spatial kernel on the displacement and a Gaussian range kernel on a
//! guide image. Bilateral, joint bilateral and PCA non-local means filtering
//! are all instances. [`fast_filter`] approximates the range kernel from a
//! small set of k-means landmarks, which reduces the filter to a handful of
//! fast spatial convolutions. [`brute_force_filter`] evaluates the definition
//! directly and serves as the reference.
//!
//! ```
//! use nystrom_filter::{fast_filter, FilterParams, Image};
//!
//! let img = Image::from_fn(32, 32, 3, 255.0, |c, x, y| ((x * 7 + y * 3 + c * 50) % 256) as f64).unwrap();
//! let params = FilterParams::bilateral(2.0, 50.0, 8).unwrap();
//! let report = fast_filter(&img, &img, &params).unwrap();
//! assert_eq!(report.output.width(), 32);
//! ```

pub mod error;
pub mod filter;
pub mod image;
pub mod io;
pub mod landmarks;
pub mod matrix;
pub mod metrics;
pub mod nystrom;
pub mod spatial;
pub mod symeig;
pub mod synth;

pub use error::{Error, Result};
pub use filter::{
    apply_model, brute_force_filter, build_guide, denominator_guard, denominator_threshold, fast_filter, fit_guide,
    pca_patch_guide, FilterMode, FilterParams, FilterReport, GuardOutcome, StageTimings,
};
pub use image::{extract_range_list, Image, RangeList};
pub use io::{load_image, save_cube, save_image, CubeSampleType};
pub use landmarks::{select_landmarks, LandmarkSet, LandmarkStrategy};
pub use matrix::Matrix;
pub use metrics::{mse, psnr, psnr_per_band, ssim, QualityScore};
pub use nystrom::{build_a, build_b, fit, kernel_error, NystromModel, RangeKernel};
pub use spatial::{RecursiveDesign, SpatialKernel};
pub use symeig::{jacobi_eig, EigenSystem, SymMatrix};
