//! Nystrom approximation of the range-kernel matrix.
//!
//! With landmarks `mu_1..mu_m0` the small kernel `A(i,j) = k(mu_i, mu_j)` is
//! eigendecomposed as `A = sum_k alpha_k w_k w_k^T`, and its eigenvectors are
//! extrapolated to the full range list through the cross kernel
//! `B(i,j) = k(mu_i, r_j)`:
//!
//! ```text
//! v_k = B^T w_k / alpha_k,      K ~ sum_k alpha_k v_k v_k^T
//! ```
//!
//! The full `m x m` kernel is never formed on the filtering path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::RangeList;
use crate::landmarks::LandmarkSet;
use crate::matrix::{squared_distance, Matrix};
use crate::symeig::{jacobi_eig, SymMatrix};

/// Default relative eigenvalue cutoff: pairs with `alpha_k <= eps * alpha_1`
/// are discarded before extrapolation.
pub const DEFAULT_EPS_DROP: f64 = 1e-8;

/// Largest range list for which [`kernel_error`] will run.
pub const KERNEL_ERROR_LIMIT: usize = 5000;

/// Gaussian range kernel `exp(-|s - t|^2 / (2 theta^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeKernel {
    theta: f64,
    inv_two_theta_sq: f64,
}

impl RangeKernel {
    pub fn gaussian(theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("theta must be positive, got {theta}")));
        }
        Ok(RangeKernel {
            theta,
            inv_two_theta_sq: 1.0 / (2.0 * theta * theta),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn eval(&self, s: &[f64], t: &[f64]) -> f64 {
        (-squared_distance(s, t) * self.inv_two_theta_sq).exp()
    }
}

/// Landmark kernel `A(i,j) = k(mu_i, mu_j)`.
pub fn build_a(landmarks: &Matrix, kernel: &RangeKernel) -> SymMatrix {
    SymMatrix::from_fn(landmarks.rows(), |i, j| {
        if i == j {
            1.0
        } else {
            kernel.eval(landmarks.row(i), landmarks.row(j))
        }
    })
}

/// Cross kernel `B(i,j) = k(mu_i, r_j)`, shape `m0 x m`.
pub fn build_b(landmarks: &Matrix, range_list: &RangeList, kernel: &RangeKernel) -> Result<Matrix> {
    check_dims(landmarks, range_list)?;
    let (m0, m) = (landmarks.rows(), range_list.len());
    let pts = range_list.vectors();
    // Column-major fill, parallel over columns, then transposed to m0 x m.
    let mut cols = Matrix::zeros(m, m0);
    cols.as_mut_slice()
        .par_chunks_mut(m0.max(1))
        .enumerate()
        .for_each(|(j, col)| {
            for (i, out) in col.iter_mut().enumerate() {
                *out = kernel.eval(landmarks.row(i), pts.row(j));
            }
        });
    Ok(cols.transpose())
}

fn check_dims(landmarks: &Matrix, range_list: &RangeList) -> Result<()> {
    if landmarks.cols() != range_list.dim() {
        return Err(Error::DimensionMismatch(format!(
            "landmarks have dimension {}, range list {}",
            landmarks.cols(),
            range_list.dim()
        )));
    }
    Ok(())
}

/// Retained eigenvalues of `A` and the extrapolated eigenvectors.
#[derive(Debug, Clone)]
pub struct NystromModel {
    landmarks: LandmarkSet,
    alphas: Vec<f64>,
    /// Retained eigenvectors of `A`, one row per eigenpair.
    landmark_vectors: Matrix,
    /// `v_k` stored as row `k`, length `m`.
    extrapolated: Matrix,
    landmark_rank: usize,
}

impl NystromModel {
    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    /// Retained `alpha_k`, descending.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn retained_rank(&self) -> usize {
        self.alphas.len()
    }

    /// Number of landmarks `m0`.
    pub fn landmark_count(&self) -> usize {
        self.landmark_rank
    }

    pub fn landmark_vectors(&self) -> &Matrix {
        &self.landmark_vectors
    }

    /// `v_k` over the range list.
    pub fn extrapolated(&self, k: usize) -> &[f64] {
        self.extrapolated.row(k)
    }

    pub fn extrapolated_matrix(&self) -> &Matrix {
        &self.extrapolated
    }

    /// `K_hat(i, j) = sum_k alpha_k v_k(i) v_k(j)`, bitwise symmetric in `(i, j)`.
    pub fn approx_entry(&self, i: usize, j: usize) -> f64 {
        self.alphas
            .iter()
            .enumerate()
            .map(|(k, a)| a * (self.extrapolated.get(k, i) * self.extrapolated.get(k, j)))
            .sum()
    }
}

/// Retained eigenpairs of the landmark kernel `A`.
#[derive(Debug, Clone)]
pub struct LandmarkSpectrum {
    /// Descending, all strictly positive.
    pub alphas: Vec<f64>,
    /// Eigenvector `w_k` as row `k`.
    pub vectors: Matrix,
}

/// Eigendecomposes `A` and keeps pairs with `alpha_k > eps_drop * alpha_1`.
pub fn landmark_spectrum(landmarks: &Matrix, kernel: &RangeKernel, eps_drop: f64) -> Result<LandmarkSpectrum> {
    if !(0.0..1.0).contains(&eps_drop) {
        return Err(Error::invalid(format!("eps_drop must lie in [0, 1), got {eps_drop}")));
    }
    let a = build_a(landmarks, kernel);
    let eig = jacobi_eig(&a)?;
    let lead = eig.values()[0];
    let keep: Vec<usize> = (0..eig.values().len())
        .filter(|&k| eig.values()[k] > eps_drop * lead && eig.values()[k] > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(Error::Degenerate("every eigenvalue of the landmark kernel was dropped".into()));
    }
    let m0 = landmarks.rows();
    let mut vectors = Matrix::zeros(keep.len(), m0);
    for (r, &k) in keep.iter().enumerate() {
        for i in 0..m0 {
            vectors.set(r, i, eig.vectors().get(i, k));
        }
    }
    Ok(LandmarkSpectrum {
        alphas: keep.iter().map(|&k| eig.values()[k]).collect(),
        vectors,
    })
}

/// Fits the Nystrom model on the given landmarks.
///
/// `B` is never stored: each column `b_j` is evaluated, projected onto the
/// retained `w_k` and discarded, which bounds memory at `O(m0)` per worker.
pub fn fit(range_list: &RangeList, landmarks: LandmarkSet, kernel: &RangeKernel, eps_drop: f64) -> Result<NystromModel> {
    check_dims(landmarks.centroids(), range_list)?;
    let spectrum = landmark_spectrum(landmarks.centroids(), kernel, eps_drop)?;
    fit_with_spectrum(range_list, landmarks, spectrum, kernel)
}

/// Extrapolates an already computed landmark spectrum to the range list.
pub fn fit_with_spectrum(
    range_list: &RangeList,
    landmarks: LandmarkSet,
    spectrum: LandmarkSpectrum,
    kernel: &RangeKernel,
) -> Result<NystromModel> {
    check_dims(landmarks.centroids(), range_list)?;
    if spectrum.vectors.cols() != landmarks.len() || spectrum.vectors.rows() != spectrum.alphas.len() {
        return Err(Error::DimensionMismatch("spectrum does not match the landmark set".into()));
    }
    let extrapolated = extrapolate(range_list, landmarks.centroids(), &spectrum, kernel);
    Ok(NystromModel {
        landmark_rank: landmarks.len(),
        landmarks,
        alphas: spectrum.alphas,
        landmark_vectors: spectrum.vectors,
        extrapolated,
    })
}

/// `v_k(j) = (1 / alpha_k) sum_i B(i,j) w_k(i)`, stored with `k` as the row.
fn extrapolate(range_list: &RangeList, landmarks: &Matrix, spectrum: &LandmarkSpectrum, kernel: &RangeKernel) -> Matrix {
    let (m0, m) = (landmarks.rows(), range_list.len());
    let r = spectrum.alphas.len();
    let pts = range_list.vectors();
    let mut by_point = Matrix::zeros(m, r);
    by_point
        .as_mut_slice()
        .par_chunks_mut(r)
        .enumerate()
        .for_each_init(
            || vec![0.0; m0],
            |b, (j, out)| {
                for (i, bi) in b.iter_mut().enumerate() {
                    *bi = kernel.eval(landmarks.row(i), pts.row(j));
                }
                for (k, o) in out.iter_mut().enumerate() {
                    let w = spectrum.vectors.row(k);
                    let dot: f64 = b.iter().zip(w).map(|(x, y)| x * y).sum();
                    *o = dot / spectrum.alphas[k];
                }
            },
        );
    by_point.transpose()
}

/// Frobenius norm `|K - K_hat|_F` computed by brute force over all pairs.
pub fn kernel_error(model: &NystromModel, range_list: &RangeList, kernel: &RangeKernel) -> Result<f64> {
    let m = range_list.len();
    if m > KERNEL_ERROR_LIMIT {
        return Err(Error::TooLarge {
            what: "kernel_error",
            m,
            limit: KERNEL_ERROR_LIMIT,
        });
    }
    if model.extrapolated.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "model was fit on {} points, range list has {m}",
            model.extrapolated.cols()
        )));
    }
    let pts = range_list.vectors();
    let by_point = model.extrapolated.transpose();
    let row_sums: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let vi = by_point.row(i);
            let mut acc = 0.0;
            for j in 0..m {
                let vj = by_point.row(j);
                let approx: f64 = model.alphas.iter().zip(vi.iter().zip(vj)).map(|(a, (x, y))| a * x * y).sum();
                let d = kernel.eval(pts.row(i), pts.row(j)) - approx;
                acc += d * d;
            }
            acc
        })
        .collect();
    Ok(row_sums.iter().sum::<f64>().sqrt())
}
