//! Landmark selection for the Nystrom approximation.
//!
//! Randomness comes from ChaCha8 seeded with `seed` through
//! `SeedableRng::seed_from_u64`, which is portable across platforms, so a
//! given `(points, m0, seed)` always yields the same landmarks.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, Matrix};

pub const DEFAULT_MAX_ITER: usize = 50;

/// How landmarks are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LandmarkStrategy {
    /// k-means++ seeding followed by Lloyd iterations.
    #[default]
    KMeans,
    /// Rows drawn uniformly without replacement.
    Uniform,
}

impl std::str::FromStr for LandmarkStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(LandmarkStrategy::KMeans),
            "uniform" => Ok(LandmarkStrategy::Uniform),
            other => Err(Error::invalid(format!("unknown landmark strategy `{other}`"))),
        }
    }
}

impl std::fmt::Display for LandmarkStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LandmarkStrategy::KMeans => "kmeans",
            LandmarkStrategy::Uniform => "uniform",
        })
    }
}

/// Landmarks with the nearest-landmark assignment of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    centroids: Matrix,
    assignment: Vec<usize>,
    quant_error: f64,
    /// Quantization error after each assignment step (k-means only).
    history: Vec<f64>,
    iterations: usize,
}

impl LandmarkSet {
    /// Landmarks given explicitly; assignment and error use the nearest rule.
    pub fn from_centroids(points: &Matrix, centroids: Matrix) -> Result<Self> {
        if centroids.rows() == 0 {
            return Err(Error::invalid("at least one landmark is required"));
        }
        if centroids.cols() != points.cols() {
            return Err(Error::DimensionMismatch(format!(
                "landmarks have dimension {}, points {}",
                centroids.cols(),
                points.cols()
            )));
        }
        let (assignment, dists) = assign(points, &centroids);
        let quant_error = dists.iter().sum();
        Ok(LandmarkSet {
            centroids,
            assignment,
            quant_error,
            history: Vec::new(),
            iterations: 0,
        })
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.centroids.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.rows() == 0
    }

    /// Zero-based cluster index of every point.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// `e = sum_i |r_i - mu_c(i)|^2`.
    pub fn quant_error(&self) -> f64 {
        self.quant_error
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

fn validate(points: &Matrix, m0: usize) -> Result<()> {
    if m0 == 0 {
        return Err(Error::invalid("m0 must be at least 1"));
    }
    if m0 > points.rows() {
        return Err(Error::invalid(format!(
            "m0 = {m0} exceeds the number of points m = {}",
            points.rows()
        )));
    }
    Ok(())
}

/// Selects landmarks by the given strategy.
pub fn select_landmarks(
    points: &Matrix,
    m0: usize,
    strategy: LandmarkStrategy,
    seed: u64,
    max_iter: usize,
) -> Result<LandmarkSet> {
    match strategy {
        LandmarkStrategy::KMeans => kmeans_landmarks(points, m0, seed, max_iter),
        LandmarkStrategy::Uniform => uniform_landmarks(points, m0, seed),
    }
}

/// k-means++ initialization followed by Lloyd iterations.
///
/// Stops when assignments no longer change or after `max_iter` updates.
/// A cluster that becomes empty is reseeded with the point farthest from its
/// current centroid. Ties in the nearest-centroid rule go to the smallest
/// index.
pub fn kmeans_landmarks(points: &Matrix, m0: usize, seed: u64, max_iter: usize) -> Result<LandmarkSet> {
    validate(points, m0)?;
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(points, m0, &mut rng);

    let (mut bounds, mut dists) = Bounds::exact(points, &centroids);
    let mut history = vec![dists.iter().sum()];
    let mut iterations = 0;
    while iterations < max_iter {
        let old = centroids.clone();
        update_centroids(points, &bounds.assignment, &mut dists, &mut centroids);
        let changed = bounds.reassign(points, &old, &centroids, &mut dists);
        iterations += 1;
        history.push(dists.iter().sum());
        if changed == 0 {
            break;
        }
    }
    let assignment = bounds.assignment;
    let quant_error = dists.iter().sum();
    Ok(LandmarkSet {
        centroids,
        assignment,
        quant_error,
        history,
        iterations,
    })
}

/// Draws `m0` distinct rows uniformly at random.
pub fn uniform_landmarks(points: &Matrix, m0: usize, seed: u64) -> Result<LandmarkSet> {
    validate(points, m0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, points.rows(), m0);
    let mut centroids = Matrix::zeros(m0, points.cols());
    for (j, i) in picks.iter().enumerate() {
        centroids.row_mut(j).copy_from_slice(points.row(i));
    }
    LandmarkSet::from_centroids(points, centroids)
}

fn kmeans_plus_plus(points: &Matrix, m0: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let m = points.rows();
    let mut centroids = Matrix::zeros(m0, points.cols());
    let first = rng.random_range(0..m);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut nearest: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| squared_distance(points.row(i), centroids.row(0)))
        .collect();

    for j in 1..m0 {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the final sum.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            // Every point already coincides with a landmark.
            rng.random_range(0..m)
        };
        centroids.row_mut(j).copy_from_slice(points.row(pick));
        let c = centroids.row(j).to_vec();
        nearest.par_iter_mut().enumerate().for_each(|(i, d)| {
            let dj = squared_distance(points.row(i), &c);
            if dj < *d {
                *d = dj;
            }
        });
    }
    centroids
}

/// Nearest centroid of every point and the squared distance to it.
fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    (0..points.rows())
        .into_par_iter()
        .map(|i| nearest_centroid(points.row(i), centroids))
        .unzip()
}

/// Assignment with Hamerly bounds: `upper` is the distance to the assigned
/// centroid and `lower` bounds the distance to every other one. A point is
/// rescanned only when the bounds cannot prove its assignment, and a proof
/// needs a strict gap, so the result equals a full nearest-centroid scan with
/// ties to the smallest index.
struct Bounds {
    assignment: Vec<usize>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

/// Relative slack that keeps rounding in the bounds from proving a false gap.
const BOUND_SLACK: f64 = 1e-9;

impl Bounds {
    /// Full scan; also returns the squared distance to the assigned centroid.
    fn exact(points: &Matrix, centroids: &Matrix) -> (Self, Vec<f64>) {
        let scans: Vec<(usize, f64, f64)> = (0..points.rows())
            .into_par_iter()
            .map(|i| two_nearest(points.row(i), centroids))
            .collect();
        let bounds = Bounds {
            assignment: scans.iter().map(|s| s.0).collect(),
            upper: scans.iter().map(|s| s.1.sqrt()).collect(),
            lower: scans.iter().map(|s| s.2.sqrt()).collect(),
        };
        (bounds, scans.iter().map(|s| s.1).collect())
    }

    /// Updates the assignment after the centroids moved from `old`, writes
    /// the exact squared distance of every point to its centroid into
    /// `dists`, and returns how many points changed cluster.
    fn reassign(&mut self, points: &Matrix, old: &Matrix, centroids: &Matrix, dists: &mut [f64]) -> usize {
        let k = centroids.rows();
        let moved: Vec<f64> = (0..k)
            .map(|j| squared_distance(old.row(j), centroids.row(j)).sqrt())
            .collect();
        // Largest and second-largest movement, for the lower-bound update.
        let mut top = (0, 0.0_f64);
        let mut second = 0.0_f64;
        for (j, &m) in moved.iter().enumerate() {
            if m > top.1 {
                second = top.1;
                top = (j, m);
            } else if m > second {
                second = m;
            }
        }
        // Half the distance from each centroid to its nearest neighbour.
        let half_gap: Vec<f64> = (0..k)
            .map(|j| {
                0.5 * (0..k)
                    .filter(|&l| l != j)
                    .map(|l| squared_distance(centroids.row(j), centroids.row(l)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();

        let Bounds {
            assignment,
            upper,
            lower,
        } = self;
        assignment
            .par_iter_mut()
            .zip(upper.par_iter_mut().zip(lower.par_iter_mut()))
            .zip(dists.par_iter_mut())
            .enumerate()
            .map(|(i, ((a, (u, l)), d))| {
                let p = points.row(i);
                *l -= if *a == top.0 { second } else { top.1 };
                *d = squared_distance(p, centroids.row(*a));
                *u = d.sqrt();
                if *u < l.max(half_gap[*a]) * (1.0 - BOUND_SLACK) {
                    return 0;
                }
                let (j, dj, s) = two_nearest(p, centroids);
                let changed = usize::from(j != *a);
                *a = j;
                *d = dj;
                *u = dj.sqrt();
                *l = s.sqrt();
                changed
            })
            .sum()
    }
}

/// Nearest centroid (ties to the smallest index), its squared distance and
/// the squared distance to the runner-up (infinite for a single centroid).
fn two_nearest(p: &[f64], centroids: &Matrix) -> (usize, f64, f64) {
    let mut best = (0, squared_distance(p, centroids.row(0)));
    let mut second = f64::INFINITY;
    for j in 1..centroids.rows() {
        let d = squared_distance(p, centroids.row(j));
        if d < best.1 {
            second = best.1;
            best = (j, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

#[inline]
fn nearest_centroid(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, squared_distance(p, centroids.row(0)));
    for j in 1..centroids.rows() {
        let d = squared_distance(p, centroids.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Moves every centroid to the mean of its points. Empty clusters take the
/// point currently farthest from its centroid; `dists` is updated so the same
/// point is not taken twice.
fn update_centroids(points: &Matrix, assignment: &[usize], dists: &mut [f64], centroids: &mut Matrix) {
    let (k, dim) = (centroids.rows(), centroids.cols());
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let inv = 1.0 / counts[j] as f64;
            for (dst, s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                *dst = s * inv;
            }
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            let mut far = 0;
            for (i, &d) in dists.iter().enumerate() {
                if d > dists[far] {
                    far = i;
                }
            }
            centroids.row_mut(j).copy_from_slice(points.row(far));
            dists[far] = 0.0;
        }
    }
}
