//! Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// A square matrix that is symmetric bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` as `(M + M^T) / 2`. Panics if `m` is not square.
    pub fn new(m: Matrix) -> Self {
        assert_eq!(m.rows(), m.cols(), "SymMatrix needs a square matrix");
        let k = m.rows();
        let mut s = m;
        for i in 0..k {
            for j in i + 1..k {
                let v = 0.5 * (s.get(i, j) + s.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        SymMatrix(s)
    }

    /// Builds from a function of the upper triangle.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(order, order);
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        SymMatrix(m)
    }

    pub fn order(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.order()).map(|i| self.0.get(i, i)).sum()
    }
}

/// Eigenvalues in descending order with orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    vectors: Matrix,
    sweeps: usize,
}

impl EigenSystem {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.rows()).map(|i| self.vectors.get(i, k)).collect()
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// `sum_k values[k] w_k w_k^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = (0..n)
                    .map(|k| self.values[k] * self.vectors.get(i, k) * self.vectors.get(j, k))
                    .sum();
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Cyclic Jacobi rotations until the largest off-diagonal entry falls below
/// `1e-12 * max|A|` or 100 sweeps have run.
///
/// Each sweep visits every pair once in round-robin order: a round holds
/// disjoint pairs, whose rotations commute, and is applied to rows and then
/// to columns so all memory access stays within rows.
///
/// Eigenpairs come back sorted by descending eigenvalue (stable for ties).
/// Each eigenvector is signed so that its entry of largest magnitude is
/// non-negative; near-ties in magnitude resolve to the earliest index.
pub fn jacobi_eig(a: &SymMatrix) -> Result<EigenSystem> {
    let n = a.order();
    if n == 0 {
        return Err(Error::invalid("eigendecomposition of an empty matrix"));
    }
    if a.as_matrix().as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric matrix"));
    }

    let mut m = a.as_matrix().clone();
    // Row `k` of `vt` accumulates eigenvector `k`.
    let mut vt = Matrix::zeros(n, n);
    for i in 0..n {
        vt.set(i, i, 1.0);
    }
    let threshold = OFF_DIAGONAL_TOL * m.max_abs();
    let mut sweeps = 0;
    let mut schedule = RoundRobin::new(n);
    let mut rotations: Vec<Rotation> = Vec::with_capacity(n / 2);

    while sweeps < MAX_SWEEPS && max_off_diagonal(&m) > threshold {
        sweeps += 1;
        for pairs in schedule.sweep() {
            rotations.clear();
            for &(p, q) in &pairs {
                let apq = m.get(p, q);
                // Already below the stopping tolerance.
                if apq.abs() <= threshold {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                rotations.push(Rotation {
                    p,
                    q,
                    c,
                    s: t * c,
                    t,
                    apq,
                });
            }
            if !rotations.is_empty() {
                apply_round(&mut m, &mut vt, &rotations);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let col = vt.row(src);
        let sign = sign_of_dominant(col);
        for (i, &x) in col.iter().enumerate() {
            vectors.set(i, k, sign * x);
        }
    }
    Ok(EigenSystem {
        values,
        vectors,
        sweeps,
    })
}

/// Round-robin tournament over `0..n`: `n - 1` rounds (`n` for odd `n`) of
/// disjoint pairs that together cover every pair exactly once.
struct RoundRobin {
    n: usize,
    slots: Vec<usize>,
}

impl RoundRobin {
    fn new(n: usize) -> Self {
        let padded = n + n % 2;
        RoundRobin {
            n,
            slots: (0..padded).collect(),
        }
    }

    fn sweep(&mut self) -> Vec<Vec<(usize, usize)>> {
        let len = self.slots.len();
        let mut rounds = Vec::with_capacity(len.saturating_sub(1));
        for _ in 0..len.saturating_sub(1) {
            let pairs = (0..len / 2)
                .map(|i| (self.slots[i], self.slots[len - 1 - i]))
                .filter(|&(a, b)| a < self.n && b < self.n)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            rounds.push(pairs);
            self.slots[1..].rotate_right(1);
        }
        rounds
    }
}

struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    t: f64,
    apq: f64,
}

fn max_off_diagonal(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut best = 0.0_f64;
    for i in 0..n {
        for &v in &m.row(i)[i + 1..] {
            best = best.max(v.abs());
        }
    }
    best
}

/// Two distinct rows of a row-major buffer, `p < q`.
fn row_pair(data: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = data.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}

fn rotate_rows(data: &mut [f64], n: usize, r: &Rotation) {
    let (rp, rq) = row_pair(data, n, r.p, r.q);
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = r.c * x - r.s * y;
        *b = r.s * x + r.c * y;
    }
}

/// `M <- J^T M J` for the product `J` of disjoint rotations, then the
/// rotated pivots are set to their closed forms; `vt <- J^T vt`.
fn apply_round(m: &mut Matrix, vt: &mut Matrix, rotations: &[Rotation]) {
    let n = m.rows();
    let diag: Vec<(f64, f64)> = rotations.iter().map(|r| (m.get(r.p, r.p), m.get(r.q, r.q))).collect();
    let data = m.as_mut_slice();
    for r in rotations {
        rotate_rows(data, n, r);
    }
    for row in data.chunks_exact_mut(n) {
        for r in rotations {
            let (x, y) = (row[r.p], row[r.q]);
            row[r.p] = r.c * x - r.s * y;
            row[r.q] = r.s * x + r.c * y;
        }
    }
    for (r, &(app, aqq)) in rotations.iter().zip(&diag) {
        data[r.p * n + r.p] = app - r.t * r.apq;
        data[r.q * n + r.q] = aqq + r.t * r.apq;
        data[r.p * n + r.q] = 0.0;
        data[r.q * n + r.p] = 0.0;
    }
    let vdata = vt.as_mut_slice();
    for r in rotations {
        rotate_rows(vdata, n, r);
    }
}

fn sign_of_dominant(col: &[f64]) -> f64 {
    let max = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let dominant = col
        .iter()
        .find(|x| x.abs() >= max * (1.0 - 1e-12))
        .copied()
        .unwrap_or(0.0);
    if dominant < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_invariants(a: &SymMatrix, e: &EigenSystem) {
        let n = a.order();
        let v = e.vectors();
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|r| v.get(r, i) * v.get(r, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10, "orthonormality at ({i},{j})");
            }
        }
        let rec = e.reconstruct();
        let scale = a.as_matrix().max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                assert!((rec.get(i, j) - a.get(i, j)).abs() < 1e-10 * scale);
            }
        }
        assert!(e.values().windows(2).all(|w| w[0] >= w[1]));
        let tr = a.trace();
        let sum: f64 = e.values().iter().sum();
        assert!((tr - sum).abs() <= 1e-10 * tr.abs().max(1.0));
    }

    #[test]
    fn identity() {
        let a = SymMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.0 });
        let e = jacobi_eig(&a).unwrap();
        assert_eq!(e.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(e.vectors(), a.as_matrix());
        check_invariants(&a, &e);
    }

    #[test]
    fn classic_two_by_two() {
        let a = SymMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]));
        let e = jacobi_eig(&a).unwrap();
        assert!((e.values()[0] - 3.0).abs() < 1e-14);
        assert!((e.values()[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w0 = e.vector(0);
        let w1 = e.vector(1);
        assert!((w0[0] - h).abs() < 1e-14 && (w0[1] - h).abs() < 1e-14);
        assert!((w1[0] - h).abs() < 1e-14 && (w1[1] + h).abs() < 1e-14);
        check_invariants(&a, &e);
    }

    #[test]
    fn random_symmetric_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1, 2, 5, 8, 20] {
            let raw = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.random_range(-5.0..5.0)).collect());
            let a = SymMatrix::new(raw);
            let e = jacobi_eig(&a).unwrap();
            check_invariants(&a, &e);
        }
    }

    #[test]
    fn symmetrization_is_exact() {
        let a = SymMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [4.0, 1.0]]));
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
    }

    #[test]
    fn sign_rule_makes_dominant_entry_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = Matrix::from_vec(6, 6, (0..36).map(|_| rng.random_range(-1.0..1.0)).collect());
        let e = jacobi_eig(&SymMatrix::new(raw)).unwrap();
        for k in 0..6 {
            let w = e.vector(k);
            let dom = w.iter().cloned().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(dom > 0.0);
        }
    }

    #[test]
    fn gaussian_kernel_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..100.0)).collect();
        let a = SymMatrix::from_fn(30, |i, j| (-(pts[i] - pts[j]).powi(2) / (2.0 * 20.0 * 20.0)).exp());
        let e = jacobi_eig(&a).unwrap();
        assert!(e.values().iter().all(|&v| v >= -1e-10));
        check_invariants(&a, &e);
    }

    #[test]
    fn rejects_non_finite() {
        let a = SymMatrix::new(Matrix::from_rows(&[[1.0, f64::INFINITY], [0.0, 1.0]]));
        assert!(matches!(jacobi_eig(&a), Err(Error::NonFinite(_))));
    }
}
