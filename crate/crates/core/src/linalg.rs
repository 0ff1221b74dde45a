//! Small dense/sparse helpers shared by the physics modules.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: DMatrix<C64>,
}

/// Diagonalises a Hermitian matrix. Only the lower triangle is read.
///
/// Uses faer: the nalgebra solver returns wrong eigenpairs on some highly
/// degenerate blocks, which are the norm here.
pub fn eigh(m: &DMatrix<C64>) -> HermitianEigen {
    assert!(m.is_square(), "eigh needs a square matrix");
    let n = m.nrows();
    let (values, vectors) = if m.iter().all(|z| z.im == 0.0) {
        let (v, u) = eigh_real(m.map(|z| z.re));
        (v, u.map(|x| C64::new(x, 0.0)))
    } else {
        let fm = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
            let z = m[(i, j)];
            faer::c64::new(z.re, z.im)
        });
        let eig = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("Hermitian eigensolver did not converge");
        let (s, u) = (eig.S(), eig.U());
        let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| {
            let z = u[(i, j)];
            C64::new(z.re, z.im)
        });
        (values, vectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    HermitianEigen {
        values: order.iter().map(|&j| values[j]).collect(),
        vectors: DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]),
    }
}

/// Real symmetric variant, eigenvalues in solver order (ascending).
pub fn eigh_real(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolver did not converge");
    let (s, u) = (eig.S(), eig.U());
    (
        (0..n).map(|i| s[i]).collect(),
        DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
    )
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Neumaier compensated accumulator. Summation order is the caller's, so
/// results are reproducible for a fixed input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compressed-sparse-row Hermitian operator.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) out of range");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                rows_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows_of.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero entries `(col, value)` of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or(ZERO)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    /// `<x|A|x>`, real for Hermitian `A`.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let mut y = vec![ZERO; self.dim];
        self.apply(x, &mut y);
        vdot(x, &y).re
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|z| z.im == 0.0)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Solves `(m) x = b` densely; used by test oracles and small checks.
pub fn solve_dense(m: &DMatrix<C64>, b: &DVector<C64>) -> Option<DVector<C64>> {
    m.clone().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                ZERO,
                C64::new(0.0, -1.0),
                C64::new(-1.0, 0.0),
                C64::new(0.5, 0.0),
                ZERO,
                C64::new(0.5, 0.0),
                C64::new(0.3, 0.0),
            ],
        );
        let e = eigh(&m);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        for (j, &lam) in e.values.iter().enumerate() {
            let v = e.vectors.column(j).into_owned();
            let r = &m * &v - v.map(|z| z * lam);
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn eigh_keeps_degenerate_vectors_orthonormal() {
        // U diag(1,1,1,-1,-1,-1) U^dagger with a complex unitary U.
        let n = 6;
        let a = DMatrix::from_fn(n, n, |i, j| C64::new((i * 7 + j * 3) as f64 % 5.0, (i as f64 - j as f64) * 0.3));
        let u = eigh(&(&a + a.adjoint())).vectors;
        let d = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(if i < 3 { 1.0 } else { -1.0 }, 0.0) } else { ZERO });
        let m = &u * d * u.adjoint();
        let e = eigh(&m);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - DMatrix::identity(n, n)).norm() < 1e-12);
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparse_sums_duplicates_and_drops_zeros() {
        let a = SparseOperator::from_triplets(
            2,
            vec![
                (0, 1, ONE),
                (0, 1, ONE),
                (1, 0, C64::new(2.0, 0.0)),
                (1, 1, ONE),
                (1, 1, -ONE),
            ],
        );
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), C64::new(2.0, 0.0));
        let mut y = vec![ZERO; 2];
        a.apply(&[ONE, C64::new(0.0, 1.0)], &mut y);
        assert_eq!(y, vec![C64::new(0.0, 2.0), C64::new(2.0, 0.0)]);
    }

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        let k: KahanSum = xs.iter().copied().collect();
        assert_eq!(k.value(), 2.0);
    }
}
