//! Dense vector/matrix primitives, the seeded generator, and the power
//! iteration used to estimate the smoothness constant of a design matrix.
//!
//! Everything here is plain `f64` over contiguous storage. Dimensions in this
//! crate are moderate (hundreds of columns, thousands of rows), so there is no
//! BLAS dependency.

use std::ops::{Deref, DerefMut};

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A dense column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_elem(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    /// Wraps `entries`, rejecting NaN and infinities.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {pos}")));
        }
        Ok(Vector(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(entries: Vec<f64>) -> Self {
        Vector(entries)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_row_major(n, d, data)
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut m = Matrix::zeros(dim, dim);
        for (i, v) in entries.iter().enumerate() {
            m.data[i * dim + i] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// `out = X v`
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.row_iter()) {
            *o = dot(row, v);
        }
    }

    /// `out = Xᵀ u`
    pub fn tr_mul_vec_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ui, row) in u.iter().zip(self.row_iter()) {
            axpy(*ui, row, out);
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `XᵀX`, materialized. Only sensible for small column counts.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for row in self.row_iter() {
            for a in 0..d {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let target = &mut g.data[a * d..(a + 1) * d];
                axpy(ra, row, target);
            }
        }
        g
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded generator: ChaCha8 keyed from a 64-bit seed.
///
/// ChaCha8's output stream is specified independently of platform and word
/// size, so a seed reproduces the same draws everywhere. Normal draws use
/// `rand_distr::StandardNormal` (ziggurat) on top of that stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream for run `index`; the parent is not advanced.
    pub fn derive(&self, index: u64) -> Rng {
        Rng::new(derive_seed(self.seed, index))
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Uniform on the unit sphere in `dim` dimensions.
    pub fn unit_sphere(&mut self, dim: usize) -> Vector {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
            let norm = norm_sq(&v).sqrt();
            if norm > 1e-12 {
                return Vector(v.into_iter().map(|x| x / norm).collect());
            }
        }
    }
}

/// Mixes a run index into a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// I.i.d. `N(0, std²)` entries. `std == 0` yields the zero vector without
/// consuming the stream.
pub fn gaussian_vector(rng: &mut Rng, dim: usize, std: f64) -> Vector {
    if std == 0.0 {
        return Vector::zeros(dim);
    }
    Vector((0..dim).map(|_| std * rng.normal()).collect())
}

/// Largest eigenvalue of `XᵀX` by power iteration on `v ↦ Xᵀ(Xv)`.
///
/// Starts from the normalized all-ones vector. If that start lies in the null
/// space of the Gram matrix the iterate collapses to zero; the iteration is
/// then restarted from a seeded random unit vector. Convergence is declared
/// when the eigen-residual `‖XᵀXv − λv‖` drops below `tol · λ`.
pub fn spectral_norm_gram(x: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Empty("matrix"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if x.as_slice().iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let d = x.cols();
    let start = Vector::from_elem(d, 1.0 / (d as f64).sqrt());
    match power_iterate(x, start, tol, max_iter)? {
        Some(lambda) => Ok(lambda),
        None => {
            let mut rng = Rng::new(0x005E_ED0F_6AA3);
            let start = rng.unit_sphere(d);
            power_iterate(x, start, tol, max_iter)?.ok_or(Error::NotConverged {
                estimate: 0.0,
                iterations: max_iter,
            })
        }
    }
}

// Ok(None) signals collapse to the zero vector.
fn power_iterate(x: &Matrix, mut v: Vector, tol: f64, max_iter: usize) -> Result<Option<f64>> {
    let mut xv = vec![0.0; x.rows()];
    let mut u = vec![0.0; x.cols()];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        x.mul_vec_into(&v, &mut xv);
        x.tr_mul_vec_into(&xv, &mut u);
        let u_norm = norm_sq(&u).sqrt();
        if u_norm <= f64::MIN_POSITIVE {
            return Ok(None);
        }
        // v is unit, so the Rayleigh quotient is vᵀu.
        lambda = dot(&v, &u);
        let residual: f64 = u
            .iter()
            .zip(v.iter())
            .map(|(ui, vi)| (ui - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / u_norm;
        }
        if residual <= tol * lambda.abs() {
            return Ok(Some(lambda));
        }
    }
    Err(Error::NotConverged {
        estimate: lambda,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gram_is_one() {
        let lambda = spectral_norm_gram(&Matrix::identity(3), 1e-12, 1000).unwrap();
        assert!((lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gram_squares_entries() {
        let lambda = spectral_norm_gram(&Matrix::diagonal(&[2.0, 1.0]), 1e-12, 10_000).unwrap();
        assert!((lambda - 4.0).abs() < 1e-10);
    }

    #[test]
    fn all_ones_in_null_space_falls_back() {
        // Row (1, -1): the Gram matrix annihilates the all-ones vector.
        let x = Matrix::from_rows(&[vec![1.0, -1.0], vec![2.0, -2.0]]).unwrap();
        let lambda = spectral_norm_gram(&x, 1e-12, 10_000).unwrap();
        assert!((lambda - 10.0).abs() < 1e-9, "{lambda}");
    }

    #[test]
    fn non_convergence_reports_estimate() {
        // Two nearly tied eigenvalues with a start mixing both.
        let x = Matrix::diagonal(&[1.0, 0.999_999, 0.5]);
        match spectral_norm_gram(&x, 1e-15, 3) {
            Err(Error::NotConverged { estimate, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(estimate > 0.5);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(spectral_norm_gram(&Matrix::identity(2), 0.0, 10).is_err());
    }

    #[test]
    fn zero_std_gives_zero_vector() {
        let mut rng = Rng::new(7);
        assert_eq!(gaussian_vector(&mut rng, 4, 0.0), Vector::zeros(4));
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(11);
        let v = gaussian_vector(&mut rng, 100_000, 1.0);
        let n = v.dim() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn same_seed_same_stream() {
        let a = gaussian_vector(&mut Rng::new(3), 16, 2.0);
        let b = gaussian_vector(&mut Rng::new(3), 16, 2.0);
        assert_eq!(a, b);
        let mut r1 = Rng::new(9);
        let mut r2 = Rng::new(9);
        for _ in 0..100 {
            assert_eq!(r1.index(1000), r2.index(1000));
        }
    }

    #[test]
    fn derived_streams_differ() {
        let base = Rng::new(42);
        let mut a = base.derive(0);
        let mut b = base.derive(1);
        let xs: Vec<usize> = (0..8).map(|_| a.index(1 << 20)).collect();
        let ys: Vec<usize> = (0..8).map(|_| b.index(1 << 20)).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn gram_and_matvec_agree() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let g = x.gram();
        assert_eq!(g.as_slice(), &[35.0, 44.0, 44.0, 56.0]);
        let mut xv = vec![0.0; 3];
        x.mul_vec_into(&[1.0, 1.0], &mut xv);
        assert_eq!(xv, vec![3.0, 7.0, 11.0]);
        let mut u = vec![0.0; 2];
        x.tr_mul_vec_into(&xv, &mut u);
        assert_eq!(u, vec![79.0, 100.0]);
    }

    #[test]
    fn unit_sphere_has_unit_norm() {
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            assert!((rng.unit_sphere(7).norm() - 1.0).abs() < 1e-12);
        }
    }
}
