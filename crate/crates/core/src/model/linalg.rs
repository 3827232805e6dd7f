//! Dense complex vectors and matrices.
//!
//! Just enough linear algebra for the detection chain: products, adjoints,
//! a Householder QR with explicit thin Q, and a Cholesky solve for the
//! regularized normal equations. Matrices are row-major.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CVec(pub Vec<C64>);

impl CVec {
    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> C64) -> Self {
        CVec((0..n).map(f).collect())
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn sub(&self, other: &CVec) -> Result<CVec> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "vector lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(CVec(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect()))
    }
}

impl Deref for CVec {
    type Target = Vec<C64>;
    fn deref(&self) -> &Vec<C64> {
        &self.0
    }
}

impl DerefMut for CVec {
    fn deref_mut(&mut self) -> &mut Vec<C64> {
        &mut self.0
    }
}

impl From<Vec<C64>> for CVec {
    fn from(v: Vec<C64>) -> Self {
        CVec(v)
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`
pub fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self> {
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("column length mismatch".into()));
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<CVec> {
        if self.cols != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(CVec(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// `self^H v` without forming the adjoint.
    pub fn adjoint_matvec(&self, v: &[C64]) -> Result<CVec> {
        if self.rows != v.len() {
            return Err(Error::Shape(format!(
                "cannot multiply ({}x{})^H by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = CVec::zeros(self.cols);
        for i in 0..self.rows {
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * vi;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &CMat) -> Result<CMat> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{:?} minus {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm_sqr(&self.data).sqrt()
    }

    /// Copies the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Returns a copy with columns reordered: column `k` of the result is
    /// column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> CMat {
        CMat::from_fn(self.rows, perm.len(), |i, k| self[(i, perm[k])])
    }

    pub fn is_upper_triangular(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..self.cols.min(i)).all(|j| self[(i, j)].norm() <= tol))
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Relative pivot tolerance used for rank decisions.
pub const RANK_TOL: f64 = 1e-12;

/// Thin Householder QR of a tall matrix: `A = Q R` with `Q` having
/// orthonormal columns and `R` upper triangular with a real nonnegative
/// diagonal.
pub fn qr_decompose(a: &CMat) -> Result<(CMat, CMat)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Dimension(format!("empty {m}x{n} matrix")));
    }
    if m < n {
        return Err(Error::Dimension(format!(
            "QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let tol = RANK_TOL * a.frobenius_norm();
    let mut work = a.clone();
    // Householder vectors, each normalized so that H = I - 2 v v^H.
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(n);

    for k in 0..n {
        let x: Vec<C64> = (k..m).map(|i| work[(i, k)]).collect();
        let xnorm = norm_sqr(&x).sqrt();
        if xnorm <= tol {
            return Err(Error::RankDeficient {
                column: k,
                pivot: xnorm,
                tol,
            });
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm_sqr(&v).sqrt();
        if vnorm > 0.0 {
            for vi in v.iter_mut() {
                *vi /= vnorm;
            }
            for j in k..n {
                let s: C64 = (k..m).map(|i| v[i - k].conj() * work[(i, j)]).sum();
                for i in k..m {
                    work[(i, j)] -= 2.0 * v[i - k] * s;
                }
            }
        }
        reflectors.push(v);
    }

    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r[(i, j)] = work[(i, j)];
        }
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = CMat::from_fn(m, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let s: C64 = (k..m).map(|i| v[i - k].conj() * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
    }

    // Rotate phases so diag(R) is real and nonnegative.
    for k in 0..n {
        let d = r[(k, k)];
        let mag = d.norm();
        let ph = if mag > 0.0 { d / mag } else { C64::new(1.0, 0.0) };
        for j in k..n {
            r[(k, j)] *= ph.conj();
        }
        r[(k, k)] = C64::new(mag, 0.0);
        for i in 0..m {
            q[(i, k)] *= ph;
        }
    }
    Ok((q, r))
}

/// Solves `A x = b` for Hermitian positive definite `A` via Cholesky.
pub fn cholesky_solve(a: &CMat, b: &[C64]) -> Result<CVec> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "cholesky_solve on {:?} with rhs {}",
            a.shape(),
            b.len()
        )));
    }
    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let tol = RANK_TOL * scale.max(f64::MIN_POSITIVE);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > tol) {
            return Err(Error::Singular);
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    // L w = b
    let mut w = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * w[k];
        }
        w[i] = s / l[(i, i)];
    }
    // L^H x = w
    let mut x = vec![C64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = w[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(CVec(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn check_qr(a: &CMat) {
        let (q, r) = qr_decompose(a).unwrap();
        let n = a.cols();
        let qhq = q.adjoint().matmul(&q).unwrap();
        assert!(qhq.sub(&CMat::identity(n)).unwrap().frobenius_norm() < 1e-10);
        assert!(r.is_upper_triangular(0.0));
        for k in 0..n {
            assert!(r[(k, k)].im == 0.0 && r[(k, k)].re >= 0.0);
        }
        let rel = q.matmul(&r).unwrap().sub(a).unwrap().frobenius_norm() / a.frobenius_norm();
        assert!(rel < 1e-10, "reconstruction error {rel}");
    }

    #[test]
    fn qr_of_identity_and_scaled_identity() {
        let (q, r) = qr_decompose(&CMat::identity(4)).unwrap();
        assert!(q.sub(&CMat::identity(4)).unwrap().frobenius_norm() < 1e-14);
        assert!(r.sub(&CMat::identity(4)).unwrap().frobenius_norm() < 1e-14);

        let two = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                C64::new(2.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let (q, r) = qr_decompose(&two).unwrap();
        assert!(q.sub(&CMat::identity(3)).unwrap().frobenius_norm() < 1e-14);
        for k in 0..3 {
            assert!((r[(k, k)].re - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn qr_random_square_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=32 {
            check_qr(&random_mat(n, n, &mut rng));
        }
        check_qr(&random_mat(12, 5, &mut rng));
    }

    #[test]
    fn qr_reports_rank_deficiency() {
        let mut a = CMat::zeros(3, 2);
        a[(0, 0)] = C64::new(1.0, 0.0);
        a[(0, 1)] = C64::new(2.0, 0.0);
        assert!(matches!(qr_decompose(&a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let a = CMat::zeros(2, 3);
        assert!(a.matmul(&CMat::zeros(2, 2)).is_err());
        assert!(a.matvec(&[C64::new(0.0, 0.0); 2]).is_err());
        assert!(CMat::from_rows(2, 2, vec![C64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn hermitian_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(4, 3, &mut rng);
        let b = random_mat(3, 5, &mut rng);
        // (AB)^H = B^H A^H
        let lhs = a.matmul(&b).unwrap().adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().frobenius_norm() < 1e-12);
        let v: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 1.0)).collect();
        let d = a.adjoint_matvec(&v).unwrap().sub(&a.adjoint().matvec(&v).unwrap()).unwrap();
        assert!(d.norm_sqr() < 1e-24);
    }

    #[test]
    fn cholesky_solves_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_mat(6, 4, &mut rng);
        let mut g = h.adjoint().matmul(&h).unwrap();
        for i in 0..4 {
            g[(i, i)] += 0.1;
        }
        let x_true: Vec<C64> = (0..4).map(|i| C64::new(1.0 - i as f64, 0.5)).collect();
        let b = g.matvec(&x_true).unwrap();
        let x = cholesky_solve(&g, &b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(matches!(
            cholesky_solve(&CMat::zeros(2, 2), &[C64::new(1.0, 0.0); 2]),
            Err(Error::Singular)
        ));
    }
}
