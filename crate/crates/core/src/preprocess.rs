//! Block-sorted QR preprocessing.
//!
//! Columns are grouped into fixed-size blocks by greedily taking, at each
//! step, the `b` unselected columns with the smallest residual energy in the
//! orthogonal complement of the already selected span. The resulting
//! permuted factorization `H P = Q R` has an upper block-staircase `R` whose
//! diagonal blocks are the local detection subproblems.

use crate::error::{Error, Result};
use crate::model::linalg::{dot_conj, norm_sqr, CMat, CVec, C64, RANK_TOL};

/// Output of [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPlan {
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
    /// Block sizes in construction order; block 0 was selected first.
    pub block_sizes: Vec<usize>,
    pub q: CMat,
    pub r: CMat,
    /// `Q^H y`
    pub y_rot: CVec,
}

impl BlockPlan {
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn nt(&self) -> usize {
        self.perm.len()
    }

    /// First position of block `ell`.
    pub fn block_start(&self, ell: usize) -> usize {
        self.block_sizes[..ell].iter().sum()
    }

    /// Position range of block `ell`.
    pub fn block_range(&self, ell: usize) -> std::ops::Range<usize> {
        let s = self.block_start(ell);
        s..s + self.block_sizes[ell]
    }

    /// Diagonal block `R_{ell,ell}`.
    pub fn diag_block(&self, ell: usize) -> CMat {
        let r = self.block_range(ell);
        self.r.block(r.start, r.start, r.len(), r.len())
    }

    /// Maps a vector in detection order back to antenna order.
    pub fn unpermute(&self, z: &[C64]) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); z.len()];
        for (k, &j) in self.perm.iter().enumerate() {
            x[j] = z[k];
        }
        x
    }

    /// Maps a vector in antenna order to detection order.
    pub fn permute(&self, x: &[C64]) -> Vec<C64> {
        self.perm.iter().map(|&j| x[j]).collect()
    }
}

/// `||(I - Q Q^H) h_j||^2` for each listed column of `h`.
pub fn residual_energies(h: &CMat, qsel: &CMat, columns: &[usize]) -> Result<Vec<f64>> {
    if qsel.cols() > 0 && qsel.rows() != h.rows() {
        return Err(Error::Shape(format!(
            "basis has {} rows, channel has {}",
            qsel.rows(),
            h.rows()
        )));
    }
    let basis: Vec<Vec<C64>> = (0..qsel.cols()).map(|k| qsel.column(k)).collect();
    Ok(columns
        .iter()
        .map(|&j| {
            let mut e = h.column(j);
            for q in &basis {
                let c = dot_conj(q, &e);
                for (ei, qi) in e.iter_mut().zip(q) {
                    *ei -= c * qi;
                }
            }
            norm_sqr(&e)
        })
        .collect())
}

/// Indices (into `energies`) of the `min(b, len)` smallest entries, in
/// ascending energy order with ties going to the smaller index.
///
/// Because a block's Frobenius residual energy is the sum of its columns'
/// residual energies, this is the exact subset minimizer.
pub fn select_block(energies: &[f64], b: usize) -> Result<Vec<usize>> {
    if b == 0 {
        return Err(Error::Dimension("block size must be >= 1".into()));
    }
    if energies.is_empty() {
        return Err(Error::Dimension("no candidate columns".into()));
    }
    let mut idx: Vec<usize> = (0..energies.len()).collect();
    idx.sort_by(|&a, &c| energies[a].total_cmp(&energies[c]).then(a.cmp(&c)));
    idx.truncate(b.min(energies.len()));
    Ok(idx)
}

/// Block sizes for `nt` columns in blocks of `b`: full blocks then at most
/// one smaller residual block.
pub fn block_sizes(nt: usize, b: usize) -> Vec<usize> {
    let mut sizes = vec![b; nt / b];
    if nt % b != 0 {
        sizes.push(nt % b);
    }
    sizes
}

/// Block size that fits a local qubit budget, `floor(n_avail / m)`.
pub fn block_size_for_budget(n_avail: usize, bits_per_symbol: usize) -> usize {
    n_avail / bits_per_symbol
}

/// Block-sorted modified Gram-Schmidt QR of `h`, with one
/// reorthogonalization pass per column.
pub fn preprocess(h: &CMat, y: &[C64], b: usize) -> Result<BlockPlan> {
    let (nr, nt) = h.shape();
    if b == 0 {
        return Err(Error::Dimension("block size must be >= 1".into()));
    }
    if nt == 0 || nr < nt {
        return Err(Error::Dimension(format!("need nr >= nt >= 1, got {nr}x{nt}")));
    }
    if y.len() != nr {
        return Err(Error::Shape(format!("y has {} entries, H has {nr} rows", y.len())));
    }
    let tol = RANK_TOL * h.frobenius_norm();

    let mut resid: Vec<Vec<C64>> = (0..nt).map(|j| h.column(j)).collect();
    // coef[j][k] = entry of R in row k for original column j.
    let mut coef: Vec<Vec<C64>> = vec![Vec::with_capacity(nt); nt];
    let mut unselected: Vec<usize> = (0..nt).collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(nt);
    let mut perm = Vec::with_capacity(nt);
    let mut sizes = Vec::new();

    while !unselected.is_empty() {
        let energies: Vec<f64> = unselected.iter().map(|&j| norm_sqr(&resid[j])).collect();
        let picked: Vec<usize> = select_block(&energies, b)?
            .into_iter()
            .map(|i| unselected[i])
            .collect();
        unselected.retain(|j| !picked.contains(j));
        sizes.push(picked.len());

        for (t, &j) in picked.iter().enumerate() {
            let k = basis.len();
            // Reorthogonalize against everything selected so far.
            for (i, q) in basis.iter().enumerate() {
                let c = dot_conj(q, &resid[j]);
                for (e, qi) in resid[j].iter_mut().zip(q) {
                    *e -= c * qi;
                }
                coef[j][i] += c;
            }
            let norm = norm_sqr(&resid[j]).sqrt();
            if norm <= tol {
                return Err(Error::RankDeficient {
                    column: j,
                    pivot: norm,
                    tol,
                });
            }
            let qk: Vec<C64> = resid[j].iter().map(|e| e / norm).collect();
            coef[j].push(C64::new(norm, 0.0));
            for &u in picked[t + 1..].iter().chain(unselected.iter()) {
                let c = dot_conj(&qk, &resid[u]);
                for (e, qi) in resid[u].iter_mut().zip(&qk) {
                    *e -= c * qi;
                }
                coef[u].push(c);
            }
            basis.push(qk);
            perm.push(j);
            debug_assert_eq!(coef[j].len(), k + 1);
        }
    }

    let q = CMat::from_columns(nr, &basis)?;
    let mut r = CMat::zeros(nt, nt);
    for (k, &j) in perm.iter().enumerate() {
        for (i, &c) in coef[j].iter().enumerate() {
            r[(i, k)] = c;
        }
    }
    let y_rot = q.adjoint_matvec(y)?;
    Ok(BlockPlan {
        perm,
        block_sizes: sizes,
        q,
        r,
        y_rot,
    })
}
