//! Local block objectives and their Gray-HUBO spin polynomials.
//!
//! For block `ell` conditioned on a suffix, the adopted local cost is
//!
//! ```text
//! f(s) = ||y_bar - R_ll g(s)||^2 + lambda * ||g(s) - z_mmse||^2
//! ```
//!
//! where `g` is the blockwise NR Gray map. The polynomial form is obtained
//! exactly from the full truth table with a Walsh-Hadamard butterfly.

use serde::{Deserialize, Serialize};

use crate::constellation::{self, Modulation};
use crate::error::{Error, Result};
use crate::model::linalg::{cholesky_solve, CMat, CVec, C64};
use crate::preprocess::BlockPlan;

/// Largest variable count handled by exhaustive tabulation.
pub const MAX_EXHAUSTIVE_Q: usize = 20;

/// Coefficients below this magnitude are dropped from extracted polynomials.
pub const PRUNE_TOL: f64 = 1e-12;

/// SNR-dependent regularization weight
/// `lambda(rho) = lmin + (lmax - lmin) / (1 + exp(kappa (rho - rho0)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rho0: f64,
    pub kappa: f64,
}

impl LambdaSchedule {
    pub const TABLE1: LambdaSchedule = LambdaSchedule {
        lambda_min: 0.005,
        lambda_max: 0.45,
        rho0: 13.0,
        kappa: 0.55,
    };

    pub fn lambda(&self, rho_db: f64) -> f64 {
        let t = self.kappa * (rho_db - self.rho0);
        let span = self.lambda_max - self.lambda_min;
        if t.is_nan() {
            return f64::NAN;
        }
        // exp overflows past ~709; the sigmoid has long since saturated.
        if t > 700.0 {
            return self.lambda_min;
        }
        self.lambda_min + span / (1.0 + t.exp())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.lambda_min, self.lambda_max, self.rho0, self.kappa]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LambdaSchedule {
            lambda_min: a[0],
            lambda_max: a[1],
            rho0: a[2],
            kappa: a[3],
        }
    }
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        Self::TABLE1
    }
}

/// Unsliced linear MMSE estimate `(H^H H + sigma2 I)^{-1} H^H y`.
pub fn mmse_estimate(h: &CMat, y: &[C64], sigma2: f64) -> Result<CVec> {
    if sigma2 < 0.0 || sigma2.is_nan() {
        return Err(Error::Config(format!("noise variance {sigma2} < 0")));
    }
    let mut g = h.adjoint().matmul(h)?;
    for i in 0..g.rows() {
        g[(i, i)] += sigma2;
    }
    let rhs = h.adjoint_matvec(y)?;
    cholesky_solve(&g, &rhs)
}

/// Hard MMSE decision in antenna order.
pub fn mmse_hard(h: &CMat, y: &[C64], sigma2: f64, modulation: Modulation) -> Result<Vec<C64>> {
    Ok(constellation::slice(&mmse_estimate(h, y, sigma2)?, modulation))
}

/// Hard MMSE reference for block `ell` of a plan, in detection order.
pub fn mmse_reference(
    h: &CMat,
    y: &[C64],
    sigma2: f64,
    plan: &BlockPlan,
    ell: usize,
    modulation: Modulation,
) -> Result<Vec<C64>> {
    if ell >= plan.num_blocks() {
        return Err(Error::Dimension(format!("block {ell} of {}", plan.num_blocks())));
    }
    let full = plan.permute(&mmse_hard(h, y, sigma2, modulation)?);
    Ok(full[plan.block_range(ell)].to_vec())
}

/// Interference-reduced observation `y_rot_ell - sum_{j>ell} R_{ell,j} z_j`.
///
/// `suffix` holds the detection-order symbols of all blocks after `ell`.
pub fn block_observation(plan: &BlockPlan, ell: usize, suffix: &[C64]) -> Result<CVec> {
    if ell >= plan.num_blocks() {
        return Err(Error::Dimension(format!("block {ell} of {}", plan.num_blocks())));
    }
    let range = plan.block_range(ell);
    let tail = plan.nt() - range.end;
    if suffix.len() != tail {
        return Err(Error::Shape(format!(
            "block {ell} needs a suffix of {tail} symbols, got {}",
            suffix.len()
        )));
    }
    Ok(CVec(
        range
            .map(|i| {
                let row = &plan.r.row(i)[plan.nt() - tail..];
                let interference: C64 = row.iter().zip(suffix).map(|(r, z)| r * z).sum();
                plan.y_rot[i] - interference
            })
            .collect(),
    ))
}

/// One conditioned local block problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProblem {
    pub ell: usize,
    pub y_bar: CVec,
    pub r_diag: CMat,
    pub z_ref: Option<Vec<C64>>,
    pub lambda: f64,
    pub modulation: Modulation,
}

impl BlockProblem {
    pub fn new(
        ell: usize,
        y_bar: CVec,
        r_diag: CMat,
        z_ref: Option<Vec<C64>>,
        lambda: f64,
        modulation: Modulation,
    ) -> Result<Self> {
        let b = y_bar.len();
        if r_diag.shape() != (b, b) {
            return Err(Error::Shape(format!(
                "R block {:?} for observation of length {b}",
                r_diag.shape()
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {lambda} must be >= 0")));
        }
        match &z_ref {
            Some(z) if z.len() != b => {
                return Err(Error::Shape(format!("reference of length {} for block of {b}", z.len())))
            }
            None if lambda > 0.0 => return Err(Error::MissingReference(lambda)),
            _ => {}
        }
        Ok(BlockProblem {
            ell,
            y_bar,
            r_diag,
            z_ref,
            lambda,
            modulation,
        })
    }

    /// Symbols in the block.
    pub fn len(&self) -> usize {
        self.y_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_bar.is_empty()
    }

    /// Binary variables, `q = b m`.
    pub fn q(&self) -> usize {
        self.len() * self.modulation.bits_per_symbol()
    }

    /// Unregularized metric `||y_bar - R_ll z||^2` (the PED increment).
    pub fn ped(&self, z: &[C64]) -> f64 {
        let b = self.len();
        (0..b)
            .map(|i| {
                let row = self.r_diag.row(i);
                let rz: C64 = (i..b).map(|j| row[j] * z[j]).sum();
                (self.y_bar[i] - rz).norm_sqr()
            })
            .sum()
    }

    /// Adopted local cost of a symbol vector.
    pub fn cost_of_symbols(&self, z: &[C64]) -> f64 {
        let mut c = self.ped(z);
        if self.lambda > 0.0 {
            if let Some(zr) = &self.z_ref {
                c += self.lambda * z.iter().zip(zr).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            }
        }
        c
    }

    /// Symbols encoded by a basis index.
    pub fn symbols_of_index(&self, index: usize) -> Vec<C64> {
        constellation::index_labels(index, self.len(), self.modulation)
            .map(|l| self.modulation.label_to_symbol(l))
            .collect()
    }

    /// Adopted cost at every basis index.
    pub fn cost_table(&self) -> Result<Vec<f64>> {
        let q = self.q();
        if q > MAX_EXHAUSTIVE_Q {
            return Err(Error::TooManyVariables {
                q,
                max: MAX_EXHAUSTIVE_Q,
            });
        }
        Ok((0..1usize << q)
            .map(|k| self.cost_of_symbols(&self.symbols_of_index(k)))
            .collect())
    }
}

/// Adopted local cost at a spin assignment.
pub fn block_cost(prob: &BlockProblem, spins: &[i8]) -> Result<f64> {
    if spins.len() != prob.q() {
        return Err(Error::BitCount {
            expected: prob.q(),
            got: spins.len(),
        });
    }
    let z = constellation::map_block(spins, prob.modulation)?;
    Ok(prob.cost_of_symbols(&z))
}

/// Multilinear polynomial over `{-1,+1}^q`:
/// `f(s) = constant + sum_S c_S prod_{k in S} s_k`.
///
/// Subsets are bitmasks, bit `r` standing for spin `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinPolynomial {
    pub q: usize,
    pub constant: f64,
    /// Nonzero terms sorted by mask.
    pub terms: Vec<(u32, f64)>,
}

impl SpinPolynomial {
    pub fn new(q: usize, constant: f64, mut terms: Vec<(u32, f64)>) -> Result<Self> {
        if q > 32 {
            return Err(Error::TooManyVariables { q, max: 32 });
        }
        if terms.iter().any(|&(m, _)| m == 0 || (q < 32 && m >> q != 0)) {
            return Err(Error::Shape("term mask outside variable range".into()));
        }
        terms.sort_by_key(|t| t.0);
        Ok(SpinPolynomial { q, constant, terms })
    }

    /// Exact parity-basis expansion of a truth table indexed by basis index.
    pub fn from_table(table: &[f64]) -> Result<Self> {
        let n = table.len();
        if !n.is_power_of_two() {
            return Err(Error::Shape(format!("table length {n} is not a power of two")));
        }
        let q = n.trailing_zeros() as usize;
        if q > MAX_EXHAUSTIVE_Q {
            return Err(Error::TooManyVariables {
                q,
                max: MAX_EXHAUSTIVE_Q,
            });
        }
        let mut w = table.to_vec();
        walsh_hadamard(&mut w);
        let scale = 1.0 / n as f64;
        let terms = w
            .iter()
            .enumerate()
            .skip(1)
            .map(|(mask, &v)| (mask as u32, v * scale))
            .filter(|&(_, c)| c.abs() >= PRUNE_TOL)
            .collect();
        Ok(SpinPolynomial {
            q,
            constant: w[0] * scale,
            terms,
        })
    }

    pub fn evaluate(&self, spins: &[i8]) -> f64 {
        debug_assert_eq!(spins.len(), self.q);
        self.evaluate_index(constellation::spins_index(spins))
    }

    /// Value at a basis index (bit `r` set means `s_r = -1`).
    pub fn evaluate_index(&self, index: usize) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(mask, c)| {
                    if (index as u32 & mask).count_ones() % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .sum::<f64>()
    }

    /// Largest interaction order among the terms.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.0.count_ones()).max().unwrap_or(0)
    }
}

/// In-place unnormalized Walsh-Hadamard transform,
/// `w[S] = sum_k v[k] (-1)^{|k & S|}`. Length must be a power of two.
pub fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Gray-HUBO polynomial of a block problem.
pub fn extract_hubo(prob: &BlockProblem) -> Result<SpinPolynomial> {
    SpinPolynomial::from_table(&prob.cost_table()?)
}
