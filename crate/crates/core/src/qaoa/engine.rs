//! Exact state-vector simulation of the p-layer QAOA ansatz.
//!
//! The cost Hamiltonian is diagonal, so each layer is an elementwise phase
//! followed by `q` single-qubit `exp(-i beta X)` rotations. Basis index
//! convention: bit `r` of index `k` is `b_r`, with `s_r = 1 - 2 b_r`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::linalg::C64;
use crate::model::RngStream;
use crate::objective::{walsh_hadamard, SpinPolynomial, MAX_EXHAUSTIVE_Q};

/// Diagonal of the cost Hamiltonian (constant term omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    q: usize,
    values: Vec<f64>,
    /// `max |c_k|`
    peak: f64,
}

impl CostVector {
    /// Wraps a precomputed diagonal. Length must be `2^q`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_power_of_two() {
            return Err(Error::Shape(format!("{} is not a power of two", values.len())));
        }
        let q = values.len().trailing_zeros() as usize;
        if q > MAX_EXHAUSTIVE_Q {
            return Err(Error::TooManyVariables {
                q,
                max: MAX_EXHAUSTIVE_Q,
            });
        }
        let peak = max_abs(&values);
        Ok(CostVector { q, values, peak })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Tabulates the nonconstant part of a spin polynomial.
pub fn build_cost_vector(poly: &SpinPolynomial) -> Result<CostVector> {
    if poly.q > MAX_EXHAUSTIVE_Q {
        return Err(Error::TooManyVariables {
            q: poly.q,
            max: MAX_EXHAUSTIVE_Q,
        });
    }
    // The unnormalized transform of the coefficient vector is the table.
    let mut v = vec![0.0; 1 << poly.q];
    for &(mask, c) in &poly.terms {
        v[mask as usize] = c;
    }
    walsh_hadamard(&mut v);
    CostVector::from_values(v)
}

/// Circuit angles, `theta = [gammas; betas]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() || gammas.is_empty() {
            return Err(Error::Dimension(format!(
                "{} gammas and {} betas",
                gammas.len(),
                betas.len()
            )));
        }
        if gammas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite QAOA angle".into()));
        }
        Ok(QaoaParams { gammas, betas })
    }

    pub fn zeros(p: usize) -> Self {
        QaoaParams {
            gammas: vec![0.0; p],
            betas: vec![0.0; p],
        }
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    /// Inverse of [`QaoaParams::to_vec`]; `theta.len()` must be even.
    pub fn from_slice(theta: &[f64]) -> Self {
        let p = theta.len() / 2;
        QaoaParams {
            gammas: theta[..p].to_vec(),
            betas: theta[p..2 * p].to_vec(),
        }
    }
}

/// `2^q` complex amplitudes, stored as separate real and imaginary parts
/// so the layer kernels vectorize.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl StateVector {
    pub fn uniform(q: usize) -> Self {
        let n = 1usize << q;
        StateVector {
            re: vec![1.0 / (n as f64).sqrt(); n],
            im: vec![0.0; n],
        }
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Shape(format!("{} amplitudes", amps.len())));
        }
        Ok(StateVector {
            re: amps.iter().map(|a| a.re).collect(),
            im: amps.iter().map(|a| a.im).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        C64::new(self.re[k], self.im[k])
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        (0..self.len()).map(|k| self.amplitude(k)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).collect()
    }

    fn renormalize(&mut self) {
        let n = self.norm();
        if n > 0.0 && (n - 1.0).abs() > 1e-14 {
            for v in self.re.iter_mut().chain(self.im.iter_mut()) {
                *v /= n;
            }
        }
    }

    /// `exp(-i gamma C)` for diagonal `C`.
    pub fn apply_phase(&mut self, cost: &[f64], gamma: f64) {
        self.apply_phase_bounded(cost, gamma, max_abs(cost));
    }

    fn apply_phase_bounded(&mut self, cost: &[f64], gamma: f64, peak: f64) {
        if !(peak * gamma.abs() < FAST_RANGE) {
            for ((r, i), &c) in self.re.iter_mut().zip(self.im.iter_mut()).zip(cost) {
                let (s, co) = (-gamma * c).sin_cos();
                let (a, b) = (*r, *i);
                *r = a * co - b * s;
                *i = a * s + b * co;
            }
            return;
        }
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports the enabled feature.
            unsafe { phase_avx2(&mut self.re, &mut self.im, cost, gamma) };
            return;
        }
        phase_kernel(&mut self.re, &mut self.im, cost, gamma);
    }

    /// `exp(-i beta X_j)` on every qubit `j`.
    pub fn apply_mixer(&mut self, q: usize, beta: f64) {
        let n = 1usize << q;
        let (re, im) = (&mut self.re[..n], &mut self.im[..n]);
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports the enabled feature.
            unsafe { mixer_avx2(re, im, q, beta) };
            return;
        }
        mixer_kernel(re, im, q, beta);
    }
}

/// NaN-propagating `max |v_k|`.
fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, c| if c.abs() > m || c.is_nan() { c.abs() } else { m })
}

#[inline(always)]
fn phase_kernel(re: &mut [f64], im: &mut [f64], cost: &[f64], gamma: f64) {
    for ((r, i), &c) in re.iter_mut().zip(im.iter_mut()).zip(cost) {
        let (s, co) = sin_cos_reduced(-gamma * c);
        let (a, b) = (*r, *i);
        *r = a * co - b * s;
        *i = a * s + b * co;
    }
}

#[inline(always)]
fn mixer_kernel(re: &mut [f64], im: &mut [f64], q: usize, beta: f64) {
    let (s, c) = beta.sin_cos();
    for j in 0..q {
        let stride = 1usize << j;
        for (rb, ib) in re.chunks_exact_mut(2 * stride).zip(im.chunks_exact_mut(2 * stride)) {
            let (r0, r1) = rb.split_at_mut(stride);
            let (i0, i1) = ib.split_at_mut(stride);
            for k in 0..stride {
                let (xr, xi, yr, yi) = (r0[k], i0[k], r1[k], i1[k]);
                // cos(b) I - i sin(b) X
                r0[k] = c * xr + s * yi;
                i0[k] = c * xi - s * yr;
                r1[k] = c * yr + s * xi;
                i1[k] = c * yi - s * xr;
            }
        }
    }
}

// Same arithmetic as the portable kernels (no contraction into FMA), so
// results are bit-identical on every path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn phase_avx2(re: &mut [f64], im: &mut [f64], cost: &[f64], gamma: f64) {
    phase_kernel(re, im, cost, gamma)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn mixer_avx2(re: &mut [f64], im: &mut [f64], q: usize, beta: f64) {
    mixer_kernel(re, im, q, beta)
}

const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_6e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_8e-21;
const S: [f64; 6] = [
    -1.666_666_666_666_663_243_48e-1,
    8.333_333_333_322_489_461_24e-3,
    -1.984_126_982_985_794_931_34e-4,
    2.755_731_370_707_006_767_89e-6,
    -2.505_076_025_340_686_341_95e-8,
    1.589_690_995_211_550_102_21e-10,
];
const C: [f64; 6] = [
    4.166_666_666_666_660_190_37e-2,
    -1.388_888_888_887_410_957_49e-3,
    2.480_158_728_947_672_941_78e-5,
    -2.755_731_435_139_066_330_35e-7,
    2.087_572_321_298_174_827_9e-9,
    -1.135_964_755_778_819_482_65e-11,
];

/// Largest argument handled by [`sin_cos_reduced`].
const FAST_RANGE: f64 = 1e5;
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// `(sin x, cos x)` for `|x| < 1e5` by three-part Cody-Waite reduction and
/// minimax kernels. Branch-free so the phase loop vectorizes.
#[inline(always)]
fn sin_cos_reduced(x: f64) -> (f64, f64) {
    let n = (x * std::f64::consts::FRAC_2_PI + ROUND_MAGIC) - ROUND_MAGIC;
    let r = ((x - n * PIO2_1) - n * PIO2_2) - n * PIO2_3;
    let z = r * r;
    let s = r + r * z * (S[0] + z * (S[1] + z * (S[2] + z * (S[3] + z * (S[4] + z * S[5])))));
    let c = 1.0 - 0.5 * z + z * z * (C[0] + z * (C[1] + z * (C[2] + z * (C[3] + z * (C[4] + z * C[5])))));
    let q = n as i32;
    let odd = q & 1 != 0;
    let (s, c) = (if odd { c } else { s }, if odd { s } else { c });
    let ss = if q & 2 == 0 { s } else { -s };
    let cc = if (q + 1) & 2 == 0 { c } else { -c };
    (ss, cc)
}

#[cfg(test)]
fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() < FAST_RANGE {
        sin_cos_reduced(x)
    } else {
        x.sin_cos()
    }
}

/// Prepares `|psi(gamma, beta)>` starting from `|+>^q`.
pub fn run_ansatz(cost: &CostVector, params: &QaoaParams) -> StateVector {
    let mut psi = StateVector::uniform(cost.q);
    for (&g, &b) in params.gammas.iter().zip(&params.betas) {
        psi.apply_phase_bounded(&cost.values, g, cost.peak);
        psi.apply_mixer(cost.q, b);
        psi.renormalize();
    }
    psi
}

/// `<psi| H_C |psi>` from a prepared state.
pub fn expectation_of_state(cost: &CostVector, psi: &StateVector) -> f64 {
    psi.re
        .iter()
        .zip(&psi.im)
        .zip(&cost.values)
        .map(|((a, b), &c)| (a * a + b * b) * c)
        .sum()
}

/// Exact QAOA objective `F(theta)`.
pub fn expectation(cost: &CostVector, params: &QaoaParams) -> f64 {
    expectation_of_state(cost, &run_ansatz(cost, params))
}

/// Measures the prepared state `n_shots` times in the computational basis.
/// Returns `(basis index, count)` pairs sorted by index.
pub fn sample_state(psi: &StateVector, n_shots: usize, rng: &mut RngStream) -> Vec<(usize, usize)> {
    let mut cdf = psi.probabilities();
    let mut acc = 0.0;
    for p in cdf.iter_mut() {
        acc += *p;
        *p = acc;
    }
    let total = acc;
    let mut counts = vec![0usize; cdf.len()];
    for _ in 0..n_shots {
        let u = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect()
}

/// Runs the ansatz and samples it.
pub fn sample(
    cost: &CostVector,
    params: &QaoaParams,
    n_shots: usize,
    rng: &mut RngStream,
) -> Result<Vec<(usize, usize)>> {
    if n_shots == 0 {
        return Err(Error::Config("n_shots must be >= 1".into()));
    }
    Ok(sample_state(&run_ansatz(cost, params), n_shots, rng))
}
