//! Reference implementations written independently of the library.

#![allow(dead_code)]

use bqamd::model::linalg::{CMat, C64};
use bqamd::preprocess::BlockPlan;
use bqamd::{DetectionInstance, Modulation};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Modulation mapper straight from the standard's formulas.
pub fn nr_symbol(bits: &[u8], m: Modulation) -> C64 {
    let b = |i: usize| bits[i] as f64;
    match m {
        Modulation::Qpsk => c(1.0 - 2.0 * b(0), 1.0 - 2.0 * b(1)) / 2f64.sqrt(),
        Modulation::Qam16 => {
            c(
                (1.0 - 2.0 * b(0)) * (2.0 - (1.0 - 2.0 * b(2))),
                (1.0 - 2.0 * b(1)) * (2.0 - (1.0 - 2.0 * b(3))),
            ) / 10f64.sqrt()
        }
    }
}

/// All `(bits, symbol)` pairs of a constellation, bits in transmission order.
pub fn nr_table(m: Modulation) -> Vec<(Vec<u8>, C64)> {
    let k = m.bits_per_symbol();
    (0..1usize << k)
        .map(|v| {
            let bits: Vec<u8> = (0..k).map(|i| ((v >> (k - 1 - i)) & 1) as u8).collect();
            let s = nr_symbol(&bits, m);
            (bits, s)
        })
        .collect()
}

/// Symbols of a block for basis index `k`: bit `r` of `k` is the `r`-th
/// transmitted bit of the block.
pub fn index_symbols(k: usize, n: usize, m: Modulation) -> Vec<C64> {
    let w = m.bits_per_symbol();
    (0..n)
        .map(|t| {
            let bits: Vec<u8> = (0..w).map(|i| ((k >> (t * w + i)) & 1) as u8).collect();
            nr_symbol(&bits, m)
        })
        .collect()
}

pub fn residual(h: &CMat, y: &[C64], x: &[C64]) -> f64 {
    (0..h.rows())
        .map(|i| {
            let hx: C64 = (0..h.cols()).map(|j| h[(i, j)] * x[j]).sum();
            (y[i] - hx).norm_sqr()
        })
        .sum()
}

/// Exhaustive ML by recursion over antennas.
pub fn brute_ml(inst: &DetectionInstance) -> Vec<C64> {
    let pts: Vec<C64> = nr_table(inst.modulation).into_iter().map(|(_, s)| s).collect();
    fn rec(i: usize, x: &mut Vec<C64>, pts: &[C64], inst: &DetectionInstance, best: &mut (f64, Vec<C64>)) {
        if i == inst.nt() {
            let d = residual(&inst.h, &inst.y, x);
            if d < best.0 {
                *best = (d, x.clone());
            }
            return;
        }
        for &p in pts {
            x.push(p);
            rec(i + 1, x, pts, inst, best);
            x.pop();
        }
    }
    let mut best = (f64::INFINITY, vec![]);
    rec(0, &mut Vec::new(), &pts, inst, &mut best);
    best.1
}

/// Dense complex Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<C64>], b: &[C64]) -> Vec<C64> {
    let n = b.len();
    let mut m: Vec<Vec<C64>> = a
        .iter()
        .zip(b)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm())).unwrap();
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    let v = m[col][k];
                    m[r][k] -= f * v;
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

pub fn nearest(v: C64, m: Modulation) -> C64 {
    nr_table(m)
        .into_iter()
        .map(|(_, s)| s)
        .min_by(|a, b| (v - a).norm_sqr().total_cmp(&(v - b).norm_sqr()))
        .unwrap()
}

/// Sliced `(H^H H + s2 I)^{-1} H^H y` via a dense solve.
pub fn mmse_oracle(h: &CMat, y: &[C64], s2: f64, m: Modulation) -> Vec<C64> {
    let nt = h.cols();
    let g: Vec<Vec<C64>> = (0..nt)
        .map(|i| {
            (0..nt)
                .map(|j| {
                    let v: C64 = (0..h.rows()).map(|k| h[(k, i)].conj() * h[(k, j)]).sum();
                    if i == j {
                        v + s2
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let rhs: Vec<C64> = (0..nt)
        .map(|i| (0..h.rows()).map(|k| h[(k, i)].conj() * y[k]).sum())
        .collect();
    dense_solve(&g, &rhs).into_iter().map(|v| nearest(v, m)).collect()
}

/// Greedy blockwise successive cancellation: every block takes its best
/// local assignment, then is cancelled from the blocks above it.
pub fn greedy_sic(inst: &DetectionInstance, plan: &BlockPlan, lambda: f64, anchor: &[C64]) -> Vec<C64> {
    let nt = plan.nt();
    let m = inst.modulation;
    let mut z = vec![c(0.0, 0.0); nt];
    let mut end = nt;
    for &size in plan.block_sizes.iter().rev() {
        let start = end - size;
        let ybar: Vec<C64> = (start..end)
            .map(|i| plan.y_rot[i] - (end..nt).map(|j| plan.r[(i, j)] * z[j]).sum::<C64>())
            .collect();
        let q = size * m.bits_per_symbol();
        let mut best = (f64::INFINITY, vec![]);
        for k in 0..1usize << q {
            let s = index_symbols(k, size, m);
            let mut f = 0.0;
            for a in 0..size {
                let rz: C64 = (a..size).map(|b| plan.r[(start + a, start + b)] * s[b]).sum();
                f += (ybar[a] - rz).norm_sqr() + lambda * (s[a] - anchor[start + a]).norm_sqr();
            }
            if f < best.0 {
                best = (f, s);
            }
        }
        z[start..end].copy_from_slice(&best.1);
        end = start;
    }
    let mut x = vec![c(0.0, 0.0); nt];
    for (k, &j) in plan.perm.iter().enumerate() {
        x[j] = z[k];
    }
    x
}

/// Dense-matrix QAOA: explicit `2^q x 2^q` layer unitaries applied to `|+>`.
pub fn dense_qaoa(cost: &[f64], gammas: &[f64], betas: &[f64]) -> Vec<C64> {
    let n = cost.len();
    let q = n.trailing_zeros() as usize;
    let mut psi = vec![c(1.0 / (n as f64).sqrt(), 0.0); n];
    for (&g, &b) in gammas.iter().zip(betas) {
        let ph: Vec<Vec<C64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { (c(0.0, -g * cost[i])).exp() } else { c(0.0, 0.0) }).collect())
            .collect();
        // Kronecker power of cos(b) I - i sin(b) X.
        let one = [[c(b.cos(), 0.0), c(0.0, -b.sin())], [c(0.0, -b.sin()), c(b.cos(), 0.0)]];
        let mut mix = vec![vec![c(1.0, 0.0)]];
        for _ in 0..q {
            let d = mix.len();
            let mut next = vec![vec![c(0.0, 0.0); 2 * d]; 2 * d];
            for (i, row) in next.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = one[i / d][j / d] * mix[i % d][j % d];
                }
            }
            mix = next;
        }
        let apply = |m: &Vec<Vec<C64>>, v: &[C64]| -> Vec<C64> {
            m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        };
        psi = apply(&mix, &apply(&ph, &psi));
    }
    psi
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Blockwise K-best over the triangular system with full child expansion and
/// pruning on the unregularized partial distance. Returns the best final PED.
pub fn block_kbest_ped(plan: &BlockPlan, m: Modulation, k: usize) -> f64 {
    let nt = plan.nt();
    let mut paths: Vec<(f64, Vec<C64>)> = vec![(0.0, vec![])];
    let mut end = nt;
    for &size in plan.block_sizes.iter().rev() {
        let start = end - size;
        let q = size * m.bits_per_symbol();
        let mut next = Vec::new();
        for (ped, suf) in &paths {
            for idx in 0..1usize << q {
                let mut z = index_symbols(idx, size, m);
                z.extend(suf.iter().copied());
                let inc: f64 = (start..end)
                    .map(|r| {
                        let rz: C64 = (r..nt).map(|j| plan.r[(r, j)] * z[j - start]).sum();
                        (plan.y_rot[r] - rz).norm_sqr()
                    })
                    .sum();
                next.push((ped + inc, z));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        next.truncate(k);
        paths = next;
        end = start;
    }
    paths[0].0
}
