//! Desk-scale reference checks: brute-force ML, straight-line blockwise
//! SIC, and exhaustive block minimization, compared against the detector.

use crate::baselines::detect_kbest_classical;
use crate::constellation::Modulation;
use crate::detector::{detect, solve_block_exhaustive, DetectorConfig, SolverMode};
use crate::error::Result;
use crate::model::linalg::C64;
use crate::model::{generate_instance, DetectionInstance, RngStream};
use crate::objective::{block_cost, extract_hubo, mmse_hard, BlockProblem, LambdaSchedule};
use crate::preprocess::preprocess;

/// Exhaustive `argmin ||y - H x||^2` over the full symbol lattice.
pub fn brute_force_ml(inst: &DetectionInstance) -> Vec<C64> {
    let pts = inst.modulation.points();
    let (m, nt) = (pts.len(), inst.nt());
    let mut labels = vec![0usize; nt];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let x: Vec<C64> = labels.iter().map(|&l| pts[l]).collect();
        let d: f64 = (0..inst.nr())
            .map(|i| {
                let hx: C64 = inst.h.row(i).iter().zip(&x).map(|(a, b)| a * b).sum();
                (inst.y[i] - hx).norm_sqr()
            })
            .sum();
        if d < best.0 {
            best = (d, x);
        }
        let mut k = 0;
        while k < nt {
            labels[k] += 1;
            if labels[k] < m {
                break;
            }
            labels[k] = 0;
            k += 1;
        }
        if k == nt {
            return best.1;
        }
    }
}

/// Greedy blockwise successive detection written without the K-best
/// machinery: each block takes its single best assignment by nested
/// enumeration, then its interference is cancelled.
pub fn greedy_block_sic(inst: &DetectionInstance, b: usize, schedule: Option<LambdaSchedule>) -> Result<Vec<C64>> {
    let plan = preprocess(&inst.h, &inst.y, b)?;
    let nt = plan.nt();
    let pts = inst.modulation.points();
    let lambda = schedule.map_or(0.0, |s| s.lambda(inst.snr_db));
    let anchor = plan.permute(&mmse_hard(&inst.h, &inst.y, inst.sigma2, inst.modulation)?);
    let mut z = vec![C64::new(0.0, 0.0); nt];
    for ell in (0..plan.num_blocks()).rev() {
        let range = plan.block_range(ell);
        let y_bar: Vec<C64> = range
            .clone()
            .map(|i| {
                let mut v = plan.y_rot[i];
                for j in range.end..nt {
                    v -= plan.r[(i, j)] * z[j];
                }
                v
            })
            .collect();
        let n = range.len();
        let mut labels = vec![0usize; n];
        let mut best = (f64::INFINITY, vec![]);
        'outer: loop {
            let cand: Vec<C64> = labels.iter().map(|&l| pts[l]).collect();
            let mut c = 0.0;
            for (a, i) in range.clone().enumerate() {
                let mut v = y_bar[a];
                for (bb, j) in range.clone().enumerate().skip(a) {
                    v -= plan.r[(i, j)] * cand[bb];
                }
                c += v.norm_sqr() + lambda * (cand[a] - anchor[i]).norm_sqr();
            }
            if c < best.0 {
                best = (c, cand);
            }
            // Last symbol varies fastest: lexicographic order on labels.
            let mut k = n;
            while k > 0 {
                k -= 1;
                labels[k] += 1;
                if labels[k] < pts.len() {
                    continue 'outer;
                }
                labels[k] = 0;
            }
            break;
        }
        z[range].copy_from_slice(&best.1);
    }
    Ok(plan.unpermute(&z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, total: usize, failures: usize) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: failures == 0,
        detail: format!("{}/{} agree", total - failures, total),
    }
}

/// Runs the desk-scale suites with `n` instances each.
pub fn run_checks(n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    // Blockwise detector with full lists versus brute-force ML, 4x4 16QAM.
    let mut cfg = DetectorConfig::table1(SolverMode::Exhaustive).unregularized();
    cfg.list_width = 256;
    cfg.k_best = 65_536;
    let mut bad = 0;
    for i in 0..n {
        let inst = generate_instance(4, 4, Modulation::Qam16, 10.0, &mut RngStream::derive(seed, &[1, i as u64]))?;
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0))?;
        bad += usize::from(d.x_hat != brute_force_ml(&inst));
    }
    out.push(check("blockwise-ml-4x4-qam16", n, bad));

    // Symbolwise K-best with exhaustive breadth versus ML, 3x3 QPSK.
    let mut bad = 0;
    for i in 0..n {
        let inst = generate_instance(3, 3, Modulation::Qpsk, 4.0, &mut RngStream::derive(seed, &[2, i as u64]))?;
        bad += usize::from(detect_kbest_classical(&inst, 4096)? != brute_force_ml(&inst));
    }
    out.push(check("kbest-ml-3x3-qpsk", n, bad));

    // T = K = 1 versus straight-line greedy SIC.
    let mut bad = 0;
    for i in 0..n {
        let inst = generate_instance(8, 8, Modulation::Qam16, 12.0, &mut RngStream::derive(seed, &[3, i as u64]))?;
        let mut cfg = DetectorConfig::table1(SolverMode::Exhaustive);
        cfg.list_width = 1;
        cfg.k_best = 1;
        let d = detect(&inst, &cfg, None, &mut RngStream::new(0))?;
        bad += usize::from(d.x_hat != greedy_block_sic(&inst, 2, cfg.regularization)?);
    }
    out.push(check("greedy-sic-8x8", n, bad));

    // Spin polynomial versus direct block metric at every assignment.
    let mut bad = 0;
    for i in 0..n {
        let mut rng = RngStream::derive(seed, &[4, i as u64]);
        let inst = generate_instance(4, 4, Modulation::Qam16, 14.0, &mut rng)?;
        let plan = preprocess(&inst.h, &inst.y, 2)?;
        let anchor = plan.permute(&mmse_hard(&inst.h, &inst.y, inst.sigma2, inst.modulation)?);
        let prob = BlockProblem::new(
            1,
            crate::objective::block_observation(&plan, 1, &[])?,
            plan.diag_block(1),
            Some(anchor[plan.block_range(1)].to_vec()),
            0.2,
            Modulation::Qam16,
        )?;
        let poly = extract_hubo(&prob)?;
        let worst = (0..256usize)
            .map(|k| {
                let s = crate::constellation::index_spins(k, 8);
                (poly.evaluate(&s) - block_cost(&prob, &s).unwrap_or(f64::INFINITY)).abs()
            })
            .fold(0.0, f64::max);
        let top = solve_block_exhaustive(&prob, 1)?.candidates[0].index;
        let table = prob.cost_table()?;
        let direct_min = (0..256usize).min_by(|&a, &b| table[a].total_cmp(&table[b])).unwrap_or(0);
        bad += usize::from(!(worst < 1e-9) || top != direct_min);
    }
    out.push(check("hubo-exact-q8", n, bad));

    Ok(out)
}
