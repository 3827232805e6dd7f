//! Classical reference detectors: matched filter, linear MMSE and
//! symbolwise K-best.

use crate::constellation::{symbols_to_bits, slice};
use crate::error::{Error, Result};
use crate::model::linalg::{dot_conj, norm_sqr, C64};
use crate::model::DetectionInstance;
use crate::objective::{block_observation, mmse_hard};
use crate::preprocess::preprocess;

/// Per-column normalized correlation `h_i^H y / ||h_i||^2`, sliced.
pub fn detect_mf(inst: &DetectionInstance) -> Result<Vec<C64>> {
    let est = (0..inst.nt())
        .map(|i| {
            let h = inst.h.column(i);
            let e = norm_sqr(&h);
            if e == 0.0 {
                return Err(Error::RankDeficient {
                    column: i,
                    pivot: 0.0,
                    tol: 0.0,
                });
            }
            Ok(dot_conj(&h, &inst.y) / e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(slice(&est, inst.modulation))
}

/// Sliced `(H^H H + sigma2 I)^{-1} H^H y`.
pub fn detect_mmse(inst: &DetectionInstance) -> Result<Vec<C64>> {
    mmse_hard(&inst.h, &inst.y, inst.sigma2, inst.modulation)
}

/// Symbolwise K-best over the sorted QR factorization with full `M`-way
/// child expansion. Returns the decision in antenna order.
pub fn detect_kbest_classical(inst: &DetectionInstance, k: usize) -> Result<Vec<C64>> {
    if k == 0 {
        return Err(Error::Config("K must be >= 1".into()));
    }
    let modulation = inst.modulation;
    let plan = preprocess(&inst.h, &inst.y, 1)?;
    let points = modulation.points();
    // (suffix, ped, bits)
    let mut frontier: Vec<(Vec<C64>, f64, Vec<u8>)> = vec![(Vec::new(), 0.0, Vec::new())];
    for i in (0..plan.nt()).rev() {
        let rii = plan.r[(i, i)];
        let mut children = Vec::with_capacity(frontier.len() * points.len());
        for (parent, (suffix, ped, bits)) in frontier.iter().enumerate() {
            let y_bar = block_observation(&plan, i, suffix)?[0];
            for &s in points {
                let delta = (y_bar - rii * s).norm_sqr();
                let mut z = vec![s];
                z.extend_from_slice(suffix);
                let mut b = symbols_to_bits(&[s], modulation);
                b.extend_from_slice(bits);
                children.push(((z, ped + delta, b), parent));
            }
        }
        children.sort_by(|a, b| {
            a.0 .1
                .total_cmp(&b.0 .1)
                .then_with(|| a.0 .2.cmp(&b.0 .2))
                .then(a.1.cmp(&b.1))
        });
        children.truncate(k);
        frontier = children.into_iter().map(|(c, _)| c).collect();
    }
    Ok(plan.unpermute(&frontier[0].0))
}
