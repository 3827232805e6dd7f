//! Derivative-free training of QAOA angles.

use rand::Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::model::RngStream;
use crate::qaoa::engine::{expectation, CostVector, QaoaParams};

/// Evaluation budgets for direct training.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainBudget {
    /// Objective evaluations per start.
    pub evals_per_start: usize,
    /// Random starts in addition to the linear-ramp start.
    pub restarts: usize,
}

impl TrainBudget {
    /// Per-block online training.
    pub const ONLINE: TrainBudget = TrainBudget {
        evals_per_start: 150,
        restarts: 4,
    };
    /// Offline template construction.
    pub const OFFLINE: TrainBudget = TrainBudget {
        evals_per_start: 500,
        restarts: 8,
    };
}

/// Result of a minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

const INITIAL_STEP: f64 = 0.15;
const SPREAD_TOL: f64 = 1e-12;

/// Nelder-Mead simplex search limited to `max_evals` objective calls.
///
/// The returned point is the best one ever evaluated.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_evals: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0;
    let mut best = Minimum {
        x: x0.to_vec(),
        value: f64::INFINITY,
        evals: 0,
    };
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut Minimum| -> f64 {
        *evals += 1;
        let v = f(x);
        if v < best.value {
            best.value = v;
            best.x = x.to_vec();
        }
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        if i > 0 {
            x[i - 1] += step;
        }
        let v = eval(&x, &mut evals, &mut best);
        simplex.push((x, v));
    }
    if simplex.len() < n + 1 {
        best.evals = evals;
        return best;
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= SPREAD_TOL {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals, &mut best);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals, &mut best);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if evals >= max_evals {
                break;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals, &mut best);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals, &mut best);
                (xc, fc)
            };
            if fc < fr.min(worst.1) {
                simplex[n] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let x: Vec<f64> = x_best.iter().zip(&v.0).map(|(b, xi)| b + 0.5 * (xi - b)).collect();
                    let fx = eval(&x, &mut evals, &mut best);
                    *v = (x, fx);
                }
            }
        }
    }
    best.evals = evals;
    best
}

/// Linear-ramp initialization `gamma_r = 0.2 r/p`, `beta_r = 0.2 (1 - r/p)`.
pub fn ramp_init(p: usize) -> QaoaParams {
    let pf = p as f64;
    QaoaParams {
        gammas: (1..=p).map(|r| 0.2 * r as f64 / pf).collect(),
        betas: (1..=p).map(|r| 0.2 * (1.0 - r as f64 / pf)).collect(),
    }
}

/// Uniform random start with `gamma in [-pi/2, pi/2]`, `beta in [-pi/4, pi/4]`.
pub fn random_init(p: usize, rng: &mut RngStream) -> QaoaParams {
    QaoaParams {
        gammas: (0..p).map(|_| rng.gen_range(-FRAC_PI_2..=FRAC_PI_2)).collect(),
        betas: (0..p).map(|_| rng.gen_range(-FRAC_PI_4..=FRAC_PI_4)).collect(),
    }
}

/// Outcome of [`direct_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: QaoaParams,
    pub value: f64,
    /// Objective evaluations spent across all starts.
    pub evals: usize,
    /// Objective value at each start's initial point.
    pub start_values: Vec<f64>,
}

/// Minimizes the exact QAOA expectation by multi-start Nelder-Mead.
pub fn direct_train(cost: &CostVector, p: usize, budget: TrainBudget, rng: &mut RngStream) -> Result<Trained> {
    if p == 0 {
        return Err(Error::Dimension("QAOA depth must be >= 1".into()));
    }
    if budget.evals_per_start < 2 * p + 1 {
        return Err(Error::Config(format!(
            "budget {} below 2p + 1 = {}",
            budget.evals_per_start,
            2 * p + 1
        )));
    }
    let mut starts = vec![ramp_init(p)];
    starts.extend((0..budget.restarts).map(|_| random_init(p, rng)));

    let mut best: Option<Minimum> = None;
    let mut evals = 0;
    let mut start_values = Vec::with_capacity(starts.len());
    for s in &starts {
        let x0 = s.to_vec();
        let mut first = None;
        let m = nelder_mead(
            |x| {
                let v = expectation(cost, &QaoaParams::from_slice(x));
                first.get_or_insert(v);
                v
            },
            &x0,
            INITIAL_STEP,
            budget.evals_per_start,
        );
        start_values.push(first.unwrap_or(f64::INFINITY));
        evals += m.evals;
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    Ok(Trained {
        params: QaoaParams::from_slice(&best.x),
        value: best.value,
        evals,
        start_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            0.5,
            400,
        );
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] + 2.0).abs() < 1e-4);
        assert!(m.evals <= 400);
    }

    #[test]
    fn nelder_mead_respects_budget() {
        let mut calls = 0;
        let m = nelder_mead(
            |x| {
                calls += 1;
                x.iter().map(|v| v.sin()).sum()
            },
            &[0.3; 6],
            0.2,
            37,
        );
        assert_eq!(calls, m.evals);
        assert!(m.evals <= 37);
    }

    #[test]
    fn trains_single_qubit_z() {
        let cost = CostVector::from_values(vec![1.0, -1.0]).unwrap();
        let t = direct_train(&cost, 1, TrainBudget::ONLINE, &mut RngStream::new(2)).unwrap();
        assert!(t.value <= -0.99, "{}", t.value);
    }

    #[test]
    fn rejects_tiny_budget() {
        let cost = CostVector::from_values(vec![1.0, -1.0]).unwrap();
        let b = TrainBudget {
            evals_per_start: 4,
            restarts: 0,
        };
        assert!(direct_train(&cost, 2, b, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn ramp_shape() {
        let r = ramp_init(4);
        for (g, e) in r.gammas.iter().zip([0.05, 0.1, 0.15, 0.2]) {
            assert!((g - e).abs() < 1e-15);
        }
        assert!((r.betas[0] - 0.15).abs() < 1e-15 && r.betas[3] == 0.0);
    }
}
