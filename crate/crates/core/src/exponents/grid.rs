//! Exhaustive grid search for the universal single-outlier program on a
//! binary alphabet with three coordinates.

use super::{check_model, Certification, Diagnostics, ExponentResult, SolverKind};
use crate::error::{Error, Result};
use crate::simplex::{kl_slices, Pmf};

/// Minimum of `D(q_1‖μ) + D(q_2‖π) + D(q_3‖π)` over grid points `q_i(0) ∈ {0, 1/steps, …, 1}`
/// satisfying `G_{2,3}(q) ≥ G_{1,3}(q)`.
pub fn grid_oracle_univ_single(
    mu: &Pmf,
    pi: &Pmf,
    m: usize,
    steps: usize,
) -> Result<ExponentResult> {
    if mu.alphabet_size() != 2 || m != 3 {
        return Err(Error::InvalidParameter(format!(
            "grid oracle covers K = 2, M = 3 only (got K = {}, M = {m})",
            mu.alphabet_size()
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least 2 steps".into(),
        ));
    }
    check_model(std::slice::from_ref(mu), pi)?;
    let pts: Vec<[f64; 2]> = (0..=steps)
        .map(|i| {
            let a = i as f64 / steps as f64;
            [a, 1.0 - a]
        })
        .collect();
    let to_mu: Vec<f64> = pts.iter().map(|q| kl_slices(q, mu.probs())).collect();
    let to_pi: Vec<f64> = pts.iter().map(|q| kl_slices(q, pi.probs())).collect();
    let g = steps + 1;
    // pair[a·g + b] = D(a‖m) + D(b‖m), m the midpoint of a and b.
    let mut pair = vec![0.0; g * g];
    for a in 0..g {
        for b in 0..=a {
            let mid = [0.5 * (pts[a][0] + pts[b][0]), 0.5 * (pts[a][1] + pts[b][1])];
            let v = kl_slices(&pts[a], &mid) + kl_slices(&pts[b], &mid);
            pair[a * g + b] = v;
            pair[b * g + a] = v;
        }
    }

    let mut best = f64::INFINITY;
    let mut arg = (0, 0, 0);
    for a1 in 0..g {
        for a3 in 0..g {
            let rhs = pair[a1 * g + a3];
            let base = to_mu[a1] + to_pi[a3];
            if base >= best {
                continue;
            }
            for a2 in 0..g {
                if pair[a2 * g + a3] >= rhs {
                    let v = base + to_pi[a2];
                    if v < best {
                        best = v;
                        arg = (a1, a2, a3);
                    }
                }
            }
        }
    }
    let minimizer = [arg.0, arg.1, arg.2]
        .iter()
        .map(|&i| Pmf::from_vec_unchecked(pts[i].to_vec()))
        .collect();
    Ok(ExponentResult {
        value: best,
        solver: SolverKind::GridOracle,
        diagnostics: Diagnostics {
            iterations: g * g * g,
            restarts: 0,
            feasibility_gap: 0.0,
            duality_gap: None,
            certification: Certification::GridMinimum,
            minimizer,
        },
    })
}
