//! Minimization of `2B(μ, q)` over the KL ball `{q : D(q‖π) ≤ r}` by
//! Frank-Wolfe. The linear subproblem has an exponential-tilt solution
//! `s ∝ π·exp(−θg)`, with `θ` found by bisection on `D(s‖π) = r`.

use serde::{Deserialize, Serialize};

use super::{Certification, Diagnostics, ExponentResult, SolverKind};
use crate::error::{Error, Result};
use crate::simplex::{bhattacharyya_coefficient_slices, kl, kl_slices, Pmf};

const DUALITY_GAP_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 20_000;
const GOLDEN_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlBallSpec {
    center: Pmf,
    radius: f64,
}

impl KlBallSpec {
    pub fn new(center: Pmf, radius: f64) -> Result<Self> {
        center.require_full_support()?;
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(KlBallSpec { center, radius })
    }

    pub fn center(&self) -> &Pmf {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, q: &Pmf) -> bool {
        kl_slices(q.probs(), self.center.probs()) <= self.radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "mus", rename_all = "kebab-case")]
pub enum BallObjective {
    /// `2B(μ, q)`.
    TwoBSingle(Pmf),
    /// `min_i 2B(μ_i, q)`.
    MinTwoBMulti(Vec<Pmf>),
}

fn two_b(mu: &[f64], q: &[f64]) -> f64 {
    -2.0 * bhattacharyya_coefficient_slices(mu, q).ln()
}

/// Solution `s` of `min ⟨g, s⟩` over the ball.
fn linear_oracle(g: &[f64], pi: &[f64], r: f64) -> Vec<f64> {
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let tilt = |theta: f64| -> Vec<f64> {
        let w: Vec<f64> = g
            .iter()
            .zip(pi)
            .map(|(&gy, &p)| p * (-theta * (gy - g_min)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    };
    // As θ → ∞ the tilt tends to π restricted to the argmin set; if that
    // point is in the ball it is the solution.
    let scale = g
        .iter()
        .map(|v| (v - g_min).abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let ties: Vec<bool> = g.iter().map(|&v| v - g_min <= 1e-14 * scale).collect();
    let tie_mass: f64 = pi
        .iter()
        .zip(&ties)
        .filter(|(_, &t)| t)
        .map(|(p, _)| p)
        .sum();
    if -tie_mass.ln() <= r {
        return pi
            .iter()
            .zip(&ties)
            .map(|(&p, &t)| if t { p / tie_mass } else { 0.0 })
            .collect();
    }
    let mut hi = 1.0 / scale;
    while kl_slices(&tilt(hi), pi) < r {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kl_slices(&tilt(mid), pi) <= r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    tilt(lo)
}

fn golden_section(f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(0.0, f(0.0)), (mid, f(mid)), (1.0, f(1.0))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
        .0
}

struct BallSolution {
    value: f64,
    point: Vec<f64>,
    gap: f64,
    iterations: usize,
}

fn min_two_b_over_ball(mu: &Pmf, ball: &KlBallSpec) -> Result<BallSolution> {
    let pi = ball.center.probs();
    let mu_p = mu.probs();
    let r = ball.radius;
    if r == 0.0 {
        return Ok(BallSolution {
            value: two_b(mu_p, pi),
            point: pi.to_vec(),
            gap: 0.0,
            iterations: 0,
        });
    }
    if kl(mu, &ball.center)? <= r {
        return Ok(BallSolution {
            value: 0.0,
            point: mu_p.to_vec(),
            gap: 0.0,
            iterations: 0,
        });
    }
    let mut x = pi.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut gap = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let bc = bhattacharyya_coefficient_slices(mu_p, &x);
        for y in 0..x.len() {
            g[y] = -(mu_p[y] / x[y]).sqrt() / bc;
        }
        let s = linear_oracle(&g, pi, r);
        gap = g
            .iter()
            .zip(x.iter().zip(&s))
            .map(|(gy, (xy, sy))| gy * (xy - sy))
            .sum();
        if gap <= DUALITY_GAP_TOL {
            return Ok(BallSolution {
                value: two_b(mu_p, &x),
                point: x,
                gap: gap.max(0.0),
                iterations: it,
            });
        }
        let along =
            |t: f64| -> Vec<f64> { x.iter().zip(&s).map(|(a, b)| a + t * (b - a)).collect() };
        let t = golden_section(|t| two_b(mu_p, &along(t)));
        if t == 0.0 {
            // No progress possible along the FW direction at working precision.
            break;
        }
        x = along(t);
    }
    if gap <= 10.0 * DUALITY_GAP_TOL {
        return Ok(BallSolution {
            value: two_b(mu_p, &x),
            point: x,
            gap,
            iterations: MAX_ITERATIONS,
        });
    }
    Err(Error::NonConvergence { gap, restarts: 0 })
}

/// Minimizes the convex objective over the KL ball, reporting the Frank-Wolfe
/// duality gap. The multi-law objective is solved per law.
pub fn min_over_kl_ball(objective: &BallObjective, ball: &KlBallSpec) -> Result<ExponentResult> {
    let mus: &[Pmf] = match objective {
        BallObjective::TwoBSingle(mu) => std::slice::from_ref(mu),
        BallObjective::MinTwoBMulti(mus) => mus,
    };
    if mus.is_empty() {
        return Err(Error::InvalidParameter(
            "objective needs at least one law".into(),
        ));
    }
    let mut best: Option<BallSolution> = None;
    let mut iterations = 0;
    for mu in mus {
        if mu.alphabet_size() != ball.center.alphabet_size() {
            return Err(Error::DimensionMismatch {
                left: mu.alphabet_size(),
                right: ball.center.alphabet_size(),
            });
        }
        let sol = min_two_b_over_ball(mu, ball)?;
        iterations += sol.iterations;
        if best.as_ref().is_none_or(|b| sol.value < b.value) {
            best = Some(sol);
        }
    }
    let best = best.unwrap();
    Ok(ExponentResult {
        value: best.value.max(0.0),
        solver: SolverKind::KlBallConvex,
        diagnostics: Diagnostics {
            iterations,
            restarts: 0,
            feasibility_gap: (kl_slices(&best.point, ball.center.probs()) - ball.radius).max(0.0),
            duality_gap: Some(best.gap),
            certification: Certification::Exact,
            minimizer: vec![Pmf::from_vec_unchecked(best.point)],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::bhattacharyya;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    /// Dense scan over binary q inside the ball.
    fn grid_min(mu: &Pmf, pi: &Pmf, r: f64, steps: usize) -> f64 {
        (0..=steps)
            .map(|i| {
                let a = i as f64 / steps as f64;
                [a, 1.0 - a]
            })
            .filter(|q| kl_slices(q, pi.probs()) <= r)
            .map(|q| two_b(mu.probs(), &q))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn degenerate_radii() {
        let mu = pmf(&[0.3, 0.7]);
        let pi = pmf(&[0.7, 0.3]);
        let obj = BallObjective::TwoBSingle(mu.clone());
        let at_center = min_over_kl_ball(&obj, &KlBallSpec::new(pi.clone(), 0.0).unwrap()).unwrap();
        assert_eq!(at_center.value, 2.0 * bhattacharyya(&mu, &pi).unwrap());
        let r = kl(&mu, &pi).unwrap();
        assert_eq!(
            min_over_kl_ball(&obj, &KlBallSpec::new(pi.clone(), r).unwrap())
                .unwrap()
                .value,
            0.0
        );
        assert!(KlBallSpec::new(pi.clone(), -1.0).is_err());
        assert!(KlBallSpec::new(pmf(&[1.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn matches_binary_grid() {
        let mu = pmf(&[0.3, 0.7]);
        let pi = pmf(&[0.7, 0.3]);
        let obj = BallObjective::TwoBSingle(mu.clone());
        for r in [1e-4, 0.01, 0.05, 0.1, 0.2, 0.3] {
            let res = min_over_kl_ball(&obj, &KlBallSpec::new(pi.clone(), r).unwrap()).unwrap();
            let grid = grid_min(&mu, &pi, r, 10_000);
            assert!(res.value <= grid + 1e-12, "r={r}: {} > {grid}", res.value);
            assert!(grid - res.value < 1e-3, "r={r}: {} vs {grid}", res.value);
            assert!(res.diagnostics.duality_gap.unwrap() <= 1e-8);
            assert!(res.diagnostics.feasibility_gap <= 1e-12);
        }
    }

    #[test]
    fn ternary_solution_is_on_boundary() {
        let mu = pmf(&[0.6, 0.3, 0.1]);
        let pi = pmf(&[0.2, 0.3, 0.5]);
        let ball = KlBallSpec::new(pi.clone(), 0.05).unwrap();
        let res = min_over_kl_ball(&BallObjective::TwoBSingle(mu.clone()), &ball).unwrap();
        let q = &res.diagnostics.minimizer[0];
        assert!((kl(q, &pi).unwrap() - 0.05).abs() < 1e-9);
        assert!(res.value < 2.0 * bhattacharyya(&mu, &pi).unwrap());
        assert!(res.value > 0.0);
    }

    #[test]
    fn multi_objective_takes_min() {
        let pi = pmf(&[0.7, 0.3]);
        let a = pmf(&[0.3, 0.7]);
        let b = pmf(&[0.5, 0.5]);
        let ball = KlBallSpec::new(pi.clone(), 0.01).unwrap();
        let va = min_over_kl_ball(&BallObjective::TwoBSingle(a.clone()), &ball)
            .unwrap()
            .value;
        let vb = min_over_kl_ball(&BallObjective::TwoBSingle(b.clone()), &ball)
            .unwrap()
            .value;
        let vm = min_over_kl_ball(&BallObjective::MinTwoBMulti(vec![a, b]), &ball)
            .unwrap()
            .value;
        assert_eq!(vm, va.min(vb));
    }
}
