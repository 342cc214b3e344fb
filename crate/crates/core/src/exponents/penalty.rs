//! Multistart exterior-penalty solver for the universal exponent programs.
//!
//! Program: minimize `Σ_i D(q_i‖t_i)` over tuples of pmfs subject to
//! `G_L(q) ≥ G_R(q)`, where `G_X(q) = Σ_{i∈X} D(q_i‖mean_{j∈X} q_j)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Certification, Diagnostics, ExponentResult, SolverKind};
use crate::error::{Error, Result};
use crate::simplex::Pmf;

const LOG_FLOOR: f64 = 1e-16;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyOptions {
    /// Random Dirichlet starts, on top of the structured ones.
    pub restarts: usize,
    pub seed: u64,
    pub rounds: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_inner_iterations: usize,
    pub inner_tolerance: f64,
    pub feasibility_tolerance: f64,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            restarts: 20,
            seed: 0,
            rounds: 6,
            initial_penalty: 1.0,
            penalty_growth: 10.0,
            max_inner_iterations: 3000,
            inner_tolerance: 1e-11,
            feasibility_tolerance: 1e-8,
        }
    }
}

pub(crate) struct Program {
    m: usize,
    k: usize,
    targets: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn ln_clamped(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

fn kl_block(q: &[f64], t: &[f64]) -> f64 {
    q.iter()
        .zip(t)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

impl Program {
    pub(crate) fn new(targets: Vec<Pmf>, left: Vec<usize>, right: Vec<usize>) -> Self {
        let m = targets.len();
        let k = targets[0].alphabet_size();
        let targets = targets
            .iter()
            .flat_map(|t| t.probs().iter().copied())
            .collect();
        Program {
            m,
            k,
            targets,
            left,
            right,
        }
    }

    fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[i * self.k..(i + 1) * self.k]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (0..self.m)
            .map(|i| kl_block(self.block(x, i), self.block(&self.targets, i)))
            .sum()
    }

    fn mean(&self, x: &[f64], set: &[usize]) -> Vec<f64> {
        let mut mix = vec![0.0; self.k];
        for &i in set {
            for (m, q) in mix.iter_mut().zip(self.block(x, i)) {
                *m += q;
            }
        }
        let w = 1.0 / set.len() as f64;
        mix.iter_mut().for_each(|m| *m *= w);
        mix
    }

    fn gap(&self, x: &[f64], set: &[usize]) -> f64 {
        let mix = self.mean(x, set);
        set.iter().map(|&i| kl_block(self.block(x, i), &mix)).sum()
    }

    /// `h(x) = G_L − G_R`; feasible when nonnegative.
    fn constraint(&self, x: &[f64]) -> f64 {
        self.gap(x, &self.left) - self.gap(x, &self.right)
    }

    fn add_gap_gradient(&self, x: &[f64], set: &[usize], sign: f64, grad: &mut [f64]) {
        let mix = self.mean(x, set);
        for &i in set {
            for y in 0..self.k {
                let q = x[i * self.k + y];
                grad[i * self.k + y] += sign * (ln_clamped(q) - ln_clamped(mix[y]));
            }
        }
    }

    fn constraint_gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.add_gap_gradient(x, &self.left, 1.0, grad);
        self.add_gap_gradient(x, &self.right, -1.0, grad);
    }

    fn penalized(&self, x: &[f64], rho: f64) -> f64 {
        let v = (-self.constraint(x)).max(0.0);
        self.objective(x) + rho * v * v
    }

    fn penalized_gradient(&self, x: &[f64], rho: f64, grad: &mut [f64]) {
        let h = self.constraint(x);
        if h < 0.0 {
            self.constraint_gradient(x, grad);
            // d/dx ρ·h² = 2ρh·∇h
            grad.iter_mut().for_each(|g| *g *= 2.0 * rho * h);
        } else {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g += ln_clamped(x[j]) - self.targets[j].ln() + 1.0;
        }
    }

    fn project(&self, x: &mut [f64]) {
        for block in x.chunks_mut(self.k) {
            project_simplex(block);
        }
    }
}

/// Euclidean projection onto the probability simplex, in place.
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
/// Returns the number of iterations taken.
fn minimize_round(p: &Program, x: &mut [f64], rho: f64, opts: &PenaltyOptions) -> usize {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    p.penalized_gradient(x, rho, &mut g);
    let mut f = p.penalized(x, rho);
    let mut alpha = 1.0 / g.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    for it in 0..opts.max_inner_iterations {
        let mut accepted = false;
        let mut step = alpha;
        let mut f_trial = f;
        for _ in 0..MAX_BACKTRACK {
            for j in 0..n {
                trial[j] = x[j] - step * g[j];
            }
            p.project(&mut trial);
            let descent: f64 = (0..n).map(|j| g[j] * (trial[j] - x[j])).sum();
            f_trial = p.penalized(&trial, rho);
            if f_trial <= f + ARMIJO * descent {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return it;
        }
        let s: Vec<f64> = (0..n).map(|j| trial[j] - x[j]).collect();
        let moved = s.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        p.penalized_gradient(&trial, rho, &mut g_new);
        let y: Vec<f64> = (0..n).map(|j| g_new[j] - g[j]).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(1e-12, 1e6)
        } else {
            1e6
        };
        x.copy_from_slice(&trial);
        std::mem::swap(&mut g, &mut g_new);
        let decrease = f - f_trial;
        f = f_trial;
        if moved <= opts.inner_tolerance
            || decrease.abs() <= 1e-16 * f.abs().max(1.0) && moved <= 1e-9
        {
            return it + 1;
        }
    }
    opts.max_inner_iterations
}

/// Pushes an infeasible point along `∇h` until `h ≥ 0`, taking the smallest
/// such step found by bisection. Returns `None` when no step restores
/// feasibility.
fn restore(p: &Program, x: &[f64]) -> Option<Vec<f64>> {
    let mut cur = x.to_vec();
    let mut dir = vec![0.0; x.len()];
    let moved = |base: &[f64], dir: &[f64], t: f64| {
        let mut y: Vec<f64> = base.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        p.project(&mut y);
        y
    };
    for _ in 0..8 {
        if p.constraint(&cur) >= 0.0 {
            return Some(cur);
        }
        p.constraint_gradient(&cur, &mut dir);
        let mut hi = 1e-9;
        let mut found = false;
        for _ in 0..80 {
            if p.constraint(&moved(&cur, &dir, hi)) >= 0.0 {
                found = true;
                break;
            }
            hi *= 2.0;
            if hi > 1e3 {
                break;
            }
        }
        if !found {
            // Take the best point on the ray and retry from there.
            let mut best_t = 0.0;
            let mut best_h = p.constraint(&cur);
            let mut t = 1e-6;
            while t <= 1e3 {
                let h = p.constraint(&moved(&cur, &dir, t));
                if h > best_h {
                    best_h = h;
                    best_t = t;
                }
                t *= 2.0;
            }
            if best_t == 0.0 {
                return None;
            }
            cur = moved(&cur, &dir, best_t);
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if p.constraint(&moved(&cur, &dir, mid)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Some(moved(&cur, &dir, hi));
    }
    (p.constraint(&cur) >= 0.0).then_some(cur)
}

fn dirichlet_start(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(m * k);
    for _ in 0..m {
        let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        x.extend(e.iter().map(|v| v / s));
    }
    x
}

struct Outcome {
    value: f64,
    point: Vec<f64>,
    iterations: usize,
}

fn solve_from(p: &Program, mut x: Vec<f64>, opts: &PenaltyOptions) -> Option<Outcome> {
    let mut iterations = 0;
    let mut rho = opts.initial_penalty;
    for _ in 0..opts.rounds {
        iterations += minimize_round(p, &mut x, rho, opts);
        rho *= opts.penalty_growth;
    }
    let x = restore(p, &x)?;
    Some(Outcome {
        value: p.objective(&x),
        point: x,
        iterations,
    })
}

/// Runs the structured starts, then `opts.restarts` seeded Dirichlet starts,
/// and reports the best feasible tuple found.
pub(crate) fn solve_multistart(
    p: &Program,
    structured: &[Vec<Pmf>],
    opts: &PenaltyOptions,
) -> Result<ExponentResult> {
    let mut starts: Vec<Vec<f64>> = structured
        .iter()
        .map(|tuple| {
            tuple
                .iter()
                .flat_map(|q| q.probs().iter().copied())
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        starts.push(dirichlet_start(&mut rng, p.m, p.k));
    }

    let mut best: Option<Outcome> = None;
    let mut iterations = 0;
    let mut worst_gap: f64 = 0.0;
    for start in starts {
        // A feasible structured start is itself a candidate.
        if p.constraint(&start) >= 0.0 {
            let value = p.objective(&start);
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Outcome {
                    value,
                    point: start.clone(),
                    iterations: 0,
                });
            }
        }
        match solve_from(p, start, opts) {
            Some(out) => {
                iterations += out.iterations;
                if best.as_ref().is_none_or(|b| out.value < b.value) {
                    best = Some(out);
                }
            }
            None => worst_gap = f64::INFINITY,
        }
    }
    let restarts = structured.len() + opts.restarts;
    let best = best.ok_or(Error::NonConvergence {
        gap: worst_gap,
        restarts,
    })?;
    let gap = (-p.constraint(&best.point)).max(0.0);
    if gap > opts.feasibility_tolerance {
        return Err(Error::NonConvergence { gap, restarts });
    }
    let minimizer = best
        .point
        .chunks(p.k)
        .map(|c| Pmf::from_vec_unchecked(c.to_vec()))
        .collect();
    Ok(ExponentResult {
        value: best.value.max(0.0),
        solver: SolverKind::MultistartPenalty,
        diagnostics: Diagnostics {
            iterations,
            restarts,
            feasibility_gap: gap,
            duality_gap: None,
            certification: Certification::UpperBound,
            minimizer,
        },
    })
}
