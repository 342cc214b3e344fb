//! Error exponents: closed forms, constrained programs, and lower bounds.
//!
//! | function | exponent | solver |
//! |---|---|---|
//! | [`exponent_both_known`] | `2B(μ, π)` | closed form |
//! | [`exponent_multi_known`] | `min_{i<j} C(μ_i×π, π×μ_j)` | 1-D search |
//! | [`exponent_multi_typ_known`] | `min_i 2B(μ_i, π)` | closed form |
//! | [`exponent_univ_single`] | single-outlier universal program | multistart penalty |
//! | [`exponent_univ_multi`] | `T`-outlier universal program | multistart penalty |
//! | [`univ_single_lower_bound`], [`univ_multi_lower_bound`] | KL-ball lower bounds | Frank-Wolfe |
//!
//! The universal programs have nonconvex feasible sets, so the penalty solver
//! returns the best feasible point it finds: an upper bound on the true
//! minimum. [`grid_oracle_univ_single`] certifies it for binary alphabets
//! with three coordinates.

use serde::Serialize;

use crate::detectors::combinations;
use crate::error::{Error, Result};
use crate::simplex::{bhattacharyya, chernoff_pair_product, geometric_midpoint, log_min_mass, Pmf};

mod grid;
mod kl_ball;
mod penalty;

pub use grid::grid_oracle_univ_single;
pub use kl_ball::{min_over_kl_ball, BallObjective, KlBallSpec};
pub use penalty::PenaltyOptions;

use penalty::{solve_multistart, Program};

/// Which method produced an [`ExponentResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    ClosedForm,
    OneDimSearch,
    KlBallConvex,
    MultistartPenalty,
    GridOracle,
}

/// How much a reported value is known to be worth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Exact up to floating point or the stated duality gap.
    Exact,
    /// Value of a feasible point of a minimization; the true minimum is no larger.
    UpperBound,
    /// Minimum over a finite grid of feasible points.
    GridMinimum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub restarts: usize,
    /// Constraint violation of the reported minimizer (0 when feasible).
    pub feasibility_gap: f64,
    /// Frank-Wolfe duality gap, for the convex KL-ball solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    pub certification: Certification,
    /// Best minimizer tuple, one pmf per program variable.
    pub minimizer: Vec<Pmf>,
}

impl Diagnostics {
    fn closed_form() -> Self {
        Diagnostics {
            iterations: 0,
            restarts: 0,
            feasibility_gap: 0.0,
            duality_gap: None,
            certification: Certification::Exact,
            minimizer: Vec::new(),
        }
    }
}

/// Value of an exponent formula or program, in nats per sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentResult {
    pub value: f64,
    pub solver: SolverKind,
    pub diagnostics: Diagnostics,
}

impl ExponentResult {
    fn closed_form(value: f64) -> Self {
        ExponentResult {
            value,
            solver: SolverKind::ClosedForm,
            diagnostics: Diagnostics::closed_form(),
        }
    }
}

const SAME_LAW_TOL: f64 = 1e-12;

fn same_law(a: &Pmf, b: &Pmf) -> bool {
    a.probs()
        .iter()
        .zip(b.probs())
        .all(|(x, y)| (x - y).abs() <= SAME_LAW_TOL)
}

fn check_model(mus: &[Pmf], pi: &Pmf) -> Result<()> {
    pi.require_full_support()?;
    for mu in mus {
        if mu.alphabet_size() != pi.alphabet_size() {
            return Err(Error::DimensionMismatch {
                left: mu.alphabet_size(),
                right: pi.alphabet_size(),
            });
        }
        mu.require_full_support()?;
        if same_law(mu, pi) {
            return Err(Error::DegenerateModel);
        }
    }
    Ok(())
}

fn two_b(mu: &Pmf, pi: &Pmf) -> f64 {
    2.0 * bhattacharyya(mu, pi).expect("alphabet sizes checked")
}

/// Optimal exponent with both laws known, `2B(μ, π)`.
pub fn exponent_both_known(mu: &Pmf, pi: &Pmf) -> Result<ExponentResult> {
    check_model(std::slice::from_ref(mu), pi)?;
    Ok(ExponentResult::closed_form(two_b(mu, pi)))
}

/// Optimal exponent with every outlier law and π known:
/// `min_{i<j} C(μ_i(y)π(y′), π(y)μ_j(y′))`.
pub fn exponent_multi_known(mus: &[Pmf], pi: &Pmf) -> Result<ExponentResult> {
    if mus.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two outlier laws".into(),
        ));
    }
    check_model(mus, pi)?;
    let mut best = f64::INFINITY;
    for i in 0..mus.len() {
        for j in i + 1..mus.len() {
            best = best.min(chernoff_pair_product(&mus[i], &mus[j], pi)?);
        }
    }
    Ok(ExponentResult {
        value: best,
        solver: SolverKind::OneDimSearch,
        diagnostics: Diagnostics::closed_form(),
    })
}

/// Exponent of the known-π multi-outlier test, `min_i 2B(μ_i, π)`.
pub fn exponent_multi_typ_known(mus: &[Pmf], pi: &Pmf) -> Result<ExponentResult> {
    if mus.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one outlier law".into(),
        ));
    }
    check_model(mus, pi)?;
    let value = mus
        .iter()
        .map(|mu| two_b(mu, pi))
        .fold(f64::INFINITY, f64::min);
    Ok(ExponentResult::closed_form(value))
}

/// Exponent of the universal single-outlier test: the minimum of
/// `D(q_1‖μ) + Σ_{j≥2} D(q_j‖π)` over tuples whose universal statistic for
/// coordinate 1 is at least the one for coordinate 2.
pub fn exponent_univ_single(
    mu: &Pmf,
    pi: &Pmf,
    m: usize,
    opts: &PenaltyOptions,
) -> Result<ExponentResult> {
    if m < 3 {
        return Err(Error::InvalidParameter(format!("need M >= 3, got {m}")));
    }
    check_model(std::slice::from_ref(mu), pi)?;
    let mut targets = vec![pi.clone(); m];
    targets[0] = mu.clone();
    let program = Program::new(
        targets,
        (1..m).collect(),
        (0..m).filter(|&j| j != 1).collect(),
    );

    let mid = geometric_midpoint(mu, pi)?;
    let mut paired = vec![pi.clone(); m];
    paired[0] = mid.clone();
    paired[1] = mid;
    let mut unconstrained = vec![pi.clone(); m];
    unconstrained[0] = mu.clone();
    solve_multistart(&program, &[paired, unconstrained], opts)
}

/// The identical-outlier `T`-subset program for one ordered pair `(S, S′)`.
fn pair_program(mus: &[Pmf], pi: &Pmf, s: &[usize], s2: &[usize]) -> (Program, Vec<Vec<Pmf>>) {
    let m = mus.len();
    let targets: Vec<Pmf> = (0..m)
        .map(|i| {
            if s.contains(&i) {
                mus[i].clone()
            } else {
                pi.clone()
            }
        })
        .collect();
    let left = (0..m).filter(|i| !s.contains(i)).collect();
    let right = (0..m).filter(|i| !s2.contains(i)).collect();

    // Pair each i ∈ S∖S′ with a j ∈ S′∖S and put both at the midpoint of
    // (μ_i, π); the swap symmetry makes the constraint hold with equality.
    let only_s: Vec<usize> = s.iter().copied().filter(|i| !s2.contains(i)).collect();
    let only_s2: Vec<usize> = s2.iter().copied().filter(|i| !s.contains(i)).collect();
    let mut paired = targets.clone();
    for (&i, &j) in only_s.iter().zip(&only_s2) {
        let mid = geometric_midpoint(&mus[i], pi).expect("full support");
        paired[i] = mid.clone();
        paired[j] = mid;
    }
    (
        Program::new(targets.clone(), left, right),
        vec![paired, targets],
    )
}

/// Exponent of the universal `T`-outlier test: outer minimum over ordered
/// pairs `S ≠ S′` of size `T` of the inner program for that pair.
pub fn exponent_univ_multi(
    mus: &[Pmf],
    pi: &Pmf,
    t: usize,
    opts: &PenaltyOptions,
) -> Result<ExponentResult> {
    let m = mus.len();
    if t < 1 || 2 * t >= m {
        return Err(Error::InvalidParameter(format!(
            "outlier count {t} violates 1 <= T < M/2 for M = {m}"
        )));
    }
    check_model(mus, pi)?;
    let subsets = combinations(m, t);
    let mut best: Option<ExponentResult> = None;
    let mut iterations = 0;
    let mut restarts = 0;
    for s in &subsets {
        for s2 in &subsets {
            if s == s2 {
                continue;
            }
            let (program, starts) = pair_program(mus, pi, s, s2);
            let r = solve_multistart(&program, &starts, opts)?;
            iterations += r.diagnostics.iterations;
            restarts += r.diagnostics.restarts;
            if best.as_ref().is_none_or(|b| r.value < b.value) {
                best = Some(r);
            }
        }
    }
    let mut best = best.expect("at least two subsets");
    best.diagnostics.iterations = iterations;
    best.diagnostics.restarts = restarts;
    Ok(best)
}

/// Lower bound `min { 2B(μ, q) : D(q‖π) ≤ (2B(μ,π) + C_π)/(M−1) }` on the
/// universal single-outlier exponent.
pub fn univ_single_lower_bound(mu: &Pmf, pi: &Pmf, m: usize) -> Result<ExponentResult> {
    if m < 3 {
        return Err(Error::InvalidParameter(format!("need M >= 3, got {m}")));
    }
    check_model(std::slice::from_ref(mu), pi)?;
    let radius = (two_b(mu, pi) + log_min_mass(pi)) / (m as f64 - 1.0);
    let ball = KlBallSpec::new(pi.clone(), radius)?;
    min_over_kl_ball(&BallObjective::TwoBSingle(mu.clone()), &ball)
}

/// Lower bound on the universal `T`-outlier exponent: minimum of
/// `min_i 2B(μ_i, q)` over `D(q‖π) ≤ (min_{i<j} C(μ_i×π, π×μ_j) + T·C_π)/(M−T)`,
/// where `M = mus.len()`.
pub fn univ_multi_lower_bound(mus: &[Pmf], pi: &Pmf, t: usize) -> Result<ExponentResult> {
    let m = mus.len();
    if t < 1 || 2 * t >= m {
        return Err(Error::InvalidParameter(format!(
            "outlier count {t} violates 1 <= T < M/2 for M = {m}"
        )));
    }
    let pairwise = exponent_multi_known(mus, pi)?.value;
    let radius = (pairwise + t as f64 * log_min_mass(pi)) / (m - t) as f64;
    let ball = KlBallSpec::new(pi.clone(), radius)?;
    min_over_kl_ball(&BallObjective::MinTwoBMulti(mus.to_vec()), &ball)
}
