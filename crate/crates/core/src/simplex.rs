//! Finite-alphabet probability primitives.
//!
//! Everything downstream is phrased in terms of three divergences between
//! pmfs on a finite alphabet: relative entropy `D(p‖q)`, the Bhattacharyya
//! distance `B(p, q)` and Chernoff information `C(p, q)`. All logarithms are
//! natural, so every value is in nats.
//!
//! The slice-level helpers (`kl_slices`, `chernoff_slices`, ...) skip input
//! validation and are what the scoring and enumeration hot loops call. The
//! `Pmf`-level functions validate and return [`Result`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ p(y) − 1|` accepted by [`Pmf::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A pmf has full support iff every mass is at least this large.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// Golden-section tolerance on the Chernoff exponent `s`.
const CHERNOFF_S_TOL: f64 = 1e-10;

/// Probability mass function on the alphabet `{0, …, K−1}`, `K ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf(Vec<f64>);

impl Pmf {
    /// Validates and wraps a probability vector. Rejects rather than
    /// renormalizes; see [`Pmf::normalize`] for the lenient constructor.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "alphabet size must be at least 2, got {}",
                probs.len()
            )));
        }
        for (y, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidPmf(format!("mass {p} at symbol {y}")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("masses sum to {sum}")));
        }
        Ok(Pmf(probs))
    }

    /// Scales nonnegative weights to sum to one.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::InvalidPmf(format!("weights sum to {sum}")));
        }
        Pmf::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Pmf::new(vec![1.0 / k as f64; k])
    }

    /// Wraps a vector the caller has already shown to be a pmf.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(probs.len() >= 2);
        Pmf(probs)
    }

    pub fn alphabet_size(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn min_mass(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn full_support(&self) -> bool {
        self.min_mass() >= SUPPORT_FLOOR
    }

    pub fn require_full_support(&self) -> Result<()> {
        if self.full_support() {
            Ok(())
        } else {
            Err(Error::NotFullSupport {
                min: self.min_mass(),
                floor: SUPPORT_FLOOR,
            })
        }
    }

    /// Applies the same symbol relabeling `perm[y]` to every mass.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_same_len(self.0.len(), perm.len())?;
        let mut out = vec![0.0; self.0.len()];
        for (y, &target) in perm.iter().enumerate() {
            if target >= out.len() {
                return Err(Error::SymbolOutOfRange {
                    symbol: target,
                    alphabet: out.len(),
                });
            }
            out[target] = self.0[y];
        }
        Pmf::new(out)
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for Pmf {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Parses comma-separated decimals, e.g. `0.3,0.7`.
impl FromStr for Pmf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let probs = s
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidPmf(format!("cannot parse {tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Pmf::new(probs)
    }
}

impl fmt::Display for Pmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Symbol counts of a sequence: its type, or empirical distribution before
/// normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeVector {
    counts: Vec<usize>,
    n: usize,
}

impl TypeVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidPmf(format!(
                "alphabet size must be at least 2, got {}",
                counts.len()
            )));
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(TypeVector { counts, n })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn to_pmf(&self) -> Pmf {
        let n = self.n as f64;
        Pmf::from_vec_unchecked(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Counts the symbols of `seq` over the alphabet `{0, …, k−1}`.
pub fn empirical(seq: &[usize], k: usize) -> Result<TypeVector> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut counts = vec![0usize; k];
    for &y in seq {
        if y >= k {
            return Err(Error::SymbolOutOfRange {
                symbol: y,
                alphabet: k,
            });
        }
        counts[y] += 1;
    }
    TypeVector::new(counts)
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left: a, right: b })
    }
}

/// `Σ p ln(p/q)` with `0 ln 0 = 0`; `+∞` if `p` has mass where `q` has none.
#[inline]
pub fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).ln();
        }
    }
    // Rounding can leave tiny negative residues when p ≈ q.
    acc.max(0.0)
}

/// Relative entropy `D(p‖q)` in nats.
pub fn kl(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_same_len(p.alphabet_size(), q.alphabet_size())?;
    if let Some(index) =
        p.0.iter()
            .zip(&q.0)
            .position(|(&a, &b)| a > 0.0 && b <= 0.0)
    {
        return Err(Error::SupportViolation { index });
    }
    Ok(kl_slices(&p.0, &q.0))
}

#[inline]
pub fn entropy_slice(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| a * a.ln())
        .sum::<f64>()
}

/// Shannon entropy `H(p)` in nats.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_slice(&p.0).max(0.0)
}

/// `Σ √(p q)`.
#[inline]
pub fn bhattacharyya_coefficient_slices(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| (a * b).sqrt()).sum()
}

#[inline]
pub fn bhattacharyya_slices(p: &[f64], q: &[f64]) -> f64 {
    (-bhattacharyya_coefficient_slices(p, q).ln()).max(0.0)
}

/// Bhattacharyya distance `B(p, q) = −ln Σ √(p q)`.
pub fn bhattacharyya(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_same_len(p.alphabet_size(), q.alphabet_size())?;
    Ok(bhattacharyya_slices(&p.0, &q.0))
}

/// `−ln Σ p^s q^(1−s)` from precomputed logs.
fn chernoff_objective(log_p: &[f64], log_q: &[f64], s: f64) -> f64 {
    let sum: f64 = log_p
        .iter()
        .zip(log_q)
        .map(|(&a, &b)| (s * a + (1.0 - s) * b).exp())
        .sum();
    -sum.ln()
}

/// Maximizes the concave `s ↦ −ln Σ p^s q^(1−s)` over `[0, 1]` by golden
/// section. Returns `(value, s*)`. Both slices must be strictly positive.
pub fn chernoff_slices(p: &[f64], q: &[f64]) -> (f64, f64) {
    let log_p: Vec<f64> = p.iter().map(|a| a.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|b| b.ln()).collect();
    let f = |s: f64| chernoff_objective(&log_p, &log_q, s);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > CHERNOFF_S_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let s = 0.5 * (lo + hi);
    (f(s).max(0.0), s)
}

/// Chernoff information `C(p, q)` and its optimizing exponent `s*`.
pub fn chernoff_with_optimizer(p: &Pmf, q: &Pmf) -> Result<(f64, f64)> {
    check_same_len(p.alphabet_size(), q.alphabet_size())?;
    p.require_full_support()?;
    q.require_full_support()?;
    Ok(chernoff_slices(&p.0, &q.0))
}

/// Chernoff information `C(p, q) = max_{s∈[0,1]} −ln Σ p^s q^(1−s)`.
pub fn chernoff(p: &Pmf, q: &Pmf) -> Result<f64> {
    chernoff_with_optimizer(p, q).map(|(v, _)| v)
}

/// Chernoff information between the product pmfs `μ_i(y)π(y′)` and
/// `π(y)μ_j(y′)` on the `K²` product alphabet.
pub fn chernoff_pair_product(mu_i: &Pmf, mu_j: &Pmf, pi: &Pmf) -> Result<f64> {
    check_same_len(mu_i.alphabet_size(), pi.alphabet_size())?;
    check_same_len(mu_j.alphabet_size(), pi.alphabet_size())?;
    for p in [mu_i, mu_j, pi] {
        p.require_full_support()?;
    }
    let k = pi.alphabet_size();
    let mut left = Vec::with_capacity(k * k);
    let mut right = Vec::with_capacity(k * k);
    for y in 0..k {
        for y2 in 0..k {
            left.push(mu_i.0[y] * pi.0[y2]);
            right.push(pi.0[y] * mu_j.0[y2]);
        }
    }
    Ok(chernoff_slices(&left, &right).0)
}

/// Normalized geometric mean `q*(y) ∝ √(p(y) q(y))`, the minimizer of
/// `D(·‖p) + D(·‖q)`.
pub fn geometric_midpoint(p: &Pmf, q: &Pmf) -> Result<Pmf> {
    check_same_len(p.alphabet_size(), q.alphabet_size())?;
    let roots: Vec<f64> =
        p.0.iter()
            .zip(&q.0)
            .map(|(&a, &b)| (a * b).sqrt())
            .collect();
    let z: f64 = roots.iter().sum();
    if z <= 0.0 {
        return Err(Error::InvalidPmf("p and q have disjoint supports".into()));
    }
    Ok(Pmf::from_vec_unchecked(
        roots.into_iter().map(|r| r / z).collect(),
    ))
}

/// Pointwise convex combination `Σ w_k p_k`.
pub fn mixture(pmfs: &[&Pmf], weights: &[f64]) -> Result<Pmf> {
    check_same_len(pmfs.len(), weights.len())?;
    let first = pmfs
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
    let k = first.alphabet_size();
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0)
        || (weights.iter().sum::<f64>() - 1.0).abs() > NORMALIZATION_TOL
    {
        return Err(Error::InvalidParameter(format!(
            "invalid mixture weights {weights:?}"
        )));
    }
    let mut out = vec![0.0; k];
    for (p, &w) in pmfs.iter().zip(weights) {
        check_same_len(k, p.alphabet_size())?;
        for (o, &a) in out.iter_mut().zip(&p.0) {
            *o += w * a;
        }
    }
    Pmf::new(out)
}

/// `C_π = −ln min_y π(y)`.
pub fn log_min_mass(pi: &Pmf) -> f64 {
    -pi.min_mass().ln()
}
