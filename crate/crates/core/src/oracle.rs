//! Exact error probabilities by enumerating per-coordinate type classes.
//!
//! Every detector depends on the data only through `(γ_1, …, γ_M)`, so the
//! error probability under a hypothesis is a sum over `M`-tuples of types of
//! the product of per-coordinate type-class probabilities. Each tuple's
//! decision is computed once and charged to every hypothesis it gets wrong.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::detectors::{
    min_score, spread, tie_tolerance, Detector, HypothesisId, Laws, RowSummary,
};
use crate::error::{Error, Result};
use crate::simplex::{entropy_slice, kl_slices, Pmf, TypeVector};

/// Default limit on tuple evaluations (and on table size).
pub const DEFAULT_CAP: u128 = 100_000_000;

/// All types of length-`n` sequences over `K` symbols, each with the log of
/// its type-class size.
#[derive(Clone, Debug)]
pub struct TypeClassTable {
    n: usize,
    k: usize,
    entries: Vec<(TypeVector, f64)>,
}

impl TypeClassTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[(TypeVector, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `ln P(type class)` under `p` for every entry.
    pub fn log_probs(&self, p: &Pmf) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|(t, lm)| log_prob_with_multiplicity(t, *lm, p))
            .collect()
    }
}

/// Number of compositions of `n` into `k` parts, `C(n+k−1, k−1)`, saturating.
pub fn num_types(n: usize, k: usize) -> u128 {
    let (top, r) = ((n + k - 1) as u128, (k - 1).min(n) as u128);
    let mut c: u128 = 1;
    for i in 0..r {
        c = match c.checked_mul(top - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    c
}

fn log_multiplicity(counts: &[usize], n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
        - counts
            .iter()
            .map(|&c| ln_gamma(c as f64 + 1.0))
            .sum::<f64>()
}

pub fn enumerate_types(n: usize, k: usize) -> Result<TypeClassTable> {
    enumerate_types_capped(n, k, DEFAULT_CAP)
}

/// Compositions in lexicographically decreasing order of the count vector,
/// starting from `(n, 0, …, 0)`.
pub fn enumerate_types_capped(n: usize, k: usize, cap: u128) -> Result<TypeClassTable> {
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "alphabet needs at least 2 symbols, got {k}"
        )));
    }
    let required = num_types(n, k);
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    let mut entries = Vec::with_capacity(required as usize);
    let mut counts = vec![0usize; k];
    counts[0] = n;
    loop {
        let lm = log_multiplicity(&counts, n);
        entries.push((TypeVector::new(counts.clone())?, lm));
        // Find the rightmost nonzero part before the last, move one unit right
        // and gather everything after it there.
        let Some(j) = (0..k - 1).rev().find(|&j| counts[j] > 0) else {
            break;
        };
        counts[j] -= 1;
        let tail: usize = counts[j + 1..].iter().sum::<usize>() + 1;
        counts[j + 1..].iter_mut().for_each(|c| *c = 0);
        counts[j + 1] = tail;
    }
    Ok(TypeClassTable { n, k, entries })
}

fn log_prob_with_multiplicity(t: &TypeVector, log_mult: f64, p: &Pmf) -> Result<f64> {
    if t.alphabet_size() != p.alphabet_size() {
        return Err(Error::DimensionMismatch {
            left: t.alphabet_size(),
            right: p.alphabet_size(),
        });
    }
    let mut s = log_mult;
    for (y, (&c, &py)) in t.counts().iter().zip(p.probs()).enumerate() {
        if c > 0 {
            if py <= 0.0 {
                return Err(Error::SupportViolation { index: y });
            }
            s += c as f64 * py.ln();
        }
    }
    debug_assert!({
        let alt = log_mult + divergence_form(t, p);
        (alt - s).abs() <= 1e-9 * s.abs().max(1.0)
    });
    Ok(s)
}

/// `−n(D(γ‖p) + H(γ))`, the log-probability of any one sequence of type `γ`.
fn divergence_form(t: &TypeVector, p: &Pmf) -> f64 {
    let g = t.to_pmf();
    -(t.n() as f64) * (kl_slices(g.probs(), p.probs()) + entropy_slice(g.probs()))
}

/// `ln P(type class of t)` under `p`: `ln multiplicity + Σ_y counts_y ln p(y)`.
pub fn type_log_prob(t: &TypeVector, p: &Pmf) -> Result<f64> {
    log_prob_with_multiplicity(t, log_multiplicity(t.counts(), t.n()), p)
}

/// Same quantity through `ln multiplicity − n(D(γ‖p) + H(γ))`.
pub fn type_log_prob_via_divergence(t: &TypeVector, p: &Pmf) -> Result<f64> {
    if t.alphabet_size() != p.alphabet_size() {
        return Err(Error::DimensionMismatch {
            left: t.alphabet_size(),
            right: p.alphabet_size(),
        });
    }
    if let Some(y) = (0..p.alphabet_size()).find(|&y| t.counts()[y] > 0 && p.probs()[y] <= 0.0) {
        return Err(Error::SupportViolation { index: y });
    }
    Ok(log_multiplicity(t.counts(), t.n()) + divergence_form(t, p))
}

/// How tuples whose minimal score is shared by several hypotheses are charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// The detector's own rule: the earliest tied hypothesis wins.
    #[default]
    Earliest,
    /// Each tied hypothesis is chosen with equal probability.
    Uniform,
}

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub cap: u128,
    /// Contiguous partitions of the first coordinate's types, reduced in a
    /// fixed pairwise order. Results depend on this count only through
    /// floating-point summation order.
    pub partitions: usize,
    pub tie_policy: TiePolicy,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            cap: DEFAULT_CAP,
            partitions: 1,
            tie_policy: TiePolicy::Earliest,
        }
    }
}

/// A probability kept in both linear and log form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probability {
    pub value: f64,
    pub log_value: f64,
}

impl Probability {
    fn from_log(log_value: f64) -> Self {
        Probability {
            value: log_value.exp(),
            log_value,
        }
    }
}

/// Streaming log-sum-exp.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    #[inline]
    fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    fn merge(self, other: LogSum) -> LogSum {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        if self.max >= other.max {
            LogSum {
                max: self.max,
                sum: self.sum + other.sum * (other.max - self.max).exp(),
            }
        } else {
            LogSum {
                max: other.max,
                sum: other.sum + self.sum * (self.max - other.max).exp(),
            }
        }
    }

    fn ln(self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Per-hypothesis error probabilities for one detector and sample size.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorProfile {
    pub detector: String,
    pub n: usize,
    pub hypotheses: Vec<HypothesisId>,
    pub errors: Vec<Probability>,
    pub tuples: u128,
}

impl ErrorProfile {
    /// Error under `truth`, matched by outlier set.
    pub fn error(&self, truth: &HypothesisId) -> Option<Probability> {
        let mut want = truth.outliers();
        want.sort_unstable();
        self.hypotheses
            .iter()
            .position(|h| h.is_null() == truth.is_null() && h.outliers() == want)
            .map(|i| self.errors[i])
    }

    /// Largest per-hypothesis error, and the first hypothesis attaining it.
    pub fn max(&self) -> (HypothesisId, Probability) {
        let mut best = 0;
        for (i, e) in self.errors.iter().enumerate() {
            if e.log_value > self.errors[best].log_value {
                best = i;
            }
        }
        (self.hypotheses[best].clone(), self.errors[best])
    }
}

struct Prepared<'a> {
    detector: &'a Detector,
    family: crate::HypothesisFamily,
    hypotheses: Vec<HypothesisId>,
    summaries: Vec<RowSummary>,
    /// `logp[h][i][t]`: log-probability of type `t` at coordinate `i` under hypothesis `h`.
    logp: Vec<Vec<Vec<f64>>>,
    m: usize,
    n: usize,
    k: usize,
    tie_policy: TiePolicy,
}

impl Prepared<'_> {
    /// Accumulates errors over tuples whose first coordinate lies in `first`.
    fn accumulate(&self, first: std::ops::Range<usize>) -> Vec<LogSum> {
        let (m, nt, nh) = (self.m, self.summaries.len(), self.hypotheses.len());
        let mut acc = vec![LogSum::EMPTY; nh];
        if first.is_empty() {
            return acc;
        }
        let mut digits = vec![0usize; m];
        digits[0] = first.start;
        // prefix[h*(m+1) + d] = Σ_{i<d} logp[h][i][digits[i]]
        let mut prefix = vec![0.0; nh * (m + 1)];
        let mut rows: Vec<&RowSummary> = digits.iter().map(|&t| &self.summaries[t]).collect();
        let mut scratch = Vec::new();
        let offset = usize::from(self.family.include_null());
        let lambda = self.detector.lambda(m, self.n, self.k);
        let refresh = |prefix: &mut [f64], digits: &[usize], from: usize| {
            for h in 0..nh {
                let base = h * (m + 1);
                for d in from..m {
                    prefix[base + d + 1] = prefix[base + d] + self.logp[h][d][digits[d]];
                }
            }
        };
        refresh(&mut prefix, &digits, 0);
        loop {
            self.detector.score_rows(&self.family, &rows, &mut scratch);
            let null_wins = lambda.is_some_and(|l| spread(&scratch) <= l);
            match (null_wins, self.tie_policy) {
                (true, _) => {
                    for (h, a) in acc.iter_mut().enumerate().skip(1) {
                        a.add(prefix[h * (m + 1) + m]);
                    }
                }
                (false, TiePolicy::Earliest) => {
                    let lo = min_score(&scratch);
                    let tol = tie_tolerance(lo);
                    let d = scratch.iter().position(|&s| s <= lo + tol).unwrap() + offset;
                    for (h, a) in acc.iter_mut().enumerate() {
                        if h != d {
                            a.add(prefix[h * (m + 1) + m]);
                        }
                    }
                }
                (false, TiePolicy::Uniform) => {
                    let lo = min_score(&scratch);
                    let tol = tie_tolerance(lo);
                    let ties = scratch.iter().filter(|&&s| s <= lo + tol).count();
                    let miss = (1.0 - 1.0 / ties as f64).ln();
                    for (h, a) in acc.iter_mut().enumerate() {
                        let lp = prefix[h * (m + 1) + m];
                        let tied = h >= offset && scratch[h - offset] <= lo + tol;
                        if !tied {
                            a.add(lp);
                        } else if ties > 1 {
                            a.add(lp + miss);
                        }
                    }
                }
            }
            // Mixed-radix increment, last coordinate fastest.
            let mut pos = m;
            loop {
                if pos == 0 {
                    return acc;
                }
                pos -= 1;
                let limit = if pos == 0 { first.end } else { nt };
                digits[pos] += 1;
                if digits[pos] < limit {
                    break;
                }
                if pos == 0 {
                    return acc;
                }
                digits[pos] = 0;
            }
            for d in pos..m {
                rows[d] = &self.summaries[digits[d]];
            }
            refresh(&mut prefix, &digits, pos);
        }
    }
}

fn tree_reduce(mut parts: Vec<Vec<LogSum>>) -> Vec<LogSum> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Exact error probability of `detector` under every hypothesis of its
/// family, at sample size `n`.
pub fn error_profile(
    detector: &Detector,
    laws: &Laws,
    n: usize,
    opts: &OracleOptions,
) -> Result<ErrorProfile> {
    let m = laws.num_coordinates();
    let k = laws.alphabet_size();
    detector.validate(m, k)?;
    if opts.partitions == 0 {
        return Err(Error::InvalidParameter(
            "partition count must be at least 1".into(),
        ));
    }
    let per_coord = num_types(n.max(1), k);
    let tuples = (0..m)
        .try_fold(1u128, |acc, _| acc.checked_mul(per_coord))
        .unwrap_or(u128::MAX);
    if tuples > opts.cap {
        return Err(Error::CapExceeded {
            required: tuples,
            cap: opts.cap,
        });
    }
    let table = enumerate_types_capped(n, k, opts.cap)?;
    let family = detector.family(m)?;
    let hypotheses = family.hypotheses();
    let summaries: Vec<RowSummary> = table
        .entries()
        .iter()
        .map(|(t, _)| detector.summarize(t))
        .collect();

    let pi_lp = table.log_probs(&laws.pi)?;
    let mu_lp: Vec<Vec<f64>> = laws
        .mus
        .iter()
        .map(|mu| table.log_probs(mu))
        .collect::<Result<_>>()?;
    let logp = hypotheses
        .iter()
        .map(|h| {
            let out = h.outliers();
            (0..m)
                .map(|i| {
                    if out.contains(&i) {
                        mu_lp[i].clone()
                    } else {
                        pi_lp.clone()
                    }
                })
                .collect()
        })
        .collect();
    let prep = Prepared {
        detector,
        family,
        hypotheses,
        summaries,
        logp,
        m,
        n,
        k,
        tie_policy: opts.tie_policy,
    };

    let nt = table.len();
    let parts = opts.partitions.min(nt);
    let ranges: Vec<std::ops::Range<usize>> = (0..parts)
        .map(|p| (p * nt / parts)..((p + 1) * nt / parts))
        .collect();
    let partials: Vec<Vec<LogSum>> = if parts == 1 {
        vec![prep.accumulate(0..nt)]
    } else {
        ranges.into_par_iter().map(|r| prep.accumulate(r)).collect()
    };
    let errors = tree_reduce(partials)
        .into_iter()
        .map(|a| Probability::from_log(a.ln().min(0.0)))
        .collect();
    Ok(ErrorProfile {
        detector: detector.name().to_string(),
        n,
        hypotheses: prep.hypotheses,
        errors,
        tuples,
    })
}

/// Exact `P_truth{decision ≠ truth}`.
pub fn exact_error(
    detector: &Detector,
    laws: &Laws,
    truth: &HypothesisId,
    n: usize,
    opts: &OracleOptions,
) -> Result<Probability> {
    let family = detector.family(laws.num_coordinates())?;
    let pos = family
        .position(truth)
        .ok_or_else(|| Error::TruthNotInFamily(truth.to_string()))?;
    Ok(error_profile(detector, laws, n, opts)?.errors[pos])
}

/// Maximal error over the detector's family, with the hypothesis attaining it.
pub fn max_error(
    detector: &Detector,
    laws: &Laws,
    n: usize,
    opts: &OracleOptions,
) -> Result<(HypothesisId, Probability)> {
    Ok(error_profile(detector, laws, n, opts)?.max())
}

/// Least-squares fit of `−ln err = a·n + b·ln n + c`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub log_coefficient: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `−ln err`.
    pub residual_rms: f64,
    pub points: usize,
}

/// Solves the weighted least-squares problem for `y ≈ a·n + b·ln n + c`,
/// returning the coefficients and the inverse normal matrix.
pub(crate) fn weighted_fit(
    ns: &[f64],
    ys: &[f64],
    ws: &[f64],
) -> Result<([f64; 3], [[f64; 3]; 3])> {
    // Scale the n column so the normal matrix stays well conditioned.
    let scale = ns.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for ((&n, &y), &w) in ns.iter().zip(ys).zip(ws) {
        let row = [n / scale, n.ln(), 1.0];
        for i in 0..3 {
            atb[i] += w * row[i] * y;
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let mut inv =
        invert3(&ata).ok_or_else(|| Error::DegenerateFit("collinear sample sizes".into()))?;
    let mut coef = [0.0; 3];
    for i in 0..3 {
        coef[i] = (0..3).map(|j| inv[i][j] * atb[j]).sum();
    }
    coef[0] /= scale;
    for row in inv.iter_mut() {
        row[0] /= scale;
    }
    for v in inv[0].iter_mut() {
        *v /= scale;
    }
    Ok((coef, inv))
}

fn invert3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    let norm = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !det.is_finite() || det.abs() <= 1e-14 * norm.powi(3) {
        return None;
    }
    let c = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let s: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        let minor = a[r[0]][s[0]] * a[r[1]][s[1]] - a[r[0]][s[1]] * a[r[1]][s[0]];
        if (i + j).is_multiple_of(2) {
            minor
        } else {
            -minor
        }
    };
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c(j, i) / det;
        }
    }
    Some(inv)
}

pub fn exponent_fit(ns: &[usize], errs: &[f64]) -> Result<ExponentFit> {
    if let Some(e) = errs.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::DegenerateFit(format!(
            "error value {e} is not in (0, 1)"
        )));
    }
    let logs: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    exponent_fit_log(ns, &logs)
}

/// [`exponent_fit`] on `ln err`, for errors below the floating-point range.
pub fn exponent_fit_log(ns: &[usize], log_errs: &[f64]) -> Result<ExponentFit> {
    if ns.len() != log_errs.len() {
        return Err(Error::DimensionMismatch {
            left: ns.len(),
            right: log_errs.len(),
        });
    }
    if ns.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            ns.len()
        )));
    }
    if let Some(e) = log_errs.iter().find(|&&e| !(e < 0.0 && e.is_finite())) {
        return Err(Error::DegenerateFit(format!(
            "log error {e} is not in (-inf, 0)"
        )));
    }
    if ns.contains(&0) {
        return Err(Error::DegenerateFit("sample size 0".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = log_errs.iter().map(|e| -e).collect();
    let ([a, b, c], _) = weighted_fit(&xs, &ys, &vec![1.0; xs.len()])?;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&n, &y)| (y - (a * n + b * n.ln() + c)).powi(2))
        .sum();
    Ok(ExponentFit {
        slope: a,
        log_coefficient: b,
        intercept: c,
        residual_rms: (ss / xs.len() as f64).sqrt(),
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn small_tables() {
        let t = enumerate_types(2, 2).unwrap();
        let got: Vec<(Vec<usize>, f64)> = t
            .entries()
            .iter()
            .map(|(tv, lm)| (tv.counts().to_vec(), lm.exp().round()))
            .collect();
        assert_eq!(
            got,
            vec![(vec![2, 0], 1.0), (vec![1, 1], 2.0), (vec![0, 2], 1.0)]
        );
        assert_eq!(enumerate_types(4, 2).unwrap().len(), 5);
        assert_eq!(enumerate_types(3, 3).unwrap().len(), 10);
        assert_eq!(num_types(30, 2), 31);
        assert_eq!(num_types(10, 4), 286);
        assert!(matches!(
            enumerate_types_capped(10, 4, 100),
            Err(Error::CapExceeded { required: 286, .. })
        ));
        assert!(enumerate_types(0, 2).is_err());
        assert!(enumerate_types(3, 1).is_err());
    }

    #[test]
    fn tables_are_distinct_and_normalized() {
        for (n, k) in [(7, 2), (5, 3), (4, 4)] {
            let t = enumerate_types(n, k).unwrap();
            assert_eq!(t.len() as u128, num_types(n, k));
            let mut seen: Vec<Vec<usize>> = t
                .entries()
                .iter()
                .map(|(tv, _)| tv.counts().to_vec())
                .collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), t.len());
            let p = Pmf::normalize((1..=k).map(|v| v as f64).collect()).unwrap();
            let total: f64 = t.log_probs(&p).unwrap().iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn type_log_prob_values() {
        let t = TypeVector::new(vec![1, 1]).unwrap();
        assert!((type_log_prob(&t, &pmf(&[0.5, 0.5])).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        let t = TypeVector::new(vec![5, 0]).unwrap();
        let p = pmf(&[0.3, 0.7]);
        assert!((type_log_prob(&t, &p).unwrap() - 5.0 * 0.3f64.ln()).abs() < 1e-14);
        let t = TypeVector::new(vec![2, 1]).unwrap();
        assert!((type_log_prob(&t, &p).unwrap() - 0.189f64.ln()).abs() < 1e-14);
        assert!((type_log_prob_via_divergence(&t, &p).unwrap() - 0.189f64.ln()).abs() < 1e-12);
        let point = Pmf::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            type_log_prob(&t, &point),
            Err(Error::SupportViolation { index: 1 })
        ));
    }

    #[test]
    fn log_sum_matches_direct_sum() {
        let vals = [-3.0, -1.0, -700.0, -2.0, -0.5];
        let mut a = LogSum::EMPTY;
        vals.iter().for_each(|&v| a.add(v));
        let direct: f64 = vals.iter().map(|v| v.exp()).sum();
        assert!((a.ln() - direct.ln()).abs() < 1e-15);
        let mut b = LogSum::EMPTY;
        b.add(-1000.0);
        let mut c = LogSum::EMPTY;
        c.add(-1001.0);
        assert!((b.merge(c).ln() - (-1000.0 + (1.0 + (-1.0f64).exp()).ln())).abs() < 1e-12);
        assert_eq!(LogSum::EMPTY.ln(), f64::NEG_INFINITY);
    }

    #[test]
    fn degenerate_model_floor() {
        let p = pmf(&[0.4, 0.6]);
        let laws = Laws::identical(p.clone(), p, 3).unwrap();
        for n in [1, 2, 5] {
            let prof =
                error_profile(&Detector::UnivSingle, &laws, n, &OracleOptions::default()).unwrap();
            assert!(prof.max().1.value >= 1.0 - 1.0 / 3.0 - 1e-12);
        }
    }

    #[test]
    fn partitions_do_not_change_results() {
        let laws = Laws::identical(pmf(&[0.3, 0.7]), pmf(&[0.7, 0.3]), 3).unwrap();
        let det = Detector::UnivSingle;
        let one = error_profile(&det, &laws, 12, &OracleOptions::default()).unwrap();
        let many = error_profile(
            &det,
            &laws,
            12,
            &OracleOptions {
                partitions: 5,
                ..Default::default()
            },
        )
        .unwrap();
        for (a, b) in one.errors.iter().zip(&many.errors) {
            assert!((a.value - b.value).abs() <= 1e-12 * a.value);
        }
    }

    #[test]
    fn cap_and_truth_checks() {
        let laws = Laws::identical(pmf(&[0.3, 0.7]), pmf(&[0.7, 0.3]), 3).unwrap();
        let opts = OracleOptions {
            cap: 1000,
            ..Default::default()
        };
        assert!(matches!(
            error_profile(&Detector::UnivSingle, &laws, 10, &opts),
            Err(Error::CapExceeded {
                required: 1331,
                cap: 1000
            })
        ));
        assert!(matches!(
            exact_error(
                &Detector::UnivSingle,
                &laws,
                &HypothesisId::Null,
                3,
                &OracleOptions::default()
            ),
            Err(Error::TruthNotInFamily(_))
        ));
    }

    #[test]
    fn uniform_ties_give_symmetric_errors() {
        let laws = Laws::identical(pmf(&[0.3, 0.7]), pmf(&[0.7, 0.3]), 3).unwrap();
        let opts = OracleOptions {
            tie_policy: TiePolicy::Uniform,
            ..Default::default()
        };
        let prof = error_profile(&Detector::UnivSingle, &laws, 8, &opts).unwrap();
        let e0 = prof.errors[0].value;
        for e in &prof.errors {
            assert!((e.value - e0).abs() <= 1e-12 * e0);
        }
    }

    #[test]
    fn fit_recovers_synthetic_slopes() {
        let ns: Vec<usize> = (1..=8).map(|i| 10 * i).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| (-0.2 * n as f64).exp()).collect();
        let f = exponent_fit(&ns, &errs).unwrap();
        assert!((f.slope - 0.2).abs() < 1e-9);
        assert!(f.residual_rms < 1e-9);

        let prefactor = |n: usize| ((n as f64 + 1.0).powi(3).ln() - 0.2 * n as f64).exp();
        let ns: Vec<usize> = (0..9).map(|i| 2000 + 200 * i).collect();
        let errs: Vec<f64> = ns.iter().map(|&n| prefactor(n)).collect();
        assert!(errs.iter().all(|&e| e > 0.0 && e < 1.0));
        let f = exponent_fit(&ns, &errs).unwrap();
        assert!((f.slope - 0.2).abs() < 1e-6, "{}", f.slope);

        let ns: Vec<usize> = (1..=8).map(|i| 10_000 * i).collect();
        let logs: Vec<f64> = ns
            .iter()
            .map(|&n| 3.0 * (n as f64 + 1.0).ln() - 0.2 * n as f64)
            .collect();
        let f = exponent_fit_log(&ns, &logs).unwrap();
        assert!((f.slope - 0.2).abs() < 1e-8, "{}", f.slope);
        assert!((f.log_coefficient + 3.0).abs() < 0.01);

        assert!(exponent_fit(&[1, 2, 3], &[0.5, 0.4, 0.3]).is_err());
        assert!(exponent_fit(&[1, 2, 3, 4], &[0.5, 0.4, 0.0, 0.3]).is_err());
        assert!(exponent_fit(&[1, 2, 3, 4], &[0.5, 0.4, 1.0, 0.3]).is_err());
    }
}
