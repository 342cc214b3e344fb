//! Test statistics and decision rules for outlier hypothesis testing.
//!
//! Every statistic below is a function of the per-coordinate empirical
//! distributions `γ_1, …, γ_M` only. Scoring therefore runs on
//! [`RowSummary`] values (an empirical pmf plus whatever divergences to known
//! laws the detector needs), which the exact oracle builds once per type class
//! and the public `score_*` functions build from an [`ObservationMatrix`].
//!
//! Hypotheses are 0-based internally and 1-based when displayed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{kl_slices, Pmf, TypeVector};

mod io;

pub use io::{read_observations, write_binary, write_csv};

/// Scores closer than this (relative to `max(1, |min|)`) are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `M` coordinates × `n` samples of symbols in `{0, …, K−1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix {
    rows: Vec<Vec<usize>>,
    k: usize,
    types: Vec<TypeVector>,
}

impl ObservationMatrix {
    pub fn new(rows: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::InvalidObservation(format!(
                "need at least 3 coordinates, got {}",
                rows.len()
            )));
        }
        if k < 2 {
            return Err(Error::InvalidObservation(format!("alphabet size {k} < 2")));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::InvalidObservation("rows are empty".into()));
        }
        let mut types = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidObservation(format!(
                    "row {} has {} samples, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            types.push(crate::simplex::empirical(row, k)?);
        }
        Ok(ObservationMatrix { rows, k, types })
    }

    pub fn num_coordinates(&self) -> usize {
        self.rows.len()
    }

    pub fn num_samples(&self) -> usize {
        self.rows[0].len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Per-coordinate types, in row order.
    pub fn types(&self) -> &[TypeVector] {
        &self.types
    }

    pub fn empirical_pmfs(&self) -> Vec<Pmf> {
        self.types.iter().map(TypeVector::to_pmf).collect()
    }

    /// Reorders coordinates so that new row `perm[i]` is old row `i`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let m = self.rows.len();
        if perm.len() != m || perm.iter().copied().collect::<BTreeSet<_>>().len() != m {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation of 0..{m}"
            )));
        }
        let mut rows = vec![Vec::new(); m];
        for (i, &target) in perm.iter().enumerate() {
            rows[target] = self.rows[i].clone();
        }
        ObservationMatrix::new(rows, self.k)
    }
}

/// Identity of the outliers: one coordinate, a coordinate subset, or none.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HypothesisId {
    Null,
    Coordinate(usize),
    Subset(Vec<usize>),
}

impl HypothesisId {
    /// Sorted outlier coordinates.
    pub fn outliers(&self) -> Vec<usize> {
        match self {
            HypothesisId::Null => Vec::new(),
            HypothesisId::Coordinate(i) => vec![*i],
            HypothesisId::Subset(s) => s.clone(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, HypothesisId::Null)
    }

    /// Image under the coordinate permutation `i ↦ perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> HypothesisId {
        match self {
            HypothesisId::Null => HypothesisId::Null,
            HypothesisId::Coordinate(i) => HypothesisId::Coordinate(perm[*i]),
            HypothesisId::Subset(s) => {
                let mut t: Vec<usize> = s.iter().map(|&i| perm[i]).collect();
                t.sort_unstable();
                HypothesisId::Subset(t)
            }
        }
    }
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisId::Null => f.write_str("null"),
            HypothesisId::Coordinate(i) => write!(f, "coordinate {}", i + 1),
            HypothesisId::Subset(s) => {
                f.write_str("subset {")?;
                for (j, i) in s.iter().enumerate() {
                    if j > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}", i + 1)?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Parses `null`, `coordinate 3` (or just `3`), and `subset {1,2}` (or
/// `{1,2}`), all 1-based.
impl FromStr for HypothesisId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse hypothesis {s:?}"));
        let t = s.trim();
        if t.eq_ignore_ascii_case("null") {
            return Ok(HypothesisId::Null);
        }
        let one_based = |tok: &str| -> Result<usize> {
            let v: usize = tok.trim().parse().map_err(|_| bad())?;
            v.checked_sub(1).ok_or_else(bad)
        };
        let body = t.strip_prefix("coordinate").unwrap_or(t).trim();
        if let Some(inner) = body
            .strip_prefix("subset")
            .unwrap_or(body)
            .trim()
            .strip_prefix('{')
        {
            let inner = inner.strip_suffix('}').ok_or_else(bad)?;
            let mut idx = inner
                .split(',')
                .map(one_based)
                .collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            return Ok(HypothesisId::Subset(idx));
        }
        Ok(HypothesisId::Coordinate(one_based(body)?))
    }
}

impl Serialize for HypothesisId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HypothesisId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Member of a family with its coordinate split precomputed.
#[derive(Clone, Debug, PartialEq)]
struct Member {
    id: HypothesisId,
    inside: Vec<usize>,
    outside: Vec<usize>,
}

/// Ordered set of candidate hypotheses for `M` coordinates.
///
/// Order is size-ascending and lexicographic within a size; the null
/// hypothesis, when included, comes first.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisFamily {
    m: usize,
    members: Vec<Member>,
    include_null: bool,
}

impl HypothesisFamily {
    /// The single-outlier family `Coordinate(0), …, Coordinate(M−1)`.
    pub fn single(m: usize, include_null: bool) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidFamily(format!("need M >= 3, got {m}")));
        }
        let members = (0..m)
            .map(|i| member(m, HypothesisId::Coordinate(i), vec![i]))
            .collect();
        Ok(HypothesisFamily {
            m,
            members,
            include_null,
        })
    }

    /// All subsets whose size is in `sizes`, each size `1 ≤ k < M/2`.
    pub fn subsets(m: usize, sizes: &[usize], include_null: bool) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidFamily(format!("need M >= 3, got {m}")));
        }
        let sizes: BTreeSet<usize> = sizes.iter().copied().collect();
        if sizes.is_empty() {
            return Err(Error::InvalidFamily("no subset sizes given".into()));
        }
        for &k in &sizes {
            if k == 0 || 2 * k >= m {
                return Err(Error::InvalidFamily(format!(
                    "subset size {k} violates 1 <= |S| < M/2 for M = {m}"
                )));
            }
        }
        let mut members = Vec::new();
        for &k in &sizes {
            for s in combinations(m, k) {
                members.push(member(m, HypothesisId::Subset(s.clone()), s));
            }
        }
        Ok(HypothesisFamily {
            m,
            members,
            include_null,
        })
    }

    /// Validates an explicit list: each size class must be complete or absent.
    pub fn from_hypotheses(m: usize, hypotheses: &[HypothesisId]) -> Result<Self> {
        let include_null = hypotheses.iter().any(HypothesisId::is_null);
        let non_null: Vec<&HypothesisId> = hypotheses.iter().filter(|h| !h.is_null()).collect();
        if non_null
            .iter()
            .all(|h| matches!(h, HypothesisId::Coordinate(_)))
            && !non_null.is_empty()
        {
            let got: BTreeSet<usize> = non_null.iter().flat_map(|h| h.outliers()).collect();
            if got.len() != m || non_null.len() != m || got.iter().any(|&i| i >= m) {
                return Err(Error::InvalidFamily(
                    "single-outlier family must list every coordinate exactly once".into(),
                ));
            }
            return HypothesisFamily::single(m, include_null);
        }
        let mut sizes = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for h in &non_null {
            let s = h.outliers();
            if s.iter().any(|&i| i >= m) {
                return Err(Error::InvalidFamily(format!(
                    "{h} references a coordinate beyond {m}"
                )));
            }
            sizes.insert(s.len());
            seen.insert(s);
        }
        let family =
            HypothesisFamily::subsets(m, &sizes.into_iter().collect::<Vec<_>>(), include_null)?;
        if family.members.len() != seen.len() {
            return Err(Error::InvalidFamily(
                "a family must contain all subsets of a given size or none of them".into(),
            ));
        }
        Ok(family)
    }

    pub fn num_coordinates(&self) -> usize {
        self.m
    }

    pub fn include_null(&self) -> bool {
        self.include_null
    }

    /// Non-null members in family order.
    pub fn members(&self) -> impl Iterator<Item = &HypothesisId> {
        self.members.iter().map(|m| &m.id)
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Every hypothesis, null first when included.
    pub fn hypotheses(&self) -> Vec<HypothesisId> {
        let mut out = Vec::with_capacity(self.members.len() + 1);
        if self.include_null {
            out.push(HypothesisId::Null);
        }
        out.extend(self.members().cloned());
        out
    }

    /// Membership by outlier set, so `coordinate i` matches `subset {i}`.
    pub fn contains(&self, h: &HypothesisId) -> bool {
        self.position(h).is_some()
    }

    /// Position of `h` in [`HypothesisFamily::hypotheses`], matched by outlier set.
    pub fn position(&self, h: &HypothesisId) -> Option<usize> {
        let offset = usize::from(self.include_null);
        if h.is_null() {
            return self.include_null.then_some(0);
        }
        let mut out = h.outliers();
        out.sort_unstable();
        self.members
            .iter()
            .position(|m| m.inside == out)
            .map(|p| p + offset)
    }

    pub fn with_null(mut self, include_null: bool) -> Self {
        self.include_null = include_null;
        self
    }
}

fn member(m: usize, id: HypothesisId, inside: Vec<usize>) -> Member {
    let outside = (0..m).filter(|i| !inside.contains(i)).collect();
    Member {
        id,
        inside,
        outside,
    }
}

/// Size-`k` subsets of `0..m` in lexicographic order.
pub fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Generating model: coordinate `i` follows `mus[i]` when it is an outlier
/// and `pi` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Laws {
    pub pi: Pmf,
    pub mus: Vec<Pmf>,
}

impl Laws {
    pub fn new(pi: Pmf, mus: Vec<Pmf>) -> Result<Self> {
        if mus.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 coordinates, got {}",
                mus.len()
            )));
        }
        pi.require_full_support()?;
        for mu in &mus {
            if mu.alphabet_size() != pi.alphabet_size() {
                return Err(Error::DimensionMismatch {
                    left: mu.alphabet_size(),
                    right: pi.alphabet_size(),
                });
            }
            mu.require_full_support()?;
        }
        Ok(Laws { pi, mus })
    }

    /// The same outlier law `mu` at every coordinate.
    pub fn identical(mu: Pmf, pi: Pmf, m: usize) -> Result<Self> {
        Laws::new(pi, vec![mu; m])
    }

    pub fn num_coordinates(&self) -> usize {
        self.mus.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.pi.alphabet_size()
    }

    /// Law of coordinate `i` under `truth`.
    pub fn law(&self, i: usize, truth: &HypothesisId) -> &Pmf {
        if truth.outliers().contains(&i) {
            &self.mus[i]
        } else {
            &self.pi
        }
    }
}

/// Test statistic per hypothesis, in family order. Smaller is better.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreTable {
    entries: Vec<(HypothesisId, f64)>,
}

impl ScoreTable {
    pub fn new(entries: Vec<(HypothesisId, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("empty score table".into()));
        }
        if let Some((h, s)) = entries.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("score for {h} is {s}")));
        }
        Ok(ScoreTable { entries })
    }

    pub fn entries(&self) -> &[(HypothesisId, f64)] {
        &self.entries
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, s)| *s)
    }

    pub fn get(&self, h: &HypothesisId) -> Option<f64> {
        self.entries.iter().find(|(id, _)| id == h).map(|(_, s)| *s)
    }

    /// Every hypothesis tied for the minimum, in family order.
    pub fn minimizers(&self) -> Vec<&HypothesisId> {
        let scores: Vec<f64> = self.scores().collect();
        let lo = min_score(&scores);
        let tol = tie_tolerance(lo);
        self.entries
            .iter()
            .filter(|(_, s)| *s <= lo + tol)
            .map(|(h, _)| h)
            .collect()
    }

    /// `max − min` over the table.
    pub fn spread(&self) -> f64 {
        let scores: Vec<f64> = self.scores().collect();
        spread(&scores)
    }
}

pub(crate) fn min_score(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn spread(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) - min_score(scores)
}

#[inline]
pub(crate) fn tie_tolerance(lo: f64) -> f64 {
    TIE_TOLERANCE * lo.abs().max(1.0)
}

/// Index of the earliest score within [`TIE_TOLERANCE`] of the minimum.
#[inline]
pub fn argmin_earliest(scores: &[f64]) -> usize {
    let lo = min_score(scores);
    let tol = tie_tolerance(lo);
    scores
        .iter()
        .position(|&s| s <= lo + tol)
        .expect("nonempty scores")
}

/// The minimal-score hypothesis; ties go to the earliest in family order.
pub fn decide(scores: &ScoreTable) -> HypothesisId {
    let v: Vec<f64> = scores.scores().collect();
    scores.entries[argmin_earliest(&v)].0.clone()
}

/// Returns the argmin only if the score spread exceeds `lambda`, else null.
pub fn decide_null_aware(scores: &ScoreTable, lambda: f64) -> HypothesisId {
    if scores.spread() > lambda {
        decide(scores)
    } else {
        HypothesisId::Null
    }
}

/// `λ_n = 2(M−1)K ln(n+1)/n`, which keeps the null error vanishing.
pub fn default_lambda(m: usize, n: usize, k: usize) -> f64 {
    2.0 * (m as f64 - 1.0) * k as f64 * ((n as f64) + 1.0).ln() / n as f64
}

/// Empirical pmf of one coordinate plus the divergences a detector needs.
#[derive(Clone, Debug)]
pub struct RowSummary {
    gamma: Vec<f64>,
    n: usize,
    /// `D(γ‖π)` when π is known, else 0.
    div_typical: f64,
    /// `D(γ‖μ)` when μ is known, else 0.
    div_outlier: f64,
}

impl RowSummary {
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

/// `Σ_{j∈idx} D(γ_j ‖ mean_{k∈idx} γ_k)`; zero when all rows agree.
fn jensen_gap(rows: &[&RowSummary], idx: &[usize], mix: &mut [f64]) -> f64 {
    mix.iter_mut().for_each(|x| *x = 0.0);
    for &j in idx {
        for (x, &g) in mix.iter_mut().zip(&rows[j].gamma) {
            *x += g;
        }
    }
    let w = idx.len() as f64;
    mix.iter_mut().for_each(|x| *x /= w);
    idx.iter().map(|&j| kl_slices(&rows[j].gamma, mix)).sum()
}

/// A test statistic together with its parameters and decision rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Detector {
    /// Likelihood test with μ and π known: `U_i = D(γ_i‖μ) + Σ_{j≠i} D(γ_j‖π)`.
    MlSingle { mu: Pmf, pi: Pmf },
    /// Only π known: `U_i = Σ_{j≠i} D(γ_j‖π)`.
    TypSingle { pi: Pmf },
    /// Nothing known: `U_i = Σ_{j≠i} D(γ_j ‖ mean_{k≠i} γ_k)`.
    UnivSingle,
    /// Only μ known: `score_i = D(γ_i‖μ)`.
    MuOnly { mu: Pmf },
    /// Universal single-outlier statistic with a null option.
    NullAware {
        /// Fixed threshold for every `n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        /// `λ_n = c·ln(n+1)/n`; defaults to `c = 2(M−1)K`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_coefficient: Option<f64>,
    },
    /// `T` outliers, π known: `U_S = Σ_{j∉S} D(γ_j‖π)`.
    MultiTyp { pi: Pmf, outliers: usize },
    /// `T` outliers, nothing known: `U_S = Σ_{j∉S} D(γ_j ‖ mean_{k∉S} γ_k)`.
    MultiUniv { outliers: usize },
    /// Identical outliers, count in `sizes`: the generalized log-likelihood
    /// statistic `Ū_S`.
    IdenticalUniv { sizes: Vec<usize> },
    /// `Ū_S` with a null option.
    IdenticalNullAware {
        sizes: Vec<usize>,
        /// Fixed threshold for every `n`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        /// `λ_n = c·ln(n+1)/n`; defaults to `c = 2(M−1)K`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_coefficient: Option<f64>,
    },
}

/// Outcome of running a detector: the decision and the scores behind it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decision {
    pub hypothesis: HypothesisId,
    pub tied: bool,
    pub scores: ScoreTable,
}

impl Detector {
    pub fn name(&self) -> &'static str {
        match self {
            Detector::MlSingle { .. } => "ml-single",
            Detector::TypSingle { .. } => "typ-single",
            Detector::UnivSingle => "univ-single",
            Detector::MuOnly { .. } => "mu-only",
            Detector::NullAware { .. } => "null-aware",
            Detector::MultiTyp { .. } => "multi-typ",
            Detector::MultiUniv { .. } => "multi-univ",
            Detector::IdenticalUniv { .. } => "identical-univ",
            Detector::IdenticalNullAware { .. } => "identical-null-aware",
        }
    }

    /// Hypotheses this detector can return for `m` coordinates.
    pub fn family(&self, m: usize) -> Result<HypothesisFamily> {
        match self {
            Detector::MlSingle { .. }
            | Detector::TypSingle { .. }
            | Detector::UnivSingle
            | Detector::MuOnly { .. } => HypothesisFamily::single(m, false),
            Detector::NullAware { .. } => HypothesisFamily::single(m, true),
            Detector::MultiTyp { outliers, .. } | Detector::MultiUniv { outliers } => {
                HypothesisFamily::subsets(m, &[*outliers], false)
            }
            Detector::IdenticalUniv { sizes } => HypothesisFamily::subsets(m, sizes, false),
            Detector::IdenticalNullAware { sizes, .. } => HypothesisFamily::subsets(m, sizes, true),
        }
    }

    /// Checks parameters against the observation shape.
    pub fn validate(&self, m: usize, k: usize) -> Result<()> {
        let check = |p: &Pmf| -> Result<()> {
            if p.alphabet_size() != k {
                return Err(Error::DimensionMismatch {
                    left: p.alphabet_size(),
                    right: k,
                });
            }
            p.require_full_support()
        };
        match self {
            Detector::MlSingle { mu, pi } => {
                check(mu)?;
                check(pi)?;
            }
            Detector::TypSingle { pi } | Detector::MultiTyp { pi, .. } => check(pi)?,
            Detector::MuOnly { mu } => check(mu)?,
            Detector::NullAware {
                lambda,
                lambda_coefficient,
            }
            | Detector::IdenticalNullAware {
                lambda,
                lambda_coefficient,
                ..
            } => {
                if lambda.is_some() && lambda_coefficient.is_some() {
                    return Err(Error::InvalidParameter(
                        "give either a fixed lambda or a lambda coefficient, not both".into(),
                    ));
                }
                if let Some(l) = lambda.or(*lambda_coefficient) {
                    if !(l.is_finite() && l >= 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "lambda must be >= 0, got {l}"
                        )));
                    }
                }
            }
            Detector::UnivSingle | Detector::MultiUniv { .. } | Detector::IdenticalUniv { .. } => {}
        }
        if let Detector::MultiTyp { outliers, .. } | Detector::MultiUniv { outliers } = self {
            if *outliers == 0 || 2 * outliers >= m {
                return Err(Error::InvalidParameter(format!(
                    "outlier count {outliers} violates 1 <= T < M/2 for M = {m}"
                )));
            }
        }
        self.family(m).map(|_| ())
    }

    fn known_laws(&self) -> (Option<&Pmf>, Option<&Pmf>) {
        match self {
            Detector::MlSingle { mu, pi } => (Some(mu), Some(pi)),
            Detector::TypSingle { pi } | Detector::MultiTyp { pi, .. } => (None, Some(pi)),
            Detector::MuOnly { mu } => (Some(mu), None),
            _ => (None, None),
        }
    }

    /// Precomputes what scoring needs from one coordinate's type.
    pub fn summarize(&self, t: &TypeVector) -> RowSummary {
        let gamma = t.to_pmf();
        let (mu, pi) = self.known_laws();
        let div_outlier = mu.map_or(0.0, |mu| kl_slices(gamma.probs(), mu.probs()));
        let div_typical = pi.map_or(0.0, |pi| kl_slices(gamma.probs(), pi.probs()));
        RowSummary {
            gamma: Vec::from(gamma),
            n: t.n(),
            div_typical,
            div_outlier,
        }
    }

    /// Scores for every non-null family member, written into `out`.
    pub fn score_rows(&self, family: &HypothesisFamily, rows: &[&RowSummary], out: &mut Vec<f64>) {
        out.clear();
        let mut mix = vec![0.0; rows[0].gamma.len()];
        for m in &family.members {
            let s = match self {
                Detector::MlSingle { .. } => {
                    let i = m.inside[0];
                    rows[i].div_outlier
                        + m.outside.iter().map(|&j| rows[j].div_typical).sum::<f64>()
                }
                Detector::TypSingle { .. } | Detector::MultiTyp { .. } => {
                    m.outside.iter().map(|&j| rows[j].div_typical).sum()
                }
                Detector::MuOnly { .. } => rows[m.inside[0]].div_outlier,
                Detector::UnivSingle | Detector::NullAware { .. } | Detector::MultiUniv { .. } => {
                    jensen_gap(rows, &m.outside, &mut mix)
                }
                Detector::IdenticalUniv { .. } | Detector::IdenticalNullAware { .. } => {
                    jensen_gap(rows, &m.inside, &mut mix) + jensen_gap(rows, &m.outside, &mut mix)
                }
            };
            out.push(s);
        }
    }

    /// Null threshold at sample size `n`, for the null-aware detectors.
    pub fn lambda(&self, m: usize, n: usize, k: usize) -> Option<f64> {
        match self {
            Detector::NullAware {
                lambda,
                lambda_coefficient,
            }
            | Detector::IdenticalNullAware {
                lambda,
                lambda_coefficient,
                ..
            } => Some(match (lambda, lambda_coefficient) {
                (Some(l), _) => *l,
                (None, Some(c)) => c * ((n as f64) + 1.0).ln() / n as f64,
                (None, None) => default_lambda(m, n, k),
            }),
            _ => None,
        }
    }

    /// Position of the decision in [`HypothesisFamily::hypotheses`].
    pub fn decide_rows(
        &self,
        family: &HypothesisFamily,
        rows: &[&RowSummary],
        scratch: &mut Vec<f64>,
    ) -> usize {
        self.score_rows(family, rows, scratch);
        let offset = usize::from(family.include_null);
        if let Some(lambda) = self.lambda(family.m, rows[0].n, rows[0].gamma.len()) {
            if spread(scratch) <= lambda {
                return 0;
            }
        }
        argmin_earliest(scratch) + offset
    }

    /// Full score table for an observation matrix.
    pub fn scores(&self, obs: &ObservationMatrix) -> Result<ScoreTable> {
        let m = obs.num_coordinates();
        self.validate(m, obs.alphabet_size())?;
        let family = self.family(m)?;
        let summaries: Vec<RowSummary> = obs.types().iter().map(|t| self.summarize(t)).collect();
        let rows: Vec<&RowSummary> = summaries.iter().collect();
        let mut out = Vec::new();
        self.score_rows(&family, &rows, &mut out);
        ScoreTable::new(family.members().cloned().zip(out).collect())
    }

    /// Scores the observations and applies the detector's decision rule.
    pub fn run(&self, obs: &ObservationMatrix) -> Result<Decision> {
        let scores = self.scores(obs)?;
        let lambda = self.lambda(
            obs.num_coordinates(),
            obs.num_samples(),
            obs.alphabet_size(),
        );
        let hypothesis = match lambda {
            Some(l) => decide_null_aware(&scores, l),
            None => decide(&scores),
        };
        let tied = !hypothesis.is_null() && scores.minimizers().len() > 1;
        Ok(Decision {
            hypothesis,
            tied,
            scores,
        })
    }
}

/// `U_i = D(γ_i‖μ) + Σ_{j≠i} D(γ_j‖π)`.
pub fn score_single_ml(obs: &ObservationMatrix, mu: &Pmf, pi: &Pmf) -> Result<ScoreTable> {
    Detector::MlSingle {
        mu: mu.clone(),
        pi: pi.clone(),
    }
    .scores(obs)
}

/// `U_i^typ = Σ_{j≠i} D(γ_j‖π)`.
pub fn score_single_typ(obs: &ObservationMatrix, pi: &Pmf) -> Result<ScoreTable> {
    Detector::TypSingle { pi: pi.clone() }.scores(obs)
}

/// `U_i^univ = Σ_{j≠i} D(γ_j ‖ mean_{k≠i} γ_k)`.
pub fn score_single_univ(obs: &ObservationMatrix) -> Result<ScoreTable> {
    Detector::UnivSingle.scores(obs)
}

/// `score_i = D(γ_i‖μ)`.
pub fn score_single_mu_only(obs: &ObservationMatrix, mu: &Pmf) -> Result<ScoreTable> {
    Detector::MuOnly { mu: mu.clone() }.scores(obs)
}

/// `U_S^typ` over all size-`t` subsets.
pub fn score_multi_typ(obs: &ObservationMatrix, pi: &Pmf, t: usize) -> Result<ScoreTable> {
    Detector::MultiTyp {
        pi: pi.clone(),
        outliers: t,
    }
    .scores(obs)
}

/// `U_S^univ` over all size-`t` subsets.
pub fn score_multi_univ(obs: &ObservationMatrix, t: usize) -> Result<ScoreTable> {
    Detector::MultiUniv { outliers: t }.scores(obs)
}

/// `Ū_S` over every non-null member of `family`.
pub fn score_identical_univ(
    obs: &ObservationMatrix,
    family: &HypothesisFamily,
) -> Result<ScoreTable> {
    if family.num_coordinates() != obs.num_coordinates() {
        return Err(Error::DimensionMismatch {
            left: family.num_coordinates(),
            right: obs.num_coordinates(),
        });
    }
    if family
        .members
        .iter()
        .any(|m| matches!(m.id, HypothesisId::Coordinate(_)))
    {
        return Err(Error::InvalidFamily(
            "identical-outlier statistic needs a subset family".into(),
        ));
    }
    let sizes: BTreeSet<usize> = family.members.iter().map(|m| m.inside.len()).collect();
    Detector::IdenticalUniv {
        sizes: sizes.into_iter().collect(),
    }
    .scores(obs)
}

/// Scores with `detector` and applies its decision rule.
pub fn run_detector(detector: &Detector, obs: &ObservationMatrix) -> Result<HypothesisId> {
    detector.run(obs).map(|d| d.hypothesis)
}
