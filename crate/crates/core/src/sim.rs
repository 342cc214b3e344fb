//! Seeded Monte Carlo error estimates and exponent sweeps.
//!
//! Each trial draws from its own generator, seeded by hashing the master
//! seed with the truth, sample size and trial index, so the outcome does not
//! depend on trial order or on the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::detectors::{
    Detector, HypothesisFamily, HypothesisId, Laws, ObservationMatrix, RowSummary,
};
use crate::error::{Error, Result};
use crate::oracle::weighted_fit;
use crate::simplex::{Pmf, TypeVector};

/// Identifies the sampling stream; changes whenever sampled values would.
pub const RNG_ALGORITHM: &str = "chacha8/splitmix64-seeds/u64-threshold-v1";

pub const MIN_TRIALS: usize = 100;

const CONFIDENCE: f64 = 0.95;
const Z95: f64 = 1.959963984540054;

/// A Monte Carlo experiment: detector, generating laws, grid of sample sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub detector: Detector,
    pub laws: Laws,
    pub ns: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Hypotheses to simulate under; all of the detector's family when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truths: Option<Vec<HypothesisId>>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn family(&self) -> Result<HypothesisFamily> {
        self.detector.family(self.laws.num_coordinates())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::InvalidParameter(format!(
                "trials must be at least {MIN_TRIALS}, got {}",
                self.trials
            )));
        }
        let laws = Laws::new(self.laws.pi.clone(), self.laws.mus.clone())?;
        self.detector
            .validate(laws.num_coordinates(), laws.alphabet_size())?;
        if self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidParameter(
                "sample sizes must be nonempty and positive".into(),
            ));
        }
        let family = self.family()?;
        for t in self.truths.iter().flatten() {
            if !family.contains(t) {
                return Err(Error::TruthNotInFamily(t.to_string()));
            }
        }
        Ok(())
    }

    pub fn truths(&self) -> Result<Vec<HypothesisId>> {
        match &self.truths {
            Some(t) => Ok(t.clone()),
            None => Ok(self.family()?.hypotheses()),
        }
    }
}

/// Error frequency with a two-sided 95% Clopper-Pearson interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub errors: usize,
}

impl ErrorEstimate {
    pub fn from_counts(errors: usize, trials: usize) -> Self {
        let (ci_low, ci_high) = clopper_pearson(errors, trials);
        ErrorEstimate {
            estimate: errors as f64 / trials as f64,
            ci_low,
            ci_high,
            trials,
            errors,
        }
    }

    pub fn covers(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Exact binomial 95% interval for `x` successes in `n` trials.
pub fn clopper_pearson(x: usize, n: usize) -> (f64, f64) {
    let alpha = 1.0 - CONFIDENCE;
    let (xf, nf) = (x as f64, n as f64);
    let lo = if x == 0 {
        0.0
    } else {
        inv_beta_reg(xf, nf - xf + 1.0, alpha / 2.0)
    };
    let hi = if x == n {
        1.0
    } else {
        inv_beta_reg(xf + 1.0, nf - xf, 1.0 - alpha / 2.0)
    };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one trial, from the master seed and the trial's coordinates.
pub fn trial_seed(master: u64, truth: &HypothesisId, n: usize, trial: usize) -> u64 {
    let mut h = splitmix64(master);
    let outliers = truth.outliers();
    h = splitmix64(h ^ outliers.len() as u64);
    for i in outliers {
        h = splitmix64(h ^ (i as u64 + 1));
    }
    h = splitmix64(h ^ n as u64);
    splitmix64(h ^ trial as u64)
}

/// Inverse-CDF sampler on integer thresholds: symbol `y` is drawn when a
/// uniform `u64` falls below `thresholds[y]` and no earlier threshold.
#[derive(Clone, Debug)]
struct Sampler {
    thresholds: Vec<u64>,
}

impl Sampler {
    fn new(p: &Pmf) -> Self {
        let two64 = 18_446_744_073_709_551_616.0_f64;
        let mut cum = 0.0;
        let mut thresholds: Vec<u64> = p
            .probs()
            .iter()
            .map(|&q| {
                cum += q;
                // `as` saturates at u64::MAX.
                (cum * two64) as u64
            })
            .collect();
        *thresholds.last_mut().unwrap() = u64::MAX;
        Sampler { thresholds }
    }

    #[inline]
    fn draw(&self, rng: &mut impl RngCore) -> usize {
        let u = rng.next_u64();
        self.thresholds
            .iter()
            .position(|&t| u < t)
            .unwrap_or(self.thresholds.len() - 1)
    }
}

fn samplers_for(laws: &Laws, truth: &HypothesisId) -> Vec<Sampler> {
    (0..laws.num_coordinates())
        .map(|i| Sampler::new(laws.law(i, truth)))
        .collect()
}

/// Draws an `M × n` observation matrix under `truth`, row by row.
pub fn generate(
    truth: &HypothesisId,
    laws: &Laws,
    n: usize,
    seed: u64,
) -> Result<ObservationMatrix> {
    let m = laws.num_coordinates();
    if truth.outliers().iter().any(|&i| i >= m) {
        return Err(Error::InvalidParameter(format!(
            "{truth} is out of range for M = {m}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = samplers_for(laws, truth)
        .iter()
        .map(|s| (0..n).map(|_| s.draw(&mut rng)).collect())
        .collect();
    ObservationMatrix::new(rows, laws.alphabet_size())
}

/// Runs one trial with the same draws as [`generate`], counting symbols
/// instead of storing them. Returns whether the decision was wrong.
fn trial_errs(
    detector: &Detector,
    family: &HypothesisFamily,
    samplers: &[Sampler],
    truth_pos: usize,
    n: usize,
    seed: u64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = samplers[0].thresholds.len();
    let summaries: Vec<RowSummary> = samplers
        .iter()
        .map(|s| {
            let mut counts = vec![0usize; k];
            for _ in 0..n {
                counts[s.draw(&mut rng)] += 1;
            }
            detector.summarize(&TypeVector::new(counts).expect("n >= 1"))
        })
        .collect();
    let rows: Vec<&RowSummary> = summaries.iter().collect();
    let mut scratch = Vec::new();
    detector.decide_rows(family, &rows, &mut scratch) != truth_pos
}

fn estimate_at(
    cfg: &SimConfig,
    family: &HypothesisFamily,
    truth: &HypothesisId,
    n: usize,
) -> Result<ErrorEstimate> {
    let truth_pos = family
        .position(truth)
        .ok_or_else(|| Error::TruthNotInFamily(truth.to_string()))?;
    let samplers = samplers_for(&cfg.laws, truth);
    let errors = (0..cfg.trials)
        .into_par_iter()
        .filter(|&t| {
            trial_errs(
                &cfg.detector,
                family,
                &samplers,
                truth_pos,
                n,
                trial_seed(cfg.seed, truth, n, t),
            )
        })
        .count();
    Ok(ErrorEstimate::from_counts(errors, cfg.trials))
}

/// Error frequency under `truth` at every sample size of `cfg`, in order.
pub fn estimate_error(cfg: &SimConfig, truth: &HypothesisId) -> Result<Vec<ErrorEstimate>> {
    cfg.validate()?;
    let family = cfg.family()?;
    cfg.ns
        .iter()
        .map(|&n| estimate_at(cfg, &family, truth, n))
        .collect()
}

/// Slope of `−ln err ≈ a·n + b·ln n + c` fitted by weighted least squares,
/// with weights from the delta-method variance `(1 − p̂)/errors` of `−ln p̂`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SlopeResult {
    Fitted(SlopeEstimate),
    /// Too few sample sizes with observed errors to fit. `bound` is the
    /// largest `−ln(ci_high)/n` over sizes with no errors, a rough lower
    /// bound on the exponent (0 when no size was error-free).
    AtLeast {
        bound: f64,
        points_with_errors: usize,
    },
}

impl SlopeResult {
    pub fn fitted(&self) -> Option<&SlopeEstimate> {
        match self {
            SlopeResult::Fitted(s) => Some(s),
            SlopeResult::AtLeast { .. } => None,
        }
    }
}

pub fn fit_slope(ns: &[usize], estimates: &[ErrorEstimate]) -> Result<SlopeResult> {
    if ns.len() != estimates.len() {
        return Err(Error::DimensionMismatch {
            left: ns.len(),
            right: estimates.len(),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut bound: f64 = 0.0;
    for (&n, e) in ns.iter().zip(estimates) {
        if e.errors == 0 {
            bound = bound.max(-e.ci_high.ln() / n as f64);
        } else if e.errors < e.trials {
            let p = e.estimate;
            xs.push(n as f64);
            ys.push(-p.ln());
            ws.push(e.errors as f64 / (1.0 - p));
        }
    }
    if xs.len() < 4 {
        return Ok(SlopeResult::AtLeast {
            bound,
            points_with_errors: xs.len(),
        });
    }
    let ([a, ..], cov) = weighted_fit(&xs, &ys, &ws)?;
    let se = cov[0][0].max(0.0).sqrt();
    Ok(SlopeResult::Fitted(SlopeEstimate {
        slope: a,
        std_error: se,
        ci_low: a - Z95 * se,
        ci_high: a + Z95 * se,
        points: xs.len(),
    }))
}

/// Estimates and fitted slope for one hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisSweep {
    pub truth: HypothesisId,
    pub estimates: Vec<ErrorEstimate>,
    pub slope: SlopeResult,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub ns: Vec<usize>,
    pub per_hypothesis: Vec<HypothesisSweep>,
    /// Largest point estimate over hypotheses, per sample size.
    pub max_estimate: Vec<f64>,
}

/// Runs [`estimate_error`] under every configured truth and fits slopes.
pub fn exponent_sweep(cfg: &SimConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let family = cfg.family()?;
    let mut per_hypothesis = Vec::new();
    for truth in cfg.truths()? {
        let estimates: Vec<ErrorEstimate> = cfg
            .ns
            .iter()
            .map(|&n| estimate_at(cfg, &family, &truth, n))
            .collect::<Result<_>>()?;
        let slope = fit_slope(&cfg.ns, &estimates)?;
        per_hypothesis.push(HypothesisSweep {
            truth,
            estimates,
            slope,
        });
    }
    let max_estimate = (0..cfg.ns.len())
        .map(|j| {
            per_hypothesis
                .iter()
                .map(|h| h.estimates[j].estimate)
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(SweepResult {
        ns: cfg.ns.clone(),
        per_hypothesis,
        max_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(v: &[f64]) -> Pmf {
        Pmf::new(v.to_vec()).unwrap()
    }

    fn example_laws() -> Laws {
        Laws::identical(pmf(&[0.3, 0.7]), pmf(&[0.7, 0.3]), 3).unwrap()
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi <= 3.7 / 1000.0 && hi > 3.6 / 1000.0, "{hi}");
        let (lo, hi) = clopper_pearson(1000, 1000);
        assert_eq!(hi, 1.0);
        assert!((lo - (1.0 - 3.689 / 1000.0)).abs() < 1e-4);
        // Reference interval for 5 of 20.
        let (lo, hi) = clopper_pearson(5, 20);
        assert!(
            (lo - 0.0865715).abs() < 1e-6 && (hi - 0.4910459).abs() < 1e-6,
            "{lo} {hi}"
        );
    }

    #[test]
    fn generation_is_deterministic() {
        let laws = example_laws();
        let a = generate(&HypothesisId::Coordinate(1), &laws, 50, 7).unwrap();
        let b = generate(&HypothesisId::Coordinate(1), &laws, 50, 7).unwrap();
        let c = generate(&HypothesisId::Coordinate(1), &laws, 50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(generate(&HypothesisId::Coordinate(3), &laws, 5, 0).is_err());
    }

    #[test]
    fn first_draws_are_pinned() {
        // Guards the sampling stream named by RNG_ALGORITHM.
        let laws = example_laws();
        let obs = generate(&HypothesisId::Coordinate(0), &laws, 12, 2024).unwrap();
        let flat: Vec<usize> = obs.rows().iter().flatten().copied().collect();
        assert_eq!(
            flat,
            [
                0, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 1, 1, 0, 0, 0,
                0, 1, 0, 0, 1, 0, 0, 0
            ]
        );
        assert_eq!(
            trial_seed(1, &HypothesisId::Subset(vec![0, 2]), 10, 3),
            6840087933621992009
        );
        assert_ne!(
            trial_seed(1, &HypothesisId::Null, 10, 3),
            trial_seed(1, &HypothesisId::Null, 10, 4)
        );
        assert_ne!(
            trial_seed(1, &HypothesisId::Coordinate(0), 10, 3),
            trial_seed(1, &HypothesisId::Subset(vec![0]), 11, 3)
        );
    }

    #[test]
    fn near_point_mass_rows_are_constant() {
        let pi = pmf(&[1.0 - 1e-12, 1e-12]);
        let laws = Laws::identical(pmf(&[0.5, 0.5]), pi, 4).unwrap();
        let obs = generate(&HypothesisId::Coordinate(2), &laws, 2000, 3).unwrap();
        for (i, row) in obs.rows().iter().enumerate() {
            if i != 2 {
                assert!(row.iter().all(|&y| y == 0));
            }
        }
        assert!(obs.rows()[2].contains(&1));
    }

    #[test]
    fn null_truth_draws_typical_rows() {
        let pi = pmf(&[1.0 - 1e-12, 1e-12]);
        let laws = Laws::identical(pmf(&[1e-12, 1.0 - 1e-12]), pi, 3).unwrap();
        let obs = generate(&HypothesisId::Null, &laws, 500, 1).unwrap();
        assert!(obs.rows().iter().flatten().all(|&y| y == 0));
    }

    #[test]
    fn symbol_frequencies_match_law() {
        let p = pmf(&[0.2, 0.5, 0.3]);
        let s = Sampler::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 3];
        let n = 200_000;
        for _ in 0..n {
            counts[s.draw(&mut rng)] += 1;
        }
        for (y, (&c, &want)) in counts.iter().zip(p.probs()).enumerate() {
            let f = c as f64 / n as f64;
            assert!((f - want).abs() < 0.005, "{y}: {f}");
        }
    }

    #[test]
    fn config_validation() {
        let cfg = SimConfig {
            detector: Detector::UnivSingle,
            laws: example_laws(),
            ns: vec![10],
            trials: 50,
            seed: 0,
            truths: None,
        };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { trials: 100, ..cfg };
        assert!(cfg.validate().is_ok());
        let bad = SimConfig {
            truths: Some(vec![HypothesisId::Null]),
            ..cfg.clone()
        };
        assert!(matches!(bad.validate(), Err(Error::TruthNotInFamily(_))));
        let json = r#"{"detector":{"kind":"univ-single"},"laws":{"pi":[0.7,0.3],"mus":[[0.3,0.7],[0.3,0.7],[0.3,0.7]]},"ns":[10],"trials":100}"#;
        assert_eq!(SimConfig::from_json(json).unwrap(), cfg);
        assert!(SimConfig::from_json(&json.replace("\"trials\"", "\"trails\"")).is_err());
    }

    #[test]
    fn equal_laws_give_two_thirds() {
        let p = pmf(&[0.4, 0.6]);
        let cfg = SimConfig {
            detector: Detector::UnivSingle,
            laws: Laws::identical(p.clone(), p, 3).unwrap(),
            ns: vec![8],
            trials: 3000,
            seed: 11,
            truths: None,
        };
        // Ties go to the earliest coordinate, so only the average over truths is 2/3.
        let mut exact_sum = 0.0;
        let mut est_sum = 0.0;
        for truth in cfg.truths().unwrap() {
            let exact = crate::oracle::exact_error(
                &cfg.detector,
                &cfg.laws,
                &truth,
                8,
                &Default::default(),
            )
            .unwrap()
            .value;
            let est = &estimate_error(&cfg, &truth).unwrap()[0];
            assert!(est.covers(exact), "{truth}: {est:?} vs {exact}");
            exact_sum += exact;
            est_sum += est.estimate;
        }
        assert!((exact_sum / 3.0 - 2.0 / 3.0).abs() < 1e-12);
        assert!((est_sum / 3.0 - 2.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn fit_slope_statuses() {
        let ns = [10, 20, 30, 40];
        let zero: Vec<ErrorEstimate> = ns
            .iter()
            .map(|_| ErrorEstimate::from_counts(0, 1000))
            .collect();
        match fit_slope(&ns, &zero).unwrap() {
            SlopeResult::AtLeast {
                bound,
                points_with_errors,
            } => {
                assert_eq!(points_with_errors, 0);
                assert!(bound > 0.0);
            }
            other => panic!("{other:?}"),
        }
        let rate = |n: usize| (-0.1 * n as f64).exp();
        let trials = 1_000_000_000;
        let est: Vec<ErrorEstimate> = ns
            .iter()
            .map(|&n| ErrorEstimate::from_counts((rate(n) * trials as f64) as usize, trials))
            .collect();
        let s = fit_slope(&ns, &est).unwrap();
        let s = s.fitted().unwrap();
        assert!((s.slope - 0.1).abs() < 1e-3, "{s:?}");
        assert!(s.ci_low < s.slope && s.slope < s.ci_high);
    }
}
