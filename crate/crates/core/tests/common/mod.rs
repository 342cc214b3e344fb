//! Full-sequence brute force with statistics written out from their
//! definitions, independent of the crate's scoring code.

#![allow(dead_code)]

use uoht::detectors::{combinations, default_lambda};
use uoht::simplex::{kl, mixture};
use uoht::{Detector, HypothesisId, Laws, Pmf};

pub fn pmf(v: &[f64]) -> Pmf {
    Pmf::new(v.to_vec()).unwrap()
}

fn gamma(row: &[usize], k: usize) -> Pmf {
    let mut c = vec![0.0; k];
    for &y in row {
        c[y] += 1.0;
    }
    Pmf::normalize(c).unwrap()
}

fn jensen(gs: &[Pmf], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let parts: Vec<&Pmf> = idx.iter().map(|&i| &gs[i]).collect();
    let w = vec![1.0 / idx.len() as f64; idx.len()];
    let mix = mixture(&parts, &w).unwrap();
    idx.iter().map(|&i| kl(&gs[i], &mix).unwrap()).sum()
}

/// Hypotheses in family order and their naive scores (null excluded).
fn naive_scores(det: &Detector, gs: &[Pmf]) -> (bool, Vec<(Vec<usize>, f64)>) {
    let m = gs.len();
    let outside = |s: &[usize]| -> Vec<usize> { (0..m).filter(|i| !s.contains(i)).collect() };
    let subsets = |sizes: &[usize]| -> Vec<Vec<usize>> {
        let mut v = Vec::new();
        let mut sizes = sizes.to_vec();
        sizes.sort_unstable();
        for t in sizes {
            v.extend(combinations(m, t));
        }
        v
    };
    let singles: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    match det {
        Detector::MlSingle { mu, pi } => (
            false,
            singles
                .into_iter()
                .map(|s| {
                    let v = kl(&gs[s[0]], mu).unwrap()
                        + outside(&s)
                            .iter()
                            .map(|&j| kl(&gs[j], pi).unwrap())
                            .sum::<f64>();
                    (s, v)
                })
                .collect(),
        ),
        Detector::TypSingle { pi } => (
            false,
            singles
                .into_iter()
                .map(|s| {
                    let v = outside(&s).iter().map(|&j| kl(&gs[j], pi).unwrap()).sum();
                    (s, v)
                })
                .collect(),
        ),
        Detector::MuOnly { mu } => (
            false,
            singles
                .into_iter()
                .map(|s| (s.clone(), kl(&gs[s[0]], mu).unwrap()))
                .collect(),
        ),
        Detector::UnivSingle | Detector::NullAware { .. } => (
            matches!(det, Detector::NullAware { .. }),
            singles
                .into_iter()
                .map(|s| (s.clone(), jensen(gs, &outside(&s))))
                .collect(),
        ),
        Detector::MultiTyp { pi, outliers } => (
            false,
            combinations(m, *outliers)
                .into_iter()
                .map(|s| {
                    let v = outside(&s).iter().map(|&j| kl(&gs[j], pi).unwrap()).sum();
                    (s, v)
                })
                .collect(),
        ),
        Detector::MultiUniv { outliers } => (
            false,
            combinations(m, *outliers)
                .into_iter()
                .map(|s| (s.clone(), jensen(gs, &outside(&s))))
                .collect(),
        ),
        Detector::IdenticalUniv { sizes } | Detector::IdenticalNullAware { sizes, .. } => (
            matches!(det, Detector::IdenticalNullAware { .. }),
            subsets(sizes)
                .into_iter()
                .map(|s| {
                    let v = jensen(gs, &s) + jensen(gs, &outside(&s));
                    (s, v)
                })
                .collect(),
        ),
    }
}

fn naive_lambda(det: &Detector, m: usize, n: usize, k: usize) -> f64 {
    match det {
        Detector::NullAware {
            lambda,
            lambda_coefficient,
        }
        | Detector::IdenticalNullAware {
            lambda,
            lambda_coefficient,
            ..
        } => match (lambda, lambda_coefficient) {
            (Some(l), _) => *l,
            (None, Some(c)) => c * ((n + 1) as f64).ln() / n as f64,
            (None, None) => default_lambda(m, n, k),
        },
        _ => unreachable!(),
    }
}

/// Outlier set decided for the rows (`None` for the null decision).
pub fn naive_decide(det: &Detector, rows: &[Vec<usize>], k: usize) -> Option<Vec<usize>> {
    let gs: Vec<Pmf> = rows.iter().map(|r| gamma(r, k)).collect();
    let (null_aware, scores) = naive_scores(det, &gs);
    let lo = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if null_aware && hi - lo <= naive_lambda(det, rows.len(), rows[0].len(), k) {
        return None;
    }
    let tol = 1e-12 * lo.abs().max(1.0);
    scores.into_iter().find(|s| s.1 <= lo + tol).map(|s| s.0)
}

/// Every truth's error by summing over all `K^{Mn}` raw sequences.
pub fn brute_force_errors(
    det: &Detector,
    laws: &Laws,
    n: usize,
    truths: &[HypothesisId],
) -> Vec<f64> {
    let m = laws.num_coordinates();
    let k = laws.alphabet_size();
    let total = (k as u64).pow((m * n) as u32);
    let mut errs = vec![0.0; truths.len()];
    let mut seq = vec![0usize; m * n];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = (c % k as u64) as usize;
            c /= k as u64;
        }
        let rows: Vec<Vec<usize>> = seq.chunks(n).map(|r| r.to_vec()).collect();
        let decided = naive_decide(det, &rows, k);
        for (e, truth) in errs.iter_mut().zip(truths) {
            let want = if truth.is_null() {
                None
            } else {
                Some(truth.outliers())
            };
            if decided != want {
                let mut p = 1.0;
                for (i, row) in rows.iter().enumerate() {
                    let law = laws.law(i, truth).probs();
                    for &y in row {
                        p *= law[y];
                    }
                }
                *e += p;
            }
        }
    }
    errs
}

/// One instance of every detector for `m = 3` binary coordinates.
pub fn all_detectors(mu: &Pmf, pi: &Pmf) -> Vec<Detector> {
    vec![
        Detector::MlSingle {
            mu: mu.clone(),
            pi: pi.clone(),
        },
        Detector::TypSingle { pi: pi.clone() },
        Detector::UnivSingle,
        Detector::MuOnly { mu: mu.clone() },
        Detector::NullAware {
            lambda: None,
            lambda_coefficient: None,
        },
        Detector::NullAware {
            lambda: Some(0.05),
            lambda_coefficient: None,
        },
        Detector::MultiTyp {
            pi: pi.clone(),
            outliers: 1,
        },
        Detector::MultiUniv { outliers: 1 },
        Detector::IdenticalUniv { sizes: vec![1] },
        Detector::IdenticalNullAware {
            sizes: vec![1],
            lambda: None,
            lambda_coefficient: Some(0.2),
        },
    ]
}
