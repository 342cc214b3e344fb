//! Argument groups and value parsers shared across subcommands.

use clap::{Args, ValueEnum};
use uoht::{Detector, Error, Laws, Pmf};

pub fn parse_pmf(s: &str) -> Result<Pmf, String> {
    s.parse::<Pmf>().map_err(|e| e.to_string())
}

/// `MU;PI`, each a comma-separated pmf.
pub fn parse_pair(s: &str) -> Result<(Pmf, Pmf), String> {
    let (mu, pi) = s
        .split_once(';')
        .ok_or_else(|| format!("expected MU;PI, got {s:?}"))?;
    Ok((parse_pmf(mu)?, parse_pmf(pi)?))
}

/// Sample sizes as `a,b,c` or an inclusive range `start:end:step`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSizes(pub Vec<usize>);

pub fn parse_sizes(s: &str) -> Result<SampleSizes, String> {
    let int = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let ns = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (start, end, step) = match parts.as_slice() {
            [a, b] => (int(a)?, int(b)?, 1),
            [a, b, c] => (int(a)?, int(b)?, int(c)?),
            _ => return Err(format!("expected start:end[:step], got {s:?}")),
        };
        if step == 0 || end < start {
            return Err(format!("empty range {s:?}"));
        }
        (start..=end).step_by(step).collect()
    } else {
        s.split(',').map(int).collect::<Result<Vec<_>, _>>()?
    };
    if ns.is_empty() || ns.contains(&0) {
        return Err("sample sizes must be positive".into());
    }
    Ok(SampleSizes(ns))
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter(msg.into()).into()
}

/// Outlier and typical laws.
#[derive(Args, Debug)]
pub struct LawArgs {
    /// Outlier pmf, e.g. 0.3,0.7. Give it once for identical outliers or
    /// once per coordinate for distinct ones.
    #[arg(long, value_parser = parse_pmf, required = true)]
    pub mu: Vec<Pmf>,

    /// Typical pmf.
    #[arg(long, value_parser = parse_pmf, required = true)]
    pub pi: Option<Pmf>,

    /// Number of coordinates (implied by repeated --mu).
    #[arg(long)]
    pub m: Option<usize>,
}

impl LawArgs {
    pub fn pi(&self) -> &Pmf {
        self.pi.as_ref().expect("required by clap")
    }

    /// The single outlier law; rejects per-coordinate laws.
    pub fn single_mu(&self) -> anyhow::Result<&Pmf> {
        match self.mu.as_slice() {
            [mu] => Ok(mu),
            _ => Err(invalid("this command takes a single --mu")),
        }
    }

    pub fn m(&self) -> anyhow::Result<usize> {
        match (self.mu.len(), self.m) {
            (1, Some(m)) => Ok(m),
            (1, None) => Err(invalid("--m is required with a single --mu")),
            (len, Some(m)) if m != len => {
                Err(invalid(format!("--m {m} disagrees with {len} --mu values")))
            }
            (len, _) => Ok(len),
        }
    }

    /// One outlier law per coordinate.
    pub fn outlier_laws(&self) -> anyhow::Result<Vec<Pmf>> {
        let m = self.m()?;
        Ok(match self.mu.as_slice() {
            [mu] => vec![mu.clone(); m],
            many => many.to_vec(),
        })
    }

    pub fn laws(&self) -> anyhow::Result<Laws> {
        Ok(Laws::new(self.pi().clone(), self.outlier_laws()?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    MlSingle,
    TypSingle,
    UnivSingle,
    MuOnly,
    NullAware,
    MultiTyp,
    MultiUniv,
    IdenticalUniv,
    IdenticalNullAware,
}

#[derive(Args, Debug)]
pub struct DetectorArgs {
    /// Test statistic.
    #[arg(long, value_enum)]
    pub detector: DetectorKind,

    /// Outlier count for multi-typ and multi-univ.
    #[arg(long)]
    pub outliers: Option<usize>,

    /// Allowed outlier counts for the identical-outlier tests, e.g. 1,2.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,

    /// Fixed null threshold for the null-aware tests.
    #[arg(long, conflicts_with = "lambda_coefficient")]
    pub lambda: Option<f64>,

    /// Null threshold c·ln(n+1)/n for the null-aware tests.
    #[arg(long)]
    pub lambda_coefficient: Option<f64>,
}

impl DetectorArgs {
    pub fn build(&self, mu: Option<&Pmf>, pi: Option<&Pmf>) -> anyhow::Result<Detector> {
        let need_mu = || {
            mu.cloned()
                .ok_or_else(|| invalid("--mu is required for this detector"))
        };
        let need_pi = || {
            pi.cloned()
                .ok_or_else(|| invalid("--pi is required for this detector"))
        };
        let need_t = || {
            self.outliers
                .ok_or_else(|| invalid("--outliers is required for this detector"))
        };
        let need_sizes = || {
            if self.sizes.is_empty() {
                Err(invalid("--sizes is required for this detector"))
            } else {
                Ok(self.sizes.clone())
            }
        };
        let null_aware = matches!(
            self.detector,
            DetectorKind::NullAware | DetectorKind::IdenticalNullAware
        );
        if !null_aware && (self.lambda.is_some() || self.lambda_coefficient.is_some()) {
            return Err(invalid("--lambda applies only to the null-aware detectors"));
        }
        let (lambda, lambda_coefficient) = (self.lambda, self.lambda_coefficient);
        Ok(match self.detector {
            DetectorKind::MlSingle => Detector::MlSingle {
                mu: need_mu()?,
                pi: need_pi()?,
            },
            DetectorKind::TypSingle => Detector::TypSingle { pi: need_pi()? },
            DetectorKind::UnivSingle => Detector::UnivSingle,
            DetectorKind::MuOnly => Detector::MuOnly { mu: need_mu()? },
            DetectorKind::NullAware => Detector::NullAware {
                lambda,
                lambda_coefficient,
            },
            DetectorKind::MultiTyp => Detector::MultiTyp {
                pi: need_pi()?,
                outliers: need_t()?,
            },
            DetectorKind::MultiUniv => Detector::MultiUniv {
                outliers: need_t()?,
            },
            DetectorKind::IdenticalUniv => Detector::IdenticalUniv {
                sizes: need_sizes()?,
            },
            DetectorKind::IdenticalNullAware => Detector::IdenticalNullAware {
                sizes: need_sizes()?,
                lambda,
                lambda_coefficient,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_size_forms() {
        assert_eq!(
            parse_sizes("10:60:10").unwrap().0,
            vec![10, 20, 30, 40, 50, 60]
        );
        assert_eq!(parse_sizes("3:5").unwrap().0, vec![3, 4, 5]);
        assert_eq!(parse_sizes("7, 9").unwrap().0, vec![7, 9]);
        assert!(parse_sizes("0,4").is_err());
        assert!(parse_sizes("5:3").is_err());
        assert!(parse_sizes("1:2:0").is_err());
    }

    #[test]
    fn pair_form() {
        let (mu, pi) = parse_pair("0.3,0.7;0.7,0.3").unwrap();
        assert_eq!(mu.probs(), &[0.3, 0.7]);
        assert_eq!(pi.probs(), &[0.7, 0.3]);
        assert!(parse_pair("0.3,0.7").is_err());
    }
}
