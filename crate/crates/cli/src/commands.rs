use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use uoht::detectors::read_observations;
use uoht::exponents::{
    exponent_both_known, exponent_multi_known, exponent_multi_typ_known, exponent_univ_multi,
    exponent_univ_single, univ_multi_lower_bound, univ_single_lower_bound, ExponentResult,
    PenaltyOptions,
};
use uoht::oracle::{error_profile, exponent_fit_log, OracleOptions, TiePolicy, DEFAULT_CAP};
use uoht::sim::{exponent_sweep, SimConfig, SlopeResult, RNG_ALGORITHM};
use uoht::{Error, HypothesisId, Pmf};

use crate::args::{parse_pair, parse_pmf, parse_sizes, DetectorArgs, Format, LawArgs, SampleSizes};
use crate::output::{num, write_json, Metadata, Table};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExponentKind {
    /// 2B(μ, π): μ and π known.
    BothKnown,
    /// Multi-outlier exponent with all laws known.
    MultiKnown,
    /// Multi-outlier exponent with only π known.
    MultiTypKnown,
    /// Universal single-outlier exponent (needs --m).
    UnivSingle,
    /// Universal multi-outlier exponent (needs --t).
    UnivMulti,
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    /// Random restarts for the penalty solver.
    #[arg(long, default_value_t = PenaltyOptions::default().restarts)]
    restarts: usize,

    /// Seed for the solver's random starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn options(&self) -> PenaltyOptions {
        PenaltyOptions {
            restarts: self.restarts,
            seed: self.seed,
            ..PenaltyOptions::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct ExponentArgs {
    #[arg(long, value_enum)]
    kind: ExponentKind,
    #[command(flatten)]
    laws: LawArgs,
    /// Outlier count for the multi-outlier kinds.
    #[arg(long)]
    t: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn result_json(kind: &str, inputs: Value, r: &ExponentResult) -> Result<Value> {
    Ok(json!({
        "kind": kind,
        "inputs": inputs,
        "value": r.value,
        "solver": r.solver,
        "diagnostics": serde_json::to_value(&r.diagnostics)?,
    }))
}

pub fn exponent(args: &ExponentArgs, out: &mut dyn Write) -> Result<()> {
    let pi = args.laws.pi();
    let opts = args.solver.options();
    let mut meta = Metadata::new("exponent");
    let (name, inputs, r) = match args.kind {
        ExponentKind::BothKnown => {
            let mu = args.laws.single_mu()?;
            let r = exponent_both_known(mu, pi)?;
            ("both-known", json!({"mu": mu, "pi": pi}), r)
        }
        ExponentKind::MultiKnown | ExponentKind::MultiTypKnown => {
            let mus = args.laws.outlier_laws()?;
            let (name, r) = if args.kind == ExponentKind::MultiKnown {
                ("multi-known", exponent_multi_known(&mus, pi)?)
            } else {
                ("multi-typ-known", exponent_multi_typ_known(&mus, pi)?)
            };
            (name, json!({"mus": mus, "pi": pi}), r)
        }
        ExponentKind::UnivSingle => {
            let mu = args.laws.single_mu()?;
            let m = args.laws.m()?;
            meta = meta.with("seed", opts.seed);
            let r = exponent_univ_single(mu, pi, m, &opts)?;
            ("univ-single", json!({"mu": mu, "pi": pi, "m": m}), r)
        }
        ExponentKind::UnivMulti => {
            let mus = args.laws.outlier_laws()?;
            let t = args
                .t
                .ok_or_else(|| invalid("--t is required for univ-multi"))?;
            meta = meta.with("seed", opts.seed);
            let r = exponent_univ_multi(&mus, pi, t, &opts)?;
            ("univ-multi", json!({"mus": mus, "pi": pi, "t": t}), r)
        }
    };
    write_json(out, result_json(name, inputs, &r)?, &meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    /// KL-ball lower bound on the universal single-outlier exponent.
    UnivSingle,
    /// KL-ball lower bound on the universal multi-outlier exponent.
    UnivMulti,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[command(flatten)]
    laws: LawArgs,
    /// Outlier count for univ-multi.
    #[arg(long)]
    t: Option<usize>,
}

pub fn bound(args: &BoundArgs, out: &mut dyn Write) -> Result<()> {
    let pi = args.laws.pi();
    let (name, inputs, r, known) = match args.kind {
        BoundKind::UnivSingle => {
            let mu = args.laws.single_mu()?;
            let m = args.laws.m()?;
            let r = univ_single_lower_bound(mu, pi, m)?;
            let known = exponent_both_known(mu, pi)?.value;
            ("univ-single", json!({"mu": mu, "pi": pi, "m": m}), r, known)
        }
        BoundKind::UnivMulti => {
            let mus = args.laws.outlier_laws()?;
            let t = args
                .t
                .ok_or_else(|| invalid("--t is required for univ-multi"))?;
            let r = univ_multi_lower_bound(&mus, pi, t)?;
            let known = exponent_multi_typ_known(&mus, pi)?.value;
            (
                "univ-multi",
                json!({"mus": mus, "pi": pi, "t": t}),
                r,
                known,
            )
        }
    };
    let mut body = result_json(name, inputs, &r)?;
    body["known_typical_exponent"] = json!(known);
    write_json(out, body, &Metadata::new("bound"))
}

#[derive(Args, Debug)]
pub struct FigureArgs {
    /// Outlier/typical pair as MU;PI, repeatable. Defaults to three
    /// symmetric binary pairs.
    #[arg(long = "pair", value_parser = parse_pair)]
    pairs: Vec<(Pmf, Pmf)>,
    #[arg(long, default_value_t = 3)]
    m_min: usize,
    #[arg(long, default_value_t = 200)]
    m_max: usize,
}

fn default_pairs() -> Vec<(Pmf, Pmf)> {
    [(0.3, 0.7), (0.35, 0.65), (0.4, 0.6)]
        .iter()
        .map(|&(a, b)| (Pmf::new(vec![a, b]).unwrap(), Pmf::new(vec![b, a]).unwrap()))
        .collect()
}

pub fn figure(args: &FigureArgs, out: &mut dyn Write) -> Result<()> {
    if args.m_min < 3 || args.m_max < args.m_min {
        return Err(invalid(format!(
            "need 3 <= m-min <= m-max, got {}..{}",
            args.m_min, args.m_max
        )));
    }
    let pairs = if args.pairs.is_empty() {
        default_pairs()
    } else {
        args.pairs.clone()
    };
    let mut meta = Metadata::new("figure");
    let mut table = Table::new(["pair", "M", "lower_bound", "two_B"]);
    for (i, (mu, pi)) in pairs.iter().enumerate() {
        meta = meta.with("pair", format!("{} mu={mu} pi={pi}", i + 1));
        let two_b = exponent_both_known(mu, pi)?.value;
        for m in args.m_min..=args.m_max {
            let lb = univ_single_lower_bound(mu, pi, m)?.value;
            table.push(vec![
                (i + 1).to_string(),
                m.to_string(),
                num(lb),
                num(two_b),
            ]);
        }
    }
    table.write(out, &meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    Earliest,
    Uniform,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    laws: LawArgs,
    /// Sample sizes: a,b,c or start:end:step.
    #[arg(long, value_parser = parse_sizes)]
    ns: SampleSizes,
    /// How ties are scored: the detector's earliest-hypothesis rule, or
    /// splitting the tied mass uniformly.
    #[arg(long, value_enum, default_value_t = TieArg::Earliest)]
    tie_policy: TieArg,
    /// Largest number of type tuples enumerated per sample size.
    #[arg(long, default_value_t = DEFAULT_CAP as u64)]
    cap: u64,
    /// Work partitions (fixed, so results do not depend on thread count).
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn hypothesis_label(h: &HypothesisId) -> String {
    format!("error[{h}]")
}

pub fn oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<()> {
    let laws = args.laws.laws()?;
    let mus = &laws.mus;
    let shared_mu = mus.iter().all(|m| m == &mus[0]).then(|| &mus[0]);
    let detector = args.detector.build(shared_mu, Some(&laws.pi))?;
    let opts = OracleOptions {
        cap: args.cap as u128,
        partitions: args.partitions,
        tie_policy: match args.tie_policy {
            TieArg::Earliest => TiePolicy::Earliest,
            TieArg::Uniform => TiePolicy::Uniform,
        },
    };
    let ns = &args.ns.0;
    let profiles = ns
        .iter()
        .map(|&n| error_profile(&detector, &laws, n, &opts))
        .collect::<uoht::Result<Vec<_>>>()?;
    let logs: Vec<f64> = profiles.iter().map(|p| p.max().1.log_value).collect();
    let fit = exponent_fit_log(ns, &logs).ok();

    let mut meta = Metadata::new("oracle").with("detector", detector.name());
    if let Some(f) = &fit {
        meta = meta.with("fitted_slope", num(f.slope));
    }
    match args.format {
        Format::Json => {
            let body = json!({
                "detector": serde_json::to_value(&detector)?,
                "laws": serde_json::to_value(&laws)?,
                "profiles": serde_json::to_value(&profiles)?,
                "fit": serde_json::to_value(&fit)?,
            });
            write_json(out, body, &meta)
        }
        Format::Csv => {
            let hyps = &profiles[0].hypotheses;
            let mut header: Vec<String> = ["n", "tuples", "max_error", "ln_max_error", "worst"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend(hyps.iter().map(hypothesis_label));
            let mut table = Table::new(header);
            for p in &profiles {
                let (worst, e) = p.max();
                let mut row = vec![
                    p.n.to_string(),
                    p.tuples.to_string(),
                    num(e.value),
                    num(e.log_value),
                    worst.to_string(),
                ];
                row.extend(p.errors.iter().map(|e| num(e.value)));
                table.push(row);
            }
            table.write(out, &meta)
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON experiment config (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's sample sizes.
    #[arg(long, value_parser = parse_sizes)]
    ns: Option<SampleSizes>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

pub fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg: SimConfig = serde_json::from_str(&text).map_err(Error::from)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(ns) = &args.ns {
        cfg.ns = ns.0.clone();
    }
    cfg.validate()?;
    let sweep = exponent_sweep(&cfg)?;
    let meta = Metadata::new("simulate")
        .with("detector", cfg.detector.name())
        .with("seed", cfg.seed)
        .with("trials", cfg.trials)
        .with("rng", RNG_ALGORITHM);
    match args.format {
        Format::Json => {
            let body = json!({
                "config": serde_json::to_value(&cfg)?,
                "sweep": serde_json::to_value(&sweep)?,
            });
            write_json(out, body, &meta)
        }
        Format::Csv => {
            let mut table = Table::new([
                "truth",
                "n",
                "trials",
                "errors",
                "estimate",
                "ci_low",
                "ci_high",
                "slope_status",
                "slope",
                "slope_ci_low",
                "slope_ci_high",
            ]);
            for h in &sweep.per_hypothesis {
                let slope = match &h.slope {
                    SlopeResult::Fitted(s) => [
                        "fitted".to_string(),
                        num(s.slope),
                        num(s.ci_low),
                        num(s.ci_high),
                    ],
                    SlopeResult::AtLeast { bound, .. } => [
                        "at-least".to_string(),
                        num(*bound),
                        String::new(),
                        String::new(),
                    ],
                };
                for (n, e) in sweep.ns.iter().zip(&h.estimates) {
                    let mut row = vec![
                        h.truth.to_string(),
                        n.to_string(),
                        e.trials.to_string(),
                        e.errors.to_string(),
                        num(e.estimate),
                        num(e.ci_low),
                        num(e.ci_high),
                    ];
                    row.extend(slope.iter().cloned());
                    table.push(row);
                }
            }
            table.write(out, &meta)
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Observation file: `.csv` (one line per coordinate) or the binary format.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Outlier pmf for detectors that know it.
    #[arg(long, value_parser = parse_pmf)]
    mu: Option<Pmf>,
    /// Typical pmf for detectors that know it.
    #[arg(long, value_parser = parse_pmf)]
    pi: Option<Pmf>,
    /// Expected alphabet size (also fixes it for CSV input).
    #[arg(long)]
    k: Option<usize>,
    /// Expected number of coordinates.
    #[arg(long)]
    m: Option<usize>,
    /// Expected samples per coordinate.
    #[arg(long)]
    n: Option<usize>,
}

pub fn detect(args: &DetectArgs, out: &mut dyn Write) -> Result<()> {
    let k = args.k.or(args
        .mu
        .as_ref()
        .or(args.pi.as_ref())
        .map(Pmf::alphabet_size));
    let obs = read_observations(&args.input, k)
        .with_context(|| format!("reading {}", args.input.display()))?;
    for (flag, want, got) in [
        ("m", args.m, obs.num_coordinates()),
        ("n", args.n, obs.num_samples()),
    ] {
        if let Some(w) = want {
            if w != got {
                return Err(invalid(format!("--{flag} {w} but the file has {got}")));
            }
        }
    }
    let detector = args.detector.build(args.mu.as_ref(), args.pi.as_ref())?;
    let d = detector.run(&obs)?;
    let decision = if d.tied {
        format!("{} (tie)", d.hypothesis)
    } else {
        d.hypothesis.to_string()
    };
    let scores: Vec<Value> = d
        .scores
        .entries()
        .iter()
        .map(|(h, s)| json!({"hypothesis": h.to_string(), "score": s}))
        .collect();
    let body = json!({
        "decision": decision,
        "hypothesis": d.hypothesis.to_string(),
        "tied": d.tied,
        "detector": serde_json::to_value(&detector)?,
        "m": obs.num_coordinates(),
        "n": obs.num_samples(),
        "k": obs.alphabet_size(),
        "lambda": detector.lambda(obs.num_coordinates(), obs.num_samples(), obs.alphabet_size()),
        "scores": scores,
    });
    write_json(out, body, &Metadata::new("detect"))
}
