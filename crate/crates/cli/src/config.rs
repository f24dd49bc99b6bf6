//! Run configuration: flags merged over an optional JSON file, then validated.
//!
//! Precedence, highest first: command-line flags, `FOFR_THREADS` (threads
//! only), the `--config` file, built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fofr_core::default_truncation;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Default number of bootstrap replicates.
pub const DEFAULT_Q: usize = 300;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Confband,
    TestClassical,
    TestRelevant,
    PredictBand,
    Eigensystem,
    Simulate,
    LooEval,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Confband => "confband",
            Command::TestClassical => "test-classical",
            Command::TestRelevant => "test-relevant",
            Command::PredictBand => "predict-band",
            Command::Eigensystem => "eigensystem",
            Command::Simulate => "simulate",
            Command::LooEval => "loo-eval",
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        const FIT: &[&str] = &["x", "y", "v", "lambda", "gcv", "seed", "out"];
        match self {
            Command::Fit | Command::LooEval => FIT,
            Command::Confband => &["x", "y", "v", "lambda", "gcv", "seed", "out", "alpha", "Q"],
            Command::TestClassical => &["x", "y", "v", "lambda", "gcv", "seed", "out", "alpha", "Q", "method", "beta-star"],
            Command::TestRelevant => &["x", "y", "v", "lambda", "gcv", "seed", "out", "alpha", "Q", "beta-star", "delta", "c"],
            Command::PredictBand => &["x", "y", "v", "lambda", "gcv", "seed", "out", "alpha", "Q", "x0"],
            Command::Eigensystem => &["x", "v", "out"],
            Command::Simulate => &["seed", "out", "alpha", "Q", "v", "dgp", "error", "n", "reps", "study", "grid"],
        }
    }

    fn stochastic(self, method: Method) -> bool {
        match self {
            Command::Confband | Command::TestRelevant | Command::PredictBand | Command::Simulate => true,
            Command::TestClassical => method == Method::Bt,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bt,
    Plrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Estimation,
    Coverage,
    Power,
    Classical,
}

/// Every option any subcommand accepts. Flags and the JSON file share these names.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Predictor curves, one subject per row.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response curves, one subject per row (a single column means a scalar response).
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// New predictor curve for `predict-band`.
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Hypothesized slope: `zero` or a CSV file.
    #[arg(long = "beta-star")]
    pub beta_star: Option<String>,
    /// Truncation level (default: ceil(n^(2/5))).
    #[arg(long)]
    pub v: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "Q")]
    #[serde(rename = "Q")]
    pub q: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relevance threshold for `test-relevant`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Extremal-set constant: `auto` or a positive number.
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed smoothing parameter.
    #[arg(long, conflicts_with = "gcv")]
    pub lambda: Option<f64>,
    /// Choose the smoothing parameter by GCV (the default).
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub gcv: Option<bool>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub dgp: Option<u32>,
    /// Error setting: i, ii or iii.
    #[arg(long)]
    pub error: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub study: Option<Study>,
    /// Grid size for simulated curves.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output JSON path; CSV companions are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "FOFR_THREADS")]
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Options {
    /// Names of the options that are set.
    fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        macro_rules! mark {
            ($($field:ident => $name:literal),*) => {$(if self.$field.is_some() { out.push($name); })*};
        }
        mark!(x => "x", y => "y", x0 => "x0", beta_star => "beta-star", v => "v", q => "Q",
              alpha => "alpha", delta => "delta", c => "c", seed => "seed", lambda => "lambda",
              gcv => "gcv", method => "method", dgp => "dgp", error => "error", n => "n",
              reps => "reps", study => "study", grid => "grid", out => "out");
        out
    }

    /// `self` wins field by field.
    pub fn over(self, base: Options) -> Options {
        Options {
            x: self.x.or(base.x),
            y: self.y.or(base.y),
            x0: self.x0.or(base.x0),
            beta_star: self.beta_star.or(base.beta_star),
            v: self.v.or(base.v),
            q: self.q.or(base.q),
            alpha: self.alpha.or(base.alpha),
            delta: self.delta.or(base.delta),
            c: self.c.or(base.c),
            seed: self.seed.or(base.seed),
            // a fixed lambda on the command line overrides gcv from the file and vice versa
            lambda: if self.gcv == Some(true) { None } else { self.lambda.or(base.lambda) },
            gcv: if self.lambda.is_some() { None } else { self.gcv.or(base.gcv) },
            method: self.method.or(base.method),
            dgp: self.dgp.or(base.dgp),
            error: self.error.or(base.error),
            n: self.n.or(base.n),
            reps: self.reps.or(base.reps),
            study: self.study.or(base.study),
            grid: self.grid.or(base.grid),
            out: self.out.or(base.out),
            threads: self.threads.or(base.threads),
        }
    }
}

pub fn read_config_file(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config file {}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    Gcv,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaStar {
    Zero,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremalConstant {
    Auto,
    Value(f64),
}

/// A validated run. `v = None` means `⌈n^{2/5}⌉` once `n` is known.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub x0: Option<PathBuf>,
    pub beta_star: BetaStar,
    pub v: Option<usize>,
    pub q: usize,
    pub alpha: f64,
    pub delta: Option<f64>,
    pub c: ExtremalConstant,
    pub seed: Option<u64>,
    pub lambda: LambdaMode,
    pub method: Method,
    pub dgp: u32,
    pub error: String,
    pub n: Option<usize>,
    pub reps: usize,
    pub study: Study,
    pub grid: usize,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn truncation(&self, n: usize) -> usize {
        self.v.unwrap_or_else(|| default_truncation(n))
    }

    /// Seed, or 0 for deterministic commands run without one.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require<T>(value: Option<T>, flag: &str, command: Command) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("{} requires --{flag}", command.name())))
}

/// Validate merged options for `command` and fill in defaults.
pub fn parse_config(command: Command, opts: Options) -> Result<RunConfig, CliError> {
    let allowed = command.allowed();
    if let Some(bad) = opts.present().into_iter().find(|f| !allowed.contains(f)) {
        return Err(usage(format!("--{bad} is not an option of {}", command.name())));
    }
    let method = opts.method.unwrap_or(Method::Bt);
    if command.stochastic(method) && opts.seed.is_none() {
        return Err(usage(format!("{} is stochastic and requires --seed", command.name())));
    }
    if let Some(v) = opts.v {
        if v < 1 {
            return Err(usage("--v must be at least 1"));
        }
    }
    let q = opts.q.unwrap_or(DEFAULT_Q);
    if q < 1 {
        return Err(usage("--Q must be at least 1"));
    }
    let alpha = opts.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(d) = opts.delta {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(usage(format!("--delta must be nonnegative, got {d}")));
        }
    }
    let c = match opts.c.as_deref() {
        None | Some("auto") => ExtremalConstant::Auto,
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => ExtremalConstant::Value(v),
            _ => return Err(usage(format!("--c must be `auto` or a positive number, got {s}"))),
        },
    };
    let lambda = match (opts.lambda, opts.gcv) {
        (Some(l), _) if !(l >= 0.0 && l.is_finite()) => return Err(usage(format!("--lambda must be nonnegative, got {l}"))),
        (Some(l), _) => LambdaMode::Fixed(l),
        (None, Some(false)) => return Err(usage("gcv=false needs a fixed --lambda")),
        (None, _) => LambdaMode::Gcv,
    };
    let beta_star = match opts.beta_star.as_deref() {
        None | Some("zero") => BetaStar::Zero,
        Some(p) => BetaStar::File(PathBuf::from(p)),
    };
    let dgp = opts.dgp.unwrap_or(1);
    if !(1..=3).contains(&dgp) {
        return Err(usage(format!("--dgp must be 1, 2 or 3, got {dgp}")));
    }
    let error = opts.error.unwrap_or_else(|| "i".into());
    if !["i", "ii", "iii"].contains(&error.as_str()) {
        return Err(usage(format!("--error must be i, ii or iii, got {error}")));
    }
    if let Some(n) = opts.n {
        if n < 4 {
            return Err(usage(format!("--n must be at least 4, got {n}")));
        }
    }
    let reps = opts.reps.unwrap_or(100);
    if reps < 1 {
        return Err(usage("--reps must be at least 1"));
    }
    let grid = opts.grid.unwrap_or(fofr_core::sim::DEFAULT_GRID);
    if grid < fofr_core::penalty::MIN_PENALTY_GRID {
        return Err(usage(format!(
            "--grid must be at least {}, got {grid}",
            fofr_core::penalty::MIN_PENALTY_GRID
        )));
    }
    let study = opts.study.unwrap_or(Study::Estimation);

    let data_commands = !matches!(command, Command::Simulate);
    let x = if data_commands { Some(require(opts.x, "x", command)?) } else { None };
    let y = if data_commands && command != Command::Eigensystem {
        Some(require(opts.y, "y", command)?)
    } else {
        None
    };
    let x0 = if command == Command::PredictBand {
        Some(require(opts.x0, "x0", command)?)
    } else {
        None
    };
    if command == Command::TestRelevant && opts.delta.is_none() {
        return Err(usage("test-relevant requires --delta"));
    }
    if command == Command::Simulate && opts.n.is_none() {
        return Err(usage("simulate requires --n"));
    }
    Ok(RunConfig {
        command,
        x,
        y,
        x0,
        beta_star,
        v: opts.v,
        q,
        alpha,
        delta: opts.delta,
        c,
        seed: opts.seed,
        lambda,
        method,
        dgp,
        error,
        n: opts.n,
        reps,
        study,
        grid,
        out: opts.out,
    })
}
