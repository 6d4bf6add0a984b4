//! Command-line and config-file parsing into a validated [`RunConfig`].
//!
//! A config file is flat `key = value` text; keys are the long flag names
//! (`window-sigmas` or `window_sigmas`). `#` starts a comment. Flags given
//! on the command line win over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "etabs", version, about = "Spectral Black-Scholes pricing with pseudo-Hermitian operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Subcommand, Debug)]
pub enum CommandArgs {
    /// Pseudo-Hermiticity residuals under the continuum and recurrence metrics
    Verify(Options),
    /// Eigenvalues and eta-norm residuals as CSV
    Spectrum(Options),
    /// One row of the pricing kernel as CSV
    Kernel(Options),
    /// Option price surface and the value at the spot
    Price(Options),
    /// Pseudo-supersymmetric factorization report
    Susy(Options),
    /// Operator and metric as JSON
    Dump(Options),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// Flat key = value file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rate: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub strike: Option<f64>,
    /// Defaults to the strike
    #[arg(long, allow_hyphen_values = true)]
    pub spot: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Half-width of the log-price window in units of sigma * sqrt(tau) [default: 6]
    #[arg(long, allow_hyphen_values = true)]
    pub window_sigmas: Option<f64>,
    /// Interior nodes [default: 2000, susy: 500]
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    /// bs | generalized | effective [default: bs]
    #[arg(long)]
    pub model: Option<String>,
    /// zero | const:C | tanh:A:B (V = A + B tanh x) | table:FILE
    #[arg(long, allow_hyphen_values = true)]
    pub potential: Option<String>,
    /// call | put | digital [default: call]
    #[arg(long)]
    pub payoff: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub barrier_low: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub barrier_high: Option<f64>,
    /// Superpotential: zero | linear:A | tanh:A | table:FILE [default: zero]
    #[arg(long = "W", alias = "w", allow_hyphen_values = true)]
    pub w: Option<String>,
    /// susy lattice half-width in log-price [default: 5]
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<f64>,
    /// Log-price of the kernel row [default: ln spot]
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Shift the window so ln(strike) falls on a node
    #[arg(long)]
    pub align_strike: bool,
    /// JSON output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV output file
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Spectrum,
    Kernel,
    Price,
    Susy,
    Dump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Bs,
    Generalized,
    Effective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialInput {
    Zero,
    Constant { value: f64 },
    /// `V = a + b tanh x`.
    Tanh { a: f64, b: f64 },
    Table {
        path: PathBuf,
        #[serde(skip)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SuperpotentialInput {
    Zero,
    Linear { a: f64 },
    Tanh { a: f64 },
    Table {
        path: PathBuf,
        #[serde(skip)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Call,
    Put,
    Digital,
}

/// Resolved lattice bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    /// Set when the bounds came from a centered window.
    pub window_sigmas: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub sigma: f64,
    pub rate: f64,
    pub strike: f64,
    pub spot: f64,
    pub tau: f64,
    pub lattice: LatticeSpec,
    pub model: Model,
    pub potential: PotentialInput,
    pub payoff: PayoffKind,
    pub barrier_low: Option<f64>,
    pub barrier_high: Option<f64>,
    pub superpotential: SuperpotentialInput,
    /// Log-price of the requested kernel row.
    pub kernel_x: f64,
    pub align_strike: bool,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub timestamp: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "sigma",
    "rate",
    "strike",
    "spot",
    "tau",
    "window-sigmas",
    "n",
    "x-min",
    "x-max",
    "model",
    "potential",
    "payoff",
    "barrier-low",
    "barrier-high",
    "W",
    "window",
    "x",
    "align-strike",
    "out",
    "csv",
    "no-timestamp",
];

/// Parse `key = value` lines. Unknown keys and repeated keys are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().replace('_', "-");
        let key = if key == "w" { "W".to_string() } else { key };
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(usage(format!("config line {}: unknown key \"{}\"", lineno + 1, k.trim())));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(usage(format!("config line {}: duplicate key \"{key}\"", lineno + 1)));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, UsageError> {
    v.parse()
        .map_err(|_| usage(format!("config key {key}: cannot parse \"{v}\"")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, UsageError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(usage(format!("config key {key}: expected true or false, got \"{v}\""))),
    }
}

/// Fill every option the command line left unset from the config entries.
fn merge(opts: &mut Options, entries: &BTreeMap<String, String>) -> Result<(), UsageError> {
    fn fill<T>(slot: &mut Option<T>, v: Option<T>) {
        if slot.is_none() {
            *slot = v;
        }
    }
    for (k, v) in entries {
        match k.as_str() {
            "sigma" => fill(&mut opts.sigma, Some(parse_num(k, v)?)),
            "rate" => fill(&mut opts.rate, Some(parse_num(k, v)?)),
            "strike" => fill(&mut opts.strike, Some(parse_num(k, v)?)),
            "spot" => fill(&mut opts.spot, Some(parse_num(k, v)?)),
            "tau" => fill(&mut opts.tau, Some(parse_num(k, v)?)),
            "window-sigmas" => fill(&mut opts.window_sigmas, Some(parse_num(k, v)?)),
            "n" => fill(&mut opts.n, Some(parse_num(k, v)?)),
            "x-min" => fill(&mut opts.x_min, Some(parse_num(k, v)?)),
            "x-max" => fill(&mut opts.x_max, Some(parse_num(k, v)?)),
            "model" => fill(&mut opts.model, Some(v.clone())),
            "potential" => fill(&mut opts.potential, Some(v.clone())),
            "payoff" => fill(&mut opts.payoff, Some(v.clone())),
            "barrier-low" => fill(&mut opts.barrier_low, Some(parse_num(k, v)?)),
            "barrier-high" => fill(&mut opts.barrier_high, Some(parse_num(k, v)?)),
            "W" => fill(&mut opts.w, Some(v.clone())),
            "window" => fill(&mut opts.window, Some(parse_num(k, v)?)),
            "x" => fill(&mut opts.x, Some(parse_num(k, v)?)),
            "align-strike" => opts.align_strike |= parse_bool(k, v)?,
            "out" => fill(&mut opts.out, Some(PathBuf::from(v))),
            "csv" => fill(&mut opts.csv, Some(PathBuf::from(v))),
            "no-timestamp" => opts.no_timestamp |= parse_bool(k, v)?,
            _ => unreachable!("keys are checked against KNOWN_KEYS"),
        }
    }
    Ok(())
}

fn read_table(flag: &str, path: &Path) -> Result<Vec<f64>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("--{flag}: cannot read {}: {e}", path.display())))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage(format!("--{flag}: bad value \"{t}\" in {}", path.display())))
        })
        .collect()
}

fn split_spec(s: &str) -> (&str, Vec<&str>) {
    let mut parts = s.split(':');
    let head = parts.next().unwrap_or("");
    (head, parts.collect())
}

fn spec_num(flag: &str, s: &str) -> Result<f64, UsageError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| usage(format!("--{flag}: cannot parse number \"{s}\"")))
}

pub fn parse_potential(s: &str) -> Result<PotentialInput, UsageError> {
    let (head, args) = split_spec(s);
    match (head, args.as_slice()) {
        ("zero", []) => Ok(PotentialInput::Zero),
        ("const", [c]) => Ok(PotentialInput::Constant {
            value: spec_num("potential", c)?,
        }),
        ("tanh", [a, b]) => Ok(PotentialInput::Tanh {
            a: spec_num("potential", a)?,
            b: spec_num("potential", b)?,
        }),
        ("table", [_, ..]) => {
            let path = PathBuf::from(&s["table:".len()..]);
            let values = read_table("potential", &path)?;
            Ok(PotentialInput::Table { path, values })
        }
        _ => Err(usage(format!(
            "--potential: expected zero, const:C, tanh:A:B or table:FILE (got \"{s}\")"
        ))),
    }
}

pub fn parse_superpotential(s: &str) -> Result<SuperpotentialInput, UsageError> {
    let (head, args) = split_spec(s);
    match (head, args.as_slice()) {
        ("zero", []) => Ok(SuperpotentialInput::Zero),
        ("linear", [a]) => Ok(SuperpotentialInput::Linear { a: spec_num("W", a)? }),
        ("tanh", [a]) => Ok(SuperpotentialInput::Tanh { a: spec_num("W", a)? }),
        ("table", [_, ..]) => {
            let path = PathBuf::from(&s["table:".len()..]);
            let values = read_table("W", &path)?;
            Ok(SuperpotentialInput::Table { path, values })
        }
        _ => Err(usage(format!(
            "--W: expected zero, linear:A, tanh:A or table:FILE (got \"{s}\")"
        ))),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive (got {v})")))
    }
}

/// Parse argv (including the program name) into a validated configuration.
/// Clap's own errors (unknown flags, `--help`) are returned as [`clap::Error`].
pub fn parse_args<I, T>(argv: I) -> Result<Result<RunConfig, UsageError>, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    Ok(resolve(cli))
}

pub fn resolve(cli: Cli) -> Result<RunConfig, UsageError> {
    let (command, mut opts) = match cli.command {
        CommandArgs::Verify(o) => (Command::Verify, o),
        CommandArgs::Spectrum(o) => (Command::Spectrum, o),
        CommandArgs::Kernel(o) => (Command::Kernel, o),
        CommandArgs::Price(o) => (Command::Price, o),
        CommandArgs::Susy(o) => (Command::Susy, o),
        CommandArgs::Dump(o) => (Command::Dump, o),
    };
    if let Some(path) = opts.config.clone() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("--config: cannot read {}: {e}", path.display())))?;
        merge(&mut opts, &parse_config_text(&text)?)?;
    }
    validate(command, opts)
}

fn validate(command: Command, o: Options) -> Result<RunConfig, UsageError> {
    let sigma = positive("sigma", o.sigma.unwrap_or(0.2))?;
    let rate = o.rate.unwrap_or(0.05);
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(usage(format!("--rate must be finite and non-negative (got {rate})")));
    }
    let strike = positive("strike", o.strike.unwrap_or(100.0))?;
    let spot = positive("spot", o.spot.unwrap_or(strike))?;
    let tau = positive("tau", o.tau.unwrap_or(0.5))?;
    let default_n = if command == Command::Susy { 500 } else { 2000 };
    let n = o.n.unwrap_or(default_n);
    if n < 3 {
        return Err(usage(format!("--n must be at least 3 (got {n})")));
    }

    let lattice = match (o.x_min, o.x_max) {
        (Some(lo), Some(hi)) => {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(usage(format!("--x-min must be below --x-max (got {lo}, {hi})")));
            }
            LatticeSpec {
                x_min: lo,
                x_max: hi,
                n,
                window_sigmas: None,
            }
        }
        (None, None) if command == Command::Susy => {
            let w = positive("window", o.window.unwrap_or(5.0))?;
            LatticeSpec {
                x_min: -w,
                x_max: w,
                n,
                window_sigmas: None,
            }
        }
        (None, None) => {
            let ws = positive("window-sigmas", o.window_sigmas.unwrap_or(6.0))?;
            let half = ws * sigma * tau.sqrt();
            let c = strike.ln();
            LatticeSpec {
                x_min: c - half,
                x_max: c + half,
                n,
                window_sigmas: Some(ws),
            }
        }
        _ => return Err(usage("--x-min and --x-max must be given together")),
    };
    let lattice = if o.align_strike {
        let dx = (lattice.x_max - lattice.x_min) / (n + 1) as f64;
        let k = strike.ln();
        let steps = ((k - lattice.x_min) / dx).round();
        let shift = k - (lattice.x_min + steps * dx);
        LatticeSpec {
            x_min: lattice.x_min + shift,
            x_max: lattice.x_max + shift,
            ..lattice
        }
    } else {
        lattice
    };

    let model = match o.model.as_deref().unwrap_or("bs") {
        "bs" => Model::Bs,
        "generalized" => Model::Generalized,
        "effective" => Model::Effective,
        other => {
            return Err(usage(format!(
                "--model: expected bs, generalized or effective (got \"{other}\")"
            )))
        }
    };
    let potential = match &o.potential {
        Some(s) => parse_potential(s)?,
        None => PotentialInput::Zero,
    };
    if let PotentialInput::Table { values, .. } = &potential {
        if values.len() != n {
            return Err(usage(format!(
                "--potential: table has {} values but the lattice has {n} nodes",
                values.len()
            )));
        }
    }
    let payoff = match o.payoff.as_deref().unwrap_or("call") {
        "call" => PayoffKind::Call,
        "put" => PayoffKind::Put,
        "digital" => PayoffKind::Digital,
        other => return Err(usage(format!("--payoff: expected call, put or digital (got \"{other}\")"))),
    };
    let barrier_low = o.barrier_low.map(|b| positive("barrier-low", b)).transpose()?;
    let barrier_high = o.barrier_high.map(|b| positive("barrier-high", b)).transpose()?;
    if let (Some(lo), Some(hi)) = (barrier_low, barrier_high) {
        if lo >= hi {
            return Err(usage(format!("--barrier-low must be below --barrier-high (got {lo}, {hi})")));
        }
    }
    if (barrier_low.is_some() || barrier_high.is_some()) && model != Model::Bs {
        return Err(usage("barriers are only supported with --model bs"));
    }
    let superpotential = match &o.w {
        Some(s) => parse_superpotential(s)?,
        None => SuperpotentialInput::Zero,
    };
    if let SuperpotentialInput::Table { values, .. } = &superpotential {
        if values.len() != n {
            return Err(usage(format!(
                "--W: table has {} values but the lattice has {n} nodes",
                values.len()
            )));
        }
    }
    let kernel_x = o.x.unwrap_or(spot.ln());
    if command == Command::Kernel && !(kernel_x > lattice.x_min && kernel_x < lattice.x_max) {
        return Err(usage(format!(
            "--x {kernel_x} lies outside the window [{}, {}]",
            lattice.x_min, lattice.x_max
        )));
    }
    Ok(RunConfig {
        command,
        sigma,
        rate,
        strike,
        spot,
        tau,
        lattice,
        model,
        potential,
        payoff,
        barrier_low,
        barrier_high,
        superpotential,
        kernel_x,
        align_strike: o.align_strike,
        out: o.out,
        csv: o.csv,
        timestamp: !o.no_timestamp,
    })
}
