//! The `etabs` command-line tool.

pub mod config;

use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use etabs_core::hamiltonian::{black_scholes, effective, generalized};
use etabs_core::metric::{
    continuum_black_scholes, continuum_generalized, detailed_balance, pseudo_hermiticity_residual,
};
use etabs_core::pricing::{black_scholes_call, black_scholes_put, knock_out_decomposition, price};
use etabs_core::spectral::decompose;
use etabs_core::susy::{factorized_system, verify_susy};
use etabs_core::{
    Lattice, MarketParams, MetricOperator, PayoffSpec, PotentialSpec, Superpotential,
    TridiagonalOperator,
};

pub use config::{parse_args, Command, Model, PayoffKind, RunConfig, UsageError};
use config::{PotentialInput, SuperpotentialInput};

/// Recurrence-metric residual above which a result is flagged degraded.
pub const DEGRADED_THRESHOLD: f64 = 1e-10;

/// Run one configured command, writing to the configured files or stdout.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let params = MarketParams::new(cfg.sigma, cfg.rate).context("etabs::run: market parameters")?;
    let lat = Lattice::new(cfg.lattice.x_min, cfg.lattice.x_max, cfg.lattice.n)
        .context("etabs::run: lattice")?;
    info!(
        "{:?} on {} nodes over [{:.4}, {:.4}], dx = {:.3e}",
        cfg.command,
        lat.len(),
        lat.x_min(),
        lat.x_max(),
        lat.dx()
    );
    match cfg.command {
        Command::Verify => verify(cfg, &params, &lat),
        Command::Spectrum => spectrum(cfg, &params, &lat),
        Command::Kernel => kernel(cfg, &params, &lat),
        Command::Price => price_cmd(cfg, &params, &lat),
        Command::Susy => susy(cfg, &params, &lat),
        Command::Dump => dump(cfg, &params, &lat),
    }
}

fn potential(cfg: &RunConfig, lat: &Lattice) -> PotentialSpec {
    match &cfg.potential {
        PotentialInput::Zero => PotentialSpec::Zero,
        PotentialInput::Constant { value } => PotentialSpec::Constant(*value),
        PotentialInput::Tanh { a, b } => PotentialSpec::from_fn(lat, |x| a + b * x.tanh()),
        PotentialInput::Table { values, .. } => PotentialSpec::Tabulated(values.clone()),
    }
}

struct ModelOperators {
    h: TridiagonalOperator,
    continuum: MetricOperator,
    recurrence: MetricOperator,
}

fn build_model(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<ModelOperators> {
    let v = potential(cfg, lat);
    let (h, continuum) = match cfg.model {
        Model::Bs => (
            black_scholes(params, lat),
            continuum_black_scholes(params, lat).context("etabs::model: continuum metric")?,
        ),
        Model::Effective => (
            effective(params, &v, lat).context("etabs::model: effective operator")?,
            continuum_black_scholes(params, lat).context("etabs::model: continuum metric")?,
        ),
        Model::Generalized => (
            generalized(params.sigma(), &v, lat).context("etabs::model: generalized operator")?,
            continuum_generalized(params.sigma(), &v, lat)
                .context("etabs::model: continuum metric")?,
        ),
    };
    let recurrence = detailed_balance(&h, continuum.values()[0])
        .context("etabs::model: recurrence metric")?;
    Ok(ModelOperators {
        h,
        continuum,
        recurrence,
    })
}

fn timestamp(cfg: &RunConfig) -> Option<u64> {
    cfg.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    })
}

fn no_color() -> bool {
    std::env::var_os("ETABS_NO_COLOR").is_some()
}

/// Print a warning line on stderr, yellow unless `ETABS_NO_COLOR` is set.
pub fn print_warning(msg: &str) {
    if no_color() {
        eprintln!("warning: {msg}");
    } else {
        eprintln!("\x1b[33mwarning\x1b[0m: {msg}");
    }
}

fn check_degraded(residual: f64, what: &str) -> bool {
    let degraded = residual > DEGRADED_THRESHOLD;
    if degraded {
        print_warning(&format!(
            "{what} residual {residual:.3e} exceeds {DEGRADED_THRESHOLD:e}; output marked degraded"
        ));
    }
    degraded
}

/// Wrap a command's result with the resolved config and optional timestamp.
fn envelope(cfg: &RunConfig, result: Value, degraded: bool) -> Value {
    let mut doc = json!({
        "config": cfg,
        "degraded": degraded,
        "result": result,
    });
    if let Some(t) = timestamp(cfg) {
        doc["generated_unix"] = json!(t);
    }
    doc
}

fn write_json(cfg: &RunConfig, doc: &Value, to_stdout: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).context("etabs::output: serialize JSON")? + "\n";
    match &cfg.out {
        Some(path) => write_file(path, &text),
        None if to_stdout => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .context("etabs::output: write stdout")
        }
        None => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("etabs::output: write {}", path.display()))
}

/// Serialize CSV rows to the configured file, or stdout when `to_stdout`.
fn write_csv<R: Serialize>(cfg: &RunConfig, rows: &[R], to_stdout: bool) -> Result<()> {
    let sink: Box<dyn Write> = match &cfg.csv {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .with_context(|| format!("etabs::output: create {}", path.display()))?,
        ),
        None if to_stdout => Box::new(std::io::stdout()),
        None => return Ok(()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r).context("etabs::output: write CSV row")?;
    }
    w.flush().context("etabs::output: flush CSV")?;
    Ok(())
}

fn verify(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let m = build_model(cfg, params, lat)?;
    let continuum = pseudo_hermiticity_residual(&m.h, &m.continuum)
        .context("etabs::verify: continuum residual")?;
    let recurrence = pseudo_hermiticity_residual(&m.h, &m.recurrence)
        .context("etabs::verify: recurrence residual")?;
    let degraded = check_degraded(recurrence, "recurrence-metric pseudo-Hermiticity");
    let result = json!({
        "model": cfg.model,
        "n": lat.len(),
        "dx": lat.dx(),
        "continuum_residual": continuum,
        "recurrence_residual": recurrence,
        "metric_condition_number": m.recurrence.condition_number(),
    });
    if cfg.out.is_some() {
        write_json(cfg, &envelope(cfg, result, degraded), false)?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<12} {:>14}", "metric", "residual")?;
    writeln!(out, "{:<12} {:>14.6e}", "continuum", continuum)?;
    writeln!(out, "{:<12} {:>14.6e}", "recurrence", recurrence)?;
    writeln!(out, "n = {}, dx = {:.6e}", lat.len(), lat.dx())?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    eigenvalue: f64,
    eta_norm_residual: f64,
}

fn spectrum(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let m = build_model(cfg, params, lat)?;
    let recurrence = pseudo_hermiticity_residual(&m.h, &m.recurrence)
        .context("etabs::spectrum: recurrence residual")?;
    let degraded = check_degraded(recurrence, "recurrence-metric pseudo-Hermiticity");
    let d = decompose(&m.h, &m.recurrence).context("etabs::spectrum: decomposition")?;
    let norms = d.norm_residuals();
    let rows: Vec<SpectrumRow> = d
        .eigenvalues
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(index, (&eigenvalue, &eta_norm_residual))| SpectrumRow {
            index,
            eigenvalue,
            eta_norm_residual,
        })
        .collect();
    write_csv(cfg, &rows, true)?;
    let result = json!({
        "model": cfg.model,
        "n": lat.len(),
        "dx": lat.dx(),
        "lowest": d.eigenvalues[0],
        "highest": d.eigenvalues[d.len() - 1],
        "residuals": {
            "pseudo_hermiticity": recurrence,
            "max_eta_norm": norms.iter().cloned().fold(0.0, f64::max),
        },
    });
    write_json(cfg, &envelope(cfg, result, degraded), false)
}

#[derive(Serialize)]
struct KernelRow {
    x_to: f64,
    density: f64,
}

fn kernel(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let m = build_model(cfg, params, lat)?;
    let recurrence = pseudo_hermiticity_residual(&m.h, &m.recurrence)
        .context("etabs::kernel: recurrence residual")?;
    let degraded = check_degraded(recurrence, "recurrence-metric pseudo-Hermiticity");
    let d = decompose(&m.h, &m.recurrence).context("etabs::kernel: decomposition")?;
    let i = lat.nearest(cfg.kernel_x);
    let row = d.kernel_row(cfg.tau, i).context("etabs::kernel: kernel row")?;
    let rows: Vec<KernelRow> = lat
        .points()
        .iter()
        .zip(&row)
        .map(|(&x_to, &k)| KernelRow {
            x_to,
            density: k / lat.dx(),
        })
        .collect();
    write_csv(cfg, &rows, true)?;
    let result = json!({
        "model": cfg.model,
        "x": lat.points()[i],
        "tau": cfg.tau,
        "n": lat.len(),
        "dx": lat.dx(),
        "mass": row.iter().sum::<f64>(),
        "active_modes": d.active_modes(cfg.tau),
        "residuals": { "pseudo_hermiticity": recurrence },
    });
    write_json(cfg, &envelope(cfg, result, degraded), false)
}

#[derive(Serialize)]
struct SurfaceRow {
    x: f64,
    spot: f64,
    value: f64,
}

fn price_cmd(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let payoff = match cfg.payoff {
        PayoffKind::Call => PayoffSpec::Call { strike: cfg.strike },
        PayoffKind::Put => PayoffSpec::Put { strike: cfg.strike },
        PayoffKind::Digital => PayoffSpec::Digital { strike: cfg.strike },
    };
    let barriers = cfg.barrier_low.is_some() || cfg.barrier_high.is_some();
    let (d, h) = if barriers {
        let d = knock_out_decomposition(params, cfg.barrier_low, cfg.barrier_high, lat)
            .context("etabs::price: barrier decomposition")?;
        let h = black_scholes(params, &d.lattice);
        (d, h)
    } else {
        let m = build_model(cfg, params, lat)?;
        let d = decompose(&m.h, &m.recurrence).context("etabs::price: decomposition")?;
        (d, m.h)
    };
    let pseudo = pseudo_hermiticity_residual(&h, &d.metric)
        .context("etabs::price: pseudo-Hermiticity residual")?;
    let degraded = check_degraded(pseudo, "recurrence-metric pseudo-Hermiticity");
    let gram = d.gram_deviation();
    let surface = price(&d, &payoff, cfg.tau).context("etabs::price: propagation")?;
    let value = if cfg.spot.ln() <= surface.lattice.x_min() || cfg.spot.ln() >= surface.lattice.x_max() {
        // Outside the active window: knocked out for barriers, else unpriced.
        anyhow::ensure!(barriers, "etabs::price: spot {} lies outside the lattice window", cfg.spot);
        0.0
    } else {
        surface
            .value_at_spot(cfg.spot)
            .context("etabs::price: interpolation at the spot")?
    };
    let reference = match (cfg.model, barriers, cfg.payoff) {
        (Model::Bs, false, PayoffKind::Call) => Some(black_scholes_call(cfg.spot, cfg.strike, params, cfg.tau)?),
        (Model::Bs, false, PayoffKind::Put) => Some(black_scholes_put(cfg.spot, cfg.strike, params, cfg.tau)?),
        _ => None,
    };
    let rows: Vec<SurfaceRow> = surface
        .lattice
        .points()
        .iter()
        .zip(&surface.values)
        .map(|(&x, &value)| SurfaceRow {
            x,
            spot: x.exp(),
            value,
        })
        .collect();
    write_csv(cfg, &rows, false)?;
    let result = json!({
        "price": value,
        "spot": cfg.spot,
        "strike": cfg.strike,
        "tau": cfg.tau,
        "params": params,
        "model": cfg.model,
        "payoff": cfg.payoff,
        "barrier_low": cfg.barrier_low,
        "barrier_high": cfg.barrier_high,
        "n": d.lattice.len(),
        "dx": d.lattice.dx(),
        "closed_form": reference,
        "residuals": {
            "pseudo_hermiticity": pseudo,
            "eta_gram": gram,
        },
    });
    write_json(cfg, &envelope(cfg, result, degraded), true)
}

fn superpotential(cfg: &RunConfig, lat: &Lattice) -> Result<Superpotential> {
    Ok(match &cfg.superpotential {
        SuperpotentialInput::Zero => Superpotential::zero(lat),
        SuperpotentialInput::Linear { a } => Superpotential::linear(lat, *a)?,
        SuperpotentialInput::Tanh { a } => Superpotential::tanh(lat, *a)?,
        SuperpotentialInput::Table { values, .. } => Superpotential::from_values(lat, values.clone())?,
    })
}

#[derive(Serialize)]
struct PairRow {
    index: usize,
    sharp_a: f64,
    a_sharp: f64,
}

fn susy(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let w = superpotential(cfg, lat).context("etabs::susy: superpotential")?;
    let eta = continuum_black_scholes(params, lat).context("etabs::susy: metric")?;
    let sys = factorized_system(params, &w, lat, &eta).context("etabs::susy: factorization")?;
    let report = verify_susy(&sys).context("etabs::susy: verification")?;
    let degraded = check_degraded(report.h_eff_pseudo_hermiticity, "effective-Hamiltonian pseudo-Hermiticity");
    let rows: Vec<PairRow> = report
        .spectrum_sharp_a
        .iter()
        .zip(&report.spectrum_a_sharp)
        .enumerate()
        .map(|(index, (&sharp_a, &a_sharp))| PairRow {
            index,
            sharp_a,
            a_sharp,
        })
        .collect();
    write_csv(cfg, &rows, false)?;
    let mut result = serde_json::to_value(&report).context("etabs::susy: serialize report")?;
    if let Some(obj) = result.as_object_mut() {
        obj.remove("spectrum_sharp_a");
        obj.remove("spectrum_a_sharp");
        obj.insert("dx".into(), json!(lat.dx()));
        obj.insert("derivative_gap".into(), json!(w.derivative_gap(lat)));
    }
    write_json(cfg, &envelope(cfg, result, degraded), true)
}

fn dump(cfg: &RunConfig, params: &MarketParams, lat: &Lattice) -> Result<()> {
    let m = build_model(cfg, params, lat)?;
    let mut d = m.h.to_dump();
    d.eta = Some(m.recurrence.values().to_vec());
    let text = d.to_json().context("etabs::dump: serialize")? + "\n";
    match &cfg.out {
        Some(path) => write_file(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("etabs::dump: write stdout"),
    }
}
