//! European and barrier option prices from the spectral kernel, plus the
//! closed-form Black-Scholes values used to check them.

use log::warn;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::hamiltonian::{active_window, black_scholes, effective, MarketParams, PotentialSpec};
use crate::lattice::Lattice;
use crate::metric::{continuum_black_scholes, detailed_balance, MetricOperator};
use crate::operator::TridiagonalOperator;
use crate::spectral::{decompose, SpectralDecomposition};
use crate::special::norm_cdf;

/// Payoff at expiry as a function of log-price.
#[derive(Debug, Clone, PartialEq)]
pub enum PayoffSpec {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Pays 1 when `S > strike`.
    Digital { strike: f64 },
    /// One nonnegative value per node.
    Tabulated(Vec<f64>),
}

impl PayoffSpec {
    pub fn strike(&self) -> Option<f64> {
        match self {
            Self::Call { strike } | Self::Put { strike } | Self::Digital { strike } => Some(*strike),
            Self::Tabulated(_) => None,
        }
    }

    pub fn values(&self, lat: &Lattice) -> Result<Vec<f64>> {
        if let Some(k) = self.strike() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidParameter(format!("strike must be positive (got {k})")));
            }
        }
        let xs = lat.points();
        let values: Vec<f64> = match self {
            Self::Call { strike } => xs.iter().map(|x| (x.exp() - strike).max(0.0)).collect(),
            Self::Put { strike } => xs.iter().map(|x| (strike - x.exp()).max(0.0)).collect(),
            Self::Digital { strike } => xs
                .iter()
                .map(|x| if x.exp() > *strike { 1.0 } else { 0.0 })
                .collect(),
            Self::Tabulated(v) => {
                check_len(lat.len(), v.len())?;
                v.clone()
            }
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "payoff values must be finite and nonnegative (found {bad})"
            )));
        }
        Ok(values)
    }
}

/// Option values `C(x_i)` at every node for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSurface {
    pub tau: f64,
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl PriceSurface {
    /// Linear interpolation in log-price; zero at the walls.
    pub fn value_at_log(&self, x: f64) -> Option<f64> {
        self.lattice.interpolate(&self.values, x)
    }

    pub fn value_at_spot(&self, spot: f64) -> Option<f64> {
        if spot > 0.0 {
            self.value_at_log(spot.ln())
        } else {
            None
        }
    }
}

fn warn_on_edge_mass(g: &[f64]) {
    let max = g.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let n = g.len();
    let edge = 3.min(n);
    let lower = g[..edge].iter().any(|&v| v > 1e-6 * max);
    let upper = g[n - edge..].iter().any(|&v| v > 1e-6 * max);
    if lower || upper {
        warn!(
            "payoff is non-negligible within 3 nodes of the {} edge; the wall truncates it",
            match (lower, upper) {
                (true, true) => "lower and upper",
                (true, false) => "lower",
                _ => "upper",
            }
        );
    }
}

/// `C = K(tau) g`, evaluated through the modal expansion.
pub fn price(decomp: &SpectralDecomposition, payoff: &PayoffSpec, tau: f64) -> Result<PriceSurface> {
    let g = payoff.values(&decomp.lattice)?;
    warn_on_edge_mass(&g);
    let values = decomp.propagate(&g, tau)?;
    Ok(PriceSurface {
        tau,
        lattice: decomp.lattice.clone(),
        values,
    })
}

/// Detailed-balance metric of a Black-Scholes-type operator, anchored at the
/// continuum metric's value on the first node.
pub fn black_scholes_metric(params: &MarketParams, h: &TridiagonalOperator) -> Result<MetricOperator> {
    let anchor = continuum_black_scholes(params, h.lattice())?.values()[0];
    detailed_balance(h, anchor)
}

/// Decomposition of `H_BS + V` (plain Black-Scholes for [`PotentialSpec::Zero`]).
/// A barrier mask decomposes the restricted operator.
pub fn effective_decomposition(
    params: &MarketParams,
    potential: &PotentialSpec,
    lat: &Lattice,
) -> Result<SpectralDecomposition> {
    let h = effective(params, potential, lat)?;
    decompose(&h, &black_scholes_metric(params, &h)?)
}

pub fn black_scholes_decomposition(params: &MarketParams, lat: &Lattice) -> Result<SpectralDecomposition> {
    let h = black_scholes(params, lat);
    decompose(&h, &black_scholes_metric(params, &h)?)
}

fn log_barrier(b: Option<f64>, name: &str) -> Result<Option<f64>> {
    match b {
        None => Ok(None),
        Some(v) if v > 0.0 && v.is_finite() => Ok(Some(v.ln())),
        Some(v) => Err(Error::InvalidBarrier(format!("{name} barrier must be positive (got {v})"))),
    }
}

/// Decomposition of the Black-Scholes operator restricted to the region
/// between absorbing walls at `lower`/`upper` (price units). Walls outside
/// the window are inactive.
pub fn knock_out_decomposition(
    params: &MarketParams,
    lower: Option<f64>,
    upper: Option<f64>,
    lat: &Lattice,
) -> Result<SpectralDecomposition> {
    let lo = log_barrier(lower, "lower")?;
    let hi = log_barrier(upper, "upper")?;
    if let (Some(a), Some(b)) = (lo, hi) {
        if a >= b {
            return Err(Error::InvalidBarrier(format!(
                "lower barrier {} must lie below upper barrier {}",
                lower.unwrap(),
                upper.unwrap()
            )));
        }
    }
    let active = active_window(lat, lo, hi)?;
    black_scholes_decomposition(params, &active)
}

/// Price with absorbing walls at `lower`/`upper` (price units). The result
/// lives on the restricted lattice; walls outside the window are inactive.
pub fn knock_out(
    params: &MarketParams,
    payoff: &PayoffSpec,
    lower: Option<f64>,
    upper: Option<f64>,
    tau: f64,
    lat: &Lattice,
) -> Result<PriceSurface> {
    let decomp = knock_out_decomposition(params, lower, upper, lat)?;
    let payoff = match payoff {
        // A table is tied to the original nodes; carry it over by interpolation.
        PayoffSpec::Tabulated(v) => PayoffSpec::Tabulated(
            decomp
                .lattice
                .points()
                .iter()
                .map(|&x| lat.interpolate(v, x).unwrap_or(0.0))
                .collect(),
        ),
        other => other.clone(),
    };
    price(&decomp, &payoff, tau)
}

pub fn down_and_out_call(
    params: &MarketParams,
    strike: f64,
    barrier: f64,
    tau: f64,
    lat: &Lattice,
) -> Result<PriceSurface> {
    knock_out(params, &PayoffSpec::Call { strike }, Some(barrier), None, tau, lat)
}

pub fn double_knock_out_call(
    params: &MarketParams,
    strike: f64,
    lower: f64,
    upper: f64,
    tau: f64,
    lat: &Lattice,
) -> Result<PriceSurface> {
    if !(lower < strike && strike < upper) {
        return Err(Error::InvalidBarrier(format!(
            "need lower < strike < upper (got {lower}, {strike}, {upper})"
        )));
    }
    knock_out(params, &PayoffSpec::Call { strike }, Some(lower), Some(upper), tau, lat)
}

fn check_closed_form(spot: f64, strike: f64, tau: f64) -> Result<()> {
    for (name, v) in [("spot", spot), ("strike", strike), ("tau", tau)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
        }
    }
    Ok(())
}

fn d1_d2(spot: f64, strike: f64, params: &MarketParams, tau: f64) -> (f64, f64) {
    let sd = params.sigma() * tau.sqrt();
    let d1 = ((spot / strike).ln() + (params.rate() + 0.5 * params.variance()) * tau) / sd;
    (d1, d1 - sd)
}

/// Black-Scholes European call.
pub fn black_scholes_call(spot: f64, strike: f64, params: &MarketParams, tau: f64) -> Result<f64> {
    check_closed_form(spot, strike, tau)?;
    let (d1, d2) = d1_d2(spot, strike, params, tau);
    Ok(spot * norm_cdf(d1) - strike * (-params.rate() * tau).exp() * norm_cdf(d2))
}

/// Black-Scholes European put.
pub fn black_scholes_put(spot: f64, strike: f64, params: &MarketParams, tau: f64) -> Result<f64> {
    check_closed_form(spot, strike, tau)?;
    let (d1, d2) = d1_d2(spot, strike, params, tau);
    Ok(strike * (-params.rate() * tau).exp() * norm_cdf(-d2) - spot * norm_cdf(-d1))
}

/// Discounted Gaussian transition density in log-price from `x` to `x_to`;
/// the log-price drifts by `(r - s2/2) tau`.
pub fn lognormal_kernel(params: &MarketParams, tau: f64, x: f64, x_to: f64) -> f64 {
    let s2t = params.variance() * tau;
    let m = x_to - x - (params.rate() - 0.5 * params.variance()) * tau;
    (-params.rate() * tau).exp() * (-m * m / (2.0 * s2t)).exp() / (2.0 * std::f64::consts::PI * s2t).sqrt()
}
