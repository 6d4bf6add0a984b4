//! Diagonal metric operators `eta` with `H^T = eta H eta^{-1}`.
//!
//! Two constructions are provided. The continuum formulas sample the
//! exponential weight in closed form and satisfy the intertwining relation
//! only up to discretization error. The detailed-balance recurrence
//! `eta[i+1] = eta[i] * upper[i] / lower[i]` makes `eta H` symmetric on the
//! lattice, so the relation holds to round-off.

use crate::error::{check_len, Error, Result};
use crate::hamiltonian::{cumulative_trapezoid, MarketParams, PotentialSpec};
use crate::lattice::Lattice;
use crate::operator::TridiagonalOperator;

pub const DEFAULT_EXPONENT_CAP: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOperator {
    eta: Vec<f64>,
}

impl MetricOperator {
    /// Validates positivity and finiteness.
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = eta.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "metric entry {i} must be positive and finite (got {v})"
            )));
        }
        Ok(Self { eta })
    }

    pub fn identity(n: usize) -> Self {
        Self { eta: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// `max(eta) / min(eta)`.
    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self
            .eta
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi / lo
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.eta.iter().map(|v| v * c).collect())
    }

    /// True when every entry equals the first one exactly.
    pub fn is_constant(&self) -> bool {
        self.eta.iter().all(|&v| v == self.eta[0])
    }
}

fn from_exponents(exponents: impl Iterator<Item = f64>, cap: f64) -> Result<MetricOperator> {
    let mut eta = Vec::new();
    for e in exponents {
        if e.abs() > cap {
            return Err(Error::MetricOverflow { exponent: e.abs(), cap });
        }
        eta.push(e.exp());
    }
    MetricOperator::new(eta)
}

/// `eta(x) = exp(-(1 - 2r/s2) x)` sampled on the nodes.
pub fn continuum_black_scholes(params: &MarketParams, lat: &Lattice) -> Result<MetricOperator> {
    continuum_black_scholes_capped(params, lat, DEFAULT_EXPONENT_CAP)
}

pub fn continuum_black_scholes_capped(
    params: &MarketParams,
    lat: &Lattice,
    cap: f64,
) -> Result<MetricOperator> {
    let k = params.eta_exponent();
    from_exponents(lat.points().iter().map(|&x| -k * x), cap)
}

/// `eta(x) = exp((2/s2) int_{x_min}^x V - x)`, the square of the
/// generalized similarity map.
pub fn continuum_generalized(
    sigma: f64,
    potential: &PotentialSpec,
    lat: &Lattice,
) -> Result<MetricOperator> {
    continuum_generalized_capped(sigma, potential, lat, DEFAULT_EXPONENT_CAP)
}

pub fn continuum_generalized_capped(
    sigma: f64,
    potential: &PotentialSpec,
    lat: &Lattice,
    cap: f64,
) -> Result<MetricOperator> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite (got {sigma})"
        )));
    }
    let v = potential.values(lat)?;
    let integral = cumulative_trapezoid(&v, lat);
    let s2 = sigma * sigma;
    from_exponents(
        lat.points()
            .iter()
            .zip(&integral)
            .map(|(&x, &iv)| 2.0 * iv / s2 - x),
        cap,
    )
}

/// Exact discrete metric from the ratio of off-diagonals. `anchor` is the
/// value at the first node; pass the continuum value there to make the two
/// constructions directly comparable.
pub fn detailed_balance(h: &TridiagonalOperator, anchor: f64) -> Result<MetricOperator> {
    detailed_balance_capped(h, anchor, DEFAULT_EXPONENT_CAP)
}

pub fn detailed_balance_capped(
    h: &TridiagonalOperator,
    anchor: f64,
    cap: f64,
) -> Result<MetricOperator> {
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "metric anchor must be positive and finite (got {anchor})"
        )));
    }
    let n = h.len();
    let dx = h.lattice().dx();
    let mut eta = Vec::with_capacity(n);
    eta.push(anchor);
    let mut log_eta = anchor.ln();
    for i in 0..n - 1 {
        let (u, l) = (h.upper()[i], h.lower()[i]);
        if u == 0.0 || l == 0.0 || (u > 0.0) != (l > 0.0) {
            // s2 ~ -(u + l) dx^2 and drift ~ (u - l) dx for the centered stencil.
            let s2 = -(u + l) * dx * dx;
            let drift = ((u - l) * dx).abs();
            let dx_bound = if drift > 0.0 { s2.abs() / drift } else { f64::INFINITY };
            return Err(Error::GridTooCoarse {
                index: i,
                upper: u,
                lower: l,
                dx_bound,
            });
        }
        let ratio = u / l;
        log_eta += ratio.ln();
        if log_eta.abs() > cap {
            return Err(Error::MetricOverflow {
                exponent: log_eta.abs(),
                cap,
            });
        }
        eta.push(eta[i] * ratio);
    }
    MetricOperator::new(eta)
}

/// `||eta H eta^{-1} - H^T||_inf / ||H||_inf` with the max-row-sum norm.
/// The diagonal cancels identically, so only off-diagonals contribute.
pub fn pseudo_hermiticity_residual(h: &TridiagonalOperator, metric: &MetricOperator) -> Result<f64> {
    let n = h.len();
    check_len(n, metric.len())?;
    let eta = metric.values();
    // r_up[i] sits at (i, i+1), r_lo[i] at (i+1, i)
    let r_up: Vec<f64> = (0..n - 1)
        .map(|i| eta[i] / eta[i + 1] * h.upper()[i] - h.lower()[i])
        .collect();
    let r_lo: Vec<f64> = (0..n - 1)
        .map(|i| eta[i + 1] / eta[i] * h.lower()[i] - h.upper()[i])
        .collect();
    let worst = (0..n)
        .map(|i| {
            let mut s = 0.0;
            if i + 1 < n {
                s += r_up[i].abs();
            }
            if i > 0 {
                s += r_lo[i - 1].abs();
            }
            s
        })
        .fold(0.0, f64::max);
    let norm = h.norm_inf();
    Ok(if norm > 0.0 { worst / norm } else { worst })
}
