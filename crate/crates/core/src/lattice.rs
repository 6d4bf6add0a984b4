//! Uniform log-price grids with homogeneous Dirichlet walls.
//!
//! Unknowns live on the `n` interior nodes `x_min + (i + 1) dx`; the two
//! boundary nodes carry the value zero and are never stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    x_min: f64,
    x_max: f64,
    n: usize,
    dx: f64,
    points: Vec<f64>,
}

/// Trapezoid weights on the interior nodes. With zero boundary values every
/// weight equals `dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    pub w: Vec<f64>,
}

impl Lattice {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidLattice(format!(
                "bounds must be finite (got [{x_min}, {x_max}])"
            )));
        }
        if x_min >= x_max {
            return Err(Error::InvalidLattice(format!(
                "x_min must be below x_max (got [{x_min}, {x_max}])"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidLattice(format!(
                "need at least 3 interior points (got {n})"
            )));
        }
        let dx = (x_max - x_min) / (n + 1) as f64;
        if dx <= 0.0 || !dx.is_finite() {
            return Err(Error::InvalidLattice(format!("degenerate spacing dx = {dx}")));
        }
        let points = (0..n).map(|i| x_min + (i + 1) as f64 * dx).collect();
        Ok(Self {
            x_min,
            x_max,
            n,
            dx,
            points,
        })
    }

    /// Window of half-width `half_width_sigmas * sigma * sqrt(tau)` around
    /// `x_center`, the diffusion length scale over the horizon.
    pub fn centered_window(
        x_center: f64,
        sigma: f64,
        tau: f64,
        half_width_sigmas: f64,
        n: usize,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidLattice(format!("sigma must be positive (got {sigma})")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidLattice(format!("tau must be positive (got {tau})")));
        }
        if !(half_width_sigmas > 0.0 && half_width_sigmas.is_finite()) {
            return Err(Error::InvalidLattice(format!(
                "window half-width must be positive (got {half_width_sigmas} sigmas)"
            )));
        }
        let half = half_width_sigmas * sigma * tau.sqrt();
        Self::new(x_center - half, x_center + half, n)
    }

    /// Regrid onto `[lo, hi]` (a sub-window of this lattice) keeping the
    /// spacing as close to `dx` as an integer node count allows. The new
    /// lattice has its walls exactly at `lo` and `hi`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= self.x_min && hi <= self.x_max && lo < hi) {
            return Err(Error::InvalidLattice(format!(
                "sub-window [{lo}, {hi}] is not inside [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let intervals = ((hi - lo) / self.dx).round() as usize;
        let n = intervals.saturating_sub(1);
        if n < 3 {
            return Err(Error::InvalidLattice(format!(
                "sub-window [{lo}, {hi}] holds fewer than 3 nodes at dx = {}",
                self.dx
            )));
        }
        Self::new(lo, hi, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> QuadratureWeights {
        QuadratureWeights {
            w: vec![self.dx; self.n],
        }
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.dx).round() as isize - 1;
        t.clamp(0, self.n as isize - 1) as usize
    }

    /// Linear interpolation of nodal values, with the Dirichlet zeros at
    /// both walls. `None` outside `[x_min, x_max]`.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        if values.len() != self.n || !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        // Position in units of dx from x_min; node i sits at i + 1.
        let s = (x - self.x_min) / self.dx;
        let left = (s.floor() as usize).min(self.n);
        let frac = s - left as f64;
        let at = |k: usize| -> f64 {
            if k == 0 || k > self.n {
                0.0
            } else {
                values[k - 1]
            }
        };
        Some(at(left) * (1.0 - frac) + at(left + 1) * frac)
    }
}

impl QuadratureWeights {
    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }
}
