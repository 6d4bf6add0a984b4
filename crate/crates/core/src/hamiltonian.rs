//! Discretized Black-Scholes Hamiltonians in log-price `x = ln S`.
//!
//! Second derivatives use the centered three-point stencil and first
//! derivatives the centered two-point stencil; terms reaching past either
//! wall are dropped (homogeneous Dirichlet data). With these stencils a
//! drift-diffusion operator `-(s2/2) d2 + b(x) d + V(x)` has
//!
//! ```text
//! diag[i]  =  s2/dx^2 + V(x_i)
//! upper[i] = -s2/(2 dx^2) + b(x_i)/(2 dx)        row i,   column i + 1
//! lower[i] = -s2/(2 dx^2) - b(x_{i+1})/(2 dx)    row i+1, column i
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lattice::Lattice;
use crate::operator::TridiagonalOperator;

/// Volatility `sigma` (per sqrt-year) and risk-free rate `r` (per year).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    sigma: f64,
    r: f64,
}

/// `s2/2 - v`, snapped to exactly zero when it vanishes to within a few
/// ulps. `sigma = 0.2, r = 0.02` then lands on the symmetric operator even
/// though `0.2 * 0.2 / 2 != 0.02` in binary.
fn snapped_drift(half_variance: f64, v: f64) -> f64 {
    let d = half_variance - v;
    if d.abs() <= 4.0 * f64::EPSILON * half_variance.abs().max(v.abs()) {
        0.0
    } else {
        d
    }
}

impl MarketParams {
    pub fn new(sigma: f64, r: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive and finite (got {sigma})"
            )));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate must be finite and non-negative (got {r})"
            )));
        }
        Ok(Self { sigma, r })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Coefficient `s2/2 - r` of the first-derivative term.
    pub fn drift(&self) -> f64 {
        snapped_drift(0.5 * self.variance(), self.r)
    }

    /// `r = s2/2`: the first-derivative term vanishes and the Black-Scholes
    /// Hamiltonian is symmetric.
    pub fn is_hermitian_limit(&self) -> bool {
        self.drift() == 0.0
    }

    /// `1 - 2r/s2`; the metric is `exp(-eta_exponent * x)`.
    pub fn eta_exponent(&self) -> f64 {
        if self.is_hermitian_limit() {
            0.0
        } else {
            1.0 - 2.0 * self.r / self.variance()
        }
    }

    /// `1/2 - r/s2`; the similarity map is `exp(-rho_exponent * x)`.
    pub fn rho_exponent(&self) -> f64 {
        if self.is_hermitian_limit() {
            0.0
        } else {
            0.5 - self.r / self.variance()
        }
    }

    /// Constant potential `(s2/2 + r)^2 / (2 s2)` of the Schrodinger form.
    pub fn schrodinger_constant(&self) -> f64 {
        let s2 = self.variance();
        let a = 0.5 * s2 + self.r;
        a * a / (2.0 * s2)
    }
}

/// Potential `V(x)` added to a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Zero,
    Constant(f64),
    /// One value per interior node.
    Tabulated(Vec<f64>),
    /// Infinite walls outside `(lower, upper)` in log-price. Realized by
    /// restricting the domain, so it has no finite nodal values.
    BarrierMask {
        lower: Option<f64>,
        upper: Option<f64>,
    },
}

impl PotentialSpec {
    pub fn from_fn(lat: &Lattice, f: impl Fn(f64) -> f64) -> Self {
        Self::Tabulated(lat.points().iter().map(|&x| f(x)).collect())
    }

    /// Finite stand-in for a barrier mask: `height` outside `(lower, upper)`.
    pub fn finite_wall(lat: &Lattice, lower: Option<f64>, upper: Option<f64>, height: f64) -> Self {
        Self::from_fn(lat, |x| {
            let below = lower.is_some_and(|b| x <= b);
            let above = upper.is_some_and(|b| x >= b);
            if below || above {
                height
            } else {
                0.0
            }
        })
    }

    pub fn values(&self, lat: &Lattice) -> Result<Vec<f64>> {
        let values = match self {
            Self::Zero => vec![0.0; lat.len()],
            Self::Constant(c) => vec![*c; lat.len()],
            Self::Tabulated(v) => {
                check_len(lat.len(), v.len())?;
                v.clone()
            }
            Self::BarrierMask { .. } => {
                return Err(Error::InvalidParameter(
                    "a barrier mask has no finite nodal values; it is realized by domain restriction"
                        .into(),
                ))
            }
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential values must be finite (found {bad})"
            )));
        }
        Ok(values)
    }
}

/// Positive nodal values of a similarity map `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub rho: Vec<f64>,
}

impl SimilarityMap {
    pub fn inverse(&self) -> Self {
        Self {
            rho: self.rho.iter().map(|r| 1.0 / r).collect(),
        }
    }
}

fn drift_diffusion(
    lat: &Lattice,
    variance: f64,
    drift: impl Fn(usize) -> f64,
    potential: impl Fn(usize) -> f64,
) -> Result<TridiagonalOperator> {
    let n = lat.len();
    let dx = lat.dx();
    let kinetic = variance / (dx * dx);
    let off = -0.5 * kinetic;
    let diag = (0..n).map(|i| kinetic + potential(i)).collect();
    let upper = (0..n - 1).map(|i| off + drift(i) / (2.0 * dx)).collect();
    let lower = (0..n - 1).map(|i| off - drift(i + 1) / (2.0 * dx)).collect();
    TridiagonalOperator::from_parts(lat.clone(), diag, upper, lower)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite (got {sigma})"
        )))
    }
}

/// `H_BS = -(s2/2) d2 + (s2/2 - r) d + r`.
pub fn black_scholes(params: &MarketParams, lat: &Lattice) -> TridiagonalOperator {
    let b = params.drift();
    let r = params.rate();
    drift_diffusion(lat, params.variance(), |_| b, |_| r)
        .expect("finite parameters give finite entries")
}

/// Symmetric Schrodinger form `-(s2/2) d2 + (s2/2 + r)^2 / (2 s2)`.
pub fn schrodinger_form(params: &MarketParams, lat: &Lattice) -> TridiagonalOperator {
    let c = params.schrodinger_constant();
    drift_diffusion(lat, params.variance(), |_| 0.0, |_| c)
        .expect("finite parameters give finite entries")
}

/// Martingale-preserving Hamiltonian `-(s2/2) d2 + (s2/2 - V) d + V` with a
/// security-dependent potential.
pub fn generalized(sigma: f64, potential: &PotentialSpec, lat: &Lattice) -> Result<TridiagonalOperator> {
    check_sigma(sigma)?;
    let v = potential.values(lat)?;
    let half = 0.5 * sigma * sigma;
    drift_diffusion(lat, sigma * sigma, |i| snapped_drift(half, v[i]), |i| v[i])
}

/// `H_eff = H_BS + V`. A [`PotentialSpec::BarrierMask`] restricts the
/// operator to the active window; the result then lives on a regridded
/// lattice whose walls sit exactly on the barriers.
pub fn effective(
    params: &MarketParams,
    potential: &PotentialSpec,
    lat: &Lattice,
) -> Result<TridiagonalOperator> {
    if let PotentialSpec::BarrierMask { lower, upper } = potential {
        let active = active_window(lat, *lower, *upper)?;
        return Ok(black_scholes(params, &active));
    }
    let v = potential.values(lat)?;
    let h = black_scholes(params, lat);
    let diag = h.diag().iter().zip(&v).map(|(d, p)| d + p).collect();
    TridiagonalOperator::from_parts(lat.clone(), diag, h.upper().to_vec(), h.lower().to_vec())
}

/// The lattice left over once walls at `lower`/`upper` (log-price) are
/// imposed. Walls outside the window are inactive.
pub fn active_window(lat: &Lattice, lower: Option<f64>, upper: Option<f64>) -> Result<Lattice> {
    let lo = lower.map_or(lat.x_min(), |b| b.max(lat.x_min()));
    let hi = upper.map_or(lat.x_max(), |b| b.min(lat.x_max()));
    if let Some(b) = lower {
        if b >= lat.x_max() {
            return Err(Error::InvalidBarrier(format!(
                "lower barrier {b} lies at or above the window top {}",
                lat.x_max()
            )));
        }
    }
    if let Some(b) = upper {
        if b <= lat.x_min() {
            return Err(Error::InvalidBarrier(format!(
                "upper barrier {b} lies at or below the window bottom {}",
                lat.x_min()
            )));
        }
    }
    if lo >= hi {
        return Err(Error::InvalidBarrier(format!(
            "barriers leave an empty window [{lo}, {hi}]"
        )));
    }
    if lo == lat.x_min() && hi == lat.x_max() {
        return Ok(lat.clone());
    }
    lat.restrict(lo, hi).map_err(|e| Error::InvalidBarrier(e.to_string()))
}

/// `rho(x) = exp(-(1/2 - r/s2) x)`.
pub fn similarity_map(params: &MarketParams, lat: &Lattice) -> SimilarityMap {
    let k = params.rho_exponent();
    SimilarityMap {
        rho: lat.points().iter().map(|&x| (-k * x).exp()).collect(),
    }
}

/// Cumulative trapezoid integral of nodal values anchored at `x_min`. The
/// wall value is not stored, so the first half-cell uses the first node.
pub(crate) fn cumulative_trapezoid(values: &[f64], lat: &Lattice) -> Vec<f64> {
    let dx = lat.dx();
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0] * dx;
    out.push(acc);
    for w in values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dx;
        out.push(acc);
    }
    out
}

/// `rho(x) = exp((1/s2) int_{x_min}^x V - x/2)`.
pub fn similarity_map_generalized(
    sigma: f64,
    potential: &PotentialSpec,
    lat: &Lattice,
) -> Result<SimilarityMap> {
    check_sigma(sigma)?;
    let v = potential.values(lat)?;
    let s2 = sigma * sigma;
    let integral = cumulative_trapezoid(&v, lat);
    Ok(SimilarityMap {
        rho: lat
            .points()
            .iter()
            .zip(&integral)
            .map(|(&x, &iv)| (iv / s2 - 0.5 * x).exp())
            .collect(),
    })
}

/// Entrywise `rho_i H_ij / rho_j`.
pub fn conjugate(h: &TridiagonalOperator, rho: &SimilarityMap) -> Result<TridiagonalOperator> {
    let n = h.len();
    check_len(n, rho.rho.len())?;
    if let Some(bad) = rho.rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "similarity map must be positive and finite (found {bad})"
        )));
    }
    let r = &rho.rho;
    let upper = (0..n - 1).map(|i| r[i] * h.upper()[i] / r[i + 1]).collect();
    let lower = (0..n - 1).map(|i| r[i + 1] * h.lower()[i] / r[i]).collect();
    TridiagonalOperator::from_parts(h.lattice().clone(), h.diag().to_vec(), upper, lower)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MarketParams {
        MarketParams::new(0.2, 0.05).unwrap()
    }

    fn interior_martingale_residual(h: &TridiagonalOperator) -> f64 {
        let lat = h.lattice();
        let u: Vec<f64> = lat.points().iter().map(|x| x.exp()).collect();
        let hu = h.apply(&u);
        hu[1..hu.len() - 1].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn observed_order(errors: &[f64]) -> f64 {
        let k = errors.len() - 1;
        (errors[k - 1] / errors[k]).log2()
    }

    #[test]
    fn rejects_bad_market_params() {
        assert!(MarketParams::new(0.0, 0.05).is_err());
        assert!(MarketParams::new(-0.1, 0.05).is_err());
        assert!(MarketParams::new(0.2, -0.01).is_err());
        assert!(MarketParams::new(0.2, f64::NAN).is_err());
    }

    #[test]
    fn black_scholes_stencil_entries() {
        // dx = 0.1 exactly: 11 intervals on [0, 1.1].
        let lat = Lattice::new(0.0, 1.1, 10).unwrap();
        assert!((lat.dx() - 0.1).abs() < 1e-15);
        let h = black_scholes(&params(), &lat);
        for &u in h.upper() {
            assert!((u + 2.15).abs() < 1e-12, "{u}");
        }
        for &l in h.lower() {
            assert!((l + 1.85).abs() < 1e-12, "{l}");
        }
        for &d in h.diag() {
            assert!((d - 4.05).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn hermitian_limit_is_symmetric_and_matches_schrodinger_form() {
        let p = MarketParams::new(0.2, 0.02).unwrap();
        assert!(p.is_hermitian_limit());
        let lat = Lattice::new(-1.0, 1.0, 50).unwrap();
        let h = black_scholes(&p, &lat);
        assert!(h.is_symmetric());
        let s = schrodinger_form(&p, &lat);
        assert!((p.schrodinger_constant() - 0.02).abs() < 1e-17);
        for (a, b) in h.diag().iter().zip(s.diag()) {
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
        assert_eq!(h.upper(), s.upper());
        assert!(!black_scholes(&params(), &lat).is_symmetric());
    }

    #[test]
    fn schrodinger_constant_value() {
        let c = params().schrodinger_constant();
        assert!((c - 0.06125).abs() < 1e-15);
        let lat = Lattice::new(-1.0, 1.0, 20).unwrap();
        assert!(schrodinger_form(&params(), &lat).is_symmetric());
    }

    #[test]
    fn reduction_chain_is_exact() {
        let lat = Lattice::new(-2.0, 2.0, 41).unwrap();
        for p in [params(), MarketParams::new(0.2, 0.02).unwrap(), MarketParams::new(0.35, 0.0).unwrap()] {
            let bs = black_scholes(&p, &lat);
            let g = generalized(p.sigma(), &PotentialSpec::Constant(p.rate()), &lat).unwrap();
            let e = effective(&p, &PotentialSpec::Zero, &lat).unwrap();
            assert_eq!(bs, g);
            assert_eq!(bs, e);
        }
    }

    #[test]
    fn zero_potential_generalized() {
        let lat = Lattice::new(0.0, 1.0, 9).unwrap();
        let h = generalized(0.3, &PotentialSpec::Zero, &lat).unwrap();
        let k = 0.09 / (lat.dx() * lat.dx());
        assert!(h.diag().iter().all(|&d| (d - k).abs() < 1e-12));
        let drift = (h.upper()[0] - h.lower()[0]) * lat.dx();
        assert!((drift - 0.045).abs() < 1e-12);
    }

    #[test]
    fn constant_shift_moves_diagonal_only() {
        let lat = Lattice::new(0.0, 1.0, 9).unwrap();
        let base = black_scholes(&params(), &lat);
        let e = effective(&params(), &PotentialSpec::Constant(0.7), &lat).unwrap();
        assert_eq!(e.upper(), base.upper());
        assert_eq!(e.lower(), base.lower());
        for (a, b) in e.diag().iter().zip(base.diag()) {
            assert!((a - b - 0.7).abs() < 1e-13);
        }
    }

    #[test]
    fn martingale_residual_converges_at_second_order() {
        let p = params();
        let tanh = |lat: &Lattice| PotentialSpec::from_fn(lat, |x| 0.05 + 0.01 * x.tanh());
        let mut bs_err = Vec::new();
        let mut gen_err = Vec::new();
        for n in [99, 199, 399, 799] {
            let lat = Lattice::new(-1.0, 1.0, n).unwrap();
            bs_err.push(interior_martingale_residual(&black_scholes(&p, &lat)));
            gen_err.push(interior_martingale_residual(
                &generalized(0.2, &tanh(&lat), &lat).unwrap(),
            ));
        }
        let o1 = observed_order(&bs_err);
        let o2 = observed_order(&gen_err);
        assert!((o1 - 2.0).abs() < 0.1, "order {o1} from {bs_err:?}");
        assert!((o2 - 2.0).abs() < 0.1, "order {o2} from {gen_err:?}");
    }

    #[test]
    fn similarity_map_values() {
        let lat = Lattice::new(0.0, 2.0, 3).unwrap();
        let rho = similarity_map(&params(), &lat);
        assert!((rho.rho[1] - 0.75f64.exp()).abs() < 1e-12);
        assert!((rho.rho[1] - 2.1170).abs() < 1e-4);
        assert!(rho.rho.iter().all(|&r| r > 0.0));
        let flat = similarity_map(&MarketParams::new(0.2, 0.02).unwrap(), &lat);
        assert!(flat.rho.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn generalized_map_matches_constant_case_up_to_a_constant() {
        let p = params();
        let lat = Lattice::new(-1.5, 2.5, 60).unwrap();
        let a = similarity_map(&p, &lat);
        let b = similarity_map_generalized(0.2, &PotentialSpec::Constant(0.05), &lat).unwrap();
        let ratios: Vec<f64> = a.rho.iter().zip(&b.rho).map(|(x, y)| y / x).collect();
        let expected = (-0.05 * lat.x_min() / 0.04f64).exp();
        for r in &ratios {
            assert!((r / expected - 1.0).abs() < 1e-12);
        }
        let z = similarity_map_generalized(0.2, &PotentialSpec::Zero, &lat).unwrap();
        for (r, x) in z.rho.iter().zip(lat.points()) {
            assert!((r - (-0.5 * x).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn conjugation_identities() {
        let lat = Lattice::new(-1.0, 1.0, 30).unwrap();
        let h = black_scholes(&params(), &lat);
        let ones = SimilarityMap { rho: vec![1.0; 30] };
        assert_eq!(conjugate(&h, &ones).unwrap(), h);
        let rho = similarity_map(&params(), &lat);
        let back = conjugate(&conjugate(&h, &rho).unwrap(), &rho.inverse()).unwrap();
        for (a, b) in back.upper().iter().chain(back.lower()).zip(h.upper().iter().chain(h.lower())) {
            assert!((a - b).abs() <= 1e-14 * b.abs());
        }
        assert!(conjugate(&h, &SimilarityMap { rho: vec![1.0; 29] }).is_err());
        let mut bad = vec![1.0; 30];
        bad[3] = 0.0;
        assert!(conjugate(&h, &SimilarityMap { rho: bad }).is_err());
    }

    #[test]
    fn conjugated_hamiltonian_acts_like_schrodinger_form() {
        // Entrywise the two operators differ by O(1) constants (the
        // kappa^2 term is split between diagonal and off-diagonals), but
        // their action on smooth data agrees to O(dx^2).
        let p = params();
        let kappa = p.rho_exponent();
        let mut errs = Vec::new();
        for n in [99, 199, 399, 799] {
            let lat = Lattice::new(-5.0, 5.0, n).unwrap();
            let c = conjugate(&black_scholes(&p, &lat), &similarity_map(&p, &lat)).unwrap();
            let h = schrodinger_form(&p, &lat);
            let off = c.upper()[n / 2] - h.upper()[n / 2];
            assert!((off - 0.04 * kappa * kappa / 4.0).abs() < 1e-2);
            let u: Vec<f64> = lat.points().iter().map(|x| (-x * x).exp()).collect();
            let (cu, hu) = (c.apply(&u), h.apply(&u));
            errs.push(cu.iter().zip(&hu).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        }
        let o = observed_order(&errs);
        assert!((o - 2.0).abs() < 0.1, "order {o} from {errs:?}");
    }

    #[test]
    fn generalized_conjugate_is_nearly_symmetric() {
        let mut errs = Vec::new();
        for n in [99, 199, 399, 799] {
            let lat = Lattice::new(-2.0, 2.0, n).unwrap();
            let v = PotentialSpec::from_fn(&lat, |x| 0.05 + 0.01 * x.tanh());
            let h = generalized(0.2, &v, &lat).unwrap();
            let c = conjugate(&h, &similarity_map_generalized(0.2, &v, &lat).unwrap()).unwrap();
            let asym = c.to_banded().sub(&c.transpose().to_banded()).norm_inf();
            errs.push(asym);
        }
        let o = observed_order(&errs);
        assert!((o - 1.0).abs() < 0.1, "order {o} from {errs:?}");
    }

    #[test]
    fn barrier_mask_restricts_domain() {
        let lat = Lattice::new(0.0, 1.0, 99).unwrap();
        let mask = PotentialSpec::BarrierMask { lower: Some(0.3), upper: None };
        let h = effective(&params(), &mask, &lat).unwrap();
        assert_eq!(h.lattice().x_min(), 0.3);
        assert_eq!(h.lattice().x_max(), 1.0);
        assert_eq!(h.len(), 69);
        assert!(mask.values(&lat).is_err());
        let inactive = PotentialSpec::BarrierMask { lower: Some(-1.0), upper: Some(2.0) };
        assert_eq!(effective(&params(), &inactive, &lat).unwrap(), black_scholes(&params(), &lat));
        let above = PotentialSpec::BarrierMask { lower: Some(1.5), upper: None };
        assert!(matches!(effective(&params(), &above, &lat), Err(Error::InvalidBarrier(_))));
    }

    #[test]
    fn potential_validation() {
        let lat = Lattice::new(0.0, 1.0, 5).unwrap();
        assert!(PotentialSpec::Tabulated(vec![0.0; 4]).values(&lat).is_err());
        assert!(PotentialSpec::Tabulated(vec![0.0, 1.0, f64::INFINITY, 0.0, 0.0]).values(&lat).is_err());
        assert!(generalized(0.0, &PotentialSpec::Zero, &lat).is_err());
        let wall = PotentialSpec::finite_wall(&lat, Some(0.4), None, 1e6).values(&lat).unwrap();
        assert_eq!(wall.iter().filter(|&&v| v == 1e6).count(), 2);
    }
}
