//! Pseudo-supersymmetric factorization `H_eff = A# A + delta`.
//!
//! `A = (s/sqrt 2) [d/dx + W(x) - (1/2 - r/s2)]` is discretized with the
//! forward difference, so `A` is upper bidiagonal and its pseudo-adjoint
//! `A# = eta^{-1} A^T eta` is lower bidiagonal. Both products `A# A` and
//! `A A#` are then tridiagonal, and the supercharge algebra holds at the
//! discrete level up to rounding.
//!
//! On the doubled space the supercharges are `Q = [[0, A], [0, 0]]` and
//! `Q# = [[0, 0], [A#, 0]]`, the super-Hamiltonian is
//! `diag(A A#, A# A)` and the metric is `diag(eta, eta)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::hamiltonian::{MarketParams, PotentialSpec};
use crate::lattice::Lattice;
use crate::metric::{pseudo_hermiticity_residual, MetricOperator};
use crate::operator::{BandedMatrix, TridiagonalOperator};
use crate::spectral::symmetric_eigenvalues;

/// `(s2/2 - r)^2 / (2 s2) + r`, the constant split off by the factorization.
pub fn delta(params: &MarketParams) -> f64 {
    let s2 = params.variance();
    let a = 0.5 * s2 - params.rate();
    a * a / (2.0 * s2) + params.rate()
}

/// Superpotential and its derivative at the lattice nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Superpotential {
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    /// False when `w_prime` came from finite differences of `w`.
    pub analytic_derivative: bool,
}

impl Superpotential {
    pub fn from_fn(lat: &Lattice, w: impl Fn(f64) -> f64, w_prime: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = lat.points();
        Self::checked(
            xs.iter().map(|&x| w(x)).collect(),
            xs.iter().map(|&x| w_prime(x)).collect(),
            true,
        )
    }

    /// Nodal values only; the derivative is taken by centered differences
    /// (second-order one-sided at the two end nodes).
    pub fn from_values(lat: &Lattice, w: Vec<f64>) -> Result<Self> {
        check_len(lat.len(), w.len())?;
        let w_prime = centered_derivative(&w, lat.dx());
        Self::checked(w, w_prime, false)
    }

    pub fn zero(lat: &Lattice) -> Self {
        Self::from_fn(lat, |_| 0.0, |_| 0.0).expect("zero is finite")
    }

    /// `W = a x`.
    pub fn linear(lat: &Lattice, a: f64) -> Result<Self> {
        Self::from_fn(lat, |x| a * x, |_| a)
    }

    /// `W = a tanh x`.
    pub fn tanh(lat: &Lattice, a: f64) -> Result<Self> {
        Self::from_fn(lat, |x| a * x.tanh(), |x| a / (x.cosh() * x.cosh()))
    }

    fn checked(w: Vec<f64>, w_prime: Vec<f64>, analytic_derivative: bool) -> Result<Self> {
        if w.iter().chain(&w_prime).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("superpotential values must be finite".into()));
        }
        Ok(Self {
            w,
            w_prime,
            analytic_derivative,
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Largest gap between the stored derivative and centered differences.
    pub fn derivative_gap(&self, lat: &Lattice) -> f64 {
        centered_derivative(&self.w, lat.dx())
            .iter()
            .zip(&self.w_prime)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn centered_derivative(w: &[f64], dx: f64) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx)
            } else if i == n - 1 {
                (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * dx)
            } else {
                (w[i + 1] - w[i - 1]) / (2.0 * dx)
            }
        })
        .collect()
}

/// `V = (s2/2)(W^2 - W')` and the partner `V_P = (s2/2)(W^2 + W')`.
pub fn potentials_from_w(sigma: f64, w: &Superpotential) -> Result<(PotentialSpec, PotentialSpec)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive and finite (got {sigma})"
        )));
    }
    let h = 0.5 * sigma * sigma;
    let v = w.w.iter().zip(&w.w_prime).map(|(a, d)| h * (a * a - d)).collect();
    let vp = w.w.iter().zip(&w.w_prime).map(|(a, d)| h * (a * a + d)).collect();
    Ok((PotentialSpec::Tabulated(v), PotentialSpec::Tabulated(vp)))
}

/// Forward-difference `A`: diagonal `c (W_i - k - 1/dx)`, upper `c/dx`,
/// with `c = s/sqrt 2` and `k = 1/2 - r/s2`.
pub fn build_a(params: &MarketParams, w: &Superpotential, lat: &Lattice) -> Result<TridiagonalOperator> {
    check_len(lat.len(), w.len())?;
    let c = params.sigma() * std::f64::consts::FRAC_1_SQRT_2;
    let k = params.rho_exponent();
    let inv_dx = 1.0 / lat.dx();
    let diag = w.w.iter().map(|wi| c * (wi - k - inv_dx)).collect();
    let upper = vec![c * inv_dx; lat.len() - 1];
    let lower = vec![0.0; lat.len() - 1];
    TridiagonalOperator::from_parts(lat.clone(), diag, upper, lower)
}

/// `A# = eta^{-1} A^T eta`, i.e. `(A#)_ij = A_ji eta_j / eta_i`.
pub fn pseudo_adjoint(a: &TridiagonalOperator, metric: &MetricOperator) -> Result<TridiagonalOperator> {
    let n = a.len();
    check_len(n, metric.len())?;
    let eta = metric.values();
    let upper = (0..n - 1).map(|i| a.lower()[i] * (eta[i + 1] / eta[i])).collect();
    let lower = (0..n - 1).map(|i| a.upper()[i] * (eta[i] / eta[i + 1])).collect();
    TridiagonalOperator::from_parts(a.lattice().clone(), a.diag().to_vec(), upper, lower)
}

/// 2x2 block operator on the doubled space; `None` blocks are exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    n: usize,
    blocks: [[Option<BandedMatrix>; 2]; 2],
}

impl BlockOperator {
    pub fn new(n: usize, blocks: [[Option<BandedMatrix>; 2]; 2]) -> Self {
        for m in blocks.iter().flatten().flatten() {
            assert_eq!(m.n(), n, "block size mismatch");
        }
        Self { n, blocks }
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&BandedMatrix> {
        self.blocks[i][j].as_ref()
    }

    /// Size of one block; the operator acts on `2 n` components.
    pub fn block_size(&self) -> usize {
        self.n
    }

    /// True when every block is structurally absent.
    pub fn is_structurally_zero(&self) -> bool {
        self.blocks.iter().flatten().all(Option::is_none)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out: [[Option<BandedMatrix>; 2]; 2] = Default::default();
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                for k in 0..2 {
                    if let (Some(a), Some(b)) = (self.block(i, k), rhs.block(k, j)) {
                        let p = a.mul(b);
                        *slot = Some(match slot.take() {
                            Some(acc) => acc.add(&p),
                            None => p,
                        });
                    }
                }
            }
        }
        Self::new(self.n, out)
    }

    fn combine(&self, rhs: &Self, sign: f64) -> Self {
        let mut out: [[Option<BandedMatrix>; 2]; 2] = Default::default();
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = match (self.block(i, j), rhs.block(i, j)) {
                    (Some(a), Some(b)) => Some(a.add(&b.scale(sign))),
                    (Some(a), None) => Some(a.clone()),
                    (None, Some(b)) => Some(b.scale(sign)),
                    (None, None) => None,
                };
            }
        }
        Self::new(self.n, out)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.combine(rhs, -1.0)
    }

    pub fn transpose(&self) -> Self {
        let t = |i: usize, j: usize| self.block(j, i).map(BandedMatrix::transpose);
        Self::new(self.n, [[t(0, 0), t(0, 1)], [t(1, 0), t(1, 1)]])
    }

    /// `D M D^{-1}` with `D = diag(eta, eta)`.
    pub fn conjugate_diagonal(&self, eta: &[f64]) -> Self {
        let c = |i: usize, j: usize| self.block(i, j).map(|m| m.conjugate_diagonal(eta));
        Self::new(self.n, [[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]])
    }

    /// Max row sum of absolute values over the full `2n x 2n` matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..2)
            .flat_map(|bi| (0..self.n).map(move |i| (bi, i)))
            .map(|(bi, i)| {
                (0..2)
                    .filter_map(|bj| self.block(bi, bj))
                    .map(|m| m.row_abs_sum(i))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SusySystem {
    pub params: MarketParams,
    pub a: TridiagonalOperator,
    pub a_sharp: TridiagonalOperator,
    pub delta: f64,
    /// `A# A + delta`.
    pub h_eff: TridiagonalOperator,
    /// `A A# + delta`.
    pub h_partner: TridiagonalOperator,
    pub eta: MetricOperator,
    pub q: BlockOperator,
    pub q_sharp: BlockOperator,
    /// `diag(A A#, A# A)`.
    pub h_super: BlockOperator,
}

fn shifted(lat: &Lattice, m: &BandedMatrix, shift: f64) -> Result<TridiagonalOperator> {
    Ok(TridiagonalOperator::from_banded(lat.clone(), m)?.shift_diagonal(shift))
}

pub fn factorized_system(
    params: &MarketParams,
    w: &Superpotential,
    lat: &Lattice,
    eta: &MetricOperator,
) -> Result<SusySystem> {
    check_len(lat.len(), eta.len())?;
    let a = build_a(params, w, lat)?;
    let a_sharp = pseudo_adjoint(&a, eta)?;
    let (ab, sb) = (a.to_banded(), a_sharp.to_banded());
    let sharp_a = sb.mul(&ab);
    let a_sharp_prod = ab.mul(&sb);
    let d = delta(params);
    let n = lat.len();
    Ok(SusySystem {
        params: *params,
        h_eff: shifted(lat, &sharp_a, d)?,
        h_partner: shifted(lat, &a_sharp_prod, d)?,
        q: BlockOperator::new(n, [[None, Some(ab)], [None, None]]),
        q_sharp: BlockOperator::new(n, [[None, None], [Some(sb), None]]),
        h_super: BlockOperator::new(n, [[Some(a_sharp_prod), None], [None, Some(sharp_a)]]),
        a,
        a_sharp,
        delta: d,
        eta: eta.clone(),
    })
}

/// Measurements of the pseudo-supersymmetry algebra. Residuals named
/// `*_relative` are divided by the natural operator-norm scale.
#[derive(Debug, Clone, Serialize)]
pub struct SusyReport {
    pub n: usize,
    pub delta: f64,
    /// `||{Q, Q#} - H||_inf / ||H||_inf`.
    pub anticommutator_relative: f64,
    /// `||[Q, H]||_inf / (||Q||_inf ||H||_inf)`.
    pub commutator_q_relative: f64,
    pub commutator_q_sharp_relative: f64,
    /// `Q^2 = 0` and `Q#^2 = 0` hold structurally.
    pub q_nilpotent: bool,
    pub q_sharp_nilpotent: bool,
    /// Pseudo-Hermiticity residual of the super-Hamiltonian under `diag(eta, eta)`.
    pub super_pseudo_hermiticity: f64,
    /// `||Q# - D^{-1} Q^T D||_inf / ||Q||_inf` with `D = diag(eta, eta)`.
    pub supercharge_adjoint_relative: f64,
    pub h_eff_pseudo_hermiticity: f64,
    pub h_partner_pseudo_hermiticity: f64,
    /// `||A H_eff - H_P A||_inf / (||A||_inf ||H_eff||_inf)`, and the `A#` analogue.
    pub intertwining_relative: f64,
    pub intertwining_sharp_relative: f64,
    /// Ascending spectra of `A# A` and `A A#`.
    pub spectrum_sharp_a: Vec<f64>,
    pub spectrum_a_sharp: Vec<f64>,
    /// Largest gap between paired nonzero eigenvalues.
    pub pairing_residual: f64,
    /// Eigenvalues below `1e-6 ||H||` on each side.
    pub near_zero_sharp_a: Vec<f64>,
    pub near_zero_a_sharp: Vec<f64>,
    /// `min eig(H_eff) - delta`; nonnegative up to rounding.
    pub h_eff_floor_margin: f64,
    pub metric_constant: bool,
    /// `max |A# - A^T|` entrywise.
    pub a_sharp_minus_transpose: f64,
    /// Metric constant and `A# = A^T` exactly.
    pub classical_susy: bool,
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

/// Spectra of `A# A` and `A A#` from the symmetric forms `M^T M` and `M M^T`
/// with `M = eta^{1/2} A eta^{-1/2}`, which is upper bidiagonal.
fn paired_spectra(a: &TridiagonalOperator, eta: &MetricOperator) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    let s: Vec<f64> = eta.values().iter().map(|e| e.sqrt()).collect();
    let md = a.diag();
    let mu: Vec<f64> = (0..n - 1).map(|i| s[i] * a.upper()[i] / s[i + 1]).collect();
    let mtm_diag: Vec<f64> = (0..n)
        .map(|i| md[i] * md[i] + if i > 0 { mu[i - 1] * mu[i - 1] } else { 0.0 })
        .collect();
    let mtm_off: Vec<f64> = (0..n - 1).map(|i| md[i] * mu[i]).collect();
    let mmt_diag: Vec<f64> = (0..n)
        .map(|i| md[i] * md[i] + if i + 1 < n { mu[i] * mu[i] } else { 0.0 })
        .collect();
    let mmt_off: Vec<f64> = (0..n - 1).map(|i| mu[i] * md[i + 1]).collect();
    let (left, right) = rayon::join(
        || symmetric_eigenvalues(&mtm_diag, &mtm_off),
        || symmetric_eigenvalues(&mmt_diag, &mmt_off),
    );
    Ok((left?, right?))
}

/// Largest gap between sorted nonzero eigenvalues of the two lists, paired
/// from the top so one extra near-zero mode on either side is tolerated.
pub fn pairing_gap(left: &[f64], right: &[f64], zero_tol: f64) -> f64 {
    let nz = |v: &[f64]| -> Vec<f64> { v.iter().cloned().filter(|e| e.abs() >= zero_tol).collect() };
    let (l, r) = (nz(left), nz(right));
    l.iter()
        .rev()
        .zip(r.iter().rev())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn verify_susy(system: &SusySystem) -> Result<SusyReport> {
    let n = system.a.len();
    let eta = system.eta.values();
    let h = &system.h_super;
    let (q, qs) = (&system.q, &system.q_sharp);
    let h_norm = h.norm_inf();
    let q_norm = q.norm_inf();

    let (algebra, (spectra, intertwining)) = rayon::join(
        || {
            let anti = q.mul(qs).add(&qs.mul(q)).sub(h).norm_inf();
            let cq = q.mul(h).sub(&h.mul(q)).norm_inf();
            let cqs = qs.mul(h).sub(&h.mul(qs)).norm_inf();
            let super_ph = h.conjugate_diagonal(eta).sub(&h.transpose()).norm_inf();
            let inv: Vec<f64> = eta.iter().map(|e| 1.0 / e).collect();
            let adj = qs.sub(&q.transpose().conjugate_diagonal(&inv)).norm_inf();
            (anti, cq, cqs, super_ph, adj)
        },
        || {
            rayon::join(
                || paired_spectra(&system.a, &system.eta),
                || {
                    let a = system.a.to_banded();
                    let s = system.a_sharp.to_banded();
                    let he = system.h_eff.to_banded();
                    let hp = system.h_partner.to_banded();
                    let r1 = a.mul(&he).sub(&hp.mul(&a)).norm_inf();
                    let r2 = s.mul(&hp).sub(&he.mul(&s)).norm_inf();
                    (
                        relative(r1, a.norm_inf() * he.norm_inf()),
                        relative(r2, s.norm_inf() * hp.norm_inf()),
                    )
                },
            )
        },
    );
    let (anti, cq, cqs, super_ph, adj) = algebra;
    let (spectrum_sharp_a, spectrum_a_sharp) = spectra?;

    let zero_tol = 1e-6 * h_norm;
    let near = |v: &[f64]| -> Vec<f64> { v.iter().cloned().filter(|e| e.abs() < zero_tol).collect() };
    let a_t = system.a.transpose();
    let a_sharp_minus_transpose = system
        .a_sharp
        .diag()
        .iter()
        .zip(a_t.diag())
        .chain(system.a_sharp.upper().iter().zip(a_t.upper()))
        .chain(system.a_sharp.lower().iter().zip(a_t.lower()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let metric_constant = system.eta.is_constant();
    let h_eff_floor = spectrum_sharp_a[0];
    Ok(SusyReport {
        n,
        delta: system.delta,
        anticommutator_relative: relative(anti, h_norm),
        commutator_q_relative: relative(cq, q_norm * h_norm),
        commutator_q_sharp_relative: relative(cqs, qs.norm_inf() * h_norm),
        q_nilpotent: q.mul(q).is_structurally_zero(),
        q_sharp_nilpotent: qs.mul(qs).is_structurally_zero(),
        super_pseudo_hermiticity: relative(super_ph, h_norm),
        supercharge_adjoint_relative: relative(adj, q_norm),
        h_eff_pseudo_hermiticity: pseudo_hermiticity_residual(&system.h_eff, &system.eta)?,
        h_partner_pseudo_hermiticity: pseudo_hermiticity_residual(&system.h_partner, &system.eta)?,
        intertwining_relative: intertwining.0,
        intertwining_sharp_relative: intertwining.1,
        pairing_residual: pairing_gap(&spectrum_sharp_a, &spectrum_a_sharp, zero_tol),
        near_zero_sharp_a: near(&spectrum_sharp_a),
        near_zero_a_sharp: near(&spectrum_a_sharp),
        h_eff_floor_margin: h_eff_floor,
        spectrum_sharp_a,
        spectrum_a_sharp,
        metric_constant,
        a_sharp_minus_transpose,
        classical_susy: metric_constant && a_sharp_minus_transpose == 0.0,
    })
}

/// `eta`-weighted pseudo inner product used by the adjoint identity checks.
pub fn eta_dot(f: &[f64], g: &[f64], metric: &MetricOperator) -> f64 {
    f.par_iter()
        .zip(g)
        .zip(metric.values())
        .map(|((a, b), e)| a * b * e)
        .sum()
}
