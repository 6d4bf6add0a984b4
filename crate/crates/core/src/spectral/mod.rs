//! Spectral decomposition of pseudo-Hermitian Hamiltonians and the
//! pricing kernel built from it.
//!
//! `H` is first made symmetric by the similarity `S = eta^{1/2} H eta^{-1/2}`
//! with the detailed-balance metric; `S` is diagonalized by the in-crate
//! tridiagonal solver, and its orthonormal eigenvectors `v` are mapped to
//! eigenfunctions `psi = v / sqrt(eta w)` of `H`. Those satisfy the
//! weighted orthonormality `sum_i w_i eta_i psi_m(i) psi_n(i) = delta_mn`
//! and the completeness `sum_n psi_n(i) psi_n(j) eta_j w_j = delta_ij`.
//!
//! The kernel matrix is `K(tau)_ij = sum_n exp(-tau e_n) psi_n(i) eta_j w_j psi_n(j)`,
//! i.e. the matrix of `exp(-tau H)` with the quadrature already folded in.
//! The metric enters once; a price is `K(tau) g` with no further weight.

mod eigen;

pub use eigen::{symmetric_eigen, symmetric_eigenvalues, SymmetricEigen};
pub(crate) use eigen::dot;

use log::warn;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::lattice::{Lattice, QuadratureWeights};
use crate::metric::MetricOperator;
use crate::operator::TridiagonalOperator;

/// Modes with `tau (e_n - e_0)` above this contribute below `exp(-700)`
/// relative to the ground mode and are skipped.
const MODE_CUTOFF: f64 = 700.0;

/// Largest relative gap tolerated between `sqrt(eta_i/eta_j) H_ij` and its
/// mirror entry before averaging.
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Returns `S = eta^{1/2} H eta^{-1/2}` and the scaling `sqrt(eta)`. The two
/// mirrored off-diagonals must agree to [`SYMMETRY_TOLERANCE`]; they are
/// then averaged so `S` is symmetric as stored.
pub fn symmetrize(
    h: &TridiagonalOperator,
    metric: &MetricOperator,
) -> Result<(TridiagonalOperator, Vec<f64>)> {
    let n = h.len();
    check_len(n, metric.len())?;
    let scaling: Vec<f64> = metric.values().iter().map(|e| e.sqrt()).collect();
    let mut off = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let up = scaling[i] * h.upper()[i] / scaling[i + 1];
        let lo = scaling[i + 1] * h.lower()[i] / scaling[i];
        let mismatch = (up - lo).abs() / up.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
        if mismatch > SYMMETRY_TOLERANCE {
            return Err(Error::NotSymmetrizable { index: i, mismatch });
        }
        off.push(0.5 * (up + lo));
    }
    let s = TridiagonalOperator::from_parts(h.lattice().clone(), h.diag().to_vec(), off.clone(), off)?;
    Ok((s, scaling))
}

/// Eigenpairs of a symmetric tridiagonal operator.
pub fn eigendecompose(s: &TridiagonalOperator) -> Result<SymmetricEigen> {
    if !s.is_symmetric() {
        return Err(Error::InvalidParameter(
            "eigendecompose needs a symmetric operator; symmetrize it first".into(),
        ));
    }
    symmetric_eigen(s.diag(), s.upper())
}

/// Map orthonormal vectors of the symmetrized operator to eigenfunctions of
/// `H` that are orthonormal in the metric-weighted inner product.
pub fn eta_normalize(
    vectors: &[Vec<f64>],
    metric: &MetricOperator,
    weights: &QuadratureWeights,
) -> Result<Vec<Vec<f64>>> {
    let n = metric.len();
    check_len(n, weights.w.len())?;
    let scale: Vec<f64> = metric
        .values()
        .iter()
        .zip(&weights.w)
        .map(|(e, w)| 1.0 / (e * w).sqrt())
        .collect();
    vectors
        .iter()
        .map(|v| {
            check_len(n, v.len())?;
            let mut psi: Vec<f64> = v.iter().zip(&scale).map(|(a, s)| a * s).collect();
            let norm = pseudo_inner_product(&psi, &psi, metric, weights)?.sqrt();
            psi.iter_mut().for_each(|p| *p /= norm);
            Ok(psi)
        })
        .collect()
}

/// `sum_i w_i eta_i f_i g_i`.
pub fn pseudo_inner_product(
    f: &[f64],
    g: &[f64],
    metric: &MetricOperator,
    weights: &QuadratureWeights,
) -> Result<f64> {
    let n = metric.len();
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    check_len(n, weights.w.len())?;
    Ok((0..n)
        .map(|i| weights.w[i] * metric.values()[i] * f[i] * g[i])
        .sum())
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenfunctions[k]` belongs to `eigenvalues[k]`.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub metric: MetricOperator,
    pub weights: QuadratureWeights,
    pub lattice: Lattice,
}

/// Symmetrize, diagonalize and normalize. `metric` must make `H` exactly
/// symmetrizable (the detailed-balance metric does).
pub fn decompose(h: &TridiagonalOperator, metric: &MetricOperator) -> Result<SpectralDecomposition> {
    let (s, _) = symmetrize(h, metric)?;
    let eig = eigendecompose(&s)?;
    let weights = h.lattice().weights();
    let eigenfunctions = eta_normalize(&eig.vectors, metric, &weights)?;
    Ok(SpectralDecomposition {
        eigenvalues: eig.values,
        eigenfunctions,
        metric: metric.clone(),
        weights,
        lattice: h.lattice().clone(),
    })
}

/// Discrete matrix of `exp(-tau H)` including quadrature, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub tau: f64,
    n: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl KernelMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Transition density `p(x_i, tau, x_j)`: the entry divided by the
    /// quadrature weight of the target node.
    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) / self.weights[j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, g.len())?;
        Ok((0..self.n).map(|i| dot(self.row(i), g)).collect())
    }

    /// Matrix product `self * other`: the kernel over `tau + other.tau`
    /// when both come from the same decomposition.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self.n, other.n)?;
        let n = self.n;
        let mut other_t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                other_t[j * n + i] = other.get(i, j);
            }
        }
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let row = self.row(i).to_vec();
                let ot = &other_t;
                (0..n).map(move |j| dot(&row, &ot[j * n..(j + 1) * n]))
            })
            .collect();
        Ok(Self {
            tau: self.tau + other.tau,
            n,
            values,
            weights: self.weights.clone(),
        })
    }
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `eta_j w_j psi_n(j)`: the dual functions.
    fn duals(&self) -> Vec<Vec<f64>> {
        let ew: Vec<f64> = self
            .metric
            .values()
            .iter()
            .zip(&self.weights.w)
            .map(|(e, w)| e * w)
            .collect();
        self.eigenfunctions
            .iter()
            .map(|psi| psi.iter().zip(&ew).map(|(p, s)| p * s).collect())
            .collect()
    }

    /// Number of modes kept for horizon `tau`.
    pub fn active_modes(&self, tau: f64) -> usize {
        let e0 = self.eigenvalues[0];
        self.eigenvalues
            .iter()
            .take_while(|&&e| tau * (e - e0) <= MODE_CUTOFF)
            .count()
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive (got {tau})")));
        }
        let top = self.eigenvalues[self.len() - 1];
        if tau * top < 30.0 {
            warn!(
                "tau * max eigenvalue = {:.3} < 30: high modes barely decay, window-truncation artifacts may dominate",
                tau * top
            );
        }
        Ok(())
    }

    /// `exp(-tau H) g`, evaluated through the modal expansion without forming
    /// the kernel matrix.
    pub fn propagate(&self, g: &[f64], tau: f64) -> Result<Vec<f64>> {
        check_len(self.lattice.len(), g.len())?;
        self.check_tau(tau)?;
        let modes = self.active_modes(tau);
        let duals = self.duals();
        let coeffs: Vec<f64> = (0..modes)
            .into_par_iter()
            .map(|k| (-tau * self.eigenvalues[k]).exp() * dot(&duals[k], g))
            .collect();
        let n = self.lattice.len();
        let mut out = vec![0.0; n];
        for (c, psi) in coeffs.iter().zip(&self.eigenfunctions) {
            out.iter_mut().zip(psi).for_each(|(o, p)| *o += c * p);
        }
        Ok(out)
    }

    /// Row `i` of the kernel matrix.
    pub fn kernel_row(&self, tau: f64, i: usize) -> Result<Vec<f64>> {
        self.check_tau(tau)?;
        let n = self.lattice.len();
        if i >= n {
            return Err(Error::InvalidParameter(format!("row {i} out of range for {n} nodes")));
        }
        let modes = self.active_modes(tau);
        let duals = self.duals();
        let mut out = vec![0.0; n];
        for k in 0..modes {
            let c = (-tau * self.eigenvalues[k]).exp() * self.eigenfunctions[k][i];
            out.iter_mut().zip(&duals[k]).for_each(|(o, d)| *o += c * d);
        }
        Ok(out)
    }

    /// `max |<psi_m, psi_n>_eta - delta_mn|` over all pairs.
    pub fn gram_deviation(&self) -> f64 {
        let duals = self.duals();
        let psi = &self.eigenfunctions;
        (0..psi.len())
            .into_par_iter()
            .map(|m| {
                (0..=m)
                    .map(|k| {
                        let id = if k == m { 1.0 } else { 0.0 };
                        (dot(&psi[m], &duals[k]) - id).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max_ij |sum_n psi_n(i) eta_j w_j psi_n(j) - delta_ij|`.
    pub fn completeness_residual(&self) -> f64 {
        let n = self.lattice.len();
        let duals = self.duals();
        let transpose = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..n).map(|i| m.iter().map(|row| row[i]).collect()).collect()
        };
        let psi_t = transpose(&self.eigenfunctions);
        let dual_t = transpose(&duals);
        (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let id = if i == j { 1.0 } else { 0.0 };
                        (dot(&psi_t[i], &dual_t[j]) - id).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `|<psi_n, psi_n>_eta - 1|` per mode.
    pub fn norm_residuals(&self) -> Vec<f64> {
        self.eigenfunctions
            .iter()
            .map(|p| {
                let v = pseudo_inner_product(p, p, &self.metric, &self.weights).unwrap_or(f64::NAN);
                (v - 1.0).abs()
            })
            .collect()
    }
}

/// Kernel matrix `K(tau)` over all nodes.
pub fn pricing_kernel(decomp: &SpectralDecomposition, tau: f64) -> Result<KernelMatrix> {
    decomp.check_tau(tau)?;
    let n = decomp.lattice.len();
    let modes = decomp.active_modes(tau);
    let duals = decomp.duals();
    // Mode-major columns so each entry is one contiguous dot product.
    let decay: Vec<f64> = (0..modes).map(|k| (-tau * decomp.eigenvalues[k]).exp()).collect();
    let left: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..modes).map(|k| decay[k] * decomp.eigenfunctions[k][i]).collect())
        .collect();
    let right: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..modes).map(|k| duals[k][j]).collect())
        .collect();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let l = &left[i];
            let r = &right;
            (0..n).map(move |j| dot(l, &r[j]))
        })
        .collect();
    Ok(KernelMatrix {
        tau,
        n,
        values,
        weights: decomp.weights.w.clone(),
    })
}
