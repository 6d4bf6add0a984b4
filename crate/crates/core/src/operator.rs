//! Banded real matrices: the tridiagonal carrier for discretized
//! Hamiltonians and a general banded type for products of them.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lattice::Lattice;

/// Real tridiagonal matrix on a lattice. `upper[i]` is entry `(i, i + 1)`
/// and `lower[i]` is entry `(i + 1, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diag: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    lattice: Lattice,
}

impl TridiagonalOperator {
    pub fn from_parts(
        lattice: Lattice,
        diag: Vec<f64>,
        upper: Vec<f64>,
        lower: Vec<f64>,
    ) -> Result<Self> {
        let n = lattice.len();
        check_len(n, diag.len())?;
        check_len(n - 1, upper.len())?;
        check_len(n - 1, lower.len())?;
        if let Some(bad) = diag
            .iter()
            .chain(&upper)
            .chain(&lower)
            .find(|v| !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "operator entries must be finite (found {bad})"
            )));
        }
        Ok(Self {
            diag,
            upper,
            lower,
            lattice,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    /// Matrix-vector product. Panics if `u` has the wrong length.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(u.len(), n, "vector length must match operator size");
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * u[i];
                if i + 1 < n {
                    acc += self.upper[i] * u[i + 1];
                }
                if i > 0 {
                    acc += self.lower[i - 1] * u[i - 1];
                }
                acc
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            diag: self.diag.clone(),
            upper: self.lower.clone(),
            lower: self.upper.clone(),
            lattice: self.lattice.clone(),
        }
    }

    pub fn shift_diagonal(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.diag.iter_mut().for_each(|d| *d += c);
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i + 1 < n {
                    s += self.upper[i].abs();
                }
                if i > 0 {
                    s += self.lower[i - 1].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.upper == self.lower
    }

    pub fn to_banded(&self) -> BandedMatrix {
        let n = self.len();
        let mut m = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            m.set(i, i, self.diag[i]);
            if i + 1 < n {
                m.set(i, i + 1, self.upper[i]);
                m.set(i + 1, i, self.lower[i]);
            }
        }
        m
    }

    /// Narrow a banded matrix back to tridiagonal form. Fails if any entry
    /// outside the three central diagonals is nonzero.
    pub fn from_banded(lattice: Lattice, m: &BandedMatrix) -> Result<Self> {
        let n = m.n();
        check_len(lattice.len(), n)?;
        for i in 0..n {
            for j in 0..n {
                if i.abs_diff(j) > 1 && m.get(i, j) != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "banded matrix has entry ({i}, {j}) outside the tridiagonal band"
                    )));
                }
            }
        }
        let diag = (0..n).map(|i| m.get(i, i)).collect();
        let upper = (0..n - 1).map(|i| m.get(i, i + 1)).collect();
        let lower = (0..n - 1).map(|i| m.get(i + 1, i)).collect();
        Self::from_parts(lattice, diag, upper, lower)
    }

    pub fn to_dump(&self) -> OperatorDump {
        OperatorDump {
            n: self.len(),
            dx: self.lattice.dx(),
            x_min: self.lattice.x_min(),
            diag: self.diag.clone(),
            upper: self.upper.clone(),
            lower: self.lower.clone(),
            eta: None,
        }
    }
}

/// JSON document for an operator (and optionally its metric). Floats are
/// written in shortest round-trip form, so parsing restores every entry
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDump {
    pub n: usize,
    pub dx: f64,
    pub x_min: f64,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

impl OperatorDump {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Rebuild the operator. The lattice is reconstructed from `x_min`,
    /// `dx` and `n`.
    pub fn to_operator(&self) -> Result<TridiagonalOperator> {
        let x_max = self.x_min + (self.n + 1) as f64 * self.dx;
        let lattice = Lattice::new(self.x_min, x_max, self.n)?;
        TridiagonalOperator::from_parts(
            lattice,
            self.diag.clone(),
            self.upper.clone(),
            self.lower.clone(),
        )
    }
}

/// Square banded matrix with `lower_bw` sub- and `upper_bw` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower_bw: usize,
    upper_bw: usize,
    // data[(d + lower_bw) * n + i] holds M[i][i + d]
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower_bw: usize, upper_bw: usize) -> Self {
        Self {
            n,
            lower_bw,
            upper_bw,
            data: vec![0.0; (lower_bw + upper_bw + 1) * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower_bw, self.upper_bw)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let d = j as isize - i as isize;
        if d < -(self.lower_bw as isize) || d > self.upper_bw as isize {
            None
        } else {
            Some((d + self.lower_bw as isize) as usize * self.n + i)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Panics when `(i, j)` lies outside the stored band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside band"));
        self.data[k] = v;
    }

    fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    /// Column range of row `i` inside the band.
    fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower_bw)..(i + self.upper_bw + 1).min(self.n)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "banded product of mismatched sizes");
        let mut out = Self::zeros(
            self.n,
            self.lower_bw + rhs.lower_bw,
            self.upper_bw + rhs.upper_bw,
        );
        for i in 0..self.n {
            for j in self.row_span(i) {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for k in rhs.row_span(j) {
                    out.add_at(i, k, a * rhs.get(j, k));
                }
            }
        }
        out
    }

    fn combine(&self, rhs: &Self, sign: f64) -> Self {
        assert_eq!(self.n, rhs.n, "banded sum of mismatched sizes");
        let mut out = Self::zeros(
            self.n,
            self.lower_bw.max(rhs.lower_bw),
            self.upper_bw.max(rhs.upper_bw),
        );
        for i in 0..self.n {
            for j in self.row_span(i) {
                out.add_at(i, j, self.get(i, j));
            }
            for j in rhs.row_span(i) {
                out.add_at(i, j, sign * rhs.get(i, j));
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.combine(rhs, -1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n, self.upper_bw, self.lower_bw);
        for i in 0..self.n {
            for j in self.row_span(i) {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `D M D^{-1}` for the diagonal `D = diag(eta)`.
    pub fn conjugate_diagonal(&self, eta: &[f64]) -> Self {
        assert_eq!(eta.len(), self.n, "metric length must match matrix size");
        let mut out = self.clone();
        for i in 0..self.n {
            for j in self.row_span(i) {
                if i != j {
                    let k = self.slot(i, j).unwrap();
                    out.data[k] = self.data[k] * eta[i] / eta[j];
                }
            }
        }
        out
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.row_span(i).map(|j| self.get(i, j).abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row_abs_sum(i)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n, "vector length must match matrix size");
        (0..self.n)
            .map(|i| self.row_span(i).map(|j| self.get(i, j) * u[j]).sum())
            .collect()
    }
}
