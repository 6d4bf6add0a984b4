//! Symmetric tridiagonal eigensolver.
//!
//! Eigenvalues come from the implicit-shift QL iteration (no vector
//! accumulation, so O(n^2)). Eigenvectors are then computed one by one by
//! inverse iteration on a pivoted LU factorization of `T - lambda I`, with
//! modified Gram-Schmidt against earlier vectors whose eigenvalues lie
//! within `1e-3 ||T||` of the current one. Vectors separated by more than
//! that are orthogonal to `eps ||T|| / gap` without help.
//!
//! Runs of eigenvalues with no gap above the threshold are processed
//! sequentially; independent runs are processed in parallel. Every
//! vector's starting guess is seeded by its index, so the output does not
//! depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 60;
const INVERSE_ITERATIONS: usize = 3;
const REORTH_FRACTION: f64 = 1e-3;

/// Eigenpairs of a symmetric tridiagonal matrix, eigenvalues ascending.
/// `vectors[k]` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn tridiagonal_norm(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i].abs();
            if i > 0 {
                s += off[i - 1].abs();
            }
            if i + 1 < n {
                s += off[i].abs();
            }
            s
        })
        .fold(0.0, f64::max)
}

/// All eigenvalues of the symmetric tridiagonal matrix with diagonal `diag`
/// and off-diagonal `off`, in ascending order.
pub fn symmetric_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::ShapeMismatch {
            expected: n - 1,
            got: off.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: MAX_QL_ITERATIONS,
                });
            }
            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// LU factorization of `T - shift I` with partial pivoting. Row swaps
/// create a second superdiagonal `du2`.
struct ShiftedLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, pivot_floor: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut du = off.to_vec();
        let mut dl = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = pivot_floor;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let old_du = du[i];
                du[i] = d[i + 1];
                d[i + 1] = old_du - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = pivot_floor;
        }
        Self {
            d,
            du,
            du2,
            dl,
            swapped,
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn normalize(v: &mut [f64]) {
    let nrm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
}

fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

struct InverseIteration<'a> {
    diag: &'a [f64],
    off: &'a [f64],
    values: &'a [f64],
    shifts: Vec<f64>,
    reorth_gap: f64,
    pivot_floor: f64,
}

impl InverseIteration<'_> {
    /// Vectors for the indices in `run`, in order.
    fn run(&self, run: std::ops::Range<usize>) -> Vec<Vec<f64>> {
        let n = self.diag.len();
        let start = run.start;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(run.len());
        for j in run {
            let lu = ShiftedLu::factor(self.diag, self.off, self.shifts[j], self.pivot_floor);
            let mut rng = ChaCha8Rng::seed_from_u64(j as u64);
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            normalize(&mut x);
            // Earlier vectors of this run close enough to need explicit
            // orthogonalization.
            let mut first_neighbor = j;
            while first_neighbor > start
                && self.values[j] - self.values[first_neighbor - 1] <= self.reorth_gap
            {
                first_neighbor -= 1;
            }
            for _ in 0..INVERSE_ITERATIONS {
                lu.solve_in_place(&mut x);
                normalize(&mut x);
                for prev in &out[first_neighbor - start..] {
                    let c = dot(&x, prev);
                    x.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
                }
                normalize(&mut x);
            }
            fix_sign(&mut x);
            out.push(x);
        }
        out
    }
}

/// Full eigendecomposition of a symmetric tridiagonal matrix.
pub fn symmetric_eigen(diag: &[f64], off: &[f64]) -> Result<SymmetricEigen> {
    let values = symmetric_eigenvalues(diag, off)?;
    let n = values.len();
    if n == 0 {
        return Ok(SymmetricEigen {
            values,
            vectors: Vec::new(),
        });
    }
    let norm = tridiagonal_norm(diag, off).max(f64::MIN_POSITIVE);
    let reorth_gap = REORTH_FRACTION * norm;
    let separation = 10.0 * f64::EPSILON * norm;

    // Nudge coincident eigenvalues apart so each gets its own vector.
    let mut shifts = values.clone();
    for j in 1..n {
        if shifts[j] - shifts[j - 1] < separation {
            shifts[j] = shifts[j - 1] + separation;
        }
    }

    let mut runs = Vec::new();
    let mut start = 0;
    for j in 1..n {
        if values[j] - values[j - 1] > reorth_gap {
            runs.push(start..j);
            start = j;
        }
    }
    runs.push(start..n);

    let solver = InverseIteration {
        diag,
        off,
        values: &values,
        shifts,
        reorth_gap,
        pivot_floor: f64::EPSILON * norm,
    };
    let vectors: Vec<Vec<f64>> = runs
        .into_par_iter()
        .map(|run| solver.run(run))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(SymmetricEigen { values, vectors })
}
