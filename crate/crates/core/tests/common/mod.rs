//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's own eigensolver or closed forms.

#![allow(dead_code)]

use etabs_core::TridiagonalOperator;

pub fn dense(t: &TridiagonalOperator) -> Vec<Vec<f64>> {
    let n = t.len();
    (0..n).map(|i| (0..n).map(|j| t.get(i, j)).collect()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

fn char_poly(m: &[Vec<f64>], lambda: f64) -> f64 {
    let mut s = m.to_vec();
    for (i, row) in s.iter_mut().enumerate() {
        row[i] -= lambda;
    }
    det(&s)
}

/// Real eigenvalues of a small general matrix: scan `det(M - l I)` for sign
/// changes across the Gershgorin interval, then bisect each bracket. Fewer
/// than `n` roots means complex (or unresolved) eigenvalues; callers check
/// the count.
pub fn dense_real_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, row) in m.iter().enumerate() {
        let r: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.abs()).sum();
        lo = lo.min(row[i] - r);
        hi = hi.max(row[i] + r);
    }
    lo -= 1e-9 * (1.0 + lo.abs());
    hi += 1e-9 * (1.0 + hi.abs());
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev = char_poly(m, lo);
    for s in 1..=steps {
        let x = lo + s as f64 * h;
        let v = char_poly(m, x);
        if v == 0.0 {
            roots.push(x);
        } else if prev != 0.0 && (v > 0.0) != (prev > 0.0) {
            let (mut a, mut b, mut fa) = (prev_x, x, prev);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = char_poly(m, mid);
                if (fm > 0.0) == (fa > 0.0) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_x = x;
        prev = v;
    }
    assert!(roots.len() <= n);
    roots
}

/// Least-squares slope of `log err` against `log h`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Standard normal CDF by composite Simpson integration of the density
/// from zero; slow but independent of any erf implementation.
pub fn normal_cdf_by_quadrature(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let panels = 20_000;
    let h = z.abs() / panels as f64;
    let mut sum = pdf(0.0) + pdf(z.abs());
    for k in 1..panels {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * pdf(k as f64 * h);
    }
    let half = sum * h / 3.0;
    if z >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

/// Black-Scholes call from the quadrature CDF.
pub fn call_oracle(spot: f64, strike: f64, sigma: f64, r: f64, tau: f64) -> f64 {
    let sd = sigma * tau.sqrt();
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    let d2 = d1 - sd;
    spot * normal_cdf_by_quadrature(d1) - strike * (-r * tau).exp() * normal_cdf_by_quadrature(d2)
}

pub fn put_oracle(spot: f64, strike: f64, sigma: f64, r: f64, tau: f64) -> f64 {
    let sd = sigma * tau.sqrt();
    let d1 = ((spot / strike).ln() + (r + 0.5 * sigma * sigma) * tau) / sd;
    let d2 = d1 - sd;
    strike * (-r * tau).exp() * normal_cdf_by_quadrature(-d2) - spot * normal_cdf_by_quadrature(-d1)
}

/// Exponent of the reflection factor `(S/B)^p` in the image formula for a
/// down-and-out call.
pub fn image_exponent(sigma: f64, r: f64) -> f64 {
    1.0 - 2.0 * r / (sigma * sigma)
}

/// Down-and-out call for `B <= K` by the method of images.
pub fn down_and_out_oracle(spot: f64, strike: f64, barrier: f64, sigma: f64, r: f64, tau: f64) -> f64 {
    if spot <= barrier {
        return 0.0;
    }
    let p = image_exponent(sigma, r);
    call_oracle(spot, strike, sigma, r, tau)
        - (spot / barrier).powf(p) * call_oracle(barrier * barrier / spot, strike, sigma, r, tau)
}

/// Discounted Gaussian density of the log-price after `tau`, written out
/// directly from the lognormal law.
pub fn kernel_oracle(sigma: f64, r: f64, tau: f64, x: f64, x_to: f64) -> f64 {
    let var = sigma * sigma * tau;
    let mean = x + (r - 0.5 * sigma * sigma) * tau;
    (-r * tau).exp() * (-(x_to - mean).powi(2) / (2.0 * var)).exp()
        / (2.0 * std::f64::consts::PI * var).sqrt()
}
