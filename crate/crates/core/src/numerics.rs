//! Small numeric helpers shared across modules: compensated sums, order
//! statistics, log-log regression and symmetric eigenvalue utilities.

use nalgebra::DMatrix;

use crate::error::{invalid, mismatch, Result};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `out[k] = sum_{i >= k} f(values[i])`, accumulated from the last element
/// backwards so that the smallest terms of a nonincreasing sequence enter
/// first. `out` has length `values.len() + 1` with `out[len] = 0`.
pub fn suffix_sums(values: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut acc = CompensatedSum::new();
    for i in (0..values.len()).rev() {
        acc.add(f(values[i]));
        out[i] = acc.value();
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation with n-1).
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(mismatch(format!("{} abscissae vs {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(invalid("slope needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(invalid("log-log slope needs strictly positive finite data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Eigenvalues of a symmetric matrix, sorted in nonincreasing order.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `L^{-1} A L^{-T}` for lower-triangular `L`; congruent (hence
/// eigenvalue-equivalent) to `B^{-1/2} A B^{-1/2}` when `B = L L^T`.
pub fn whiten(a: &DMatrix<f64>, lower: &DMatrix<f64>) -> DMatrix<f64> {
    let left = lower
        .solve_lower_triangular(a)
        .expect("Cholesky factor has a nonzero diagonal");
    let mut w = lower
        .solve_lower_triangular(&left.transpose())
        .expect("Cholesky factor has a nonzero diagonal");
    symmetrize(&mut w);
    w
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Spectral norm of a symmetric matrix via an exact eigen-solve.
pub fn sym_operator_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
