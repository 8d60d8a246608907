//! Exact excess risk, the bias term `beta*^T T_B beta*`, the variance term
//! `tr(T_V)`, and Monte Carlo risk summaries.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::interpolator::{fit_with, DesignSvd};
use crate::numerics::{mean, median, quantile, std_error, CompensatedSum};
use crate::sampler::Problem;
use crate::spectra::SpatialSpectrum;
use crate::temporal::ToeplitzCov;

/// `(beta_hat - beta*)^T Sigma (beta_hat - beta*)`.
pub fn exact_excess_risk(beta_hat: &DVector<f64>, beta_star: &DVector<f64>, spectrum: &SpatialSpectrum) -> Result<f64> {
    if beta_hat.len() != beta_star.len() {
        return Err(mismatch(format!("beta_hat has length {}, beta* {}", beta_hat.len(), beta_star.len())));
    }
    spectrum.quadratic_form(&(beta_hat - beta_star))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskTerms {
    pub bias_term: f64,
    pub variance_trace: f64,
}

impl RiskTerms {
    /// Expected risk over the noise: `bias + tr(T_V)`.
    pub fn expected_risk(&self) -> f64 {
        self.bias_term + self.variance_trace
    }
}

/// `C_delta = 2 log(1/delta) + 1`.
pub fn c_delta(delta: f64) -> f64 {
    2.0 * (1.0 / delta).ln() + 1.0
}

/// `2 bias + 2 C_delta tr(T_V)`, holding with probability `1 - delta` over the noise.
pub fn decomposition_bound(terms: &RiskTerms, delta: f64) -> f64 {
    2.0 * terms.bias_term + 2.0 * c_delta(delta) * terms.variance_trace
}

/// `2 bias + 2 (4t + 2) tr(T_V)`, holding with probability `1 - e^{-t}`.
pub fn decomposition_bound_t(terms: &RiskTerms, t: f64) -> f64 {
    2.0 * terms.bias_term + 2.0 * (4.0 * t + 2.0) * terms.variance_trace
}

/// Bias and variance terms; never forms a `p x p` matrix.
pub fn bias_variance_terms(
    x: &DMatrix<f64>,
    spectrum: &SpatialSpectrum,
    upsilon: &ToeplitzCov,
    beta_star: &DVector<f64>,
) -> Result<RiskTerms> {
    let svd = DesignSvd::new(x)?;
    svd.require_full_row_rank(x.nrows())?;
    terms_from_svd(&svd, spectrum, upsilon, beta_star)
}

pub fn terms_from_svd(
    svd: &DesignSvd,
    spectrum: &SpatialSpectrum,
    upsilon: &ToeplitzCov,
    beta_star: &DVector<f64>,
) -> Result<RiskTerms> {
    Ok(RiskTerms {
        bias_term: bias_term(svd, spectrum, beta_star)?,
        variance_trace: variance_trace(svd, spectrum, upsilon)?,
    })
}

/// `v^T Sigma v` with `v = beta* - P_row beta*`.
pub fn bias_term(svd: &DesignSvd, spectrum: &SpatialSpectrum, beta_star: &DVector<f64>) -> Result<f64> {
    if beta_star.len() != svd.right.nrows() || spectrum.p() != beta_star.len() {
        return Err(mismatch("beta*, design and spectrum disagree on p"));
    }
    let v = beta_star - svd.row_space_projection(beta_star);
    spectrum.quadratic_form(&v)
}

/// `tr(Upsilon M)` with `M = G^{-1} X Sigma X^T G^{-1} = B S^{-1} (V^T Sigma V) S^{-1} B^T`.
pub fn variance_trace(svd: &DesignSvd, spectrum: &SpatialSpectrum, upsilon: &ToeplitzCov) -> Result<f64> {
    let n = svd.left.nrows();
    if upsilon.n() != n {
        return Err(mismatch(format!("noise covariance is {0}x{0}, design has n = {n}", upsilon.n())));
    }
    if spectrum.p() != svd.right.nrows() {
        return Err(mismatch("spectrum and design disagree on p"));
    }
    let k = svd.effective_rank();
    let v = svd.right.columns(0, k);
    let rotated;
    let w = match spectrum.basis() {
        Some(u) => {
            rotated = u.tr_mul(&v);
            rotated.columns(0, k)
        }
        None => v,
    };
    let mut scaled = w.into_owned();
    for (mut row, l) in scaled.row_iter_mut().zip(spectrum.eigenvalues()) {
        row *= l.sqrt();
    }
    let mut c = scaled.tr_mul(&scaled);
    for i in 0..k {
        for j in 0..k {
            c[(i, j)] /= svd.singular[i] * svd.singular[j];
        }
    }
    let b = svd.left.columns(0, k);
    let m = b * c * b.transpose();
    let mut acc = CompensatedSum::new();
    match upsilon.scalar() {
        Some(g0) => {
            for i in 0..n {
                acc.add(g0 * m[(i, i)]);
            }
        }
        None => {
            let u = upsilon.matrix();
            for j in 0..n {
                for i in 0..n {
                    acc.add(u[(i, j)] * m[(j, i)]);
                }
            }
        }
    }
    Ok(acc.value())
}

/// Same terms through the Gram matrix `G = X X^T` and Cholesky solves, as
/// written in the decomposition; an independent oracle for the SVD route.
pub fn bias_variance_terms_gram(
    x: &DMatrix<f64>,
    spectrum: &SpatialSpectrum,
    upsilon: &ToeplitzCov,
    beta_star: &DVector<f64>,
) -> Result<RiskTerms> {
    let gram = x * x.transpose();
    let chol = gram.cholesky().ok_or_else(|| Error::NotPositiveDefinite("Gram matrix X X^T".into()))?;
    let v = beta_star - x.tr_mul(&chol.solve(&(x * beta_star)));
    let bias = spectrum.quadratic_form(&v)?;
    let sigma = match spectrum.basis() {
        Some(u) => u * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum.eigenvalues())) * u.transpose(),
        None => DMatrix::from_diagonal(&DVector::from_column_slice(spectrum.eigenvalues())),
    };
    let gx = chol.solve(x);
    let m = &gx * sigma * gx.transpose();
    let tv = (upsilon.matrix() * m).trace();
    Ok(RiskTerms { bias_term: bias, variance_trace: tv })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub se: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

impl McSummary {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            se: std_error(xs),
            median: median(xs),
            q05: quantile(xs, 0.05),
            q95: quantile(xs, 0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRisk {
    pub replicate: usize,
    pub seed: u64,
    pub exact_risk: f64,
    pub bias_term: f64,
    pub variance_trace: f64,
    pub residual_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n: usize,
    pub p: usize,
    pub config_hash: String,
    /// Mean exact excess risk (the single value for one instance).
    pub excess_risk: f64,
    pub bias_term: f64,
    pub variance_trace: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

/// Sample, fit and evaluate one replicate of `problem`.
pub fn replicate_risk(problem: &Problem, replicate: usize, seed: u64) -> Result<ReplicateRisk> {
    let inst = problem.sample(seed)?;
    let svd = DesignSvd::new(&inst.x)?;
    let fit = fit_with(&svd, &inst.x, &inst.y)?;
    let terms = terms_from_svd(&svd, &problem.spectrum, &problem.noise, &inst.beta_star)?;
    Ok(ReplicateRisk {
        replicate,
        seed,
        exact_risk: exact_excess_risk(&fit.beta(), &inst.beta_star, &problem.spectrum)?,
        bias_term: terms.bias_term,
        variance_trace: terms.variance_trace,
        residual_inf: fit.residual_inf,
    })
}

/// Monte Carlo risk over `reps` replicates with seeds derived from
/// `master_seed`; results are ordered by replicate index before reduction.
pub fn mc_risk_replicates(problem: &Problem, reps: usize, master_seed: u64) -> Result<Vec<ReplicateRisk>> {
    if reps < 2 {
        return Err(crate::error::invalid("mc_risk needs reps >= 2"));
    }
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = Problem::replicate_seed(master_seed, r as u64);
            replicate_risk(problem, r, seed).map_err(|e| Error::Replicate { index: r, source: Box::new(e) })
        })
        .collect()
}

pub fn mc_risk(problem: &Problem, reps: usize, master_seed: u64) -> Result<RiskReport> {
    let rows = mc_risk_replicates(problem, reps, master_seed)?;
    Ok(summarize_replicates(problem, &rows, master_seed))
}

pub fn summarize_replicates(problem: &Problem, rows: &[ReplicateRisk], master_seed: u64) -> RiskReport {
    let risks: Vec<f64> = rows.iter().map(|r| r.exact_risk).collect();
    let bias: Vec<f64> = rows.iter().map(|r| r.bias_term).collect();
    let var: Vec<f64> = rows.iter().map(|r| r.variance_trace).collect();
    let mc = McSummary::of(&risks);
    RiskReport {
        n: problem.n,
        p: problem.p(),
        config_hash: problem.config_hash.clone(),
        excess_risk: mc.mean,
        bias_term: mean(&bias),
        variance_trace: mean(&var),
        mc: Some(mc),
        reps: Some(rows.len()),
        master_seed: Some(master_seed),
    }
}
