//! Bound shapes and rate predictors with explicit, user-supplied constants.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectra::{KStar, SpatialSpectrum, DEFAULT_B};
use crate::temporal::{Degeneracy, TemporalFamily};

/// Unit-diagonal tolerance for hetero members.
const UNIT_DIAG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub b: f64,
    pub c: f64,
    pub delta: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { b: DEFAULT_B, c: 1.0, delta: 0.05 }
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 1.0) {
            return Err(invalid(format!("b must be >= 1, got {}", self.b)));
        }
        if !(self.c > 0.0) {
            return Err(invalid(format!("c must be positive, got {}", self.c)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    KStarFinite,
    /// `k*` infinite or above `n / c`: only the variance lower statement applies.
    KStarLarge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bias_bound: Option<f64>,
    pub variance_bound: Option<f64>,
    pub lower_variance_bound: Option<f64>,
    pub lower_bias_bound: Option<f64>,
    pub constants_used: Constants,
    pub regime: Regime,
    pub k_star: KStar,
}

impl BoundReport {
    fn empty(constants: Constants, regime: Regime, k_star: KStar) -> Self {
        Self {
            bias_bound: None,
            variance_bound: None,
            lower_variance_bound: None,
            lower_bias_bound: None,
            constants_used: constants,
            regime,
            k_star,
        }
    }
}

/// `Some(k*)` when finite and at most `n / c`.
fn finite_regime(spectrum: &SpatialSpectrum, n: usize, k: &Constants) -> (KStar, Option<usize>) {
    let ks = spectrum.k_star(k.b, n);
    let usable = ks.finite().filter(|&v| v as f64 <= n as f64 / k.c);
    (ks, usable)
}

/// `k/n + n/R_k`.
fn variance_shape(spectrum: &SpatialSpectrum, k: usize, n: usize) -> Result<f64> {
    let (_, big_r) = spectrum.effective_ranks(k)?;
    Ok(k as f64 / n as f64 + n as f64 / big_r)
}

/// `||beta||^2_{Sigma_{k:inf}} + ||beta||^2_{Sigma^+_{0:k}} (sum_{i>k} lambda_i / n)^2`.
fn bias_shape(spectrum: &SpatialSpectrum, beta: &DVector<f64>, k: usize, n: usize) -> Result<f64> {
    let (tail_norm, head_norm) = spectrum.weighted_norms(beta, k)?;
    let t = spectrum.tail_sum(k) / n as f64;
    Ok(tail_norm + head_norm * t * t)
}

/// Homo upper bounds; `beta_star` in eigen-basis coordinates.
pub fn homo_upper_bound(
    spectrum: &SpatialSpectrum,
    beta_star: &DVector<f64>,
    degeneracy: Degeneracy,
    n: usize,
    constants: Constants,
) -> Result<BoundReport> {
    constants.validate()?;
    let (ks, usable) = finite_regime(spectrum, n, &constants);
    let c = constants.c;
    let Some(k) = usable else {
        let mut r = BoundReport::empty(constants, Regime::KStarLarge, ks);
        r.lower_variance_bound = Some(1.0 / (c * degeneracy.nu_inverse));
        return Ok(r);
    };
    let shape = variance_shape(spectrum, k, n)?;
    let mut r = BoundReport::empty(constants, Regime::KStarFinite, ks);
    r.bias_bound = Some(c * bias_shape(spectrum, beta_star, k, n)?);
    r.variance_bound = Some(c * degeneracy.nu * shape * (1.0 / constants.delta).ln());
    r.lower_variance_bound = Some(shape / (c * degeneracy.nu_inverse));
    Ok(r)
}

/// Lower statements: variance `(k*/n + n/R_{k*}) / (c ||Upsilon^{-1} Xi||)` and
/// bias `(1/c)` times the bias shape of `beta_bar` at `k_sharp` (default `k*`).
pub fn homo_lower_bounds(
    spectrum: &SpatialSpectrum,
    beta_bar: &DVector<f64>,
    nu_inverse: f64,
    n: usize,
    constants: Constants,
    k_sharp: Option<usize>,
) -> Result<BoundReport> {
    constants.validate()?;
    if !(nu_inverse > 0.0) {
        return Err(invalid("||Upsilon^{-1} Xi|| must be positive"));
    }
    let (ks, usable) = finite_regime(spectrum, n, &constants);
    let c = constants.c;
    let Some(k) = usable else {
        let mut r = BoundReport::empty(constants, Regime::KStarLarge, ks);
        r.lower_variance_bound = Some(1.0 / (c * nu_inverse));
        return Ok(r);
    };
    let mut r = BoundReport::empty(constants, Regime::KStarFinite, ks);
    r.lower_variance_bound = Some(variance_shape(spectrum, k, n)? / (c * nu_inverse));
    let kb = k_sharp.unwrap_or(k);
    if kb > spectrum.p() {
        return Err(Error::IndexOutOfRange { k: kb, p: spectrum.p() });
    }
    r.lower_bias_bound = Some(bias_shape(spectrum, beta_bar, kb, n)? / c);
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratedCovSummary {
    pub trace_bar: f64,
    pub norm_bar: f64,
    pub r0_bar: f64,
    /// `f_i = 1 + 2 sum_{h=1}^{n-1} |Xi_i(1, h+1)|`, one per coordinate.
    pub per_coordinate_factors: Vec<f64>,
}

/// `Sigma_bar` is diagonal in the eigen-basis with entries `lambda_i f_i`.
pub fn integrated_covariance(spectrum: &SpatialSpectrum, family: &TemporalFamily) -> Result<IntegratedCovSummary> {
    if family.p() != spectrum.p() {
        return Err(crate::error::mismatch(format!("family covers {} coordinates, p = {}", family.p(), spectrum.p())));
    }
    let mut member_f = Vec::with_capacity(family.members.len());
    for (j, m) in family.members.iter().enumerate() {
        let acf = m.acf();
        if (acf[0] - 1.0).abs() > UNIT_DIAG_TOL {
            let coord = family.assignment.iter().position(|&a| a == j).unwrap_or(0);
            return Err(Error::NonUnitDiagonal { coord: coord + 1, gamma0: acf[0] });
        }
        let s: f64 = acf[1..].iter().rev().map(|g| g.abs()).sum();
        member_f.push(1.0 + 2.0 * s);
    }
    let f: Vec<f64> = family.assignment.iter().map(|&a| member_f[a]).collect();
    let mut diag: Vec<f64> = spectrum.eigenvalues().iter().zip(&f).map(|(l, fi)| l * fi).collect();
    diag.sort_by(|a, b| b.total_cmp(a));
    let trace_bar: f64 = diag.iter().rev().sum();
    let norm_bar = diag[0];
    Ok(IntegratedCovSummary { trace_bar, norm_bar, r0_bar: trace_bar / norm_bar, per_coordinate_factors: f })
}

/// Hetero upper bounds (`nu0 = ||Xi_0^{-1} Upsilon||`).
pub fn hetero_upper_bound(
    spectrum: &SpatialSpectrum,
    integrated: &IntegratedCovSummary,
    beta_norm: f64,
    nu0: f64,
    n: usize,
    constants: Constants,
) -> Result<BoundReport> {
    constants.validate()?;
    if !(constants.delta < 0.5) {
        return Err(invalid("hetero bound needs delta in (0, 1/2)"));
    }
    let (ks, usable) = finite_regime(spectrum, n, &constants);
    let c = constants.c;
    let Some(k) = usable else {
        return Ok(BoundReport::empty(constants, Regime::KStarLarge, ks));
    };
    let nf = n as f64;
    let r0 = spectrum.effective_ranks(0)?.0;
    let norm = spectrum.operator_norm();
    let bias = c / constants.delta
        * beta_norm
        * beta_norm
        * ((norm * integrated.norm_bar * r0.max(integrated.r0_bar) / nf).sqrt() + integrated.norm_bar * integrated.r0_bar / nf);
    let mut r = BoundReport::empty(constants, Regime::KStarFinite, ks);
    r.bias_bound = Some(bias);
    r.variance_bound = Some(c * nu0 * variance_shape(spectrum, k, n)? * (1.0 / constants.delta).ln());
    Ok(r)
}

/// Right-hand side of the moment inequality for `E ||Sigma_hat_0 - Sigma_0||`.
pub fn moment_rhs(trace_sigma: f64, norm_sigma: f64, trace_bar: f64, norm_bar: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 * 2f64.sqrt() / nf
        * (2f64.sqrt() * trace_bar + (2.0 * nf * norm_sigma * trace_bar).sqrt() + (nf * trace_sigma * norm_bar).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: f64,
    /// `alpha <= 1/2`: outside the range the rate argument covers.
    pub extrapolated: bool,
}

pub fn kappa_alpha(n: usize, alpha: f64) -> Result<Kappa> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if n < 2 {
        return Err(invalid("kappa needs n >= 2"));
    }
    let nf = n as f64;
    let value = if alpha < 1.0 {
        nf.powf(-alpha / 2.0)
    } else if alpha == 1.0 {
        (nf.ln() / nf).sqrt()
    } else {
        nf.powf(-0.5)
    };
    Ok(Kappa { value, extrapolated: alpha <= 0.5 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RateMode {
    /// `tau_n + nu eta_n`.
    Homo,
    /// `zeta_n^{1/2} kappa_n^{(alpha)} + nu_0 eta_n`.
    Hetero { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub bias_part: f64,
    pub variance_part: f64,
    pub total: f64,
    pub extrapolated: bool,
}

pub fn rate_prediction(mode: RateMode, spectrum: &SpatialSpectrum, nu: f64, n: usize, b: f64) -> Result<RatePrediction> {
    let rs = spectrum.rate_sequences(n, b)?;
    let (bias_part, extrapolated) = match mode {
        RateMode::Homo => (rs.tau, false),
        RateMode::Hetero { alpha } => {
            let k = kappa_alpha(n, alpha)?;
            (rs.zeta.sqrt() * k.value, k.extrapolated)
        }
    };
    let variance_part = nu * rs.eta;
    Ok(RatePrediction { bias_part, variance_part, total: bias_part + variance_part, extrapolated })
}
