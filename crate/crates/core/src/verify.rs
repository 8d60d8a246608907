//! Monte Carlo and numeric checks. Every check reduces to `statistic <=
//! threshold` and carries a knob that breaks its identity or hypothesis so
//! the suite can be tested against itself.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bounds::{integrated_covariance, moment_rhs, IntegratedCovSummary};
use crate::error::{invalid, Error, Result};
use crate::interpolator::DesignSvd;
use crate::numerics::{loglog_slope, mean, std_error, sym_eigenvalues_desc, sym_operator_norm};
use crate::risk::{bias_term, exact_excess_risk, variance_trace};
use crate::rng::{self, normals};
use crate::sampler::{random_orthogonal, Problem, ProblemSpec};
use crate::spectra::{SpatialSpectrum, SpectrumSpec};
use crate::temporal::{arfima_acf, arma_epsilon, materialize, TemporalCov, TemporalFamily, TemporalSpec, ToeplitzCov};

const RNG_ROLE: &str = "verify";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Hypothesis gate not met; nothing asserted.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
    pub reps: usize,
    pub seed: u64,
    pub details: serde_json::Value,
}

impl CheckReport {
    fn judged(name: &str, statistic: f64, threshold: f64, reps: usize, seed: u64, details: serde_json::Value) -> Self {
        let verdict = if statistic <= threshold { Verdict::Pass } else { Verdict::Fail };
        Self { check_name: name.into(), verdict, statistic, threshold, reps, seed, details }
    }

    fn skipped(name: &str, threshold: f64, reps: usize, seed: u64, details: serde_json::Value) -> Self {
        Self { check_name: name.into(), verdict: Verdict::Skipped, statistic: f64::NAN, threshold, reps, seed, details }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Pass or skipped.
    pub fn not_failed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

fn one() -> f64 {
    1.0
}

fn default_reps_decomposition() -> usize {
    2000
}

fn default_designs() -> usize {
    1
}

fn default_trials() -> usize {
    20
}

fn default_condition() -> f64 {
    1e3
}

fn default_reps_moment() -> usize {
    500
}

fn default_reps_ak() -> usize {
    200
}

fn default_c_emp() -> f64 {
    10.0
}

fn default_b() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

fn default_slope_tol() -> f64 {
    0.1
}

fn default_n_grid() -> Vec<usize> {
    vec![64, 128, 256, 512, 1024]
}

/// One check and its parameters, tagged by `check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Decomposition {
        problem: ProblemSpec,
        n: usize,
        #[serde(default = "default_reps_decomposition")]
        reps: usize,
        #[serde(default = "default_designs")]
        designs: usize,
        /// Multiplies the variance term before comparison.
        #[serde(default = "one")]
        variance_factor: f64,
    },
    BiasInvariance {
        problem: ProblemSpec,
        n: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_condition")]
        max_condition: f64,
        /// Multiplies the transformed-design bias term.
        #[serde(default = "one")]
        factor: f64,
    },
    ImplicitDecorrelation {
        problem: ProblemSpec,
        n: usize,
        /// Multiplies the decorrelated-side trace.
        #[serde(default = "one")]
        factor: f64,
    },
    MomentInequality {
        problem: ProblemSpec,
        n: usize,
        #[serde(default = "default_reps_moment")]
        reps: usize,
        /// Evaluate the right-hand side with `Sigma_bar = Sigma`.
        #[serde(default)]
        ignore_dependence: bool,
    },
    AkConcentration {
        spectrum: SpectrumSpec,
        n: usize,
        #[serde(default)]
        k: usize,
        #[serde(default = "default_reps_ak")]
        reps: usize,
        #[serde(default = "default_c_emp")]
        c_emp: f64,
        #[serde(default = "default_b")]
        b: f64,
        /// Skip when `r_k < b n`.
        #[serde(default = "default_true")]
        enforce_gate: bool,
    },
    ArfimaScaling {
        d: f64,
        #[serde(default)]
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
        #[serde(default = "default_n_grid")]
        n_grid: Vec<usize>,
        #[serde(default = "default_slope_tol")]
        tolerance: f64,
        /// Generate with this `d` while still targeting `2 d`.
        #[serde(default)]
        process_d: Option<f64>,
    },
    HeteroArmaProperties {
        spectrum: SpectrumSpec,
        family: TemporalSpec,
        n: usize,
        /// Replace the computed `eps` in every window.
        #[serde(default)]
        epsilon_override: Option<f64>,
    },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Decomposition { .. } => "decomposition",
            CheckSpec::BiasInvariance { .. } => "bias_invariance",
            CheckSpec::ImplicitDecorrelation { .. } => "implicit_decorrelation",
            CheckSpec::MomentInequality { .. } => "moment_inequality",
            CheckSpec::AkConcentration { .. } => "ak_concentration",
            CheckSpec::ArfimaScaling { .. } => "arfima_scaling",
            CheckSpec::HeteroArmaProperties { .. } => "hetero_arma_properties",
        }
    }

    /// Replace the replicate / trial count where the check has one.
    pub fn with_reps(mut self, r: usize) -> Self {
        match &mut self {
            CheckSpec::Decomposition { reps, .. }
            | CheckSpec::MomentInequality { reps, .. }
            | CheckSpec::AkConcentration { reps, .. } => *reps = r,
            CheckSpec::BiasInvariance { trials, .. } => *trials = r,
            _ => {}
        }
        self
    }
}

pub const CHECK_NAMES: [&str; 7] = [
    "decomposition",
    "bias_invariance",
    "implicit_decorrelation",
    "moment_inequality",
    "ak_concentration",
    "arfima_scaling",
    "hetero_arma_properties",
];

/// File format for `verify`: a list of `[[checks]]` tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<CheckSpec>,
}

impl VerifyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn run_check(spec: &CheckSpec, seed: u64) -> Result<CheckReport> {
    match spec {
        CheckSpec::Decomposition { problem, n, reps, designs, variance_factor } => {
            check_decomposition(&problem.build(*n)?, *reps, *designs, *variance_factor, seed)
        }
        CheckSpec::BiasInvariance { problem, n, trials, max_condition, factor } => {
            check_bias_invariance(&problem.build(*n)?, *trials, *max_condition, *factor, seed)
        }
        CheckSpec::ImplicitDecorrelation { problem, n, factor } => {
            check_implicit_decorrelation(&problem.build(*n)?, *factor, seed)
        }
        CheckSpec::MomentInequality { problem, n, reps, ignore_dependence } => {
            check_moment_inequality(&problem.build(*n)?, *reps, *ignore_dependence, seed)
        }
        CheckSpec::AkConcentration { spectrum, n, k, reps, c_emp, b, enforce_gate } => {
            check_ak_concentration(&spectrum.build(*n)?, *n, *k, *reps, *c_emp, *b, *enforce_gate, seed)
        }
        CheckSpec::ArfimaScaling { d, a, b, n_grid, tolerance, process_d } => {
            check_arfima_scaling(*d, a, b, n_grid, *tolerance, *process_d, seed)
        }
        CheckSpec::HeteroArmaProperties { spectrum, family, n, epsilon_override } => {
            check_hetero_arma_properties(&spectrum.build(*n)?, family, *n, *epsilon_override, seed)
        }
    }
}

/// Mean exact risk over `reps` noise draws against `bias + factor * tr(T_V)`,
/// for each of `designs` fixed designs. Statistic: the largest `|gap| / SE`.
pub fn check_decomposition(problem: &Problem, reps: usize, designs: usize, variance_factor: f64, seed: u64) -> Result<CheckReport> {
    if reps < 2 || designs == 0 {
        return Err(invalid("decomposition check needs reps >= 2 and at least one design"));
    }
    let mut worst = 0.0_f64;
    let mut rows = Vec::with_capacity(designs);
    for j in 0..designs {
        let dseed = rng::derive_seed(seed, "design", j as u64);
        let x = problem.sample_design(dseed)?;
        let beta = problem.beta_star(dseed)?;
        let svd = DesignSvd::new(&x)?;
        svd.require_full_row_rank(x.nrows())?;
        let bias = bias_term(&svd, &problem.spectrum, &beta)?;
        let var = variance_trace(&svd, &problem.spectrum, &problem.noise)?;
        let signal = &x * &beta;
        let risks: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let eps = problem.sample_noise(rng::derive_seed(dseed, "noise", r as u64));
                let bh = svd.pinv_apply(&(&signal + eps));
                exact_excess_risk(&bh, &beta, &problem.spectrum)
            })
            .collect::<Result<_>>()?;
        let (m, se) = (mean(&risks), std_error(&risks));
        let predicted = bias + variance_factor * var;
        let z = (m - predicted).abs() / se;
        worst = worst.max(z);
        rows.push(json!({"design": j, "mean_risk": m, "se": se, "bias_term": bias, "variance_trace": var, "predicted": predicted, "z": z}));
    }
    let details = json!({"designs": rows, "variance_factor": variance_factor, "n": problem.n, "p": problem.p()});
    Ok(CheckReport::judged("decomposition", worst, 3.0, reps, seed, details))
}

/// `Q1 diag(s) Q2` with `log s` uniform on `[0, log kappa]`.
pub fn random_invertible(n: usize, max_condition: f64, seed: u64) -> DMatrix<f64> {
    let q1 = random_orthogonal(n, rng::derive_seed(seed, "basis", 0));
    let q2 = random_orthogonal(n, rng::derive_seed(seed, "basis", 1));
    let mut r = rng::stream(seed, RNG_ROLE, 0);
    let top = max_condition.ln();
    let mut s: Vec<f64> = (0..n).map(|_| (r.random::<f64>() * top).exp()).collect();
    s[0] = 1.0;
    if n > 1 {
        s[n - 1] = max_condition;
    }
    q1 * DMatrix::from_diagonal(&DVector::from_vec(s)) * q2
}

/// Relative difference of the bias term between `X` and `A X`.
pub fn bias_invariance_gap(x: &DMatrix<f64>, a: &DMatrix<f64>, spectrum: &SpatialSpectrum, beta: &DVector<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() || a.nrows() != x.nrows() {
        return Err(crate::error::mismatch("A must be n x n"));
    }
    let sv = a.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 1e-12 * hi) {
        return Err(invalid(format!("transform A is singular (singular values {lo:.3e} .. {hi:.3e})")));
    }
    let base = bias_term(&DesignSvd::new(x)?, spectrum, beta)?;
    let moved = bias_term(&DesignSvd::new(&(a * x))?, spectrum, beta)?;
    Ok((moved - base).abs() / base.abs().max(f64::MIN_POSITIVE))
}

pub fn check_bias_invariance(problem: &Problem, trials: usize, max_condition: f64, factor: f64, seed: u64) -> Result<CheckReport> {
    if trials == 0 || !(max_condition >= 1.0) {
        return Err(invalid("bias invariance needs trials >= 1 and max_condition >= 1"));
    }
    let x = problem.sample_design(seed)?;
    let beta = problem.beta_star(seed)?;
    let svd = DesignSvd::new(&x)?;
    svd.require_full_row_rank(x.nrows())?;
    let base = bias_term(&svd, &problem.spectrum, &beta)?;
    let gaps: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let a = random_invertible(x.nrows(), max_condition, rng::derive_seed(seed, RNG_ROLE, t as u64));
            let moved = factor * bias_term(&DesignSvd::new(&(&a * &x))?, &problem.spectrum, &beta)?;
            Ok((moved - base).abs() / base.abs().max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;
    let worst = gaps.iter().fold(0.0_f64, |m, g| m.max(*g));
    let details = json!({"bias_term": base, "max_condition": max_condition, "factor": factor, "gaps": gaps});
    Ok(CheckReport::judged("bias_invariance", worst, 1e-6, trials, seed, details))
}

fn homo_design(problem: &Problem) -> Result<&ToeplitzCov> {
    match &problem.design {
        TemporalCov::Homo(xi) => Ok(xi),
        TemporalCov::Hetero(_) => Err(invalid("this check needs a homo design")),
    }
}

/// `Some(s)` when `upsilon = s * xi` entrywise to 1e-12 relative.
fn proportional(upsilon: &ToeplitzCov, xi: &ToeplitzCov) -> Option<f64> {
    let s = upsilon.gamma0() / xi.gamma0();
    let tol = 1e-12 * upsilon.gamma0();
    upsilon.acf().iter().zip(xi.acf()).all(|(u, x)| (u - s * x).abs() <= tol).then_some(s)
}

/// With `Upsilon = sigma^2 Xi`: `tr(T_V)` against `sigma^2` times the trace of
/// the whitened design under identity noise, and the two fitted vectors.
pub fn check_implicit_decorrelation(problem: &Problem, factor: f64, seed: u64) -> Result<CheckReport> {
    let xi = homo_design(problem)?;
    let x = problem.sample_design(seed)?;
    let beta = problem.beta_star(seed)?;
    let y = &x * &beta + problem.sample_noise(seed);
    let svd = DesignSvd::new(&x)?;
    svd.require_full_row_rank(x.nrows())?;
    let tv = variance_trace(&svd, &problem.spectrum, &problem.noise)?;
    let xw = xi.whiten_rows(&x);
    let yw = xi.whiten_rows(&DMatrix::from_column_slice(y.len(), 1, y.as_slice())).column(0).into_owned();
    let svd_w = DesignSvd::new(&xw)?;
    let tv_white = variance_trace(&svd_w, &problem.spectrum, &ToeplitzCov::identity(x.nrows()))?;
    let Some(s2) = proportional(&problem.noise, xi) else {
        let ratio = tv / tv_white;
        let details = json!({"note": "noise is not proportional to the design covariance; identity not asserted",
            "trace": tv, "white_trace": tv_white, "ratio": ratio});
        return Ok(CheckReport::skipped("implicit_decorrelation", 1e-8, 1, seed, details));
    };
    let rhs = factor * s2 * tv_white;
    let trace_err = (tv - rhs).abs() / tv.abs();
    let b1 = svd.pinv_apply(&y);
    let b2 = svd_w.pinv_apply(&yw);
    let beta_err = (&b1 - &b2).norm() / b1.norm();
    let details = json!({"trace": tv, "sigma2": s2, "white_trace": tv_white, "trace_rel_err": trace_err,
        "beta_rel_err": beta_err, "factor": factor});
    Ok(CheckReport::judged("implicit_decorrelation", trace_err.max(beta_err), 1e-8, 1, seed, details))
}

fn family_of(problem: &Problem) -> TemporalFamily {
    match &problem.design {
        TemporalCov::Homo(xi) => TemporalFamily::uniform(xi.clone(), TemporalSpec::Identity, problem.p()),
        TemporalCov::Hetero(f) => f.clone(),
    }
}

/// `||Sigma_hat_0 - Sigma_0||`, computed in the eigen-basis.
fn covariance_deviation(problem: &Problem, seed: u64) -> Result<f64> {
    let x = problem.sample_design(seed)?;
    let w = match problem.spectrum.basis() {
        Some(u) => x * u,
        None => x,
    };
    let n = w.nrows() as f64;
    let mut d = w.tr_mul(&w) / n;
    for (i, l) in problem.spectrum.eigenvalues().iter().enumerate() {
        d[(i, i)] -= l;
    }
    Ok(sym_operator_norm(&d))
}

/// Monte Carlo estimate of `E ||Sigma_hat_0 - Sigma_0||` plus `3 SE` against the
/// moment bound; statistic is the ratio, threshold 1.
pub fn check_moment_inequality(problem: &Problem, reps: usize, ignore_dependence: bool, seed: u64) -> Result<CheckReport> {
    if reps < 2 {
        return Err(invalid("moment check needs reps >= 2"));
    }
    let s = &problem.spectrum;
    let ic = if ignore_dependence {
        IntegratedCovSummary {
            trace_bar: s.trace(),
            norm_bar: s.operator_norm(),
            r0_bar: s.trace() / s.operator_norm(),
            per_coordinate_factors: vec![1.0; s.p()],
        }
    } else {
        integrated_covariance(s, &family_of(problem))?
    };
    let rhs = moment_rhs(s.trace(), s.operator_norm(), ic.trace_bar, ic.norm_bar, problem.n);
    let devs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| covariance_deviation(problem, Problem::replicate_seed(seed, r as u64)))
        .collect::<Result<_>>()?;
    let (m, se) = (mean(&devs), std_error(&devs));
    let details = json!({"mean_deviation": m, "se": se, "rhs": rhs, "trace_bar": ic.trace_bar,
        "norm_bar": ic.norm_bar, "ignore_dependence": ignore_dependence});
    Ok(CheckReport::judged("moment_inequality", (m + 3.0 * se) / rhs, 1.0, reps, seed, details))
}

/// Both ratio statistics for one draw of `A_k`.
fn ak_ratios(spectrum: &SpatialSpectrum, n: usize, k: usize, seed: u64) -> (f64, f64) {
    let tail = &spectrum.eigenvalues()[k..];
    let mut r = rng::stream(seed, RNG_ROLE, 0);
    let z = DMatrix::from_vec(n, tail.len(), normals(&mut r, n * tail.len()));
    let mut zs = z;
    for (mut col, l) in zs.column_iter_mut().zip(tail) {
        col *= l.sqrt();
    }
    let a = &zs * zs.transpose();
    let ev = sym_eigenvalues_desc(&a);
    let scale = spectrum.tail_sum(k);
    (ev[0] / scale, scale / ev[n - 1])
}

#[allow(clippy::too_many_arguments)]
pub fn check_ak_concentration(
    spectrum: &SpatialSpectrum,
    n: usize,
    k: usize,
    reps: usize,
    c_emp: f64,
    b: f64,
    enforce_gate: bool,
    seed: u64,
) -> Result<CheckReport> {
    if reps == 0 || !(c_emp >= 1.0) || n == 0 {
        return Err(invalid("ak check needs reps >= 1, n >= 1 and c_emp >= 1"));
    }
    if k >= spectrum.p() {
        return Err(Error::IndexOutOfRange { k, p: spectrum.p() });
    }
    let (r_k, _) = spectrum.effective_ranks(k)?;
    if enforce_gate && r_k < b * n as f64 {
        let details = json!({"note": "r_k < b n: concentration hypothesis not met", "r_k": r_k, "b": b, "n": n});
        return Ok(CheckReport::skipped("ak_concentration", c_emp, reps, seed, details));
    }
    let ratios: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|i| ak_ratios(spectrum, n, k, Problem::replicate_seed(seed, i as u64)))
        .collect();
    let stat = ratios.iter().fold(0.0_f64, |m, (u, l)| m.max(*u).max(1.0 / u).max(*l).max(1.0 / l));
    let top = ratios.iter().fold(0.0_f64, |m, r| m.max(r.0));
    let bottom = ratios.iter().fold(0.0_f64, |m, r| m.max(r.1));
    let details = json!({"r_k": r_k, "k": k, "max_upper_ratio": top, "max_lower_ratio": bottom,
        "note": "window [1/c_emp, c_emp] is an empirical choice with no fixed constant"});
    Ok(CheckReport::judged("ak_concentration", stat, c_emp, reps, seed, details))
}

/// Log-log slope of `mu_1` (`d > 0`) or `mu_n` (`d < 0`) of the ARFIMA Toeplitz
/// matrix over `n_grid`; statistic `|slope - 2 d|`.
pub fn check_arfima_scaling(
    d: f64,
    a: &[f64],
    b: &[f64],
    n_grid: &[usize],
    tolerance: f64,
    process_d: Option<f64>,
    seed: u64,
) -> Result<CheckReport> {
    if d == 0.0 {
        return Err(invalid("arfima scaling is stated for d != 0"));
    }
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_grid needs at least two strictly increasing sizes"));
    }
    let gen_d = process_d.unwrap_or(d);
    let nmax = *n_grid.last().expect("nonempty");
    let acf = arfima_acf(gen_d, a, b, nmax - 1)?;
    let mut mus = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let ev = ToeplitzCov::new(acf[..n].to_vec())?.eigenvalues();
        mus.push(if d > 0.0 { ev[0] } else { ev[n - 1] });
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&xs, &mus)?;
    let details = json!({"slope": slope, "target": 2.0 * d, "process_d": gen_d, "n_grid": n_grid, "eigenvalues": mus,
        "which": if d > 0.0 { "largest" } else { "smallest" }});
    Ok(CheckReport::judged("arfima_scaling", (slope - 2.0 * d).abs(), tolerance, n_grid.len(), seed, details))
}

/// One inequality `lhs <= rhs`, reported as `lhs / rhs`.
#[derive(Clone, Debug, Serialize)]
struct Property {
    name: &'static str,
    lhs: f64,
    rhs: f64,
}

impl Property {
    fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs <= self.rhs {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Properties of a hetero ARMA family at size `n`: squared-coefficient sums,
/// eigenvalue windows, ACF decay, `Q` sandwich and integrated covariance,
/// each against its explicit `eps` window. Statistic is the largest
/// `lhs / rhs`, threshold 1.
pub fn check_hetero_arma_properties(
    spectrum: &SpatialSpectrum,
    family_spec: &TemporalSpec,
    n: usize,
    epsilon_override: Option<f64>,
    seed: u64,
) -> Result<CheckReport> {
    let TemporalCov::Hetero(family) = materialize(family_spec, n, spectrum.p())? else {
        return Err(invalid("hetero ARMA check needs a hetero family"));
    };
    let mut orders = 0usize;
    let mut eps = 1.0_f64;
    for s in &family.member_specs {
        match s {
            TemporalSpec::Arma { a, b, .. } => {
                orders = orders.max(a.len()).max(b.len());
                eps = eps.min(arma_epsilon(a, b));
            }
            TemporalSpec::Identity => {}
            other => return Err(invalid(format!("hetero ARMA check accepts ARMA members only, found {other:?}"))),
        }
    }
    let computed_eps = eps;
    let eps = epsilon_override.unwrap_or(eps);
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let e4 = eps.powi(-4);
    let growth = 1.0 + eps;
    let decay = growth.powf(-0.5);
    let acf_const = 4.0 * growth.powi(orders as i32 + 2);
    let mut props = Vec::new();
    let mut worst_decay_fit = 0.0_f64;
    for cov in &family.members {
        let phi2 = cov.raw_variance();
        props.push(Property { name: "phi2_lower", lhs: 1.0, rhs: phi2 });
        props.push(Property { name: "phi2_upper", lhs: phi2, rhs: e4 });
        let ev = cov.eigenvalues();
        props.push(Property { name: "mu_min_lower", lhs: eps.powi(8), rhs: ev[n - 1] });
        props.push(Property { name: "mu_max_upper", lhs: ev[0], rhs: e4 });
        let mut acf_ratio = 0.0_f64;
        for (h, g) in cov.acf().iter().enumerate() {
            acf_ratio = acf_ratio.max(g.abs() / (acf_const * decay.powi(h as i32)));
            if h > 0 && g.abs() > 0.0 {
                worst_decay_fit = worst_decay_fit.max(g.abs().powf(1.0 / h as f64));
            }
        }
        props.push(Property { name: "acf_decay", lhs: acf_ratio, rhs: 1.0 });
    }
    let lambda = spectrum.eigenvalues();
    let q: Vec<f64> = (0..spectrum.p()).map(|i| lambda[i] / family.member_of(i).raw_variance()).collect();
    let q_norm = q.iter().fold(0.0_f64, |m, v| m.max(*v));
    let q_trace: f64 = q.iter().sum();
    let (s_norm, s_trace) = (spectrum.operator_norm(), spectrum.trace());
    props.push(Property { name: "q_norm_lower", lhs: q_norm, rhs: s_norm });
    props.push(Property { name: "q_norm_upper", lhs: s_norm, rhs: e4 * q_norm });
    props.push(Property { name: "q_trace_lower", lhs: q_trace, rhs: s_trace });
    props.push(Property { name: "q_trace_upper", lhs: s_trace, rhs: e4 * q_trace });
    let ic = integrated_covariance(spectrum, &family)?;
    let bar_const = e4 * (1.0 + 8.0 * growth.powi(orders as i32 + 2) * decay / (1.0 - decay));
    props.push(Property { name: "integrated_trace", lhs: ic.trace_bar, rhs: bar_const * q_trace });
    props.push(Property { name: "integrated_norm", lhs: ic.norm_bar, rhs: bar_const * q_norm });
    let stat = props.iter().map(Property::ratio).fold(0.0_f64, f64::max);
    let details = json!({
        "epsilon": eps,
        "computed_epsilon": computed_eps,
        "max_order": orders,
        "fitted_trace_constant": ic.trace_bar / s_trace,
        "fitted_norm_constant": ic.norm_bar / s_norm,
        "fitted_acf_decay_rate": worst_decay_fit,
        "properties": props.iter().map(|p| json!({"name": p.name, "lhs": p.lhs, "rhs": p.rhs, "ratio": p.ratio()})).collect::<Vec<_>>(),
    });
    Ok(CheckReport::judged("hetero_arma_properties", stat, 1.0, family.members.len(), seed, details))
}
