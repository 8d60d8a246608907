//! Temporal covariances: ARMA / ARFIMA autocovariances, Toeplitz matrices and
//! their Cholesky factors, hetero families, degeneracy measures and
//! epsilon-neighboring certificates.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, mismatch, Error, Result};
use crate::numerics::{sym_eigenvalues_desc, whiten};

/// Stop extending the MA expansion once trailing terms fall below this
/// fraction of the largest coefficient.
pub const MA_REL_TOL: f64 = 1e-12;
pub const MA_CAP: usize = 1_000_000;
/// Roots of the characteristic polynomials must have modulus above `1 + ROOT_MARGIN`.
pub const ROOT_MARGIN: f64 = 1e-8;
const CIRCLE_GRID: usize = 8192;

/// Symbolic description of a stationary temporal autocovariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemporalSpec {
    Identity,
    /// `x_t = sum a_i x_{t-i} + w_t + sum b_i w_{t-i}` with unit innovations.
    Arma {
        #[serde(default)]
        a: Vec<f64>,
        #[serde(default)]
        b: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    /// ARMA filter applied to `(1 - L)^{-d}` white noise.
    Arfima {
        #[serde(default)]
        a: Vec<f64>,
        d: f64,
        #[serde(default)]
        b: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    /// `gamma(0), gamma(1), ...`; lags beyond the list are zero.
    ExplicitAcf {
        acf: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
    /// Per-coordinate specs. Coordinate `i` (1-based) uses `coords["i"]` when
    /// present and `cycle[(i - 1) % cycle.len()]` otherwise. Members are
    /// always normalized to unit diagonal.
    Hetero {
        #[serde(default)]
        coords: BTreeMap<String, TemporalSpec>,
        #[serde(default)]
        cycle: Vec<TemporalSpec>,
        /// Reference matrix for the epsilon-neighboring certificate and
        /// `nu_0`; identity when absent.
        #[serde(default)]
        reference: Option<Box<TemporalSpec>>,
    },
}

impl TemporalSpec {
    pub fn ar1(a: f64) -> Self {
        TemporalSpec::Arma { a: vec![a], b: vec![], normalize: false }
    }

    pub fn is_hetero(&self) -> bool {
        matches!(self, TemporalSpec::Hetero { .. })
    }

    fn normalized(&self) -> Self {
        let mut s = self.clone();
        match &mut s {
            TemporalSpec::Arma { normalize, .. }
            | TemporalSpec::Arfima { normalize, .. }
            | TemporalSpec::ExplicitAcf { normalize, .. } => *normalize = true,
            TemporalSpec::Identity | TemporalSpec::Hetero { .. } => {}
        }
        s
    }

    /// Check parameter ranges and root conditions without building anything.
    pub fn validate(&self) -> Result<()> {
        match self {
            TemporalSpec::Identity => Ok(()),
            TemporalSpec::Arma { a, b, .. } => check_arma_roots(a, b),
            TemporalSpec::Arfima { a, d, b, .. } => {
                check_d(*d)?;
                check_arma_roots(a, b)
            }
            TemporalSpec::ExplicitAcf { acf, .. } => {
                if acf.is_empty() || !(acf[0] > 0.0) {
                    return Err(invalid("explicit ACF needs gamma(0) > 0"));
                }
                if acf.iter().any(|g| !g.is_finite() || g.abs() > acf[0] * (1.0 + 1e-12)) {
                    return Err(invalid("explicit ACF needs finite |gamma(h)| <= gamma(0)"));
                }
                Ok(())
            }
            TemporalSpec::Hetero { coords, cycle, reference } => {
                if coords.is_empty() && cycle.is_empty() {
                    return Err(invalid("hetero spec needs coords or a cycle"));
                }
                for key in coords.keys() {
                    parse_coord(key)?;
                }
                for s in coords.values().chain(cycle).chain(reference.iter().map(|b| b.as_ref())) {
                    if s.is_hetero() {
                        return Err(invalid("hetero specs cannot be nested"));
                    }
                    s.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Autocovariances `gamma(0..=maxlag)` of a non-hetero spec.
    pub fn acf(&self, maxlag: usize) -> Result<Vec<f64>> {
        let raw = match self {
            TemporalSpec::Identity => {
                let mut g = vec![0.0; maxlag + 1];
                g[0] = 1.0;
                return Ok(g);
            }
            TemporalSpec::Arma { a, b, .. } => acf_from_ma(&ma_coefficients(a, b, 1)?, maxlag),
            TemporalSpec::Arfima { a, d, b, .. } => arfima_acf(*d, a, b, maxlag)?,
            TemporalSpec::ExplicitAcf { acf, .. } => {
                self.validate()?;
                (0..=maxlag).map(|h| acf.get(h).copied().unwrap_or(0.0)).collect()
            }
            TemporalSpec::Hetero { .. } => {
                return Err(invalid("a hetero spec has no single autocovariance"));
            }
        };
        let normalize = matches!(
            self,
            TemporalSpec::Arma { normalize: true, .. }
                | TemporalSpec::Arfima { normalize: true, .. }
                | TemporalSpec::ExplicitAcf { normalize: true, .. }
        );
        Ok(if normalize { normalize_acf(&raw) } else { raw })
    }
}

fn parse_coord(key: &str) -> Result<usize> {
    match key.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i),
        _ => Err(invalid(format!("hetero coordinate key {key:?} is not a 1-based index"))),
    }
}

fn check_d(d: f64) -> Result<()> {
    if !(d > -0.5 && d < 0.5) {
        return Err(invalid(format!("ARFIMA needs d in (-1/2, 1/2), got {d}")));
    }
    Ok(())
}

fn normalize_acf(g: &[f64]) -> Vec<f64> {
    g.iter().map(|x| x / g[0]).collect()
}

/// Coefficients `1, c_1, ..., c_m` of `1 - sum a_i z^i` (AR) or `1 + sum b_i z^i` (MA).
fn ar_poly(a: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(a.iter().map(|x| -x)).collect()
}

fn ma_poly(b: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(b.iter().copied()).collect()
}

/// Smallest root modulus of `sum_j c_j z^j` with `c_0 = 1`, via the companion
/// matrix of the reversed (reciprocal-root) polynomial. `inf` for constants.
pub fn min_root_modulus(c: &[f64]) -> f64 {
    let m = c.iter().rposition(|x| *x != 0.0).unwrap_or(0);
    if m == 0 {
        return f64::INFINITY;
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        comp[(0, j)] = -c[j + 1];
    }
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    let w_max = comp.complex_eigenvalues().iter().fold(0.0_f64, |acc, w| acc.max(w.norm()));
    1.0 / w_max
}

fn check_arma_roots(a: &[f64], b: &[f64]) -> Result<()> {
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(invalid("ARMA coefficients must be finite"));
    }
    for (name, poly) in [("AR", ar_poly(a)), ("MA", ma_poly(b))] {
        let r = min_root_modulus(&poly);
        if !(r > 1.0 + ROOT_MARGIN) {
            return Err(Error::RootCondition(format!(
                "{name} polynomial has a root of modulus {r:.6} (needs > 1 + {ROOT_MARGIN:e})"
            )));
        }
    }
    Ok(())
}

/// Power-series coefficients of `(1 + sum b_i z^i) / (1 - sum a_i z^i)`,
/// at least `min_len + 1` of them, extended until the trailing window of
/// `max(l1, 1)` terms is below `MA_REL_TOL * max |phi|`.
pub fn ma_coefficients(a: &[f64], b: &[f64], min_len: usize) -> Result<Vec<f64>> {
    check_arma_roots(a, b)?;
    let window = a.len().max(1);
    let mut phi = vec![1.0];
    let mut peak = 1.0_f64;
    let mut j = 1;
    loop {
        let mut v = if j <= b.len() { b[j - 1] } else { 0.0 };
        for (i, ai) in a.iter().enumerate().take(j) {
            v += ai * phi[j - 1 - i];
        }
        phi.push(v);
        peak = peak.max(v.abs());
        if j >= min_len.max(b.len()) && j >= window {
            let settled = phi[j + 1 - window..].iter().all(|x| x.abs() < MA_REL_TOL * peak);
            if settled {
                return Ok(phi);
            }
        }
        if j >= MA_CAP {
            return Err(Error::MaTruncation(MA_CAP));
        }
        j += 1;
    }
}

/// `gamma(h) = sum_j phi_j phi_{j+h}` for `h = 0..=maxlag`.
pub fn acf_from_ma(phi: &[f64], maxlag: usize) -> Vec<f64> {
    (0..=maxlag)
        .map(|h| {
            if h >= phi.len() {
                return 0.0;
            }
            // smallest products first
            phi[h..].iter().zip(phi).rev().map(|(x, y)| x * y).sum()
        })
        .collect()
}

/// Autocovariances of fractional noise `(1 - L)^{-d} w_t`.
fn fractional_acf(d: f64, maxlag: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(maxlag + 1);
    g.push((ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp());
    for h in 1..=maxlag {
        let hf = h as f64;
        g.push(g[h - 1] * (hf - 1.0 + d) / (hf - d));
    }
    g
}

/// ARFIMA(l1, d, l2) autocovariances: the ARMA autocovariance (as a filter
/// kernel) convolved with the fractional-noise autocovariance.
pub fn arfima_acf(d: f64, a: &[f64], b: &[f64], maxlag: usize) -> Result<Vec<f64>> {
    check_d(d)?;
    let phi = ma_coefficients(a, b, 1)?;
    if d == 0.0 {
        return Ok(acf_from_ma(&phi, maxlag));
    }
    let m = phi.len() - 1;
    let kernel = acf_from_ma(&phi, m);
    let frac = fractional_acf(d, maxlag + m);
    Ok((0..=maxlag)
        .map(|h| {
            let mut s = kernel[0] * frac[h];
            for (j, c) in kernel.iter().enumerate().skip(1) {
                s += c * (frac[h + j] + frac[h.abs_diff(j)]);
            }
            s
        })
        .collect())
}

/// `min` and `max` of `|sum_j c_j e^{i j w}|` over a grid on `[0, pi]`.
pub fn unit_circle_modulus_range(c: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for k in 0..=CIRCLE_GRID {
        let w = std::f64::consts::PI * k as f64 / CIRCLE_GRID as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, cj) in c.iter().enumerate() {
            re += cj * (j as f64 * w).cos();
            im += cj * (j as f64 * w).sin();
        }
        let m = re.hypot(im);
        lo = lo.min(m);
        hi = hi.max(m);
    }
    (lo, hi)
}

/// Range of `|varpi_2|^2 / |varpi_1|^2` on the unit circle; the eigenvalues
/// of the unit-innovation ARMA Toeplitz matrix lie inside it at every `n`.
pub fn arma_density_bounds(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ar_lo, ar_hi) = unit_circle_modulus_range(&ar_poly(a));
    let (ma_lo, ma_hi) = unit_circle_modulus_range(&ma_poly(b));
    ((ma_lo / ar_hi).powi(2), (ma_hi / ar_lo).powi(2))
}

/// The largest `eps` with `|varpi_1|, |varpi_2|` in `[eps, 1/eps]` on the unit circle.
pub fn arma_epsilon(a: &[f64], b: &[f64]) -> f64 {
    let (ar_lo, ar_hi) = unit_circle_modulus_range(&ar_poly(a));
    let (ma_lo, ma_hi) = unit_circle_modulus_range(&ma_poly(b));
    ar_lo.min(ma_lo).min(1.0 / ar_hi).min(1.0 / ma_hi).min(1.0)
}

/// Symmetric positive-definite Toeplitz matrix with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct ToeplitzCov {
    acf: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    lower: DMatrix<f64>,
    /// `Some(g0)` when the matrix is `g0 * I`.
    scalar: Option<f64>,
    /// `gamma(0)` before any unit-diagonal normalization.
    raw_variance: f64,
}

impl ToeplitzCov {
    /// Materialize from the first row; fails unless positive definite.
    pub fn new(acf: Vec<f64>) -> Result<Self> {
        let raw = acf.first().copied().unwrap_or(0.0);
        Self::with_raw_variance(acf, raw)
    }

    fn with_raw_variance(acf: Vec<f64>, raw_variance: f64) -> Result<Self> {
        let n = acf.len();
        if n == 0 {
            return Err(invalid("Toeplitz size must be at least 1"));
        }
        let g0 = acf[0];
        if !(g0 > 0.0) || !g0.is_finite() {
            return Err(invalid(format!("gamma(0) must be positive, got {g0}")));
        }
        if let Some(h) = acf.iter().position(|g| !g.is_finite() || g.abs() > g0 * (1.0 + 1e-12)) {
            return Err(invalid(format!("|gamma({h})| exceeds gamma(0)")));
        }
        let m = toeplitz(&acf);
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::NotPositiveDefinite(format!("Toeplitz matrix of size {n} failed Cholesky"))
        })?;
        let lower = chol.l();
        let scalar = acf[1..].iter().all(|g| *g == 0.0).then_some(g0);
        Ok(Self { acf, chol, lower, scalar, raw_variance })
    }

    pub fn identity(n: usize) -> Self {
        let mut acf = vec![0.0; n.max(1)];
        acf[0] = 1.0;
        Self::new(acf).expect("identity is positive definite")
    }

    pub fn n(&self) -> usize {
        self.acf.len()
    }

    pub fn acf(&self) -> &[f64] {
        &self.acf
    }

    pub fn gamma0(&self) -> f64 {
        self.acf[0]
    }

    pub fn raw_variance(&self) -> f64 {
        self.raw_variance
    }

    pub fn scalar(&self) -> Option<f64> {
        self.scalar
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        toeplitz(&self.acf)
    }

    /// Lower-triangular `S` with `S S^T` equal to the matrix.
    pub fn sqrt_factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        Self::with_raw_variance(self.acf.iter().map(|g| g * s).collect(), self.raw_variance * s)
    }

    /// `S * m`.
    pub fn apply_factor(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self.scalar {
            Some(g0) => {
                if g0 == 1.0 {
                    m.clone()
                } else {
                    m * g0.sqrt()
                }
            }
            None => &self.lower * m,
        }
    }

    /// `S^{-1} m`.
    pub fn whiten_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self.scalar {
            Some(g0) => m / g0.sqrt(),
            None => self.lower.solve_lower_triangular(m).expect("nonzero Cholesky diagonal"),
        }
    }

    /// `matrix^{-1} m`.
    pub fn solve(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self.scalar {
            Some(g0) => m / g0,
            None => self.chol.solve(m),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.scalar {
            Some(g0) => vec![g0; self.n()],
            None => sym_eigenvalues_desc(&self.matrix()),
        }
    }

    /// Eigenvalues of `L^{-1} A L^{-T}` where `L L^T` is `self`, i.e. of
    /// `self^{-1} A`, in nonincreasing order.
    pub fn relative_eigenvalues(&self, other: &ToeplitzCov) -> Result<Vec<f64>> {
        if other.n() != self.n() {
            return Err(mismatch(format!("sizes {} and {}", self.n(), other.n())));
        }
        if let Some(g0) = self.scalar {
            return Ok(other.eigenvalues().into_iter().map(|v| v / g0).collect());
        }
        if let Some(g1) = other.scalar {
            // eigenvalues of g1 * self^{-1}
            return Ok(self.eigenvalues().iter().rev().map(|v| g1 / v).collect());
        }
        Ok(sym_eigenvalues_desc(&whiten(&other.matrix(), &self.lower)))
    }
}

fn toeplitz(acf: &[f64]) -> DMatrix<f64> {
    let n = acf.len();
    DMatrix::from_fn(n, n, |i, j| acf[i.abs_diff(j)])
}

/// Per-coordinate temporal covariances; `assignment[i]` indexes `members`.
#[derive(Clone, Debug)]
pub struct TemporalFamily {
    pub members: Vec<ToeplitzCov>,
    pub member_specs: Vec<TemporalSpec>,
    pub assignment: Vec<usize>,
    pub reference: ToeplitzCov,
}

impl TemporalFamily {
    pub fn p(&self) -> usize {
        self.assignment.len()
    }

    pub fn n(&self) -> usize {
        self.reference.n()
    }

    pub fn member_of(&self, coord: usize) -> &ToeplitzCov {
        &self.members[self.assignment[coord]]
    }

    /// Family in which every coordinate shares `cov`.
    pub fn uniform(cov: ToeplitzCov, spec: TemporalSpec, p: usize) -> Self {
        let reference = ToeplitzCov::identity(cov.n());
        Self { members: vec![cov], member_specs: vec![spec], assignment: vec![0; p], reference }
    }
}

#[derive(Clone, Debug)]
pub enum TemporalCov {
    Homo(ToeplitzCov),
    Hetero(TemporalFamily),
}

impl TemporalCov {
    pub fn n(&self) -> usize {
        match self {
            TemporalCov::Homo(c) => c.n(),
            TemporalCov::Hetero(f) => f.n(),
        }
    }
}

/// Materialize a homo (non-hetero) spec at size `n`.
pub fn materialize_homo(spec: &TemporalSpec, n: usize) -> Result<ToeplitzCov> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if spec.is_hetero() {
        return Err(invalid("expected a homo temporal spec, found hetero"));
    }
    spec.validate()?;
    let acf = spec.acf(n - 1)?;
    let raw = match spec {
        TemporalSpec::Arma { normalize: true, .. }
        | TemporalSpec::Arfima { normalize: true, .. }
        | TemporalSpec::ExplicitAcf { normalize: true, .. } => spec.normalized_raw_variance()?,
        _ => acf[0],
    };
    ToeplitzCov::with_raw_variance(acf, raw)
}

impl TemporalSpec {
    fn normalized_raw_variance(&self) -> Result<f64> {
        let unnormalized = match self.clone() {
            TemporalSpec::Arma { a, b, .. } => TemporalSpec::Arma { a, b, normalize: false },
            TemporalSpec::Arfima { a, d, b, .. } => TemporalSpec::Arfima { a, d, b, normalize: false },
            TemporalSpec::ExplicitAcf { acf, .. } => TemporalSpec::ExplicitAcf { acf, normalize: false },
            other => other,
        };
        Ok(unnormalized.acf(0)?[0])
    }
}

/// Materialize a spec at size `n` for a `p`-dimensional design.
pub fn materialize(spec: &TemporalSpec, n: usize, p: usize) -> Result<TemporalCov> {
    let TemporalSpec::Hetero { coords, cycle, reference } = spec else {
        return materialize_homo(spec, n).map(TemporalCov::Homo);
    };
    spec.validate()?;
    let mut by_index = BTreeMap::new();
    for (k, s) in coords {
        by_index.insert(parse_coord(k)?, s);
    }
    if let Some((&i, _)) = by_index.iter().next_back().filter(|(i, _)| **i > p) {
        return Err(invalid(format!("hetero coordinate {i} exceeds p = {p}")));
    }
    let mut members: Vec<ToeplitzCov> = Vec::new();
    let mut member_specs: Vec<TemporalSpec> = Vec::new();
    let mut assignment = Vec::with_capacity(p);
    for i in 1..=p {
        let s = match by_index.get(&i) {
            Some(s) => *s,
            None if !cycle.is_empty() => &cycle[(i - 1) % cycle.len()],
            None => return Err(invalid(format!("hetero map does not cover coordinate {i}"))),
        };
        let s = s.normalized();
        let idx = match member_specs.iter().position(|m| *m == s) {
            Some(idx) => idx,
            None => {
                members.push(materialize_homo(&s, n)?);
                member_specs.push(s);
                members.len() - 1
            }
        };
        assignment.push(idx);
    }
    let reference = match reference {
        Some(r) => materialize_homo(r, n)?,
        None => ToeplitzCov::identity(n),
    };
    Ok(TemporalCov::Hetero(TemporalFamily { members, member_specs, assignment, reference }))
}

/// `min(min_i mu_n, 1 / max_i mu_1)` of `reference^{-1/2} Xi_i reference^{-1/2}`, capped at 1.
pub fn neighboring_epsilon(family: &[ToeplitzCov], reference: &ToeplitzCov) -> Result<f64> {
    if family.is_empty() {
        return Err(invalid("empty family"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for m in family {
        let ev = reference.relative_eigenvalues(m)?;
        hi = hi.max(ev[0]);
        lo = lo.min(*ev.last().expect("n >= 1"));
    }
    Ok(lo.min(1.0 / hi).min(1.0))
}

/// `nu = ||Xi^{-1} Upsilon||` and `nu_inverse = ||Upsilon^{-1} Xi||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub nu: f64,
    pub nu_inverse: f64,
}

pub fn degeneracy(temporal: &ToeplitzCov, noise: &ToeplitzCov) -> Result<Degeneracy> {
    let ev = temporal.relative_eigenvalues(noise)?;
    Ok(Degeneracy { nu: ev[0], nu_inverse: 1.0 / ev[ev.len() - 1] })
}

/// Largest eigenvalue of `Xi^{-1/2} Upsilon Xi^{-1/2}`.
pub fn nu(temporal: &ToeplitzCov, noise: &ToeplitzCov) -> Result<f64> {
    degeneracy(temporal, noise).map(|d| d.nu)
}

/// Noise covariance `scale * process`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "identity_spec")]
    pub process: TemporalSpec,
}

fn one() -> f64 {
    1.0
}

fn identity_spec() -> TemporalSpec {
    TemporalSpec::Identity
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { scale: 1.0, process: TemporalSpec::Identity }
    }
}

impl NoiseSpec {
    pub fn white(variance: f64) -> Self {
        Self { scale: variance, process: TemporalSpec::Identity }
    }

    pub fn materialize(&self, n: usize) -> Result<ToeplitzCov> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(invalid(format!("noise scale must be positive, got {}", self.scale)));
        }
        materialize_homo(&self.process, n)?.scaled(self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ma_coefficients_examples() {
        let phi = ma_coefficients(&[0.5], &[], 1).unwrap();
        for (j, p) in phi.iter().enumerate() {
            assert_relative_eq!(*p, 0.5f64.powi(j as i32), max_relative = 1e-15);
        }
        assert!(phi.last().unwrap().abs() < 1e-12);

        let phi = ma_coefficients(&[], &[0.4], 1).unwrap();
        assert_eq!(&phi[..2], &[1.0, 0.4]);
        assert!(phi[2..].iter().all(|x| *x == 0.0));

        let phi = ma_coefficients(&[0.5], &[0.4], 1).unwrap();
        assert_eq!(phi[0], 1.0);
        assert_relative_eq!(phi[1], 0.9, max_relative = 1e-15);
        for j in 2..phi.len() {
            assert_relative_eq!(phi[j], 0.5 * phi[j - 1], max_relative = 1e-15);
        }

        // AR(2) against the closed form from distinct real roots 1/r1, 1/r2:
        // phi_j = (r1^{j+1} - r2^{j+1}) / (r1 - r2)
        let (r1, r2) = (0.6, -0.3);
        let phi = ma_coefficients(&[r1 + r2, -r1 * r2], &[], 1).unwrap();
        for (j, p) in phi.iter().enumerate().take(30) {
            let want = (r1.powi(j as i32 + 1) - r2.powi(j as i32 + 1)) / (r1 - r2);
            assert_relative_eq!(*p, want, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn root_conditions() {
        assert!(matches!(ma_coefficients(&[1.0], &[], 1), Err(Error::RootCondition(_))));
        assert!(matches!(ma_coefficients(&[1.2], &[], 1), Err(Error::RootCondition(_))));
        assert!(matches!(ma_coefficients(&[], &[-1.0], 1), Err(Error::RootCondition(_))));
        // 1 - 1.5 z + 0.5 z^2 = (1 - z)(1 - 0.5 z)
        assert!(matches!(ma_coefficients(&[1.5, -0.5], &[], 1), Err(Error::RootCondition(_))));
        assert!(ma_coefficients(&[0.999], &[], 1).is_ok());
        assert_relative_eq!(min_root_modulus(&[1.0, -0.5]), 2.0, max_relative = 1e-12);
        assert_eq!(min_root_modulus(&[1.0]), f64::INFINITY);
    }

    #[test]
    fn acf_examples() {
        assert_eq!(acf_from_ma(&[1.0], 3), vec![1.0, 0.0, 0.0, 0.0]);
        let g = TemporalSpec::ar1(0.5).acf(10).unwrap();
        for (h, v) in g.iter().enumerate() {
            assert_relative_eq!(*v, 0.5f64.powi(h as i32) * 4.0 / 3.0, max_relative = 1e-12);
        }
        let g = TemporalSpec::Arma { a: vec![0.5], b: vec![], normalize: true }.acf(10).unwrap();
        for (h, v) in g.iter().enumerate() {
            assert_relative_eq!(*v, 0.5f64.powi(h as i32), max_relative = 1e-12);
        }
        // MA(1): gamma = (1 + b^2, b, 0, ...)
        let g = TemporalSpec::Arma { a: vec![], b: vec![0.4], normalize: false }.acf(3).unwrap();
        assert_relative_eq!(g[0], 1.16);
        assert_relative_eq!(g[1], 0.4);
        assert_eq!(&g[2..], &[0.0, 0.0]);
    }

    #[test]
    fn arfima_examples() {
        let arma = acf_from_ma(&ma_coefficients(&[0.4], &[0.3], 1).unwrap(), 20);
        let arf = arfima_acf(0.0, &[0.4], &[0.3], 20).unwrap();
        for (x, y) in arma.iter().zip(&arf) {
            assert_relative_eq!(*x, *y, max_relative = 1e-14);
        }

        let g = arfima_acf(0.25, &[], &[], 5).unwrap();
        assert_relative_eq!(g[1] / g[0], 1.0 / 3.0, max_relative = 1e-14);
        let want0 = statrs::function::gamma::gamma(0.5) / statrs::function::gamma::gamma(0.75).powi(2);
        assert_relative_eq!(g[0], want0, max_relative = 1e-12);

        let d = 0.3;
        let g = arfima_acf(d, &[], &[], 5).unwrap();
        let rho1 = d / (1.0 - d);
        assert_relative_eq!(g[1] / g[0], rho1, max_relative = 1e-14);
        assert_relative_eq!(g[2] / g[0], rho1 * (1.0 + d) / (2.0 - d), max_relative = 1e-14);

        assert!(arfima_acf(0.5, &[], &[], 5).is_err());
        assert!(arfima_acf(-0.5, &[], &[], 5).is_err());
    }

    #[test]
    fn arfima_with_ar_part_matches_direct_double_sum() {
        // Oracle: gamma_x(h) = sum_{j,k} phi_j phi_k gamma_d(h + j - k) with a long direct sum.
        let (d, a) = (0.2, 0.5_f64);
        let phi: Vec<f64> = (0..80).map(|j| a.powi(j)).collect();
        let gd = fractional_acf(d, 400);
        let got = arfima_acf(d, &[a], &[], 6).unwrap();
        for h in 0..=6usize {
            let mut s = 0.0;
            for (j, pj) in phi.iter().enumerate() {
                for (k, pk) in phi.iter().enumerate() {
                    s += pj * pk * gd[(h as i64 + j as i64 - k as i64).unsigned_abs() as usize];
                }
            }
            assert_relative_eq!(got[h], s, max_relative = 1e-9);
        }
    }

    #[test]
    fn arfima_long_memory_decay_slope() {
        for d in [0.1, 0.25, 0.4] {
            let g = arfima_acf(d, &[], &[], 512).unwrap();
            let hs: Vec<f64> = (32..=512).map(|h| h as f64).collect();
            let ys: Vec<f64> = (32..=512).map(|h| g[h]).collect();
            let slope = crate::numerics::loglog_slope(&hs, &ys).unwrap();
            assert!((slope - (2.0 * d - 1.0)).abs() < 0.1, "d={d} slope={slope}");
        }
    }

    #[test]
    fn materialize_examples() {
        let c = materialize_homo(&TemporalSpec::Identity, 5).unwrap();
        assert_eq!(c.acf(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(c.scalar(), Some(1.0));

        let c = materialize_homo(&TemporalSpec::ar1(0.5), 3).unwrap();
        let m = c.matrix();
        assert_relative_eq!(m[(0, 2)], 0.25 * 4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m[(1, 1)], 4.0 / 3.0, max_relative = 1e-12);

        let mut coords = BTreeMap::new();
        coords.insert("1".to_string(), TemporalSpec::ar1(0.9));
        coords.insert("2".to_string(), TemporalSpec::Identity);
        let spec = TemporalSpec::Hetero { coords, cycle: vec![], reference: None };
        let TemporalCov::Hetero(fam) = materialize(&spec, 2, 2).unwrap() else { panic!() };
        assert_eq!(fam.members.len(), 2);
        assert_eq!(fam.assignment, vec![0, 1]);
        for m in &fam.members {
            assert_relative_eq!(m.gamma0(), 1.0, max_relative = 1e-14);
        }
        assert_relative_eq!(fam.members[0].acf()[1], 0.9, max_relative = 1e-12);
        assert_relative_eq!(fam.members[0].raw_variance(), 1.0 / (1.0 - 0.81), max_relative = 1e-10);
        assert_eq!(fam.members[1].acf()[1], 0.0);
        assert!(materialize(&spec, 2, 3).is_err(), "coordinate 3 is uncovered");
    }

    #[test]
    fn hetero_cycle_dedupes_members() {
        let spec = TemporalSpec::Hetero {
            coords: BTreeMap::new(),
            cycle: vec![TemporalSpec::ar1(0.5), TemporalSpec::ar1(-0.5)],
            reference: None,
        };
        let TemporalCov::Hetero(fam) = materialize(&spec, 4, 5).unwrap() else { panic!() };
        assert_eq!(fam.members.len(), 2);
        assert_eq!(fam.assignment, vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn nested_hetero_rejected() {
        let inner = TemporalSpec::Hetero { coords: BTreeMap::new(), cycle: vec![TemporalSpec::Identity], reference: None };
        let spec = TemporalSpec::Hetero { coords: BTreeMap::new(), cycle: vec![inner], reference: None };
        assert!(materialize(&spec, 3, 3).is_err());
    }

    #[test]
    fn sqrt_factor_examples() {
        let c = ToeplitzCov::identity(4);
        assert_eq!(c.sqrt_factor(), &DMatrix::<f64>::identity(4, 4));

        let rho = 0.3;
        let c = ToeplitzCov::new(vec![1.0, rho]).unwrap();
        let s = c.sqrt_factor();
        assert_relative_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(0, 1)], 0.0);
        assert_relative_eq!(s[(1, 0)], rho);
        assert_relative_eq!(s[(1, 1)], (1.0 - rho * rho).sqrt(), max_relative = 1e-15);

        let c = materialize_homo(&TemporalSpec::ar1(0.5), 50).unwrap();
        let s = c.sqrt_factor();
        let err = (s * s.transpose() - c.matrix()).amax();
        assert!(err <= 1e-8 * c.gamma0(), "{err}");
    }

    #[test]
    fn non_positive_definite_is_an_error() {
        // |rho| <= 1 elementwise but not PD at n = 3
        let err = ToeplitzCov::new(vec![1.0, 0.9, -0.9]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite(_)));
        assert!(ToeplitzCov::new(vec![1.0, 1.5]).is_err());
    }

    #[test]
    fn epsilon_examples() {
        let r = materialize_homo(&TemporalSpec::ar1(0.4), 20).unwrap();
        assert_relative_eq!(neighboring_epsilon(std::slice::from_ref(&r), &r).unwrap(), 1.0, max_relative = 1e-9);
        let r2 = r.scaled(2.0).unwrap();
        assert_relative_eq!(neighboring_epsilon(&[r2], &r).unwrap(), 0.5, max_relative = 1e-9);
        let other = ToeplitzCov::identity(21);
        assert!(neighboring_epsilon(&[other], &r).is_err());
    }

    #[test]
    fn hetero_arma_epsilon_is_bounded_by_density_window() {
        // Each normalized member's eigenvalues lie in [eps^8, eps^-4].
        let eps0 = [-0.5, -0.2, 0.3, 0.5].iter().map(|a| arma_epsilon(&[*a], &[])).fold(1.0, f64::min);
        assert_relative_eq!(eps0, 0.5, max_relative = 1e-9);
        let fam: Vec<_> = [-0.5, -0.2, 0.3, 0.5]
            .iter()
            .map(|a| materialize_homo(&TemporalSpec::Arma { a: vec![*a], b: vec![], normalize: true }, 64).unwrap())
            .collect();
        let e = neighboring_epsilon(&fam, &ToeplitzCov::identity(64)).unwrap();
        assert!(e >= eps0.powi(8) && e <= 1.0, "{e}");
    }

    #[test]
    fn nu_examples() {
        let x = materialize_homo(&TemporalSpec::ar1(0.3), 30).unwrap();
        assert_relative_eq!(nu(&x, &x).unwrap(), 1.0, max_relative = 1e-9);
        let id = ToeplitzCov::identity(30);
        assert_relative_eq!(nu(&id, &id.scaled(0.25).unwrap()).unwrap(), 0.25);

        let a = 0.5;
        let x = materialize_homo(&TemporalSpec::ar1(a), 100).unwrap();
        let v = nu(&x, &ToeplitzCov::identity(100)).unwrap();
        let mu_n = *x.eigenvalues().last().unwrap();
        assert_relative_eq!(v, 1.0 / mu_n, max_relative = 1e-9);
        assert!(v <= (1.0 + a) * (1.0 + a));
        let (lo, hi) = arma_density_bounds(&[a], &[]);
        assert_relative_eq!(lo, 1.0 / 2.25, max_relative = 1e-9);
        assert_relative_eq!(hi, 4.0, max_relative = 1e-9);
        for e in x.eigenvalues() {
            assert!(e >= lo && e <= hi);
        }
    }

    #[test]
    fn degeneracy_pairs_with_inverse() {
        let x = materialize_homo(&TemporalSpec::ar1(0.6), 40).unwrap();
        let y = materialize_homo(&TemporalSpec::Arma { a: vec![], b: vec![0.5], normalize: false }, 40).unwrap();
        let d = degeneracy(&x, &y).unwrap();
        let back = degeneracy(&y, &x).unwrap();
        assert_relative_eq!(d.nu, back.nu_inverse, max_relative = 1e-8);
        assert_relative_eq!(d.nu_inverse, back.nu, max_relative = 1e-8);
    }

    #[test]
    fn noise_spec_scales() {
        let c = NoiseSpec { scale: 0.25, process: TemporalSpec::ar1(0.5) }.materialize(4).unwrap();
        assert_relative_eq!(c.gamma0(), 0.25 * 4.0 / 3.0, max_relative = 1e-12);
        assert!(NoiseSpec::white(0.0).materialize(4).is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = r#"
kind = "hetero"
cycle = [{ kind = "arma", a = [0.5] }, { kind = "identity" }]
[coords.3]
kind = "arfima"
d = 0.2
"#;
        let spec: TemporalSpec = toml::from_str(text).unwrap();
        let back: TemporalSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        assert!(toml::from_str::<TemporalSpec>("kind = \"arma\"\nalpha = [0.5]\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn arma_acf_is_positive_semidefinite(a1 in -0.9f64..0.9, a2 in -0.4f64..0.4, b1 in -0.9f64..0.9, n in 2usize..128) {
            prop_assume!(check_arma_roots(&[a1, a2], &[b1]).is_ok());
            let spec = TemporalSpec::Arma { a: vec![a1, a2], b: vec![b1], normalize: false };
            let g = spec.acf(n - 1).unwrap();
            let ev = sym_eigenvalues_desc(&toeplitz(&g));
            prop_assert!(*ev.last().unwrap() >= -1e-10 * g[0]);
        }

        #[test]
        fn nu_is_congruence_invariant(a in -0.8f64..0.8, b in -0.8f64..0.8, seed in any::<u64>()) {
            let n = 12;
            let x = materialize_homo(&TemporalSpec::ar1(a), n).unwrap().matrix();
            let y = materialize_homo(&TemporalSpec::Arma { a: vec![], b: vec![b], normalize: false }, n).unwrap().matrix();
            let g = crate::rng::normals(&mut crate::rng::stream(seed, "congruence", 0), n * n);
            let m = DMatrix::from_vec(n, n, g) + DMatrix::<f64>::identity(n, n) * 3.0;
            prop_assume!(m.clone().svd(false, false).singular_values.min() > 1e-2);
            let xt = &m * &x * m.transpose();
            let yt = &m * &y * m.transpose();
            let base = sym_eigenvalues_desc(&whiten(&y, &x.clone().cholesky().unwrap().l()))[0];
            let moved = sym_eigenvalues_desc(&whiten(&yt, &xt.clone().cholesky().unwrap().l()))[0];
            prop_assert!((base - moved).abs() <= 1e-8 * base);
        }

        #[test]
        fn epsilon_at_most_one(rhos in prop::collection::vec(-0.7f64..0.7, 1..4), r in -0.7f64..0.7) {
            let n = 16;
            let reference = materialize_homo(&TemporalSpec::Arma { a: vec![r], b: vec![], normalize: true }, n).unwrap();
            let mut fam: Vec<_> = rhos.iter()
                .map(|a| materialize_homo(&TemporalSpec::Arma { a: vec![*a], b: vec![], normalize: true }, n).unwrap())
                .collect();
            fam.push(reference.clone());
            let e = neighboring_epsilon(&fam, &reference).unwrap();
            prop_assert!(e <= 1.0 + 1e-12);
            let all_equal = rhos.iter().all(|a| (a - r).abs() < 1e-12);
            if !all_equal && rhos.iter().any(|a| (a - r).abs() > 1e-3) {
                prop_assert!(e < 1.0 - 1e-9);
            }
        }
    }
}
