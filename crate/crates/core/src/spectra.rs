//! Spatial covariance spectra: benign eigenvalue families, effective ranks,
//! the effective number of bases `k*`, weighted norms and rate sequences.
//!
//! Eigenvalues are stored 0-based (`eigenvalues[0]` is the largest); all
//! public index arguments `k` count how many leading eigenvalues form the
//! "head", so `r_k` uses `eigenvalues[k..]`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, mismatch, Error, Result};
use crate::numerics::{suffix_sums, CompensatedSum};

/// Hard cap on the dimension chosen by the tail-mass truncation rule.
pub const TRUNCATION_CAP: usize = 200_000;
/// Default relative tail tolerance for infinite families.
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;
/// Default `b` in `k*(b)`.
pub const DEFAULT_B: f64 = 2.0;

/// `scale * n^exponent`; a plain number deserializes as a constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ScaledPowerRepr")]
pub struct ScaledPower {
    pub scale: f64,
    pub exponent: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScaledPowerRepr {
    Constant(f64),
    Power {
        scale: f64,
        #[serde(default)]
        exponent: f64,
    },
}

impl From<ScaledPowerRepr> for ScaledPower {
    fn from(r: ScaledPowerRepr) -> Self {
        match r {
            ScaledPowerRepr::Constant(v) => ScaledPower::constant(v),
            ScaledPowerRepr::Power { scale, exponent } => ScaledPower { scale, exponent },
        }
    }
}

impl ScaledPower {
    pub const fn constant(value: f64) -> Self {
        Self { scale: value, exponent: 0.0 }
    }

    pub const fn power(scale: f64, exponent: f64) -> Self {
        Self { scale, exponent }
    }

    pub fn at(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(self.exponent)
    }

    /// Rounded to the nearest integer; used for dimensions such as `p_n`.
    pub fn dim_at(&self, n: usize) -> usize {
        self.at(n).round().max(0.0) as usize
    }
}

/// Eigenvalue families for the spatial covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumFamily {
    /// `lambda_i = 1 / (i log^gamma i)` for `i >= 2`, `lambda_1 = 2 lambda_2`.
    LogPoly { gamma: f64 },
    /// `lambda_i = i^{-(1 + gamma_n)}`.
    PolyShift { gamma: ScaledPower },
    /// `lambda_i = i^{-gamma}` for `i <= p_n`.
    PolyCut { gamma: f64, dim: ScaledPower },
    /// `lambda_i = exp(-i) + epsilon_n` for `i <= p_n`.
    ExpPlus { epsilon: ScaledPower, dim: ScaledPower },
    Explicit { eigenvalues: Vec<f64> },
}

impl SpectrumFamily {
    pub fn label(&self) -> &'static str {
        match self {
            SpectrumFamily::LogPoly { .. } => "logpoly",
            SpectrumFamily::PolyShift { .. } => "poly_shift",
            SpectrumFamily::PolyCut { .. } => "poly_cut",
            SpectrumFamily::ExpPlus { .. } => "exp_plus",
            SpectrumFamily::Explicit { .. } => "explicit",
        }
    }

    fn is_infinite(&self) -> bool {
        matches!(self, SpectrumFamily::LogPoly { .. } | SpectrumFamily::PolyShift { .. })
    }
}

/// How infinite families are cut to a finite dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationRule {
    /// Dropped tail mass must not exceed `tail_tol * trace`.
    pub tail_tol: f64,
    /// Lower bound `p >= min_dim_factor * n`.
    pub min_dim_factor: usize,
    pub cap: usize,
    /// Fixed dimension `p_n` instead of the tail rule; the dropped tail mass
    /// is still estimated and recorded but not checked against `tail_tol`.
    pub dim: Option<ScaledPower>,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self {
            tail_tol: DEFAULT_TAIL_TOL,
            min_dim_factor: 4,
            cap: TRUNCATION_CAP,
            dim: None,
        }
    }
}

/// Eigen-basis `U` of the spatial covariance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    #[default]
    Identity,
    RandomOrthogonal { seed: u64 },
}

/// Config-level description of a spectrum at an unspecified `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub family: SpectrumFamily,
    #[serde(default)]
    pub truncation: TruncationRule,
    #[serde(default)]
    pub basis: BasisSpec,
}

impl SpectrumSpec {
    pub fn build(&self, n: usize) -> Result<SpatialSpectrum> {
        let spectrum = build_benign_spectrum(&self.family, n, &self.truncation)?;
        match self.basis {
            BasisSpec::Identity => Ok(spectrum),
            BasisSpec::RandomOrthogonal { seed } => {
                let p = spectrum.p();
                spectrum.with_basis(crate::sampler::random_orthogonal(p, seed))
            }
        }
    }
}

/// Result of the `k*` scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KStar {
    Finite(usize),
    Infinite,
}

impl KStar {
    pub fn finite(self) -> Option<usize> {
        match self {
            KStar::Finite(k) => Some(k),
            KStar::Infinite => None,
        }
    }
}

impl fmt::Display for KStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KStar::Finite(k) => write!(f, "{k}"),
            KStar::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for KStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KStar::Finite(k) => s.serialize_u64(*k as u64),
            KStar::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for KStar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(k) => Ok(KStar::Finite(k as usize)),
            Repr::Str(s) if s == "inf" => Ok(KStar::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad k* value {s:?}"))),
        }
    }
}

/// `(zeta_n, tau_n, eta_n)` together with the `k*` they were computed at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSequences {
    pub k_star: usize,
    /// Trace of the spectrum.
    pub zeta: f64,
    /// `lambda_{k*}` (1-based; `lambda_1` when `k* = 0`).
    pub tau: f64,
    /// `max(k*/n, n / R_{k*})`.
    pub eta: f64,
}

/// Eigenvalues of the spatial covariance plus an optional eigen-basis.
#[derive(Clone, Debug)]
pub struct SpatialSpectrum {
    eigenvalues: Vec<f64>,
    basis: Option<DMatrix<f64>>,
    family_label: String,
    params: serde_json::Value,
    tail_mass_dropped: f64,
    tail: Vec<f64>,
    tail_sq: Vec<f64>,
}

/// Wire form: `{family, params, eigenvalues[], tail_mass_dropped}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJson {
    pub family: String,
    pub params: serde_json::Value,
    pub eigenvalues: Vec<f64>,
    pub tail_mass_dropped: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl SpatialSpectrum {
    /// Explicit spectrum; eigenvalues must be finite, positive and nonincreasing.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::from_parts(eigenvalues, "explicit".into(), serde_json::json!({}), 0.0)
    }

    fn from_parts(
        eigenvalues: Vec<f64>,
        family_label: String,
        params: serde_json::Value,
        tail_mass_dropped: f64,
    ) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("spectrum must have at least one eigenvalue"));
        }
        for (i, &l) in eigenvalues.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(invalid(format!("nonpositive or non-finite eigenvalue {l} at index {}", i + 1)));
            }
            if i > 0 && l > eigenvalues[i - 1] {
                return Err(invalid(format!("eigenvalues must be nonincreasing (index {})", i + 1)));
            }
        }
        if !(tail_mass_dropped >= 0.0) {
            return Err(invalid("tail mass must be nonnegative"));
        }
        let tail = suffix_sums(&eigenvalues, |x| x);
        let tail_sq = suffix_sums(&eigenvalues, |x| x * x);
        if !tail[0].is_finite() {
            return Err(invalid("trace is not finite"));
        }
        Ok(Self {
            eigenvalues,
            basis: None,
            family_label,
            params,
            tail_mass_dropped,
            tail,
            tail_sq,
        })
    }

    /// Attach an orthogonal basis `U` (columns are eigenvectors).
    pub fn with_basis(mut self, basis: DMatrix<f64>) -> Result<Self> {
        let p = self.p();
        if basis.nrows() != p || basis.ncols() != p {
            return Err(mismatch(format!("basis is {}x{}, spectrum has p = {p}", basis.nrows(), basis.ncols())));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::<f64>::identity(p, p)).amax();
        if err > 1e-10 {
            return Err(invalid(format!("basis is not orthogonal: max |U^T U - I| = {err:.3e}")));
        }
        self.basis = Some(basis);
        Ok(self)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.basis.as_ref()
    }

    pub fn family_label(&self) -> &str {
        &self.family_label
    }

    pub fn tail_mass_dropped(&self) -> f64 {
        self.tail_mass_dropped
    }

    pub fn trace(&self) -> f64 {
        self.tail[0]
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `sum_{i > k} lambda_i` (1-based), i.e. the mass outside the top `k`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.tail[k.min(self.p())]
    }

    /// Same eigenvalues multiplied by `s > 0`; basis and labels are kept.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid("scale must be positive"));
        }
        let mut out = Self::from_parts(
            self.eigenvalues.iter().map(|l| l * s).collect(),
            self.family_label.clone(),
            self.params.clone(),
            self.tail_mass_dropped * s,
        )?;
        out.basis = self.basis.clone();
        Ok(out)
    }

    /// Coordinates of `v` in the eigen-basis: `U^T v`.
    pub fn to_eigenbasis(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(u) => u.tr_mul(v),
            None => v.clone(),
        }
    }

    /// `v^T Sigma v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> Result<f64> {
        if v.len() != self.p() {
            return Err(mismatch(format!("vector of length {} vs p = {}", v.len(), self.p())));
        }
        let w = self.to_eigenbasis(v);
        let mut acc = CompensatedSum::new();
        for (l, x) in self.eigenvalues.iter().zip(w.iter()) {
            acc.add(l * x * x);
        }
        Ok(acc.value())
    }

    /// `(r_k, R_k)`.
    pub fn effective_ranks(&self, k: usize) -> Result<(f64, f64)> {
        let p = self.p();
        if k >= p {
            return Err(Error::IndexOutOfRange { k, p });
        }
        let s = self.tail[k];
        Ok((s / self.eigenvalues[k], s * s / self.tail_sq[k]))
    }

    /// Smallest `k` with `r_k >= b n`.
    pub fn k_star(&self, b: f64, n: usize) -> KStar {
        let target = b * n as f64;
        (0..self.p())
            .find(|&k| self.tail[k] / self.eigenvalues[k] >= target)
            .map_or(KStar::Infinite, KStar::Finite)
    }

    /// `(sum_{i>k} lambda_i beta_i^2, sum_{i<=k} beta_i^2 / lambda_i)` for
    /// `beta` already expressed in the eigen-basis.
    pub fn weighted_norms(&self, beta: &DVector<f64>, k: usize) -> Result<(f64, f64)> {
        let p = self.p();
        if beta.len() != p {
            return Err(mismatch(format!("beta has length {}, p = {p}", beta.len())));
        }
        if k > p {
            return Err(Error::IndexOutOfRange { k, p });
        }
        let mut tail = CompensatedSum::new();
        let mut head = CompensatedSum::new();
        for i in (0..p).rev() {
            let b2 = beta[i] * beta[i];
            if i < k {
                head.add(b2 / self.eigenvalues[i]);
            } else {
                tail.add(self.eigenvalues[i] * b2);
            }
        }
        Ok((tail.value(), head.value()))
    }

    pub fn rate_sequences(&self, n: usize, b: f64) -> Result<RateSequences> {
        let k = self.k_star(b, n).finite().ok_or(Error::KStarInfinite)?;
        let (_, big_r) = self.effective_ranks(k)?;
        Ok(RateSequences {
            k_star: k,
            zeta: self.trace(),
            tau: self.eigenvalues[k.max(1) - 1],
            eta: (k as f64 / n as f64).max(n as f64 / big_r),
        })
    }

    /// Rows `(k, lambda_{k+1}, r_k, R_k)` for `k < min(p, kmax)`.
    pub fn rank_table(&self, kmax: usize) -> Vec<(usize, f64, f64, f64)> {
        (0..self.p().min(kmax))
            .map(|k| {
                let (r, big_r) = self.effective_ranks(k).expect("k < p");
                (k, self.eigenvalues[k], r, big_r)
            })
            .collect()
    }

    pub fn to_json(&self) -> SpectrumJson {
        SpectrumJson {
            family: self.family_label.clone(),
            params: self.params.clone(),
            eigenvalues: self.eigenvalues.clone(),
            tail_mass_dropped: self.tail_mass_dropped,
            basis: self
                .basis
                .as_ref()
                .map(|u| u.row_iter().map(|r| r.iter().copied().collect()).collect()),
        }
    }

    pub fn from_json(j: SpectrumJson) -> Result<Self> {
        let mut s = Self::from_parts(j.eigenvalues, j.family, j.params, j.tail_mass_dropped)?;
        if let Some(rows) = j.basis {
            let p = s.p();
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                return Err(mismatch("basis rows do not match p"));
            }
            let u = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
            s = s.with_basis(u)?;
        }
        Ok(s)
    }
}

/// Realize a spectrum family at sample size `n`.
pub fn build_benign_spectrum(
    family: &SpectrumFamily,
    n: usize,
    truncation: &TruncationRule,
) -> Result<SpatialSpectrum> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut params = serde_json::to_value(family)?;
    if let Some(obj) = params.as_object_mut() {
        obj.remove("kind");
        obj.remove("eigenvalues");
    }
    let label = family.label().to_string();

    let (eigs, dropped) = match family {
        SpectrumFamily::Explicit { eigenvalues } => (eigenvalues.clone(), 0.0),
        SpectrumFamily::LogPoly { gamma } => {
            let gamma = *gamma;
            if !(gamma > 1.0) || !gamma.is_finite() {
                return Err(invalid(format!("logpoly needs gamma > 1 for a finite trace, got {gamma}")));
            }
            let f = move |i: usize| logpoly_eigenvalue(i, gamma);
            let tail = move |p: usize| logpoly_tail(p, gamma);
            truncate_infinite(&label, f, tail, n, truncation)?
        }
        SpectrumFamily::PolyShift { gamma } => {
            let g = gamma.at(n);
            if !(g > 0.0) || !g.is_finite() {
                return Err(invalid(format!("poly_shift needs gamma_n > 0, got {g}")));
            }
            let s = 1.0 + g;
            let f = move |i: usize| (i as f64).powf(-s);
            let tail = move |p: usize| poly_tail(p, s);
            truncate_infinite(&label, f, tail, n, truncation)?
        }
        SpectrumFamily::PolyCut { gamma, dim } => {
            let gamma = *gamma;
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(invalid(format!("poly_cut needs gamma in (0, 1), got {gamma}")));
            }
            let p = dim.dim_at(n);
            if p == 0 {
                return Err(invalid("poly_cut dimension p_n rounds to zero"));
            }
            ((1..=p).map(|i| (i as f64).powf(-gamma)).collect(), 0.0)
        }
        SpectrumFamily::ExpPlus { epsilon, dim } => {
            let eps = epsilon.at(n);
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(invalid(format!("exp_plus needs epsilon_n > 0, got {eps}")));
            }
            let p = dim.dim_at(n);
            if p == 0 {
                return Err(invalid("exp_plus dimension p_n rounds to zero"));
            }
            ((1..=p).map(|i| (-(i as f64)).exp() + eps).collect(), 0.0)
        }
    };
    debug_assert!(family.is_infinite() || dropped == 0.0);
    SpatialSpectrum::from_parts(eigs, label, params, dropped)
}

fn logpoly_eigenvalue(i: usize, gamma: f64) -> f64 {
    let x = i as f64;
    1.0 / (x * x.ln().powf(gamma))
}

/// Euler-Maclaurin estimate of `sum_{i > p} 1/(i log^g i)`, `g > 1`.
fn logpoly_tail(p: usize, g: f64) -> f64 {
    let x = p as f64;
    let l = x.ln();
    let integral = l.powf(1.0 - g) / (g - 1.0);
    let f = 1.0 / (x * l.powf(g));
    let fprime = -(l + g) / (x * x * l.powf(g + 1.0));
    integral - 0.5 * f - fprime / 12.0
}

/// Euler-Maclaurin estimate of `sum_{i > p} i^{-s}`, `s > 1`.
fn poly_tail(p: usize, s: f64) -> f64 {
    let x = p as f64;
    let integral = x.powf(1.0 - s) / (s - 1.0);
    let f = x.powf(-s);
    let fprime = -s * x.powf(-s - 1.0);
    let fthird = -s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0);
    integral - 0.5 * f - fprime / 12.0 + fthird / 720.0
}

fn truncate_infinite(
    label: &str,
    f: impl Fn(usize) -> f64,
    tail: impl Fn(usize) -> f64,
    n: usize,
    rule: &TruncationRule,
) -> Result<(Vec<f64>, f64)> {
    // log 1 = 0 makes the logpoly formula blow up at i = 1; pin lambda_1 = 2 lambda_2.
    let eig = |i: usize| if i == 1 && label == "logpoly" { 2.0 * f(2) } else { f(i) };

    if let Some(dim) = rule.dim {
        let p = dim.dim_at(n);
        if p < 2 {
            return Err(invalid(format!("fixed dimension p_n = {p} is too small")));
        }
        return Ok(((1..=p).map(eig).collect(), tail(p)));
    }

    if !(rule.tail_tol > 0.0) {
        return Err(invalid("tail_tol must be positive"));
    }
    let p_min = (rule.min_dim_factor * n).max(2);
    if p_min > rule.cap {
        return Err(invalid(format!("minimum dimension {p_min} exceeds the cap {}", rule.cap)));
    }
    let mut partial = CompensatedSum::new();
    for i in (1..=p_min).rev() {
        partial.add(eig(i));
    }
    let mut p = p_min;
    loop {
        let t = tail(p);
        let ratio = t / (partial.value() + t);
        if ratio <= rule.tail_tol {
            return Ok(((1..=p).map(eig).collect(), t));
        }
        if p >= rule.cap {
            return Err(Error::TruncationCap {
                family: label.to_string(),
                tol: rule.tail_tol,
                cap: rule.cap,
                ratio,
            });
        }
        p += 1;
        partial.add(eig(p));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent evaluation straight from the definitions, O(p) per k.
    fn brute_ranks(l: &[f64], k: usize) -> (f64, f64) {
        let s: f64 = l[k..].iter().sum();
        let s2: f64 = l[k..].iter().map(|x| x * x).sum();
        (s / l[k], s * s / s2)
    }

    fn brute_k_star(l: &[f64], b: f64, n: usize) -> Option<usize> {
        (0..l.len()).find(|&k| brute_ranks(l, k).0 >= b * n as f64)
    }

    fn inv_square(p: usize) -> SpatialSpectrum {
        SpatialSpectrum::new((1..=p).map(|i| 1.0 / (i * i) as f64).collect()).unwrap()
    }

    #[test]
    fn identity_spectrum_ranks() {
        let s = SpatialSpectrum::new(vec![1.0; 100]).unwrap();
        assert_eq!(s.trace(), 100.0);
        assert_eq!(s.effective_ranks(0).unwrap(), (100.0, 100.0));
        for k in [1, 37, 99] {
            let (r, big_r) = s.effective_ranks(k).unwrap();
            assert_relative_eq!(r, (100 - k) as f64, max_relative = 1e-14);
            assert_relative_eq!(big_r, (100 - k) as f64, max_relative = 1e-14);
        }
    }

    #[test]
    fn small_explicit_ranks() {
        let s = SpatialSpectrum::new(vec![4.0, 2.0, 1.0, 1.0]).unwrap();
        let (r, big_r) = s.effective_ranks(0).unwrap();
        assert_relative_eq!(r, 2.0);
        assert_relative_eq!(big_r, 64.0 / 22.0);
        assert!(matches!(s.effective_ranks(4), Err(Error::IndexOutOfRange { k: 4, p: 4 })));
    }

    #[test]
    fn inverse_square_r0_near_basel() {
        let s = inv_square(1000);
        let (r0, _) = s.effective_ranks(0).unwrap();
        let brute: f64 = (1..=1000).map(|i| 1.0 / (i * i) as f64).sum();
        assert_relative_eq!(r0, brute, max_relative = 1e-13);
        assert!((r0 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1.1e-3);
    }

    #[test]
    fn k_star_examples() {
        let id = SpatialSpectrum::new(vec![1.0; 100]).unwrap();
        assert_eq!(id.k_star(2.0, 50), KStar::Finite(0));
        assert_eq!(id.k_star(2.0, 51), KStar::Infinite);
        // brute-force scan oracle: r_3 = 4.54 < 5 <= r_4 = 5.53
        assert_eq!(brute_k_star(inv_square(1000).eigenvalues(), 1.0, 5), Some(4));
        assert_eq!(inv_square(1000).k_star(1.0, 5), KStar::Finite(4));
        assert_eq!(inv_square(20).k_star(1.0, 100), KStar::Infinite);
    }

    #[test]
    fn k_star_matches_scan_on_families() {
        let specs = [
            SpectrumFamily::PolyShift { gamma: ScaledPower::constant(1.0) },
            SpectrumFamily::PolyCut { gamma: 0.5, dim: ScaledPower::power(1.0, 2.0) },
            SpectrumFamily::ExpPlus { epsilon: ScaledPower::constant(1e-3), dim: ScaledPower::power(10.0, 1.0) },
        ];
        for fam in &specs {
            for n in [5usize, 20, 40] {
                let s = build_benign_spectrum(fam, n, &TruncationRule::default()).unwrap();
                for b in [1.0, 2.0, 3.5] {
                    assert_eq!(s.k_star(b, n).finite(), brute_k_star(s.eigenvalues(), b, n), "{fam:?} n={n} b={b}");
                }
            }
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let s = SpatialSpectrum::new(vec![4.0, 1.0]).unwrap();
        let beta = DVector::from_vec(vec![1.0, 2.0]);
        let (tail, head) = s.weighted_norms(&beta, 1).unwrap();
        assert_relative_eq!(tail, 4.0);
        assert_relative_eq!(head, 0.25);
        let (tail0, head0) = s.weighted_norms(&beta, 0).unwrap();
        assert_eq!(head0, 0.0);
        assert_relative_eq!(tail0, s.quadratic_form(&beta).unwrap());
        let (tail2, _) = s.weighted_norms(&beta, 2).unwrap();
        assert_eq!(tail2, 0.0);
        assert!(s.weighted_norms(&DVector::zeros(3), 0).is_err());
    }

    #[test]
    fn rate_sequence_examples() {
        let n = 25;
        let id = SpatialSpectrum::new(vec![1.0; 4 * n]).unwrap();
        let r = id.rate_sequences(n, 1.0).unwrap();
        assert_eq!(r.k_star, 0);
        assert_relative_eq!(r.zeta, 100.0);
        assert_relative_eq!(r.tau, 1.0);
        assert_relative_eq!(r.eta, 0.25);

        let r = inv_square(1000).rate_sequences(5, 1.0).unwrap();
        assert_eq!(r.k_star, 4);
        assert_relative_eq!(r.tau, 1.0 / 16.0);

        assert!(matches!(inv_square(20).rate_sequences(100, 1.0), Err(Error::KStarInfinite)));
    }

    #[test]
    fn families_follow_their_formulas() {
        let s = build_benign_spectrum(&SpectrumFamily::Explicit { eigenvalues: vec![1.0; 100] }, 10, &Default::default())
            .unwrap();
        assert_eq!((s.p(), s.trace()), (100, 100.0));

        let cut = SpectrumFamily::PolyCut { gamma: 0.5, dim: ScaledPower::power(1.0, 2.0) };
        let s = build_benign_spectrum(&cut, 10, &Default::default()).unwrap();
        assert_eq!(s.p(), 100);
        for (i, l) in s.eigenvalues().iter().enumerate() {
            assert_relative_eq!(*l, ((i + 1) as f64).powf(-0.5), max_relative = 1e-15);
        }

        let ep = SpectrumFamily::ExpPlus { epsilon: ScaledPower::constant(0.01), dim: ScaledPower::constant(30.0) };
        let s = build_benign_spectrum(&ep, 10, &Default::default()).unwrap();
        assert_eq!(s.p(), 30);
        assert_relative_eq!(s.eigenvalues()[2], (-3.0f64).exp() + 0.01);
    }

    #[test]
    fn logpoly_follows_formula_when_truncation_is_feasible() {
        let rule = TruncationRule { tail_tol: 0.05, ..Default::default() };
        let s = build_benign_spectrum(&SpectrumFamily::LogPoly { gamma: 2.0 }, 50, &rule).unwrap();
        assert!(s.p() >= 200);
        let l = s.eigenvalues();
        for i in [2usize, 3, 10, 150] {
            let x = i as f64;
            assert_relative_eq!(l[i - 1], 1.0 / (x * x.ln().powi(2)), max_relative = 1e-14);
        }
        assert_relative_eq!(l[0], 2.0 * l[1]);
        assert!(s.tail_mass_dropped() <= 0.05 * (s.trace() + s.tail_mass_dropped()));
    }

    #[test]
    fn logpoly_at_default_tolerance_hits_the_cap() {
        // The tail of 1/(i log^2 i) decays like 1/log p; 1e-3 of the trace is
        // unreachable below p = 2e5 and must be reported, not clipped.
        let err = build_benign_spectrum(&SpectrumFamily::LogPoly { gamma: 2.0 }, 50, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::TruncationCap { .. }), "{err}");
    }

    #[test]
    fn poly_shift_truncation_meets_tolerance() {
        let fam = SpectrumFamily::PolyShift { gamma: ScaledPower::constant(1.0) };
        let s = build_benign_spectrum(&fam, 50, &Default::default()).unwrap();
        assert!(s.p() >= 200);
        let true_tail: f64 = ((s.p() + 1)..2_000_000).map(|i| (i as f64).powi(-2)).sum::<f64>() + 1.0 / 2_000_000.0;
        assert_relative_eq!(s.tail_mass_dropped(), true_tail, max_relative = 1e-6);
        assert!(s.tail_mass_dropped() <= 1e-3 * (s.trace() + s.tail_mass_dropped()));
        // smallest such p: one fewer eigenvalue would violate the rule
        let t_prev = s.tail_mass_dropped() + s.eigenvalues()[s.p() - 1];
        assert!(t_prev > 1e-3 * (s.trace() + s.tail_mass_dropped()));
    }

    #[test]
    fn fixed_dimension_override() {
        let rule = TruncationRule { dim: Some(ScaledPower::power(1.0, 1.5)), ..Default::default() };
        let fam = SpectrumFamily::PolyShift { gamma: ScaledPower::power(1.0, -0.5) };
        let s = build_benign_spectrum(&fam, 100, &rule).unwrap();
        assert_eq!(s.p(), 1000);
        assert_relative_eq!(s.eigenvalues()[9], 10f64.powf(-1.1), max_relative = 1e-14);
        assert!(s.tail_mass_dropped() > 0.0);
    }

    #[test]
    fn parameter_errors() {
        let bad = [
            SpectrumFamily::LogPoly { gamma: 0.5 },
            SpectrumFamily::PolyShift { gamma: ScaledPower::constant(0.0) },
            SpectrumFamily::PolyCut { gamma: 1.5, dim: ScaledPower::constant(10.0) },
            SpectrumFamily::ExpPlus { epsilon: ScaledPower::constant(0.0), dim: ScaledPower::constant(10.0) },
            SpectrumFamily::Explicit { eigenvalues: vec![1.0, 0.0] },
            SpectrumFamily::Explicit { eigenvalues: vec![1.0, 2.0] },
        ];
        for fam in &bad {
            assert!(build_benign_spectrum(fam, 10, &Default::default()).is_err(), "{fam:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let fam = SpectrumFamily::PolyCut { gamma: 0.5, dim: ScaledPower::constant(8.0) };
        let s = build_benign_spectrum(&fam, 3, &Default::default()).unwrap();
        let text = serde_json::to_string(&s.to_json()).unwrap();
        assert!(text.contains("\"family\":\"poly_cut\""));
        let back = SpatialSpectrum::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.eigenvalues(), s.eigenvalues());
    }

    #[test]
    fn basis_must_be_orthogonal() {
        let s = SpatialSpectrum::new(vec![2.0, 1.0]).unwrap();
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(s.clone().with_basis(skew).is_err());
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let s = s.with_basis(rot).unwrap();
        // v = U e_1 has quadratic form lambda_1
        let v = DVector::from_vec(vec![c, c]);
        assert_relative_eq!(s.quadratic_form(&v).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn config_scaled_power_accepts_plain_numbers() {
        let fam: SpectrumFamily = toml::from_str("kind = \"poly_shift\"\ngamma = 0.25\n").unwrap();
        assert_eq!(fam, SpectrumFamily::PolyShift { gamma: ScaledPower::constant(0.25) });
        let fam: SpectrumFamily =
            toml::from_str("kind = \"poly_shift\"\ngamma = { scale = 1.0, exponent = -0.5 }\n").unwrap();
        assert_eq!(fam, SpectrumFamily::PolyShift { gamma: ScaledPower::power(1.0, -0.5) });
        assert!(toml::from_str::<SpectrumFamily>("kind = \"poly_shift\"\ngamma = 0.25\nextra = 1\n").is_err());
    }

    fn arb_spectrum() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..10.0, 2..60).prop_map(|mut v| {
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
    }

    proptest! {
        #[test]
        fn ranks_are_scale_invariant(eigs in arb_spectrum(), s in 1e-3f64..1e3, b in 1.0f64..4.0, n in 1usize..30) {
            let a = SpatialSpectrum::new(eigs).unwrap();
            let c = a.scaled(s).unwrap();
            for k in 0..a.p() {
                let (r1, q1) = a.effective_ranks(k).unwrap();
                let (r2, q2) = c.effective_ranks(k).unwrap();
                prop_assert!((r1 - r2).abs() <= 1e-10 * r1);
                prop_assert!((q1 - q2).abs() <= 1e-10 * q1);
            }
            // k* agrees except when r_k sits within rounding of b n
            let (ka, kc) = (a.k_star(b, n), c.k_star(b, n));
            if ka != kc {
                let k = ka.finite().or(kc.finite()).unwrap();
                let r = a.effective_ranks(k).unwrap().0;
                prop_assert!((r - b * n as f64).abs() <= 1e-9 * r);
            }
        }

        #[test]
        fn rank_inequalities(eigs in arb_spectrum()) {
            let s = SpatialSpectrum::new(eigs).unwrap();
            for k in 0..s.p() {
                let (r, big_r) = s.effective_ranks(k).unwrap();
                prop_assert!(r >= 1.0 - 1e-12);
                prop_assert!(big_r >= 1.0 - 1e-12);
                prop_assert!(big_r <= r * r * (1.0 + 1e-12));
                prop_assert!(big_r <= (s.p() - k) as f64 * (1.0 + 1e-12));
                let (br, bbig) = brute_ranks(s.eigenvalues(), k);
                prop_assert!((r - br).abs() <= 1e-12 * br);
                prop_assert!((big_r - bbig).abs() <= 1e-12 * bbig);
            }
        }

        #[test]
        fn k_star_equals_linear_scan(eigs in arb_spectrum(), b in 1.0f64..3.0, n in 1usize..40) {
            let s = SpatialSpectrum::new(eigs).unwrap();
            prop_assert_eq!(s.k_star(b, n).finite(), brute_k_star(s.eigenvalues(), b, n));
        }

        #[test]
        fn weighted_norm_split_reproduces_quadratic_form(
            eigs in arb_spectrum(),
            seed in any::<u64>(),
            kfrac in 0.0f64..=1.0,
        ) {
            let s = SpatialSpectrum::new(eigs).unwrap();
            let p = s.p();
            let k = ((p as f64) * kfrac) as usize;
            let beta = DVector::from_vec(crate::rng::normals(&mut crate::rng::stream(seed, "beta", 0), p));
            let (tail, _) = s.weighted_norms(&beta, k).unwrap();
            let head_lambda: f64 = (0..k).map(|i| s.eigenvalues()[i] * beta[i] * beta[i]).sum();
            let total = s.quadratic_form(&beta).unwrap();
            prop_assert!((tail + head_lambda - total).abs() <= 1e-10 * total.max(1e-300));
        }
    }
}
