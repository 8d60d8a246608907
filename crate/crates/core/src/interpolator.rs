//! Minimum-norm interpolation `beta_hat = X^T (X X^T)^{-1} Y` and its certificate.
//!
//! The pseudo-inverse is taken from an SVD of `X`. For wide designs the SVD
//! is obtained from a thin QR factorization `X^T = Q R` followed by an SVD of
//! the `n x n` factor `R`, which is exact in exact arithmetic and far cheaper
//! than a direct SVD of the `n x p` matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::rng;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const SV_CUTOFF: f64 = 1e-12;
/// Tolerances of the interpolation certificate.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const NULL_TOL: f64 = 1e-8;

/// `X = left * diag(singular) * right^T` with orthonormal columns in
/// `left` (`n x r`) and `right` (`p x r`).
#[derive(Clone, Debug)]
pub struct DesignSvd {
    pub left: DMatrix<f64>,
    pub singular: DVector<f64>,
    pub right: DMatrix<f64>,
}

impl DesignSvd {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(invalid("empty design"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("design has non-finite entries"));
        }
        let (left, singular, right) = if n <= p {
            let qr = x.transpose().qr();
            let (q, r) = qr.unpack();
            // X = R^T Q^T, and R = A S B^T gives X = B S (Q A)^T.
            let svd = r.svd(true, true);
            let a = svd.u.expect("requested");
            let b = svd.v_t.expect("requested").transpose();
            (b, svd.singular_values, q * a)
        } else {
            let svd = x.clone().svd(true, true);
            (svd.u.expect("requested"), svd.singular_values, svd.v_t.expect("requested").transpose())
        };
        let mut out = Self { left, singular, right };
        out.sort_desc();
        Ok(out)
    }

    fn sort_desc(&mut self) {
        let r = self.singular.len();
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&i, &j| self.singular[j].total_cmp(&self.singular[i]));
        if order.iter().enumerate().all(|(k, &i)| k == i) {
            return;
        }
        self.singular = DVector::from_fn(r, |k, _| self.singular[order[k]]);
        self.left = self.left.select_columns(&order);
        self.right = self.right.select_columns(&order);
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular[0]
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular[self.singular.len() - 1]
    }

    /// Number of singular values above `SV_CUTOFF * sigma_max`.
    pub fn effective_rank(&self) -> usize {
        let cut = SV_CUTOFF * self.sigma_max();
        self.singular.iter().filter(|s| **s > cut).count()
    }

    /// Fails unless every one of the `n` singular values clears the cutoff.
    pub fn require_full_row_rank(&self, n: usize) -> Result<()> {
        if self.singular.len() < n || self.effective_rank() < n {
            return Err(Error::RankDeficient { smallest: self.sigma_min(), largest: self.sigma_max() });
        }
        Ok(())
    }

    /// `X^+ y` over the singular values above the cutoff.
    pub fn pinv_apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let k = self.effective_rank();
        let mut c = self.left.columns(0, k).tr_mul(y);
        for i in 0..k {
            c[i] /= self.singular[i];
        }
        self.right.columns(0, k) * c
    }

    /// Orthogonal projection of `v` onto the row space of `X`.
    pub fn row_space_projection(&self, v: &DVector<f64>) -> DVector<f64> {
        let k = self.effective_rank();
        let r = self.right.columns(0, k);
        r * r.tr_mul(v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub residual_inf: f64,
    pub null_overlap: f64,
    pub effective_rank_used: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

impl FitResult {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(mismatch(format!("X has {} rows, Y has length {}", x.nrows(), y.len())));
    }
    if x.nrows() > x.ncols() {
        return Err(invalid(format!("interpolation needs n <= p, got n = {} > p = {}", x.nrows(), x.ncols())));
    }
    Ok(())
}

fn residual_inf(x: &DMatrix<f64>, beta: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (x * beta - y).amax()
}

pub fn min_norm_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    check_shapes(x, y)?;
    let svd = DesignSvd::new(x)?;
    fit_with(&svd, x, y)
}

/// Fit reusing an existing decomposition of `x`.
pub fn fit_with(svd: &DesignSvd, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult> {
    check_shapes(x, y)?;
    svd.require_full_row_rank(x.nrows())?;
    let beta = svd.pinv_apply(y);
    let null = (&beta - svd.row_space_projection(&beta)).norm();
    Ok(FitResult {
        residual_inf: residual_inf(x, &beta, y),
        null_overlap: null,
        effective_rank_used: svd.effective_rank(),
        sigma_max: svd.sigma_max(),
        sigma_min: svd.sigma_min(),
        beta_hat: beta.as_slice().to_vec(),
    })
}

/// `X^T (X X^T)^{-1} Y` through a Cholesky solve of the Gram matrix; kept as
/// an independent cross-check of the SVD route.
pub fn normal_equations_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_shapes(x, y)?;
    let gram = x * x.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Gram matrix X X^T".into()))?;
    Ok(x.tr_mul(&chol.solve(y)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub residual_inf: f64,
    pub residual_tol: f64,
    pub null_overlap: f64,
    pub null_tol: f64,
    /// `min_v ||beta + v||^2 - ||beta||^2` over the tested null vectors.
    pub min_norm_gain: f64,
    pub null_vectors_tested: usize,
    pub interpolates: bool,
    pub in_row_space: bool,
    pub minimal: bool,
    pub pass: bool,
}

/// Recompute the defining properties of `fit` from scratch: residual, null
/// component (against a freshly computed row-space basis) and minimality
/// along `samples` random null directions plus the fit's own null component.
pub fn certify(fit: &FitResult, x: &DMatrix<f64>, y: &DVector<f64>, samples: usize, seed: u64) -> Result<Certificate> {
    check_shapes(x, y)?;
    let beta = fit.beta();
    if beta.len() != x.ncols() {
        return Err(mismatch("beta_hat length differs from p"));
    }
    let basis = x.transpose().qr().q();
    let project = |v: &DVector<f64>| &basis * basis.tr_mul(v);

    let res = residual_inf(x, &beta, y);
    let null_part = &beta - project(&beta);
    let overlap = null_part.norm();
    let bnorm2 = beta.norm_squared();

    let null_tol = NULL_TOL * beta.norm();
    let mut directions = Vec::with_capacity(samples + 1);
    if overlap > null_tol {
        // removing the null component is the best possible improvement
        directions.push(-null_part.clone());
    }
    let mut stream = rng::stream(seed, "certify", 0);
    let scale = beta.norm().max(1.0);
    for _ in 0..samples {
        let g = DVector::from_vec(rng::normals(&mut stream, x.ncols()));
        let v = &g - project(&g);
        let norm = v.norm();
        if norm > 0.0 {
            directions.push(v * (scale / norm));
        }
    }
    let min_gain = directions
        .iter()
        .map(|v| (&beta + v).norm_squared() - bnorm2)
        .fold(f64::INFINITY, f64::min);

    let residual_tol = RESIDUAL_TOL * y.amax().max(1.0);
    let interpolates = res <= residual_tol;
    let in_row_space = overlap <= null_tol;
    let minimal = min_gain > 0.0;
    Ok(Certificate {
        residual_inf: res,
        residual_tol,
        null_overlap: overlap,
        null_tol,
        min_norm_gain: min_gain,
        null_vectors_tested: directions.len(),
        interpolates,
        in_row_space,
        minimal,
        pass: interpolates && in_row_space && minimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        DMatrix::from_vec(n, p, rng::normals(&mut rng::stream(seed, "test", 0), n * p))
    }

    #[test]
    fn coordinate_rows() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![2.0, 3.0]);
        let f = min_norm_fit(&x, &y).unwrap();
        assert_relative_eq!(f.beta(), DVector::from_vec(vec![2.0, 3.0, 0.0]), epsilon = 1e-14);
        assert_eq!(f.effective_rank_used, 2);
    }

    #[test]
    fn symmetric_split() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let f = min_norm_fit(&x, &DVector::from_vec(vec![2.0])).unwrap();
        assert_relative_eq!(f.beta(), DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn svd_route_matches_normal_equations() {
        let x = gaussian(20, 80, 1);
        let y = DVector::from_vec(rng::normals(&mut rng::stream(1, "y", 0), 20));
        let a = min_norm_fit(&x, &y).unwrap().beta();
        let b = normal_equations_fit(&x, &y).unwrap();
        assert!((&a - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let mut x = gaussian(4, 10, 2);
        let r0 = x.row(0).into_owned();
        x.set_row(3, &(r0 * 2.0));
        let err = min_norm_fit(&x, &DVector::from_element(4, 1.0)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err}");
    }

    #[test]
    fn shape_errors() {
        let x = gaussian(5, 3, 3);
        assert!(min_norm_fit(&x, &DVector::zeros(5)).is_err());
        assert!(min_norm_fit(&gaussian(3, 5, 3), &DVector::zeros(4)).is_err());
    }

    #[test]
    fn certificate_accepts_fit_and_rejects_perturbation() {
        let x = gaussian(15, 60, 4);
        let y = DVector::from_vec(rng::normals(&mut rng::stream(4, "y", 0), 15));
        let fit = min_norm_fit(&x, &y).unwrap();
        let c = certify(&fit, &x, &y, 16, 0).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(c.min_norm_gain > 0.0);

        // push beta_hat 1e-3 along a null direction of X
        let g = DVector::from_vec(rng::normals(&mut rng::stream(4, "g", 0), 60));
        let q = x.transpose().qr().q();
        let null = &g - &q * q.tr_mul(&g);
        let mut bad = fit.clone();
        let moved = fit.beta() + null.normalize() * 1e-3;
        bad.beta_hat = moved.as_slice().to_vec();
        let c = certify(&bad, &x, &y, 16, 0).unwrap();
        assert!(c.interpolates, "still interpolates");
        assert!(!c.in_row_space && !c.minimal && !c.pass, "{c:?}");
    }

    #[test]
    fn square_and_tall_designs_use_direct_svd() {
        let x = gaussian(6, 6, 5);
        let y = DVector::from_vec(rng::normals(&mut rng::stream(5, "y", 0), 6));
        let f = min_norm_fit(&x, &y).unwrap();
        assert!(f.residual_inf < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn row_transform_invariance(seed in any::<u64>()) {
            let (n, p) = (8, 30);
            let x = gaussian(n, p, seed);
            let y = DVector::from_vec(rng::normals(&mut rng::stream(seed, "y", 0), n));
            let a = gaussian(n, n, seed ^ 0x5555) + DMatrix::<f64>::identity(n, n) * 4.0;
            prop_assume!(a.clone().svd(false, false).singular_values.min() > 0.1);
            let b1 = min_norm_fit(&x, &y).unwrap().beta();
            let b2 = min_norm_fit(&(&a * &x), &(&a * &y)).unwrap().beta();
            prop_assert!((&b1 - &b2).norm() <= 1e-6 * b1.norm());
        }

        #[test]
        fn fit_interpolates_and_lies_in_row_space(seed in any::<u64>(), n in 2usize..20, extra in 1usize..40) {
            let p = n + extra;
            let x = gaussian(n, p, seed);
            let y = DVector::from_vec(rng::normals(&mut rng::stream(seed, "y", 0), n));
            let f = min_norm_fit(&x, &y).unwrap();
            prop_assert!(f.residual_inf <= RESIDUAL_TOL * y.amax().max(1.0));
            prop_assert!(f.null_overlap <= NULL_TOL * f.beta().norm());
        }
    }
}
