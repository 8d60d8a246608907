//! Seeded draws from the separable Gaussian model
//! `X = S_Xi Z Lambda^{1/2} U^T` (homo) or column-wise `S_{Xi_i} z_i`
//! (hetero), noise `S_Upsilon g`, and `Y = X beta* + noise`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, mismatch, Result};
use crate::rng::{self, normals, Stream, GENERATOR_ID};
use crate::spectra::{SpatialSpectrum, SpectrumSpec};
use crate::temporal::{materialize, NoiseSpec, TemporalCov, TemporalFamily, TemporalSpec, ToeplitzCov};

/// True parameter, expressed in eigen-basis coordinates (equal to the
/// ambient coordinates when `U = I`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    Explicit { values: Vec<f64> },
    Constant { value: f64 },
    /// `beta_i = scale * i^exponent`.
    Power { scale: f64, exponent: f64 },
    /// 1-based index of the nonzero coordinate.
    UnitDirection { index: usize },
    /// Independent random signs applied to a deterministic magnitude profile.
    RademacherPrior { bar: Box<BetaSpec> },
}

impl BetaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BetaSpec::Explicit { values } if values.iter().any(|v| !v.is_finite()) => {
                Err(invalid("explicit beta has non-finite entries"))
            }
            BetaSpec::UnitDirection { index: 0 } => Err(invalid("unit direction index is 1-based")),
            BetaSpec::RademacherPrior { bar } if matches!(**bar, BetaSpec::RademacherPrior { .. }) => {
                Err(invalid("rademacher prior over a random profile"))
            }
            BetaSpec::RademacherPrior { bar } => bar.validate(),
            _ => Ok(()),
        }
    }
}

pub fn make_beta(spec: &BetaSpec, p: usize, rng: &mut Stream) -> Result<DVector<f64>> {
    spec.validate()?;
    Ok(match spec {
        BetaSpec::Explicit { values } => {
            if values.len() != p {
                return Err(mismatch(format!("explicit beta has length {}, p = {p}", values.len())));
            }
            DVector::from_column_slice(values)
        }
        BetaSpec::Constant { value } => DVector::from_element(p, *value),
        BetaSpec::Power { scale, exponent } => DVector::from_fn(p, |i, _| scale * ((i + 1) as f64).powf(*exponent)),
        BetaSpec::UnitDirection { index } => {
            if *index > p {
                return Err(mismatch(format!("unit direction {index} exceeds p = {p}")));
            }
            let mut v = DVector::zeros(p);
            v[index - 1] = 1.0;
            v
        }
        BetaSpec::RademacherPrior { bar } => {
            let mut v = make_beta(bar, p, rng)?;
            for x in v.iter_mut() {
                if rng.random::<bool>() {
                    *x = -*x;
                }
            }
            v
        }
    })
}

/// `p x p` orthogonal matrix from the QR factorization of a seeded Gaussian
/// matrix, with column signs fixed by `diag(R) > 0`.
pub fn random_orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    let g = DMatrix::from_vec(p, p, normals(&mut rng::stream(seed, "basis", 0), p * p));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Standard normal `n x p` matrix scaled column-wise by `sqrt(lambda_i)`.
fn scaled_gaussian(spectrum: &SpatialSpectrum, n: usize, rng: &mut Stream) -> DMatrix<f64> {
    let p = spectrum.p();
    let mut z = DMatrix::from_vec(n, p, normals(rng, n * p));
    for (mut col, l) in z.column_iter_mut().zip(spectrum.eigenvalues()) {
        col *= l.sqrt();
    }
    z
}

fn rotate(spectrum: &SpatialSpectrum, x: DMatrix<f64>) -> DMatrix<f64> {
    match spectrum.basis() {
        Some(u) => x * u.transpose(),
        None => x,
    }
}

pub fn sample_design_homo(spectrum: &SpatialSpectrum, xi: &ToeplitzCov, rng: &mut Stream) -> DMatrix<f64> {
    let z = scaled_gaussian(spectrum, xi.n(), rng);
    rotate(spectrum, xi.apply_factor(&z))
}

pub fn sample_design_hetero(
    spectrum: &SpatialSpectrum,
    family: &TemporalFamily,
    rng: &mut Stream,
) -> Result<DMatrix<f64>> {
    if family.p() != spectrum.p() {
        return Err(mismatch(format!("family covers {} coordinates, spectrum has p = {}", family.p(), spectrum.p())));
    }
    let mut x = scaled_gaussian(spectrum, family.n(), rng);
    for (m, cov) in family.members.iter().enumerate() {
        if cov.scalar() == Some(1.0) {
            continue;
        }
        let cols: Vec<usize> = (0..family.p()).filter(|&i| family.assignment[i] == m).collect();
        let block = x.select_columns(&cols);
        let mixed = cov.apply_factor(&block);
        for (k, &i) in cols.iter().enumerate() {
            x.set_column(i, &mixed.column(k));
        }
    }
    Ok(rotate(spectrum, x))
}

pub fn sample_noise(upsilon: &ToeplitzCov, rng: &mut Stream) -> DVector<f64> {
    let g = DMatrix::from_vec(upsilon.n(), 1, normals(rng, upsilon.n()));
    upsilon.apply_factor(&g).column(0).into_owned()
}

pub fn sample_design(spectrum: &SpatialSpectrum, temporal: &TemporalCov, rng: &mut Stream) -> Result<DMatrix<f64>> {
    match temporal {
        TemporalCov::Homo(xi) => Ok(sample_design_homo(spectrum, xi, rng)),
        TemporalCov::Hetero(f) => sample_design_hetero(spectrum, f, rng),
    }
}

/// Everything needed to generate one regression problem, before fixing `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub spectrum: SpectrumSpec,
    #[serde(default = "identity")]
    pub design: TemporalSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub beta: BetaSpec,
    /// Permit `n >= p`.
    #[serde(default)]
    pub allow_underparameterized: bool,
}

fn identity() -> TemporalSpec {
    TemporalSpec::Identity
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.noise.process.validate()?;
        if self.noise.process.is_hetero() {
            return Err(invalid("noise covariance must be a single Toeplitz process"));
        }
        self.beta.validate()
    }

    /// SHA-256 of the canonical JSON of the four specs.
    pub fn config_hash(&self) -> String {
        let canon = serde_json::json!({
            "spectrum": self.spectrum,
            "design": self.design,
            "noise": self.noise,
            "beta": self.beta,
        });
        hex::encode(Sha256::digest(canon.to_string().as_bytes()))
    }

    pub fn build(&self, n: usize) -> Result<Problem> {
        self.validate()?;
        let spectrum = self.spectrum.build(n)?;
        let p = spectrum.p();
        if n >= p && !self.allow_underparameterized {
            return Err(invalid(format!("n = {n} is not below p = {p}; set allow_underparameterized")));
        }
        Ok(Problem {
            n,
            design: materialize(&self.design, n, p)?,
            noise: self.noise.materialize(n)?,
            spectrum,
            beta: self.beta.clone(),
            config_hash: self.config_hash(),
        })
    }
}

/// Materialized covariances at a fixed `n`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub n: usize,
    pub spectrum: SpatialSpectrum,
    pub design: TemporalCov,
    pub noise: ToeplitzCov,
    pub beta: BetaSpec,
    pub config_hash: String,
}

impl Problem {
    pub fn p(&self) -> usize {
        self.spectrum.p()
    }

    /// `beta*` in ambient coordinates.
    pub fn beta_star(&self, seed: u64) -> Result<DVector<f64>> {
        let b = make_beta(&self.beta, self.p(), &mut rng::stream(seed, "beta", 0))?;
        Ok(match self.spectrum.basis() {
            Some(u) => u * b,
            None => b,
        })
    }

    pub fn sample_design(&self, seed: u64) -> Result<DMatrix<f64>> {
        sample_design(&self.spectrum, &self.design, &mut rng::stream(seed, "design", 0))
    }

    pub fn sample_noise(&self, seed: u64) -> DVector<f64> {
        sample_noise(&self.noise, &mut rng::stream(seed, "noise", 0))
    }

    /// Draw with independent design / noise / beta streams derived from `seed`.
    pub fn sample(&self, seed: u64) -> Result<RegressionInstance> {
        let x = self.sample_design(seed)?;
        let beta_star = self.beta_star(seed)?;
        let noise = self.sample_noise(seed);
        Ok(RegressionInstance::assemble(x, beta_star, noise, seed, self.config_hash.clone()))
    }

    /// Seed of replicate `index` under `master_seed`.
    pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
        rng::derive_seed(master_seed, "replicate", index)
    }
}

#[derive(Clone, Debug)]
pub struct RegressionInstance {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub seed: u64,
    pub config_hash: String,
    pub generator: String,
}

impl RegressionInstance {
    pub fn assemble(x: DMatrix<f64>, beta_star: DVector<f64>, noise: DVector<f64>, seed: u64, config_hash: String) -> Self {
        let y = &x * &beta_star + &noise;
        Self { x, y, beta_star, noise, seed, config_hash, generator: GENERATOR_ID.to_string() }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}
