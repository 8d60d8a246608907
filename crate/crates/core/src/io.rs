//! Matrix CSV files (no header, one row per line, shortest round-trip
//! decimals) and a JSON sidecar describing a sampled instance.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::fmt_f64;
use crate::sampler::RegressionInstance;

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!("{}:{}: ragged row", path.display(), i + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: empty matrix", path.display())));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Single-column CSV as a vector.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!("{}: expected one column, found {}", path.display(), m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub config_hash: String,
    pub generator: String,
    pub files: InstanceFiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFiles {
    pub x: String,
    pub y: String,
    pub beta_star: String,
    pub noise: String,
}

impl Default for InstanceFiles {
    fn default() -> Self {
        Self { x: "X.csv".into(), y: "y.csv".into(), beta_star: "beta_star.csv".into(), noise: "noise.csv".into() }
    }
}

pub const META_FILE: &str = "instance.json";

/// Writes `X.csv`, `y.csv`, `beta_star.csv`, `noise.csv` and `instance.json` into `dir`.
pub fn write_instance(dir: &Path, inst: &RegressionInstance) -> Result<InstanceMeta> {
    fs::create_dir_all(dir)?;
    let files = InstanceFiles::default();
    write_matrix_csv(&dir.join(&files.x), &inst.x)?;
    write_vector_csv(&dir.join(&files.y), &inst.y)?;
    write_vector_csv(&dir.join(&files.beta_star), &inst.beta_star)?;
    write_vector_csv(&dir.join(&files.noise), &inst.noise)?;
    let meta = InstanceMeta {
        n: inst.n(),
        p: inst.p(),
        seed: inst.seed,
        config_hash: inst.config_hash.clone(),
        generator: inst.generator.clone(),
        files,
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}

pub fn read_instance(dir: &Path) -> Result<RegressionInstance> {
    let meta: InstanceMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    let x = read_matrix_csv(&dir.join(&meta.files.x))?;
    let y = read_vector_csv(&dir.join(&meta.files.y))?;
    let beta_star = read_vector_csv(&dir.join(&meta.files.beta_star))?;
    let noise = read_vector_csv(&dir.join(&meta.files.noise))?;
    if x.shape() != (meta.n, meta.p) || y.len() != meta.n || beta_star.len() != meta.p || noise.len() != meta.n {
        return Err(crate::error::mismatch("instance files disagree with instance.json"));
    }
    Ok(RegressionInstance { x, y, beta_star, noise, seed: meta.seed, config_hash: meta.config_hash, generator: meta.generator })
}
