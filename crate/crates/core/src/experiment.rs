//! Sweeps over `n`: configuration, resumable JSONL persistence, per-`n`
//! summaries and plot data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    hetero_upper_bound, homo_upper_bound, integrated_covariance, rate_prediction, Constants, IntegratedCovSummary,
    RateMode,
};
use crate::error::{invalid, Error, Result};
use crate::interpolator::{fit_with, DesignSvd};
use crate::numerics::{loglog_slope, mean, median, std_error};
use crate::risk::{decomposition_bound, exact_excess_risk, terms_from_svd};
use crate::sampler::{BetaSpec, Problem, ProblemSpec};
use crate::spectra::{KStar, SpatialSpectrum, SpectrumSpec};
use crate::temporal::{degeneracy, NoiseSpec, TemporalCov, TemporalSpec};

fn default_output() -> OutputPaths {
    OutputPaths::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub records: String,
    pub csv: String,
    pub summary: String,
    pub svg: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            records: "records.jsonl".into(),
            csv: "records.csv".into(),
            summary: "summary.csv".into(),
            svg: "rates.svg".into(),
        }
    }
}

impl OutputPaths {
    pub fn records_path(&self) -> PathBuf {
        self.dir.join(&self.records)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join(&self.summary)
    }

    pub fn svg_path(&self) -> PathBuf {
        self.dir.join(&self.svg)
    }
}

fn identity() -> TemporalSpec {
    TemporalSpec::Identity
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spectrum: SpectrumSpec,
    #[serde(default = "identity")]
    pub design: TemporalSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub beta: BetaSpec,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub constants: Constants,
    /// Cross-lag decay exponent for the hetero rate predictor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub allow_underparameterized: bool,
    #[serde(default = "default_output")]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            spectrum: self.spectrum.clone(),
            design: self.design.clone(),
            noise: self.noise.clone(),
            beta: self.beta.clone(),
            allow_underparameterized: self.allow_underparameterized,
        }
    }

    pub fn config_hash(&self) -> String {
        self.problem_spec().config_hash()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid entries must be positive".into()));
        }
        if self.reps < 2 {
            return Err(Error::Config(format!("reps must be at least 2, got {}", self.reps)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::Config(format!("alpha must be positive, got {a}")));
            }
        }
        self.constants.validate()?;
        self.problem_spec().validate()
    }
}

/// One `(n, replicate)` outcome. Numeric fields other than `wall_time` are
/// bit-reproducible from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub p: usize,
    pub exact_risk: Option<f64>,
    pub bias_term: Option<f64>,
    pub variance_trace: Option<f64>,
    pub k_star: KStar,
    pub nu: f64,
    pub rate_prediction: Option<f64>,
    pub bias_bound: Option<f64>,
    pub variance_bound: Option<f64>,
    pub decomposition_bound: Option<f64>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn key(&self) -> (usize, usize) {
        (self.n, self.replicate)
    }

    /// Equality ignoring `wall_time`.
    pub fn same_result(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

/// Quantities shared by every replicate at one `n`.
struct Stage {
    problem: Problem,
    nu: f64,
    rate: Option<f64>,
    integrated: Option<IntegratedCovSummary>,
}

fn prepare(config: &ExperimentConfig, n: usize) -> Result<Stage> {
    let problem = config.problem_spec().build(n)?;
    let (nu, mode, integrated) = match &problem.design {
        TemporalCov::Homo(xi) => (degeneracy(xi, &problem.noise)?.nu, Some(RateMode::Homo), None),
        TemporalCov::Hetero(f) => {
            let nu0 = degeneracy(&f.reference, &problem.noise)?.nu;
            let ic = integrated_covariance(&problem.spectrum, f)?;
            (nu0, config.alpha.map(|alpha| RateMode::Hetero { alpha }), Some(ic))
        }
    };
    let rate = mode.and_then(|m| rate_prediction(m, &problem.spectrum, nu, n, config.constants.b).ok()).map(|r| r.total);
    Ok(Stage { problem, nu, rate, integrated })
}

fn run_one(config: &ExperimentConfig, stage: &Stage, replicate: usize) -> ResultRecord {
    let start = Instant::now();
    let pr = &stage.problem;
    let seed = Problem::replicate_seed(config.master_seed, replicate as u64);
    let mut rec = ResultRecord {
        config_hash: pr.config_hash.clone(),
        n: pr.n,
        replicate,
        seed,
        p: pr.p(),
        exact_risk: None,
        bias_term: None,
        variance_trace: None,
        k_star: pr.spectrum.k_star(config.constants.b, pr.n),
        nu: stage.nu,
        rate_prediction: stage.rate,
        bias_bound: None,
        variance_bound: None,
        decomposition_bound: None,
        wall_time: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let inst = pr.sample(seed)?;
        let svd = DesignSvd::new(&inst.x)?;
        svd.require_full_row_rank(inst.n())?;
        let fit = fit_with(&svd, &inst.x, &inst.y)?;
        let terms = terms_from_svd(&svd, &pr.spectrum, &pr.noise, &inst.beta_star)?;
        rec.exact_risk = Some(exact_excess_risk(&fit.beta(), &inst.beta_star, &pr.spectrum)?);
        rec.bias_term = Some(terms.bias_term);
        rec.variance_trace = Some(terms.variance_trace);
        rec.decomposition_bound = Some(decomposition_bound(&terms, config.constants.delta));
        let bound = match &stage.integrated {
            None => {
                let xi = match &pr.design {
                    TemporalCov::Homo(xi) => xi,
                    TemporalCov::Hetero(_) => unreachable!("integrated summary exists for hetero designs"),
                };
                let deg = degeneracy(xi, &pr.noise)?;
                let beta_eig = pr.spectrum.to_eigenbasis(&inst.beta_star);
                homo_upper_bound(&pr.spectrum, &beta_eig, deg, pr.n, config.constants)?
            }
            Some(ic) => {
                let delta = config.constants.delta.min(0.5 - f64::EPSILON);
                let c = Constants { delta, ..config.constants };
                hetero_upper_bound(&pr.spectrum, ic, inst.beta_star.norm(), stage.nu, pr.n, c)?
            }
        };
        rec.bias_bound = bound.bias_bound;
        rec.variance_bound = bound.variance_bound;
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

/// Complete records already in `path`; a torn trailing line is dropped.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResultRecord>(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => return Err(Error::Parse(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn write_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = std::io::BufWriter::new(File::create(&tmp)?);
        for r in records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Records per flush.
    pub batch: Option<usize>,
    /// Stop after this many new records (simulates an interrupted run).
    pub limit: Option<usize>,
}

/// Run every missing `(n, replicate)` key, appending to the JSONL file in key
/// order, then rewrite the file sorted by key. Returns all records.
pub fn run_sweep(config: &ExperimentConfig, records_path: &Path, opts: &SweepOptions) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let stages: Vec<Stage> = config.n_grid.iter().map(|&n| prepare(config, n)).collect::<Result<_>>()?;
    let hash = config.config_hash();
    if let Some(parent) = records_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut existing = read_records(records_path)?;
    if let Some(r) = existing.iter().find(|r| r.config_hash != hash) {
        return Err(Error::Config(format!(
            "{} holds records for config {} but this config hashes to {hash}",
            records_path.display(),
            r.config_hash
        )));
    }
    write_records(records_path, &existing)?;
    let done: BTreeSet<(usize, usize)> = existing.iter().map(ResultRecord::key).collect();
    let done = &done;
    let todo: Vec<(usize, usize)> = stages
        .iter()
        .enumerate()
        .flat_map(|(s, st)| (0..config.reps).map(move |r| (s, r)).filter(move |&(_, r)| !done.contains(&(st.problem.n, r))))
        .collect();
    let todo = match opts.limit {
        Some(l) => &todo[..l.min(todo.len())],
        None => &todo[..],
    };
    let pool = match opts.jobs {
        Some(j) => Some(rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build().map_err(|e| invalid(e.to_string()))?),
        None => None,
    };
    let batch = opts.batch.unwrap_or_else(|| 4 * opts.jobs.unwrap_or_else(rayon::current_num_threads).max(1)).max(1);
    let mut file = OpenOptions::new().append(true).open(records_path)?;
    for chunk in todo.chunks(batch) {
        let work = || chunk.par_iter().map(|&(s, r)| run_one(config, &stages[s], r)).collect::<Vec<_>>();
        let fresh = match &pool {
            Some(p) => p.install(work),
            None => work(),
        };
        let mut buf = Vec::new();
        for r in &fresh {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        file.write_all(&buf)?;
        file.flush()?;
        existing.extend(fresh);
    }
    existing.sort_by_key(ResultRecord::key);
    write_records(records_path, &existing)?;
    Ok(existing)
}

pub const RECORD_CSV_HEADER: [&str; 16] = [
    "config_hash",
    "n",
    "replicate",
    "seed",
    "p",
    "exact_risk",
    "bias_term",
    "variance_trace",
    "k_star",
    "nu",
    "rate_prediction",
    "bias_bound",
    "variance_bound",
    "decomposition_bound",
    "wall_time",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Shortest round-trip decimal.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_records_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    w.write_record(RECORD_CSV_HEADER).map_err(|e| Error::Io(e.into()))?;
    for r in records {
        w.write_record([
            r.config_hash.clone(),
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.p.to_string(),
            opt(r.exact_risk),
            opt(r.bias_term),
            opt(r.variance_trace),
            r.k_star.to_string(),
            fmt_f64(r.nu),
            opt(r.rate_prediction),
            opt(r.bias_bound),
            opt(r.variance_bound),
            opt(r.decomposition_bound),
            fmt_f64(r.wall_time),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub median_risk: f64,
    pub mean_risk: f64,
    pub se_risk: f64,
    pub median_bias_term: f64,
    pub median_variance_trace: f64,
    pub predicted_rate: Option<f64>,
    pub median_bias_bound: Option<f64>,
    pub median_variance_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<SummaryRow>,
    /// Log-log slope of median risk against `n`.
    pub risk_slope: Option<f64>,
    pub rate_slope: Option<f64>,
}

fn median_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| median(&v))
}

/// Group successful records by `n`.
pub fn summarize(records: &[ResultRecord]) -> Result<RateTable> {
    let mut groups: BTreeMap<usize, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.n).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (n, g) in groups {
        let risks: Vec<f64> = g.iter().filter_map(|r| r.exact_risk).collect();
        if risks.is_empty() {
            continue;
        }
        rows.push(SummaryRow {
            n,
            reps_ok: risks.len(),
            reps_failed: g.len() - risks.len(),
            median_risk: median(&risks),
            mean_risk: mean(&risks),
            se_risk: if risks.len() > 1 { std_error(&risks) } else { f64::NAN },
            median_bias_term: median_of(g.iter().map(|r| r.bias_term)).unwrap_or(f64::NAN),
            median_variance_trace: median_of(g.iter().map(|r| r.variance_trace)).unwrap_or(f64::NAN),
            predicted_rate: median_of(g.iter().map(|r| r.rate_prediction)),
            median_bias_bound: median_of(g.iter().map(|r| r.bias_bound)),
            median_variance_bound: median_of(g.iter().map(|r| r.variance_bound)),
        });
    }
    if rows.is_empty() {
        return Err(invalid("no successful records to summarize"));
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let risk_slope = (rows.len() >= 2).then(|| loglog_slope(&ns, &rows.iter().map(|r| r.median_risk).collect::<Vec<_>>())).transpose()?;
    let rate_slope = if rows.len() >= 2 && rows.iter().all(|r| r.predicted_rate.is_some()) {
        Some(loglog_slope(&ns, &rows.iter().map(|r| r.predicted_rate.expect("checked")).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(RateTable { rows, risk_slope, rate_slope })
}

pub const SUMMARY_CSV_HEADER: [&str; 9] = [
    "n",
    "median_risk",
    "mean_risk",
    "se_risk",
    "predicted_rate",
    "median_bias_bound",
    "median_variance_bound",
    "reps_ok",
    "reps_failed",
];

/// A predicted curve for the plot, e.g. one `alpha` variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub n: Vec<usize>,
    pub value: Vec<f64>,
}

/// Homo curve plus one hetero curve per `alpha`, from the rate predictors on
/// `spectrum` (built at each `n`).
pub fn rate_curves(spectrum: &SpectrumSpec, n_grid: &[usize], nu: f64, b: f64, alphas: &[f64]) -> Result<Vec<Curve>> {
    let built: Vec<(usize, SpatialSpectrum)> =
        n_grid.iter().map(|&n| spectrum.build(n).map(|s| (n, s))).collect::<Result<_>>()?;
    let mut modes = vec![("homo".to_string(), RateMode::Homo)];
    modes.extend(alphas.iter().map(|&a| (format!("hetero alpha={a}"), RateMode::Hetero { alpha: a })));
    modes
        .into_iter()
        .map(|(label, mode)| {
            let value = built
                .iter()
                .map(|(n, s)| rate_prediction(mode, s, nu, *n, b).map(|r| r.total))
                .collect::<Result<Vec<_>>>()?;
            Ok(Curve { label, n: n_grid.to_vec(), value })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotFormat {
    Csv,
    Svg,
}

pub fn summary_csv(table: &RateTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_CSV_HEADER).map_err(|e| Error::Io(e.into()))?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            fmt_f64(r.median_risk),
            fmt_f64(r.mean_risk),
            fmt_f64(r.se_risk),
            opt(r.predicted_rate),
            opt(r.median_bias_bound),
            opt(r.median_variance_bound),
            r.reps_ok.to_string(),
            r.reps_failed.to_string(),
        ])
        .map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d5a97"];

/// Label, points, whether the series is empirical.
type Series = (String, Vec<(f64, f64)>, bool);

/// Log-log SVG of the median risk and every predicted curve. Predicted
/// curves are rescaled to meet the empirical median at the smallest `n`,
/// since their constants are unspecified.
pub fn summary_svg(table: &RateTable, extra: &[Curve]) -> Result<String> {
    if table.rows.is_empty() {
        return Err(invalid("empty summary"));
    }
    let ns: Vec<usize> = table.rows.iter().map(|r| r.n).collect();
    let emp: Vec<f64> = table.rows.iter().map(|r| r.median_risk).collect();
    let mut series: Vec<Series> =
        vec![("median risk".into(), ns.iter().zip(&emp).map(|(&n, &v)| (n as f64, v)).collect(), true)];
    let anchor = emp[0];
    let mut predicted: Vec<Curve> = Vec::new();
    if table.rows.iter().all(|r| r.predicted_rate.is_some()) {
        predicted.push(Curve {
            label: "predicted".into(),
            n: ns.clone(),
            value: table.rows.iter().map(|r| r.predicted_rate.expect("checked")).collect(),
        });
    }
    predicted.extend(extra.iter().cloned());
    for c in predicted {
        if c.value.is_empty() || !(c.value[0] > 0.0) {
            continue;
        }
        let k = anchor / c.value[0];
        series.push((c.label, c.n.iter().zip(&c.value).map(|(&n, &v)| (n as f64, v * k)).collect(), false));
    }
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
    if pts.is_empty() {
        return Err(invalid("no positive values to plot"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (w, h, m) = (640.0, 420.0, 60.0);
    let sx = |x: f64| m + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    for &n in &ns {
        let x = sx(n as f64);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{n}</text>"#, h - m + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">n (log scale)</text>"#, w / 2.0, h - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="12" transform="rotate(-90 16 {:.2})" text-anchor="middle">risk (log scale)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (label, p, solid)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = p
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0)
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y)))
            .collect();
        let dash = if *solid { "" } else { r#" stroke-dasharray="6 4""# };
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, d.join(" "));
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" font-size="11" fill="{color}">{}</text>"#, w - m - 150.0, xml_escape(label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn emit_plot_data(table: &RateTable, extra: &[Curve], format: PlotFormat, path: &Path) -> Result<()> {
    let text = match format {
        PlotFormat::Csv => summary_csv(table)?,
        PlotFormat::Svg => summary_svg(table, extra)?,
    };
    fs::write(path, text)?;
    Ok(())
}
