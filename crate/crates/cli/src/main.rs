use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bolab_core::bounds::{
    hetero_upper_bound, homo_upper_bound, integrated_covariance, rate_prediction, Constants, RateMode,
};
use bolab_core::experiment::{
    emit_plot_data, rate_curves, read_records, run_sweep, summarize, write_records_csv, PlotFormat, SweepOptions,
};
use bolab_core::interpolator::{certify, min_norm_fit};
use bolab_core::io::{read_instance, read_matrix_csv, read_vector_csv, write_instance};
use bolab_core::risk::{mc_risk, replicate_risk, RiskReport};
use bolab_core::temporal::degeneracy;
use bolab_core::verify::{run_check, VerifyConfig, CHECK_NAMES};
use bolab_core::{ExperimentConfig, Problem, TemporalCov};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const OUT_ENV: &str = "BOLAB_OUT_DIR";

#[derive(Parser)]
#[command(name = "bolab", version, about = "Minimum-norm interpolation laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicates; overrides the config.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Jsonl,
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, k* and effective ranks of the configured spectrum at size n.
    Spectrum {
        #[arg(long)]
        n: usize,
        /// Rows of the rank table.
        #[arg(long, default_value_t = 50)]
        kmax: usize,
    },
    /// Draw one instance and write X, y, beta*, noise CSVs plus instance.json.
    Sample {
        #[arg(long)]
        n: usize,
    },
    /// Minimum-norm fit of an instance directory (or explicit CSVs) with a certificate.
    Fit {
        /// Directory written by `sample`.
        #[arg(long, conflicts_with_all = ["x", "y"])]
        instance: Option<PathBuf>,
        #[arg(long, requires = "y")]
        x: Option<PathBuf>,
        #[arg(long, requires = "x")]
        y: Option<PathBuf>,
        /// Random null directions in the minimality certificate.
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
    /// Exact excess risk and bias / variance terms, Monte Carlo when reps >= 2.
    Risk {
        #[arg(long)]
        n: usize,
    },
    /// Bound values, k* regime and rate prediction at size n.
    Bounds {
        #[arg(long)]
        n: usize,
    },
    /// Run checks from a verify config; exit code 0 iff none fails.
    Verify {
        /// A check name or `all`.
        #[arg(default_value = "all")]
        check: String,
    },
    /// Resumable sweep over the configured n_grid.
    Sweep,
    /// Per-n summary and plot data from a sweep's records.
    Report {
        /// Records file; defaults to the sweep output.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Extra hetero predicted curves, one per alpha.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_experiment(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = common.reps {
        cfg.reps = r;
    }
    Ok(cfg)
}

/// `--out`, then the environment variable, then the config.
fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output.dir.clone())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn install_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().context("configuring worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = &cli.common;
    install_pool(c.jobs)?;
    match &cli.command {
        Command::Spectrum { n, kmax } => {
            let cfg = load_experiment(c)?;
            let s = cfg.spectrum.build(*n)?;
            let b = cfg.constants.b;
            match c.format.unwrap_or(Format::Json) {
                Format::Csv => {
                    let mut t = String::from("k,lambda_k1,r_k,big_r_k\n");
                    for (k, l, r, rr) in s.rank_table(*kmax) {
                        t.push_str(&format!("{k},{l:?},{r:?},{rr:?}\n"));
                    }
                    emit(c.out.as_deref(), &t)?;
                }
                Format::Json => {
                    let table: Vec<_> = s
                        .rank_table(*kmax)
                        .into_iter()
                        .map(|(k, l, r, rr)| json!({"k": k, "lambda_k1": l, "r_k": r, "big_r_k": rr}))
                        .collect();
                    let v = json!({"spectrum": s.to_json(), "n": n, "b": b, "k_star": s.k_star(b, *n),
                        "trace": s.trace(), "operator_norm": s.operator_norm(), "rank_table": table});
                    emit(c.out.as_deref(), &pretty(&v)?)?;
                }
                _ => bail!("spectrum supports --format json or csv"),
            }
        }
        Command::Sample { n } => {
            let cfg = load_experiment(c)?;
            let problem = cfg.problem_spec().build(*n)?;
            let inst = problem.sample(cfg.master_seed)?;
            let dir = out_dir(c, &cfg);
            let meta = write_instance(&dir, &inst)?;
            eprintln!("wrote instance (n = {}, p = {}) to {}", meta.n, meta.p, dir.display());
        }
        Command::Fit { instance, x, y, samples } => {
            let (xm, yv) = match (instance, x, y) {
                (Some(dir), _, _) => {
                    let inst = read_instance(dir)?;
                    (inst.x, inst.y)
                }
                (None, Some(x), Some(y)) => (read_matrix_csv(x)?, read_vector_csv(y)?),
                _ => bail!("give --instance DIR or both --x and --y"),
            };
            let fit = min_norm_fit(&xm, &yv)?;
            let cert = certify(&fit, &xm, &yv, *samples, c.seed.unwrap_or(0))?;
            emit(c.out.as_deref(), &pretty(&json!({"fit": fit, "certificate": cert}))?)?;
        }
        Command::Risk { n } => {
            let cfg = load_experiment(c)?;
            let problem = cfg.problem_spec().build(*n)?;
            let report = if cfg.reps >= 2 {
                mc_risk(&problem, cfg.reps, cfg.master_seed)?
            } else {
                let seed = Problem::replicate_seed(cfg.master_seed, 0);
                let r = replicate_risk(&problem, 0, seed)?;
                RiskReport {
                    n: *n,
                    p: problem.p(),
                    config_hash: problem.config_hash.clone(),
                    excess_risk: r.exact_risk,
                    bias_term: r.bias_term,
                    variance_trace: r.variance_trace,
                    mc: None,
                    reps: None,
                    master_seed: Some(cfg.master_seed),
                }
            };
            emit(c.out.as_deref(), &pretty(&report)?)?;
        }
        Command::Bounds { n } => {
            let cfg = load_experiment(c)?;
            emit(c.out.as_deref(), &pretty(&bounds_report(&cfg, *n)?)?)?;
        }
        Command::Verify { check } => return verify(c, check),
        Command::Sweep => {
            let cfg = load_experiment(c)?;
            let dir = out_dir(c, &cfg);
            fs::create_dir_all(&dir)?;
            let records_path = dir.join(&cfg.output.records);
            let opts = SweepOptions { jobs: c.jobs, ..Default::default() };
            let records = run_sweep(&cfg, &records_path, &opts)?;
            write_records_csv(&dir.join(&cfg.output.csv), &records)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            eprintln!("{} records ({} failed) in {}", records.len(), failed, records_path.display());
        }
        Command::Report { records, alphas } => {
            let cfg = load_experiment(c).ok();
            let path = match (records, &cfg) {
                (Some(p), _) => p.clone(),
                (None, Some(cfg)) => out_dir(c, cfg).join(&cfg.output.records),
                (None, None) => bail!("give --records or --config"),
            };
            let recs = read_records(&path)?;
            let table = summarize(&recs)?;
            let format = c.format.unwrap_or(Format::Csv);
            let curves = match (&cfg, alphas.is_empty()) {
                (Some(cfg), false) => {
                    let nu = recs.first().map(|r| r.nu).unwrap_or(1.0);
                    let ns: Vec<usize> = table.rows.iter().map(|r| r.n).collect();
                    rate_curves(&cfg.spectrum, &ns, nu, cfg.constants.b, alphas)?
                }
                (None, false) => bail!("--alphas needs --config for the spectrum"),
                _ => Vec::new(),
            };
            let plot = match format {
                Format::Csv => PlotFormat::Csv,
                Format::Svg => PlotFormat::Svg,
                Format::Json => {
                    emit(c.out.as_deref(), &pretty(&json!({"summary": table, "curves": curves}))?)?;
                    return Ok(ExitCode::SUCCESS);
                }
                Format::Jsonl => bail!("report supports csv, svg or json"),
            };
            match &c.out {
                Some(p) => emit_plot_data(&table, &curves, plot, p)?,
                None => {
                    let text = match plot {
                        PlotFormat::Csv => bolab_core::experiment::summary_csv(&table)?,
                        PlotFormat::Svg => bolab_core::experiment::summary_svg(&table, &curves)?,
                    };
                    emit(None, &text)?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bounds_report(cfg: &ExperimentConfig, n: usize) -> Result<serde_json::Value> {
    let problem = cfg.problem_spec().build(n)?;
    let s = &problem.spectrum;
    let beta = problem.beta_star(Problem::replicate_seed(cfg.master_seed, 0))?;
    let k = cfg.constants;
    Ok(match &problem.design {
        TemporalCov::Homo(xi) => {
            let deg = degeneracy(xi, &problem.noise)?;
            let report = homo_upper_bound(s, &s.to_eigenbasis(&beta), deg, n, k)?;
            let rate = rate_prediction(RateMode::Homo, s, deg.nu, n, k.b).ok();
            json!({"mode": "homo", "n": n, "p": s.p(), "degeneracy": deg, "bounds": report, "rate": rate})
        }
        TemporalCov::Hetero(f) => {
            let nu0 = degeneracy(&f.reference, &problem.noise)?.nu;
            let ic = integrated_covariance(s, f)?;
            let hk = Constants { delta: k.delta.min(0.49), ..k };
            let report = hetero_upper_bound(s, &ic, beta.norm(), nu0, n, hk)?;
            let rate = cfg.alpha.and_then(|alpha| rate_prediction(RateMode::Hetero { alpha }, s, nu0, n, k.b).ok());
            json!({"mode": "hetero", "n": n, "p": s.p(), "nu0": nu0, "integrated": ic, "bounds": report, "rate": rate})
        }
    })
}

fn verify(c: &Common, check: &str) -> Result<ExitCode> {
    if check != "all" && !CHECK_NAMES.contains(&check) {
        bail!("unknown check {check:?}; expected one of {} or all", CHECK_NAMES.join(", "));
    }
    let path = c.config.as_ref().context("--config is required")?;
    let cfg = VerifyConfig::from_toml(&fs::read_to_string(path)?)?;
    let selected: Vec<_> = cfg.checks.into_iter().filter(|s| check == "all" || s.name() == check).collect();
    if selected.is_empty() {
        bail!("no {check} check in {}", path.display());
    }
    let seed = c.seed.unwrap_or(0);
    let mut out = String::new();
    let mut ok = true;
    for spec in selected {
        let spec = match c.reps {
            Some(r) => spec.with_reps(r),
            None => spec,
        };
        let report = run_check(&spec, seed)?;
        ok &= report.not_failed();
        eprintln!("{:<24} {:?} statistic={:.4e} threshold={:.4e}", report.check_name, report.verdict, report.statistic, report.threshold);
        out.push_str(&serde_json::to_string(&report)?);
        out.push('\n');
    }
    emit(c.out.as_deref(), &out)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
