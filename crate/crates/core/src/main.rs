use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use hawkes_decomp::covariance::{covariance_grid, horizon_from_histogram};
use hawkes_decomp::error::{Error, Result};
use hawkes_decomp::events::SplitTime;
use hawkes_decomp::io::{self, ConfigFile, Threshold, DEFAULT_MIN_EVENTS};
use hawkes_decomp::likelihood::log_likelihood;
use hawkes_decomp::report::{build_bundle, emit_report, DEFAULT_QUANTILES};
use hawkes_decomp::search::{decompose, decompose_with_estimate, DecompositionResult};
use hawkes_decomp::simulate::{simulate_with, HawkesModel, SimulationOptions};
use hawkes_decomp::spectral::invert_to_kernel;

#[derive(Parser)]
#[command(
    name = "hawkes-decomp",
    version,
    about = "Hawkes kernel estimation and automatic decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate events from a model by thinning.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_events: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Covariance grid and nonparametric kernel estimate.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        opts: PipelineArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Automatic kernel decomposition of one event sequence.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        opts: PipelineArgs,
        /// Start from a stored `t,phi_hat` estimate instead of the events.
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the full report into this directory.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Decompose every `.csv` sequence in a directory.
    DecomposeBatch {
        #[arg(long)]
        in_dir: PathBuf,
        #[command(flatten)]
        opts: PipelineArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Log-likelihood of a model on an event sequence.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        unit: Option<f64>,
    },
    /// Report files for a stored decomposition result.
    Report {
        #[arg(long)]
        result: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        unit: Option<f64>,
        #[arg(long)]
        quantiles: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Events from a `timestamp,value` tick series by thresholding.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Relative change (fraction) that triggers an event.
        #[arg(long, conflicts_with = "absolute", required_unless_present = "absolute")]
        threshold: Option<f64>,
        /// Absolute level: every row at or above it is an event.
        #[arg(long)]
        absolute: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MIN_EVENTS)]
        min_events: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Shifted,
    Absolute,
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` file mirroring these flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    percentile: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum)]
    split_time: Option<SplitArg>,
    #[arg(long)]
    gd_restarts: Option<usize>,
    #[arg(long)]
    quadrature_fallback: bool,
    #[arg(long)]
    additive_refit: bool,
    /// Divide timestamps by this unit on input.
    #[arg(long)]
    unit: Option<f64>,
    #[arg(long)]
    quantiles: Option<usize>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<ConfigFile> {
        let file = match &self.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        let cli = ConfigFile {
            resolution: self.resolution,
            percentile: self.percentile,
            tau_max: self.tau_max,
            eta: self.eta,
            holdout: self.holdout,
            split_time: self.split_time.map(|s| match s {
                SplitArg::Shifted => SplitTime::Shifted,
                SplitArg::Absolute => SplitTime::Absolute,
            }),
            gd_restarts: self.gd_restarts,
            quadrature_fallback: self.quadrature_fallback.then_some(true),
            additive_refit: self.additive_refit.then_some(true),
            unit: self.unit,
            seed: None,
            quantiles: self.quantiles,
        };
        Ok(file.overridden_by(&cli))
    }
}

fn read_model(path: &Path) -> Result<HawkesModel> {
    let m: HawkesModel = io::read_json(path)?;
    HawkesModel::new(m.mu, m.kernel)
}

fn run_decompose(input: &Path, cfg: &ConfigFile, estimate: Option<&Path>) -> Result<DecompositionResult> {
    let events = io::read_events_in_unit(input, cfg.unit)?;
    let config = cfg.decompose_config();
    match estimate {
        Some(p) => decompose_with_estimate(&events, io::read_estimate(p)?, &config),
        None => decompose(&events, &config),
    }
}

fn fmt_llh(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

/// One summary row; the `ensemble` columns pick the better of the
/// nonparametric estimate and the exponential baseline by log-likelihood.
fn summary_row(name: &str, n: usize, r: &DecompositionResult) -> String {
    let llh_k = r.llh_k_chosen.as_ref().map(|l| l.value);
    let llh_gd = r.gd.as_ref().map(|g| g.llh.value);
    let llh_est = r.llh_estimate.as_ref().map(|l| l.value);
    let (ensemble, ensemble_llh) = match (llh_est, llh_gd) {
        (Some(e), Some(g)) if e >= g => ("estimate", Some(e)),
        (_, Some(g)) if g.is_finite() => ("GD", Some(g)),
        (Some(e), _) => ("estimate", Some(e)),
        _ => ("", None),
    };
    let chosen = serde_json::to_value(r.chosen)
        .ok()
        .and_then(|v| v.as_str().map(String::from));
    format!(
        "{name},{n},{},{},{},{},{},{},{ensemble},{},\n",
        chosen.unwrap_or_default(),
        r.k1.fit.label(),
        r.k2.fit.label(),
        fmt_llh(llh_k),
        fmt_llh(llh_gd),
        fmt_llh(llh_est),
        fmt_llh(ensemble_llh),
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            horizon,
            seed,
            max_events,
            out,
        } => {
            let model = read_model(&model)?;
            let mut opts = SimulationOptions::default();
            if let Some(n) = max_events {
                opts.max_events = n;
            }
            let events = simulate_with(&model, horizon, seed, &opts)?;
            io::write_events(&out, &events)?;
            println!("{}", serde_json::json!({ "n": events.len(), "horizon": horizon }));
        }
        Command::Estimate { input, opts, out_dir } => {
            let cfg = opts.resolve()?;
            let events = io::read_events_in_unit(&input, cfg.unit)?;
            let config = cfg.decompose_config();
            config.validate()?;
            let tau_max = match config.tau_max {
                Some(t) => t.min(events.horizon()),
                None => horizon_from_histogram(&events, config.percentile)?,
            };
            let grid = covariance_grid(&events, tau_max / config.resolution as f64, tau_max)?;
            let est = invert_to_kernel(&grid)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            io::write_text(&out_dir.join("cov.csv"), &io::format_covariance(&grid))?;
            io::write_text(&out_dir.join("phi_est.csv"), &io::format_estimate(&est))?;
            println!(
                "{}",
                serde_json::json!({
                    "lambda_hat": grid.lambda_hat,
                    "delta": grid.delta,
                    "tau_max": grid.tau_max,
                    "integral": est.clamped_integral(),
                })
            );
        }
        Command::Decompose {
            input,
            opts,
            estimate,
            out,
            report_dir,
        } => {
            let cfg = opts.resolve()?;
            let result = run_decompose(&input, &cfg, estimate.as_deref())?;
            io::write_text(&out, &io::to_json(&result))?;
            if let Some(dir) = report_dir {
                let events = io::read_events_in_unit(&input, cfg.unit)?;
                let bundle = build_bundle(&result, &events, cfg.quantiles.unwrap_or(DEFAULT_QUANTILES))?;
                emit_report(&bundle, &dir)?;
            }
        }
        Command::DecomposeBatch { in_dir, opts, out_dir } => {
            let cfg = opts.resolve()?;
            let mut inputs: Vec<PathBuf> = fs::read_dir(&in_dir)
                .map_err(|e| Error::Io {
                    path: in_dir.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            inputs.sort();
            fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            let rows: Vec<String> = inputs
                .par_iter()
                .map(|path| {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let outcome = io::read_events_in_unit(path, cfg.unit).and_then(|ev| {
                        let r = decompose(&ev, &cfg.decompose_config())?;
                        io::write_text(&out_dir.join(format!("{stem}.json")), &io::to_json(&r))?;
                        Ok((ev.len(), r))
                    });
                    match outcome {
                        Ok((n, r)) => summary_row(&stem, n, &r),
                        Err(e) => format!("{stem},,,,,,,,,,{}\n", e.to_string().replace([',', '\n'], ";")),
                    }
                })
                .collect();
            let mut summary =
                String::from("file,n,chosen,k1,k2,llh_k,llh_gd,llh_estimate,ensemble,ensemble_llh,error\n");
            for r in rows {
                let _ = write!(summary, "{r}");
            }
            io::write_text(&out_dir.join("summary.csv"), &summary)?;
        }
        Command::Score { model, input, unit } => {
            let model = read_model(&model)?;
            let events = io::read_events_in_unit(&input, unit)?;
            let l = log_likelihood(&model, &events);
            let llh = if l.value.is_finite() {
                serde_json::json!(l.value)
            } else {
                serde_json::Value::Null
            };
            println!("{}", serde_json::json!({ "llh": llh, "n": l.n_events }));
        }
        Command::Report {
            result,
            input,
            unit,
            quantiles,
            out_dir,
        } => {
            let result: DecompositionResult = io::read_json(&result)?;
            let events = io::read_events_in_unit(&input, unit)?;
            let bundle = build_bundle(&result, &events, quantiles.unwrap_or(DEFAULT_QUANTILES))?;
            emit_report(&bundle, &out_dir)?;
        }
        Command::Extract {
            input,
            threshold,
            absolute,
            min_events,
            out,
        } => {
            let series = io::read_ticks(&input)?;
            let rule = match (threshold, absolute) {
                (Some(x), None) => Threshold::Relative(x),
                (None, Some(x)) => Threshold::Absolute(x),
                _ => {
                    return Err(Error::InvalidParameter(
                        "give exactly one of --threshold and --absolute".into(),
                    ))
                }
            };
            let events = io::extract_events_by_threshold(&series, rule, min_events)?;
            io::write_events(&out, &events)?;
            println!(
                "{}",
                serde_json::json!({ "n": events.len(), "horizon": events.horizon() })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
