use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nsmg::engine::run;
use nsmg::oracles::{generate, OracleKind, OracleSpec};
use nsmg::output::emit_results;
use nsmg::output::{self, check_clobber, write_csv, Row};
use nsmg::sf;
use nsmg::stats::{increment_pdf, kurtosis, predictability, variance, PhasePoint};
use nsmg::sweep::{load_config, run_sweep, SweepConfig};
use nsmg::wtmm;
use nsmg::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "nsmg",
    version,
    about = "Nonsynchronous Minority Game simulator and multifractal analysis"
)]
struct Cli {
    /// TOML config file (sweep keys plus `[game]`, `[stats]`, `[sf]`, `[wtmm]` sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the game, the oracle, or the sweep seed base.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Play one game and write series.csv.
    Simulate {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, conflicts_with = "alpha")]
        p_states: Option<usize>,
        /// Total steps including the transient.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        transient: Option<usize>,
    },
    /// Volatility, predictability, kurtosis and increment PDFs of a series.
    Stats {
        #[command(flatten)]
        input: Input,
        /// Size of the information alphabet; needed for the predictability.
        #[arg(long)]
        p_states: Option<usize>,
        /// Recorded in the phase row.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Structure functions, scaling exponents and regime classification.
    Sf {
        #[command(flatten)]
        input: Input,
    },
    /// WTMM partition functions and singularity spectrum.
    Wtmm {
        #[command(flatten)]
        input: Input,
        /// Use per-scale maxima instead of maxima lines.
        #[arg(long)]
        per_scale: bool,
        /// Search for the fit band instead of using the interior band.
        #[arg(long)]
        auto_band: bool,
        #[arg(long, requires = "fit_hi")]
        fit_lo: Option<f64>,
        #[arg(long, requires = "fit_lo")]
        fit_hi: Option<f64>,
    },
    /// Sweep alpha with realization ensembles and write all result files.
    Sweep {
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Write a reference series with known scaling.
    Oracle {
        #[command(subcommand)]
        kind: OracleCmd,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// Series CSV with columns t, mu, A, Y, active.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Subcommand, Debug)]
enum OracleCmd {
    WhiteNoise {
        #[arg(long, default_value_t = 1 << 17)]
        length: usize,
    },
    Fbm {
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 1 << 17)]
        length: usize,
    },
    Cascade {
        #[arg(long, default_value_t = 0.6)]
        weight: f64,
        #[arg(long, default_value_t = 17)]
        depth: u32,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig {
                field: "--threads".into(),
                reason: "must be >= 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Degenerate(e.to_string()))?;
    }
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => SweepConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Simulate {
            alpha,
            p_states,
            horizon,
            transient,
        } => {
            let mut game = config.game.clone();
            game = match (alpha, p_states) {
                (_, Some(p)) => game.with_p_states(p),
                (Some(a), None) => game.with_alpha(a),
                (None, None) => game.with_alpha(0.2),
            };
            if let Some(h) = horizon {
                game.horizon = h;
            }
            if let Some(t) = transient {
                game.transient = t;
            }
            if let Some(s) = cli.seed {
                game.seed = s;
            }
            game.validate()?;
            let series_path = out.join("series.csv");
            let lock = out.join("game.lock.toml");
            prepare(&out, &[series_path.clone(), lock.clone()], cli.force)?;
            let series = run(&game)?;
            write_csv(
                &series_path,
                &output::SERIES_HEADER,
                &output::series_rows(&series),
            )?;
            std::fs::write(
                &lock,
                toml::to_string_pretty(&game).map_err(|e| Error::Parse(e.to_string()))?,
            )?;
            println!(
                "wrote {} steps (P = {}, alpha = {}) to {}",
                series.len(),
                game.resolved_p()?,
                game.resolved_alpha()?,
                series_path.display()
            );
        }
        Command::Stats {
            input,
            p_states,
            alpha,
        } => {
            let data = output::read_series(&input.input)?;
            let h_pred = match (&data.mu, p_states) {
                (Some(mu), Some(p)) => predictability(&data.a, mu, p)?,
                (Some(mu), None) => {
                    let p = mu.iter().max().map_or(1, |m| m + 1);
                    log::warn!(
                        "--p-states not given; using P = {p} from the largest mu in the input"
                    );
                    predictability(&data.a, mu, p)?
                }
                (None, _) => f64::NAN,
            };
            let point = PhasePoint {
                alpha: alpha.unwrap_or(f64::NAN),
                sigma2: variance(&data.a)?,
                h_pred,
                kurtosis: kurtosis(&data.a)?,
            };
            let stats_path = out.join("stats.csv");
            let pdf_path = out.join(output::PDFS);
            prepare(&out, &[stats_path.clone(), pdf_path.clone()], cli.force)?;
            write_csv(
                &stats_path,
                &output::PHASE_HEADER,
                &[output::phase_row(&point, 0)],
            )?;
            let mut rows: Vec<Row> = Vec::new();
            for &tau in &config.stats.pdf_taus {
                rows.extend(output::histogram_rows(&increment_pdf(
                    &data.y,
                    tau,
                    config.stats.binning(),
                )?));
            }
            write_csv(&pdf_path, &output::HISTOGRAM_HEADER, &rows)?;
            println!(
                "sigma2 = {}  H = {}  excess kurtosis = {}",
                point.sigma2, point.h_pred, point.kurtosis
            );
        }
        Command::Sf { input } => {
            let data = output::read_series(&input.input)?;
            let c = &config.sf;
            let raw = sf::structure_function(&data.y, &c.q_values, &c.tau_values)?;
            let fitted = sf::fit_scaling(&raw, c.fit_range)?;
            let class = sf::classify(&fitted, c.linearity_tol)?;
            let flat = sf::stationarity_check(&data.a, &c.q_values, &c.tau_values, c.slope_tol)?;
            let sf_path = out.join(output::SF);
            let fit_path = out.join(output::SF_FIT);
            prepare(&out, &[sf_path.clone(), fit_path.clone()], cli.force)?;
            write_csv(&sf_path, &output::SF_HEADER, &output::sf_rows(&fitted))?;
            write_csv(
                &fit_path,
                &output::SF_FIT_HEADER,
                &output::sf_fit_rows(&fitted),
            )?;
            println!(
                "regime = {}  h(2) = {}  max |h(q) - h(2)| = {}  returns stationary = {}",
                class.regime, class.hurst, class.max_deviation, flat.pass
            );
        }
        Command::Wtmm {
            input,
            per_scale,
            auto_band,
            fit_lo,
            fit_hi,
        } => {
            let data = output::read_series(&input.input)?;
            let mut w = config.wtmm.clone();
            if per_scale {
                w.chained = false;
            }
            if auto_band {
                w.auto_band = true;
            }
            if let (Some(lo), Some(hi)) = (fit_lo, fit_hi) {
                w.fit_range = Some((lo, hi));
            }
            let res = wtmm::analyze(&data.y, &w)?;
            let paths = [
                out.join(output::WTMM_PARTITION),
                out.join(output::WTMM),
                out.join(output::EXTREMA),
            ];
            prepare(&out, &paths, cli.force)?;
            write_csv(
                &paths[0],
                &output::PARTITION_HEADER,
                &output::partition_rows(&res.partition),
            )?;
            write_csv(
                &paths[1],
                &output::SPECTRUM_HEADER,
                &output::spectrum_rows(&res.spectrum),
            )?;
            let e = res.spectrum.extrema;
            write_csv(
                &paths[2],
                &output::SINGLE_EXTREMA_HEADER,
                &[output::extrema_row(None, &e)],
            )?;
            let (lo, hi) = res.spectrum.fit_range;
            println!(
                "h_l = {}  h_0 = {}  h_r = {}  width = {}  D(h_0) = {}  fit band [{lo}, {hi}] ({:?}, {:?} normalization, {} dropped scales)",
                e.h_l,
                e.h_0,
                e.h_r,
                e.width(),
                e.d_top,
                res.band,
                w.normalization,
                res.partition.dropped.len()
            );
        }
        Command::Sweep { realizations } => {
            let mut config = config;
            if let Some(r) = realizations {
                config.realizations = r;
            }
            if let Some(s) = cli.seed {
                config.seed_base = s;
            }
            let dir = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
            config.output_dir = dir.clone();
            config.validate()?;
            check_clobber(&output::result_paths(&dir), cli.force)?;
            let outcome = run_sweep(&config)?;
            emit_results(&outcome, &dir, cli.force)?;
            for r in &outcome.records {
                let sigma2 = r.sigma2.map_or(f64::NAN, |e| e.mean);
                let width = r.width.map_or(f64::NAN, |e| e.mean);
                println!(
                    "alpha = {:<8.4} sigma2 = {:<12.4} width = {:<8.4} ({} ok, {} failed)",
                    r.alpha, sigma2, width, r.completed, r.failed
                );
            }
            println!("results in {}", dir.display());
        }
        Command::Oracle { kind } => {
            let seed = cli.seed.unwrap_or(0);
            let spec = match kind {
                OracleCmd::WhiteNoise { length } => OracleSpec {
                    kind: OracleKind::WhiteNoise,
                    length,
                    seed,
                },
                OracleCmd::Fbm { hurst, length } => OracleSpec {
                    kind: OracleKind::Fbm { hurst },
                    length,
                    seed,
                },
                OracleCmd::Cascade { weight, depth } => OracleSpec {
                    kind: OracleKind::Cascade { weight },
                    length: 1usize
                        .checked_shl(depth)
                        .ok_or_else(|| Error::InvalidConfig {
                            field: "depth".into(),
                            reason: "too large".into(),
                        })?,
                    seed,
                },
            };
            let series = generate(&spec)?;
            let path = out.join("series.csv");
            prepare(&out, std::slice::from_ref(&path), cli.force)?;
            write_csv(&path, &output::SERIES_HEADER, &output::oracle_rows(&series))?;
            if series.approximate {
                log::warn!("circulant embedding was not exact; the series is approximate");
            }
            println!("wrote {} points to {}", series.y.len(), path.display());
        }
    }
    Ok(())
}

fn prepare(dir: &Path, paths: &[PathBuf], force: bool) -> Result<()> {
    check_clobber(paths, force)?;
    std::fs::create_dir_all(dir)?;
    Ok(())
}
