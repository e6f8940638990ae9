//! Parameter sweeps over alpha with realization ensembles.

mod config;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    default_alpha_grid, load_config, parse_config, Analyses, Profile, SfConfig, StatsConfig,
    SweepConfig,
};

use crate::engine::{run, MarketSeries};
use crate::error::{Error, Result};
use crate::sf::{self, Classification, SfResult, StationarityReport};
use crate::stats::{increment_pdf, IncrementHistogram, PhasePoint};
use crate::wtmm::{self, WtmmResult};

/// A sweep fails when more than this fraction of the realizations at any alpha fail.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Game seed of realization `r` at grid index `alpha_index`. Kept below
/// 2^63 so that it fits a TOML integer.
pub fn realization_seed(seed_base: u64, alpha_index: usize, r: usize) -> u64 {
    (seed_base ^ splitmix64(((alpha_index as u64) << 32) | r as u64)) & (i64::MAX as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfAnalysis {
    pub result: SfResult,
    pub classification: Classification,
    pub stationarity: Option<StationarityReport>,
}

/// Everything computed from one game.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub p_states: usize,
    pub alpha_eff: f64,
    pub phase: PhasePoint,
    pub pdfs: Vec<IncrementHistogram>,
    pub sf: Option<SfAnalysis>,
    pub wtmm: Option<WtmmResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub alpha_index: usize,
    pub alpha: f64,
    pub realization: usize,
    pub seed: u64,
    pub outcome: std::result::Result<Analysis, String>,
}

/// Mean and standard error over the successful realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; 0 when `n = 1`.
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(v: &[f64]) -> Option<Estimate> {
        if v.is_empty() {
            return None;
        }
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Some(Estimate { mean, se, n })
    }
}

/// Aggregate over the realizations at one alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub alpha_eff: f64,
    pub p_states: usize,
    pub completed: usize,
    pub failed: usize,
    pub sigma2: Option<Estimate>,
    pub h_pred: Option<Estimate>,
    pub kurtosis: Option<Estimate>,
    /// Structure-function `h(2)`.
    pub hurst: Option<Estimate>,
    pub sf_max_deviation: Option<Estimate>,
    pub h_l: Option<Estimate>,
    pub h_0: Option<Estimate>,
    pub h_r: Option<Estimate>,
    pub width: Option<Estimate>,
    pub d_top: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub config: SweepConfig,
    /// Ordered by alpha index, then realization.
    pub realizations: Vec<Realization>,
    pub records: Vec<SweepRecord>,
}

/// Apply the enabled analyses to one game.
pub fn analyze_series(
    series: &MarketSeries,
    alpha: f64,
    p_states: usize,
    config: &SweepConfig,
) -> Result<Analysis> {
    let a = series.returns();
    let y = series.price();
    let phase = PhasePoint::from_series(alpha, p_states, series)?;
    let alpha_eff = p_states as f64 / config.game.total_speculators() as f64;
    let pdfs = if config.analyses.stats {
        config
            .stats
            .pdf_taus
            .iter()
            .map(|&tau| increment_pdf(&y, tau, config.stats.binning()))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let sf = if config.analyses.sf {
        let c = &config.sf;
        let raw = sf::structure_function(&y, &c.q_values, &c.tau_values)?;
        let result = sf::fit_scaling(&raw, c.fit_range)?;
        let classification = sf::classify(&result, c.linearity_tol)?;
        let stationarity = if c.stationarity {
            Some(sf::stationarity_check(
                &a,
                &c.q_values,
                &c.tau_values,
                c.slope_tol,
            )?)
        } else {
            None
        };
        Some(SfAnalysis {
            result,
            classification,
            stationarity,
        })
    } else {
        None
    };
    let wtmm = if config.analyses.wtmm {
        Some(wtmm::analyze(&y, &config.wtmm)?)
    } else {
        None
    };
    Ok(Analysis {
        p_states,
        alpha_eff,
        phase,
        pdfs,
        sf,
        wtmm,
    })
}

fn run_one(config: &SweepConfig, alpha_index: usize, r: usize) -> Realization {
    let alpha = config.alpha_grid[alpha_index];
    let seed = realization_seed(config.seed_base, alpha_index, r);
    let mut game = config.game_at(alpha);
    game.seed = seed;
    let outcome = game
        .resolved_p()
        .and_then(|p| {
            let series = run(&game)?;
            analyze_series(&series, alpha, p, config)
        })
        .map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::warn!("alpha={alpha} realization={r} seed={seed} failed: {e}");
    }
    Realization {
        alpha_index,
        alpha,
        realization: r,
        seed,
        outcome,
    }
}

fn aggregate(
    config: &SweepConfig,
    alpha_index: usize,
    group: &[Realization],
) -> Result<SweepRecord> {
    let alpha = config.alpha_grid[alpha_index];
    let ok: Vec<&Analysis> = group
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let failed = group.len() - ok.len();
    if failed as f64 > MAX_FAILED_FRACTION * group.len() as f64 {
        return Err(Error::SweepFailed {
            alpha,
            failed,
            total: group.len(),
        });
    }
    let p_states = config.game_at(alpha).resolved_p()?;
    let est = |f: &dyn Fn(&Analysis) -> Option<f64>| {
        let v: Vec<f64> = ok.iter().filter_map(|a| f(a)).collect();
        Estimate::from_values(&v)
    };
    let ext = |a: &Analysis| a.wtmm.as_ref().map(|w| w.spectrum.extrema);
    Ok(SweepRecord {
        alpha,
        alpha_eff: p_states as f64 / config.game.total_speculators() as f64,
        p_states,
        completed: ok.len(),
        failed,
        sigma2: est(&|a| Some(a.phase.sigma2)),
        h_pred: est(&|a| Some(a.phase.h_pred)),
        kurtosis: est(&|a| Some(a.phase.kurtosis)),
        hurst: est(&|a| a.sf.as_ref().map(|s| s.classification.hurst)),
        sf_max_deviation: est(&|a| a.sf.as_ref().map(|s| s.classification.max_deviation)),
        h_l: est(&|a| ext(a).map(|e| e.h_l)),
        h_0: est(&|a| ext(a).map(|e| e.h_0)),
        h_r: est(&|a| ext(a).map(|e| e.h_r)),
        width: est(&|a| ext(a).map(|e| e.width())),
        d_top: est(&|a| ext(a).map(|e| e.d_top)),
    })
}

/// Run every (alpha, realization) pair and aggregate. `parallel = false`
/// runs the same tasks in order on the calling thread; the result is identical.
pub fn run_sweep_with(config: &SweepConfig, parallel: bool) -> Result<SweepOutcome> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.alpha_grid.len())
        .flat_map(|i| (0..config.realizations).map(move |r| (i, r)))
        .collect();
    let realizations: Vec<Realization> = if parallel {
        tasks
            .par_iter()
            .map(|&(i, r)| run_one(config, i, r))
            .collect()
    } else {
        tasks.iter().map(|&(i, r)| run_one(config, i, r)).collect()
    };
    let records = realizations
        .chunks(config.realizations)
        .enumerate()
        .map(|(i, group)| aggregate(config, i, group))
        .collect::<Result<Vec<_>>>()?;
    if config.realizations == 1 {
        log::warn!("one realization per alpha: standard errors are reported as 0");
    }
    Ok(SweepOutcome {
        config: config.clone(),
        realizations,
        records,
    })
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    run_sweep_with(config, true)
}
