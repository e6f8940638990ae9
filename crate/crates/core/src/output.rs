//! CSV writers and readers, sweep result files and the run manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::MarketSeries;
use crate::error::{Error, Result};
use crate::oracles::OracleSeries;
use crate::sf::SfResult;
use crate::stats::{IncrementHistogram, PhasePoint};
use crate::sweep::{Estimate, Realization, SweepOutcome, SweepRecord};
use crate::wtmm::{Extrema, PartitionFunctions, SingularitySpectrum, WtmmResult};

pub const PHASE_DIAGRAM: &str = "phase_diagram.csv";
pub const REALIZATIONS: &str = "realizations.csv";
pub const PDFS: &str = "pdfs.csv";
pub const SF: &str = "sf.csv";
pub const SF_FIT: &str = "sf_fit.csv";
pub const WTMM: &str = "wtmm.csv";
pub const WTMM_PARTITION: &str = "wtmm_partition.csv";
pub const EXTREMA: &str = "extrema.csv";
pub const LOCKFILE: &str = "config.lock.toml";
pub const MANIFEST: &str = "manifest.toml";

pub const EXTREMA_HEADER: [&str; 9] = [
    "alpha",
    "h_l",
    "h_l_err",
    "h_0",
    "h_0_err",
    "h_r",
    "h_r_err",
    "width",
    "width_err",
];

pub type Row = Vec<String>;

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn est(e: &Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [num(e.mean), num(e.se)],
        None => [String::new(), String::new()],
    }
}

/// Fails with [`Error::Clobber`] when any of `paths` exists and `force` is off.
pub fn check_clobber(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::Clobber(p.clone())),
        None => Ok(()),
    }
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header.iter().map(|s| s.as_ref()))
        .map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub const SERIES_HEADER: [&str; 5] = ["t", "mu", "A", "Y", "active"];

pub fn series_rows(series: &MarketSeries) -> Vec<Row> {
    (0..series.len())
        .map(|i| {
            vec![
                (series.t0 + i as u64).to_string(),
                series.mu[i].to_string(),
                series.a[i].to_string(),
                series.y[i].to_string(),
                series.active[i].to_string(),
            ]
        })
        .collect()
}

/// Oracle series in the game schema: `mu` and `active` are left empty.
pub fn oracle_rows(series: &OracleSeries) -> Vec<Row> {
    series
        .y
        .iter()
        .zip(&series.a)
        .enumerate()
        .map(|(t, (y, a))| {
            vec![
                t.to_string(),
                String::new(),
                num(*a),
                num(*y),
                String::new(),
            ]
        })
        .collect()
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    #[allow(dead_code)]
    t: u64,
    mu: Option<u32>,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "Y")]
    y: f64,
}

/// A series read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    /// Present only when every row has an information index.
    pub mu: Option<Vec<usize>>,
}

pub fn read_series(path: &Path) -> Result<SeriesData> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut a = Vec::new();
    let mut y = Vec::new();
    let mut mu = Some(Vec::new());
    for (line, row) in r.deserialize::<SeriesRow>().enumerate() {
        let row =
            row.map_err(|e| Error::Parse(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        a.push(row.a);
        y.push(row.y);
        mu = match (mu, row.mu) {
            (Some(mut v), Some(m)) => {
                v.push(m as usize);
                Some(v)
            }
            _ => None,
        };
    }
    if a.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} has no rows",
            path.display()
        )));
    }
    Ok(SeriesData { a, y, mu })
}

pub const PHASE_HEADER: [&str; 5] = ["alpha", "sigma2", "H", "kurtosis", "realization_id"];

pub fn phase_row(p: &PhasePoint, realization: usize) -> Row {
    vec![
        num(p.alpha),
        num(p.sigma2),
        num(p.h_pred),
        num(p.kurtosis),
        realization.to_string(),
    ]
}

pub const HISTOGRAM_HEADER: [&str; 4] = ["tau", "bin_center", "density", "count"];

pub fn histogram_rows(h: &IncrementHistogram) -> Vec<Row> {
    h.bin_centers()
        .iter()
        .zip(&h.density)
        .zip(&h.counts)
        .map(|((c, d), n)| vec![h.tau.to_string(), num(*c), num(*d), n.to_string()])
        .collect()
}

pub const SF_HEADER: [&str; 3] = ["q", "tau", "S"];

pub fn sf_rows(res: &SfResult) -> Vec<Row> {
    let mut rows = Vec::new();
    for (q, row) in res.q_values.iter().zip(&res.sf) {
        for (tau, s) in res.tau_values.iter().zip(row) {
            rows.push(vec![num(*q), tau.to_string(), num(*s)]);
        }
    }
    rows
}

pub const SF_FIT_HEADER: [&str; 4] = ["q", "zeta", "h", "r2"];

pub fn sf_fit_rows(res: &SfResult) -> Vec<Row> {
    let Some(fit) = &res.fit else {
        return Vec::new();
    };
    let h = fit.h(&res.q_values);
    (0..res.q_values.len())
        .map(|i| {
            vec![
                num(res.q_values[i]),
                num(fit.zeta[i]),
                num(h[i]),
                num(fit.r2[i]),
            ]
        })
        .collect()
}

pub const PARTITION_HEADER: [&str; 4] = ["q", "tau", "Z", "Zstar"];

pub fn partition_rows(pf: &PartitionFunctions) -> Vec<Row> {
    let mut rows = Vec::new();
    for (i, q) in pf.q_values.iter().enumerate() {
        for (j, tau) in pf.scales.iter().enumerate() {
            rows.push(vec![
                num(*q),
                num(*tau),
                num(pf.z[i][j]),
                num(pf.zstar[i][j]),
            ]);
        }
    }
    rows
}

pub const SPECTRUM_HEADER: [&str; 5] = ["q", "h", "D", "r2_h", "r2_D"];

pub fn spectrum_rows(s: &SingularitySpectrum) -> Vec<Row> {
    (0..s.q_values.len())
        .map(|i| {
            vec![
                num(s.q_values[i]),
                num(s.h[i]),
                num(s.d[i]),
                num(s.r2_h[i]),
                num(s.r2_d[i]),
            ]
        })
        .collect()
}

pub const SINGLE_EXTREMA_HEADER: [&str; 6] = ["alpha", "h_l", "h_0", "h_r", "width", "D_top"];

pub fn extrema_row(alpha: Option<f64>, e: &Extrema) -> Row {
    vec![
        opt(alpha),
        num(e.h_l),
        num(e.h_0),
        num(e.h_r),
        num(e.width()),
        num(e.d_top),
    ]
}

fn prefixed(prefix: &[&str], header: &[&str]) -> Vec<String> {
    prefix.iter().chain(header).map(|s| s.to_string()).collect()
}

fn with_prefix(prefix: &[String], rows: Vec<Row>) -> impl Iterator<Item = Row> + '_ {
    rows.into_iter()
        .map(move |r| prefix.iter().cloned().chain(r).collect())
}

const REALIZATION_HEADER: [&str; 21] = [
    "alpha_index",
    "alpha",
    "realization",
    "seed",
    "status",
    "error",
    "sigma2",
    "H",
    "kurtosis",
    "hurst",
    "sf_max_deviation",
    "regime",
    "stationarity_max_slope",
    "h_l",
    "h_0",
    "h_r",
    "width",
    "D_top",
    "fit_lo",
    "fit_hi",
    "dropped_scales",
];

fn realization_row(r: &Realization) -> Row {
    let mut row = vec![
        r.alpha_index.to_string(),
        num(r.alpha),
        r.realization.to_string(),
        r.seed.to_string(),
    ];
    match &r.outcome {
        Err(e) => {
            row.push("failed".into());
            row.push(e.clone());
            row.resize(REALIZATION_HEADER.len(), String::new());
        }
        Ok(a) => {
            row.push("ok".into());
            row.push(String::new());
            row.extend([
                num(a.phase.sigma2),
                num(a.phase.h_pred),
                num(a.phase.kurtosis),
            ]);
            match &a.sf {
                Some(s) => {
                    let c = &s.classification;
                    let stat = s
                        .stationarity
                        .as_ref()
                        .map(|st| st.slopes.iter().fold(0.0f64, |m, v| m.max(v.abs())));
                    row.extend([
                        num(c.hurst),
                        num(c.max_deviation),
                        c.regime.to_string(),
                        opt(stat),
                    ]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            match &a.wtmm {
                Some(w) => {
                    let e = w.spectrum.extrema;
                    let (lo, hi) = w.spectrum.fit_range;
                    let dropped: Vec<String> =
                        w.partition.dropped.iter().map(|s| num(*s)).collect();
                    row.extend([
                        num(e.h_l),
                        num(e.h_0),
                        num(e.h_r),
                        num(e.width()),
                        num(e.d_top),
                        num(lo),
                        num(hi),
                        dropped.join(";"),
                    ]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), 8)),
            }
        }
    }
    row
}

fn record_row(r: &SweepRecord) -> Row {
    let mut row = vec![
        num(r.alpha),
        num(r.alpha_eff),
        r.p_states.to_string(),
        r.completed.to_string(),
        r.failed.to_string(),
    ];
    for e in [
        &r.sigma2,
        &r.h_pred,
        &r.kurtosis,
        &r.hurst,
        &r.sf_max_deviation,
    ] {
        row.extend(est(e));
    }
    row
}

const PHASE_DIAGRAM_HEADER: [&str; 15] = [
    "alpha",
    "alpha_eff",
    "p_states",
    "completed",
    "failed",
    "sigma2",
    "sigma2_err",
    "H",
    "H_err",
    "kurtosis",
    "kurtosis_err",
    "hurst",
    "hurst_err",
    "sf_max_deviation",
    "sf_max_deviation_err",
];

#[derive(Debug, Serialize)]
struct ManifestInfo {
    package: &'static str,
    version: &'static str,
    cwt_normalization: crate::wtmm::Normalization,
    files: Vec<String>,
    realizations_total: usize,
    realizations_failed: usize,
    caveats: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    alpha_index: usize,
    alpha: f64,
    realization: usize,
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wtmm_fit_range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wtmm_band: Option<crate::wtmm::BandSource>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    dropped_scales: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    manifest: ManifestInfo,
    realization: Vec<ManifestEntry>,
    config: &'a crate::sweep::SweepConfig,
}

/// Every file [`emit_results`] writes into `dir`.
pub fn result_paths(dir: &Path) -> Vec<PathBuf> {
    [
        PHASE_DIAGRAM,
        REALIZATIONS,
        PDFS,
        SF,
        SF_FIT,
        WTMM,
        WTMM_PARTITION,
        EXTREMA,
        LOCKFILE,
        MANIFEST,
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect()
}

/// Write aggregates, per-realization rows, the lockfile and the manifest.
/// Refuses to overwrite earlier results unless `force` is set.
pub fn emit_results(outcome: &SweepOutcome, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    if outcome.records.is_empty() {
        return Err(Error::InsufficientData("no sweep records to write".into()));
    }
    let paths = result_paths(dir);
    check_clobber(&paths, force)?;
    std::fs::create_dir_all(dir)?;

    let rows: Vec<Row> = outcome.records.iter().map(record_row).collect();
    write_csv(&dir.join(PHASE_DIAGRAM), &PHASE_DIAGRAM_HEADER, &rows)?;

    let rows: Vec<Row> = outcome.realizations.iter().map(realization_row).collect();
    write_csv(&dir.join(REALIZATIONS), &REALIZATION_HEADER, &rows)?;

    let rows: Vec<Row> = outcome
        .records
        .iter()
        .map(|r| {
            let mut row = vec![num(r.alpha)];
            for e in [&r.h_l, &r.h_0, &r.h_r, &r.width] {
                row.extend(est(e));
            }
            row
        })
        .collect();
    write_csv(&dir.join(EXTREMA), &EXTREMA_HEADER, &rows)?;

    let key = |r: &Realization| vec![num(r.alpha), r.realization.to_string()];
    let mut pdfs = Vec::new();
    let mut sf = Vec::new();
    let mut sf_fit = Vec::new();
    let mut spectrum = Vec::new();
    let mut partition = Vec::new();
    for r in &outcome.realizations {
        let Ok(a) = &r.outcome else { continue };
        let k = key(r);
        for h in &a.pdfs {
            pdfs.extend(with_prefix(&k, histogram_rows(h)));
        }
        if let Some(s) = &a.sf {
            sf.extend(with_prefix(&k, sf_rows(&s.result)));
            sf_fit.extend(with_prefix(&k, sf_fit_rows(&s.result)));
        }
        if let Some(w) = &a.wtmm {
            spectrum.extend(with_prefix(&k, spectrum_rows(&w.spectrum)));
            partition.extend(with_prefix(&k, partition_rows(&w.partition)));
        }
    }
    let pre = ["alpha", "realization"];
    write_csv(&dir.join(PDFS), &prefixed(&pre, &HISTOGRAM_HEADER), &pdfs)?;
    write_csv(&dir.join(SF), &prefixed(&pre, &SF_HEADER), &sf)?;
    write_csv(&dir.join(SF_FIT), &prefixed(&pre, &SF_FIT_HEADER), &sf_fit)?;
    write_csv(
        &dir.join(WTMM),
        &prefixed(&pre, &SPECTRUM_HEADER),
        &spectrum,
    )?;
    write_csv(
        &dir.join(WTMM_PARTITION),
        &prefixed(&pre, &PARTITION_HEADER),
        &partition,
    )?;

    std::fs::write(dir.join(LOCKFILE), outcome.config.to_toml())?;
    std::fs::write(dir.join(MANIFEST), manifest_text(outcome))?;
    Ok(paths)
}

fn manifest_text(outcome: &SweepOutcome) -> String {
    let failed = outcome
        .realizations
        .iter()
        .filter(|r| r.outcome.is_err())
        .count();
    let mut caveats = Vec::new();
    if outcome.config.realizations == 1 {
        caveats.push("one realization per alpha: standard errors are reported as 0".to_string());
    }
    if failed > 0 {
        caveats.push(format!(
            "{failed} failed realizations excluded from the aggregates"
        ));
    }
    let realization = outcome
        .realizations
        .iter()
        .map(|r| {
            let w = r.outcome.as_ref().ok().and_then(|a| a.wtmm.as_ref());
            ManifestEntry {
                alpha_index: r.alpha_index,
                alpha: r.alpha,
                realization: r.realization,
                seed: r.seed,
                status: if r.outcome.is_ok() { "ok" } else { "failed" },
                error: r.outcome.as_ref().err().cloned(),
                wtmm_fit_range: w.map(|w: &WtmmResult| w.spectrum.fit_range),
                wtmm_band: w.map(|w| w.band),
                dropped_scales: w.map(|w| w.partition.dropped.clone()).unwrap_or_default(),
            }
        })
        .collect();
    let manifest = Manifest {
        manifest: ManifestInfo {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            cwt_normalization: outcome.config.wtmm.normalization,
            files: result_paths(Path::new(""))
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            realizations_total: outcome.realizations.len(),
            realizations_failed: failed,
            caveats,
        },
        realization,
        config: &outcome.config,
    };
    toml::to_string_pretty(&manifest).expect("manifest is always representable as TOML")
}
