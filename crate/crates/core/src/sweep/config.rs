use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::GameConfig;
use crate::error::{Error, Result};
use crate::fit::log_space;
use crate::wtmm::WtmmConfig;

/// Named set of defaults that a config file starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 12 alpha values, 8 realizations, 6e4 recorded steps each.
    #[default]
    Desk,
    /// 12 alpha values, 20 realizations, 1e5 recorded steps each.
    Paper,
}

/// Which analyses run on every realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    pub stats: bool,
    pub sf: bool,
    pub wtmm: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Analyses {
            stats: true,
            sf: true,
            wtmm: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    /// Lags of the increment PDFs.
    pub pdf_taus: Vec<usize>,
    /// Fixed bin count; Freedman-Diaconis when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            pdf_taus: vec![1, 10, 100],
            bins: None,
        }
    }
}

impl StatsConfig {
    pub fn binning(&self) -> crate::stats::Binning {
        match self.bins {
            Some(bins) => crate::stats::Binning::Count { bins },
            None => crate::stats::Binning::FreedmanDiaconis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfConfig {
    pub q_values: Vec<f64>,
    pub tau_values: Vec<usize>,
    pub fit_range: (usize, usize),
    pub linearity_tol: f64,
    /// Also check that the structure functions of `A` are flat.
    pub stationarity: bool,
    pub slope_tol: f64,
}

impl Default for SfConfig {
    fn default() -> Self {
        SfConfig {
            q_values: crate::sf::default_q_values(),
            tau_values: crate::sf::default_tau_values(),
            fit_range: crate::sf::DEFAULT_SCALING_RANGE,
            linearity_tol: crate::sf::DEFAULT_LINEARITY_TOL,
            stationarity: true,
            slope_tol: crate::sf::DEFAULT_SLOPE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub profile: Profile,
    pub alpha_grid: Vec<f64>,
    /// Realizations per alpha.
    pub realizations: usize,
    pub seed_base: u64,
    pub output_dir: PathBuf,
    /// Base game; `alpha` is replaced at every grid point.
    pub game: GameConfig,
    pub analyses: Analyses,
    pub stats: StatsConfig,
    pub sf: SfConfig,
    pub wtmm: WtmmConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::preset(Profile::Desk)
    }
}

/// 12 log-spaced values over `[0.008, 0.84]`.
pub fn default_alpha_grid() -> Vec<f64> {
    log_space(0.008, 0.84, 12)
}

impl SweepConfig {
    pub fn preset(profile: Profile) -> Self {
        let (realizations, recorded) = match profile {
            Profile::Desk => (8, 60_000),
            Profile::Paper => (20, 100_000),
        };
        let transient = 10_000;
        SweepConfig {
            profile,
            alpha_grid: default_alpha_grid(),
            realizations,
            seed_base: 1,
            output_dir: PathBuf::from("results"),
            game: GameConfig {
                alpha: None,
                p_states: None,
                horizon: recorded + transient,
                transient,
                ..GameConfig::default()
            },
            analyses: Analyses::default(),
            stats: StatsConfig::default(),
            sf: SfConfig::default(),
            wtmm: WtmmConfig::default(),
        }
    }

    /// The base game at grid point `alpha`.
    pub fn game_at(&self, alpha: f64) -> GameConfig {
        self.game.clone().with_alpha(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::config("alpha_grid", "must not be empty"));
        }
        if let Some(a) = self
            .alpha_grid
            .iter()
            .find(|a| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::config(
                "alpha_grid",
                format!("entries must be finite and > 0, got {a}"),
            ));
        }
        if self.seed_base > i64::MAX as u64 {
            return Err(Error::config("seed_base", "must be < 2^63"));
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be >= 1"));
        }
        if self.game.p_states.is_some() || self.game.alpha.is_some() {
            return Err(Error::config(
                "game.alpha",
                "cannot be set in a sweep; use `alpha_grid`",
            ));
        }
        for &alpha in &self.alpha_grid {
            self.game_at(alpha).validate().map_err(|e| match e {
                Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                    field: format!("game.{field}"),
                    reason,
                },
                other => other,
            })?;
        }
        if self.stats.pdf_taus.is_empty() || self.stats.pdf_taus.contains(&0) {
            return Err(Error::config(
                "stats.pdf_taus",
                "must be non-empty lags >= 1",
            ));
        }
        if self.stats.bins == Some(0) {
            return Err(Error::config("stats.bins", "must be >= 1"));
        }
        let sf = &self.sf;
        if sf.q_values.is_empty() || sf.q_values.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            return Err(Error::config("sf.q_values", "must be non-empty and > 0"));
        }
        if sf.tau_values.is_empty() || sf.tau_values.contains(&0) {
            return Err(Error::config(
                "sf.tau_values",
                "must be non-empty lags >= 1",
            ));
        }
        if sf.fit_range.0 == 0 || sf.fit_range.0 >= sf.fit_range.1 {
            return Err(Error::config("sf.fit_range", "must satisfy 1 <= lo < hi"));
        }
        if !(sf.linearity_tol >= 0.0 && sf.slope_tol >= 0.0) {
            return Err(Error::config("sf.linearity_tol", "tolerances must be >= 0"));
        }
        let w = &self.wtmm;
        if w.order == 0 {
            return Err(Error::config("wtmm.order", "must be >= 1"));
        }
        if w.n_scales < 4 {
            return Err(Error::config("wtmm.n_scales", "must be >= 4"));
        }
        if !(w.min_scale.is_finite() && w.min_scale > 0.0) {
            return Err(Error::config("wtmm.min_scale", "must be > 0"));
        }
        if w.q_values.is_empty() || w.q_values.iter().any(|q| !q.is_finite()) {
            return Err(Error::config(
                "wtmm.q_values",
                "must be non-empty and finite",
            ));
        }
        if let Some((lo, hi)) = w.fit_range {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::config("wtmm.fit_range", "must satisfy 0 < lo < hi"));
            }
        }
        Ok(())
    }

    /// Every effective parameter, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("sweep config is always representable as TOML")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parse a config file body. Missing keys take the defaults of the selected
/// `profile`; unknown keys are rejected.
///
/// A manifest written by a previous sweep is also accepted: its `[config]`
/// table is used.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut user: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    if user.contains_key("manifest") {
        match user.remove("config") {
            Some(toml::Value::Table(t)) => user = t,
            _ => return Err(Error::Parse("manifest has no [config] table".into())),
        }
    }
    let profile = match user.get("profile") {
        None => Profile::Desk,
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("profile", e.to_string()))?,
    };
    let mut merged = toml::Table::try_from(SweepConfig::preset(profile))
        .map_err(|e| Error::Parse(e.to_string()))?;
    merge(&mut merged, user);
    let config: SweepConfig = merged
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_desk_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, SweepConfig::default());
        assert_eq!(c.alpha_grid.len(), 12);
        assert!((c.alpha_grid[0] - 0.008).abs() < 1e-12);
        assert!((c.alpha_grid[11] - 0.84).abs() < 1e-12);
        assert_eq!(c.realizations, 8);
        assert_eq!(c.game.horizon - c.game.transient, 60_000);
    }

    #[test]
    fn lockfile_round_trips() {
        let c = parse_config(
            "realizations = 3\ngame.epsilon = 0.02\n[wtmm]\nfit_range = [8.0, 512.0]\n",
        )
        .unwrap();
        assert_eq!(c.realizations, 3);
        assert_eq!(c.game.epsilon, 0.02);
        assert_eq!(c.wtmm.fit_range, Some((8.0, 512.0)));
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn paper_profile() {
        let c = parse_config("profile = \"paper\"").unwrap();
        assert_eq!(c.realizations, 20);
        assert_eq!(c.game.horizon - c.game.transient, 100_000);
    }

    #[test]
    fn zero_alpha_names_the_field() {
        let e = parse_config("alpha_grid = [0.0, 0.1]").unwrap_err();
        assert!(e.is_config_error());
        assert!(e.to_string().contains("alpha_grid"), "{e}");
    }

    #[test]
    fn typo_is_fatal() {
        let e = parse_config("epsilonn = 0.01").unwrap_err();
        assert!(e.is_config_error());
        assert!(e.to_string().contains("epsilonn"), "{e}");
        let e = parse_config("[game]\nepsilonn = 0.01").unwrap_err();
        assert!(e.to_string().contains("epsilonn"), "{e}");
    }

    #[test]
    fn game_errors_are_prefixed() {
        let e = parse_config("game.timescales = [1, 5, 21]").unwrap_err();
        assert!(e.to_string().contains("game.timescales"), "{e}");
        let e = parse_config("game.p_states = 4").unwrap_err();
        assert!(e.to_string().contains("game.alpha"), "{e}");
    }
}
