use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full parameterization of one nonsynchronous grand-canonical game.
///
/// Exactly one of `alpha` and `p_states` must be set; the other is derived from
/// `alpha = P / (g * N)` where `N` is the number of speculators per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    /// Number of speculator groups `g`.
    pub groups: usize,
    pub speculators_per_group: usize,
    pub producers: usize,
    /// Trading strategies per speculator (the null strategy is extra).
    pub strategies: usize,
    /// Steps between trades for each group; strictly increasing, first entry 1.
    pub timescales: Vec<u64>,
    /// Per-group activity phase; group `j` trades when `(t - phase_j) % ts_j == 0`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<u64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub p_states: Option<usize>,
    /// Payoff increment of the null strategy per step.
    pub epsilon: f64,
    pub horizon: usize,
    pub transient: usize,
    pub seed: u64,
}

/// Timescales of the `daily-weekly-monthly` preset.
pub const DAILY_WEEKLY_MONTHLY: [u64; 3] = [1, 5, 21];

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            groups: 2,
            speculators_per_group: 500,
            producers: 500,
            strategies: 2,
            timescales: vec![1, 5],
            phases: Vec::new(),
            alpha: Some(0.2),
            p_states: None,
            epsilon: 0.01,
            horizon: 110_000,
            transient: 10_000,
            seed: 1,
        }
    }
}

impl GameConfig {
    pub fn daily_weekly_monthly() -> Self {
        GameConfig {
            groups: 3,
            timescales: DAILY_WEEKLY_MONTHLY.to_vec(),
            ..GameConfig::default()
        }
    }

    /// Replace the control parameter, clearing any explicit `p_states`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self.p_states = None;
        self
    }

    /// Replace the information alphabet size, clearing any explicit `alpha`.
    pub fn with_p_states(mut self, p: usize) -> Self {
        self.p_states = Some(p);
        self.alpha = None;
        self
    }

    pub fn total_speculators(&self) -> usize {
        self.groups * self.speculators_per_group
    }

    /// Information alphabet size, given or derived as `max(1, round(alpha * g * N))`.
    pub fn resolved_p(&self) -> Result<usize> {
        match (self.alpha, self.p_states) {
            (Some(_), Some(_)) => Err(Error::config(
                "alpha",
                "and `p_states` are both set; give exactly one",
            )),
            (None, None) => Err(Error::config("alpha", "or `p_states` must be set")),
            (None, Some(0)) => Err(Error::config("p_states", "must be >= 1")),
            (None, Some(p)) => Ok(p),
            (Some(a), None) => {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::config(
                        "alpha",
                        format!("must be finite and > 0, got {a}"),
                    ));
                }
                let p = (a * self.total_speculators() as f64).round();
                Ok((p as usize).max(1))
            }
        }
    }

    /// Effective control parameter `P / (g N)`.
    pub fn resolved_alpha(&self) -> Result<f64> {
        let p = self.resolved_p()?;
        Ok(p as f64 / self.total_speculators() as f64)
    }

    pub fn phase(&self, group: usize) -> u64 {
        self.phases.get(group).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::config("groups", "must be >= 1"));
        }
        if self.speculators_per_group == 0 {
            return Err(Error::config("speculators_per_group", "must be >= 1"));
        }
        if self.strategies == 0 {
            return Err(Error::config("strategies", "must be >= 1"));
        }
        if self.strategies > i8::MAX as usize {
            return Err(Error::config("strategies", "is unreasonably large"));
        }
        if self.timescales.len() != self.groups {
            return Err(Error::config(
                "timescales",
                format!(
                    "has {} entries but groups = {}",
                    self.timescales.len(),
                    self.groups
                ),
            ));
        }
        if self.timescales.contains(&0) {
            return Err(Error::config("timescales", "entries must be >= 1"));
        }
        if self.timescales[0] != 1 {
            return Err(Error::config("timescales", "first entry must be 1"));
        }
        if self.timescales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("timescales", "must be strictly increasing"));
        }
        if !self.phases.is_empty() && self.phases.len() != self.groups {
            return Err(Error::config(
                "phases",
                format!(
                    "has {} entries but groups = {}",
                    self.phases.len(),
                    self.groups
                ),
            ));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::config("epsilon", "must be finite"));
        }
        if self.horizon <= self.transient {
            return Err(Error::config(
                "horizon",
                format!(
                    "must exceed transient ({} <= {})",
                    self.horizon, self.transient
                ),
            ));
        }
        self.resolved_p()?;
        Ok(())
    }

    /// Upper bound on `|A(t)|` at step `t`.
    pub fn max_demand_at(&self, t: u64) -> usize {
        let active: usize = (0..self.groups)
            .filter(|&j| group_active(t, self.timescales[j], self.phase(j)))
            .count();
        self.producers + active * self.speculators_per_group
    }
}

#[inline]
pub(crate) fn group_active(t: u64, timescale: u64, phase: u64) -> bool {
    t >= phase && (t - phase).is_multiple_of(timescale)
}
