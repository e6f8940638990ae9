//! Nonsynchronous grand-canonical Minority Game.
//!
//! `g` groups of speculators trade at their own timescales `ts_j` while one
//! group of producers trades every step. All agents see the same exogenous
//! information `mu`, and every strategy score is updated virtually at every
//! step, whether or not its owner traded.

mod config;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) use config::group_active;
pub use config::{GameConfig, DAILY_WEEKLY_MONTHLY};

use crate::error::Result;

/// Frozen strategy (`mu -> action`) together with its cumulative score.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    pub entries: Vec<i8>,
    pub score: f64,
}

impl StrategyTable {
    pub fn action(&self, mu: usize) -> i8 {
        self.entries[mu]
    }
}

/// Pick the action of the best-scoring strategy.
///
/// `scores` holds one score per trading strategy followed by the null
/// strategy's score; `actions` holds each trading strategy's action for the
/// current information state. Exact ties are broken uniformly at random, the
/// null strategy included.
pub fn decide<R: Rng + ?Sized>(scores: &[f64], actions: &[i8], rng: &mut R) -> i8 {
    debug_assert_eq!(scores.len(), actions.len() + 1);
    let mut best = f64::NEG_INFINITY;
    let mut ties = 0usize;
    for &u in scores {
        if u > best {
            best = u;
            ties = 1;
        } else if u == best {
            ties += 1;
        }
    }
    let pick = if ties == 1 { 0 } else { rng.gen_range(0..ties) };
    let mut seen = 0usize;
    for (s, &u) in scores.iter().enumerate() {
        if u == best {
            if seen == pick {
                return actions.get(s).copied().unwrap_or(0);
            }
            seen += 1;
        }
    }
    unreachable!("argmax set is never empty")
}

/// A producer's action is its table entry; scores never matter.
#[inline]
pub fn decide_producer(table: &StrategyTable, mu: usize) -> i8 {
    table.action(mu)
}

/// Outcome of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRecord {
    pub t: u64,
    pub mu: u32,
    pub demand: i64,
    pub active: u32,
}

/// Mutable state of one game.
///
/// Speculator tables are stored packed as `[mu][agent][strategy]` so that a
/// step touches one contiguous slice.
pub struct GameState {
    config: GameConfig,
    p: usize,
    n_spec: usize,
    n_strat: usize,
    spec_actions: Vec<i8>,
    /// `[agent][strategy]`, null strategy last.
    spec_scores: Vec<f64>,
    /// `[mu][producer]`
    prod_actions: Vec<i8>,
    prod_scores: Vec<f64>,
    prod_demand: Vec<i64>,
    rng: ChaCha8Rng,
    t: u64,
}

impl GameState {
    /// Build a game: all strategies drawn i.i.d. uniform over `{-1, +1}`, all scores zero.
    pub fn new(config: &GameConfig) -> Result<Self> {
        config.validate()?;
        let p = config.resolved_p()?;
        let n_spec = config.total_speculators();
        let n_strat = config.strategies;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let mut spec_actions = vec![0i8; p * n_spec * n_strat];
        for a in spec_actions.iter_mut() {
            *a = if rng.gen::<bool>() { 1 } else { -1 };
        }
        let mut prod_actions = vec![0i8; p * config.producers];
        for a in prod_actions.iter_mut() {
            *a = if rng.gen::<bool>() { 1 } else { -1 };
        }
        let np = config.producers;
        let prod_demand = (0..p)
            .map(|mu| {
                prod_actions[mu * np..(mu + 1) * np]
                    .iter()
                    .map(|&a| a as i64)
                    .sum()
            })
            .collect();

        Ok(GameState {
            config: config.clone(),
            p,
            n_spec,
            n_strat,
            spec_actions,
            spec_scores: vec![0.0; n_spec * (n_strat + 1)],
            prod_actions,
            prod_scores: vec![0.0; config.producers],
            prod_demand,
            rng,
            t: 0,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn p_states(&self) -> usize {
        self.p
    }

    pub fn speculators(&self) -> usize {
        self.n_spec
    }

    pub fn producers(&self) -> usize {
        self.config.producers
    }

    pub fn strategies(&self) -> usize {
        self.n_strat
    }

    /// Current step index.
    pub fn time(&self) -> u64 {
        self.t
    }

    fn spec_action(&self, mu: usize, agent: usize, s: usize) -> i8 {
        self.spec_actions[(mu * self.n_spec + agent) * self.n_strat + s]
    }

    /// Snapshot of speculator `agent`'s trading strategy `s`.
    pub fn speculator_table(&self, agent: usize, s: usize) -> StrategyTable {
        assert!(agent < self.n_spec && s < self.n_strat);
        StrategyTable {
            entries: (0..self.p)
                .map(|mu| self.spec_action(mu, agent, s))
                .collect(),
            score: self.spec_scores[agent * (self.n_strat + 1) + s],
        }
    }

    /// Scores of speculator `agent`, trading strategies first, null last.
    pub fn speculator_scores(&self, agent: usize) -> &[f64] {
        let w = self.n_strat + 1;
        &self.spec_scores[agent * w..(agent + 1) * w]
    }

    pub fn speculator_scores_mut(&mut self, agent: usize) -> &mut [f64] {
        let w = self.n_strat + 1;
        &mut self.spec_scores[agent * w..(agent + 1) * w]
    }

    pub fn producer_table(&self, k: usize) -> StrategyTable {
        let np = self.config.producers;
        assert!(k < np);
        StrategyTable {
            entries: (0..self.p)
                .map(|mu| self.prod_actions[mu * np + k])
                .collect(),
            score: self.prod_scores[k],
        }
    }

    /// Group index of speculator `agent`.
    pub fn group_of(&self, agent: usize) -> usize {
        agent / self.config.speculators_per_group
    }

    pub fn group_is_active(&self, group: usize, t: u64) -> bool {
        group_active(t, self.config.timescales[group], self.config.phase(group))
    }

    /// Draw the next information state uniformly from `[0, P)`.
    pub fn draw_information(&mut self) -> usize {
        if self.p == 1 {
            return 0;
        }
        self.rng.gen_range(0..self.p)
    }

    /// Hash of every strategy entry; constant over the life of a game.
    pub fn table_fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.spec_actions.hash(&mut h);
        self.prod_actions.hash(&mut h);
        h.finish()
    }

    /// Advance one step with a freshly drawn information state.
    pub fn step(&mut self) -> StepRecord {
        let mu = self.draw_information();
        self.step_with(mu)
    }

    /// Advance one step with a given information state.
    pub fn step_with(&mut self, mu: usize) -> StepRecord {
        assert!(
            mu < self.p,
            "information state {mu} outside [0, {})",
            self.p
        );
        let t = self.t;
        let w = self.n_strat + 1;
        let per_group = self.config.speculators_per_group;
        let row = &self.spec_actions
            [mu * self.n_spec * self.n_strat..(mu + 1) * self.n_spec * self.n_strat];

        let mut demand = self.prod_demand[mu];
        let mut active = self.config.producers as u32;
        for g in 0..self.config.groups {
            if !group_active(t, self.config.timescales[g], self.config.phase(g)) {
                continue;
            }
            for agent in g * per_group..(g + 1) * per_group {
                let scores = &self.spec_scores[agent * w..(agent + 1) * w];
                let actions = &row[agent * self.n_strat..(agent + 1) * self.n_strat];
                let a = decide(scores, actions, &mut self.rng);
                if a != 0 {
                    demand += a as i64;
                    active += 1;
                }
            }
        }

        let demand_f = demand as f64;
        let eps = self.config.epsilon;
        for (scores, actions) in self
            .spec_scores
            .chunks_exact_mut(w)
            .zip(row.chunks_exact(self.n_strat))
        {
            for (u, &a) in scores.iter_mut().zip(actions) {
                *u -= a as f64 * demand_f;
            }
            scores[self.n_strat] += eps;
        }
        let np = self.config.producers;
        let prow = &self.prod_actions[mu * np..(mu + 1) * np];
        for (u, &a) in self.prod_scores.iter_mut().zip(prow) {
            *u -= a as f64 * demand_f;
        }

        self.t += 1;
        StepRecord {
            t,
            mu: mu as u32,
            demand,
            active,
        }
    }
}

/// Per-step record of a game after the transient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketSeries {
    /// Absolute step index of the first retained sample.
    pub t0: u64,
    pub mu: Vec<u32>,
    /// Excess demand `A(t)`.
    pub a: Vec<i64>,
    /// Price `Y(t)`, the running sum of `a`.
    pub y: Vec<i64>,
    /// Number of traders (producers plus non-abstaining speculators).
    pub active: Vec<u32>,
}

impl MarketSeries {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.a.iter().map(|&v| v as f64).collect()
    }

    pub fn price(&self) -> Vec<f64> {
        self.y.iter().map(|&v| v as f64).collect()
    }

    pub fn mu_indices(&self) -> Vec<usize> {
        self.mu.iter().map(|&m| m as usize).collect()
    }
}

/// Play `horizon` steps and keep everything after the transient.
pub fn run(config: &GameConfig) -> Result<MarketSeries> {
    let mut game = GameState::new(config)?;
    Ok(run_game(&mut game))
}

pub fn run_game(game: &mut GameState) -> MarketSeries {
    let horizon = game.config.horizon;
    let transient = game.config.transient;
    let n = horizon - transient;
    let mut series = MarketSeries {
        t0: transient as u64,
        mu: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        active: Vec::with_capacity(n),
    };
    let mut price = 0i64;
    for _ in 0..horizon {
        let rec = game.step();
        if (rec.t as usize) < transient {
            continue;
        }
        price += rec.demand;
        series.mu.push(rec.mu);
        series.a.push(rec.demand);
        series.y.push(price);
        series.active.push(rec.active);
    }
    series
}
