//! Global count statistics and the attacker-probability formulas behind the
//! strong-correlation predicate.
//!
//! Three count families back every probability here: the number of distinct
//! users who visited a location, the total occurrences of a location as a
//! trajectory point, and the occurrences of each consecutive ordered pair.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde_json::json;
use thiserror::Error;

use crate::trajectory::{Dataset, LocationId};

/// Default floor for the random-guess probability.
pub const DEFAULT_GUESS_FLOOR: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    /// Probability queries need at least one user in the corpus.
    #[error("undefined statistics: corpus has no users")]
    UndefinedStatistics,
}

/// Immutable count statistics over a dataset.
#[derive(Debug, Clone)]
pub struct CorrelationStats {
    n_users: usize,
    guess_floor: f64,
    users_at: HashMap<LocationId, usize>,
    unigram: HashMap<LocationId, usize>,
    bigram: HashMap<(LocationId, LocationId), usize>,
}

/// Count users, unigrams, and bigrams over every trajectory of the dataset.
pub fn build_stats(dataset: &Dataset) -> CorrelationStats {
    let mut users_at: HashMap<LocationId, HashSet<&str>> = HashMap::new();
    let mut unigram: HashMap<LocationId, usize> = HashMap::new();
    let mut bigram: HashMap<(LocationId, LocationId), usize> = HashMap::new();

    for traj in &dataset.trajectories {
        for p in &traj.points {
            *unigram.entry(p.location.clone()).or_insert(0) += 1;
            users_at
                .entry(p.location.clone())
                .or_default()
                .insert(traj.user.as_str());
        }
        for w in traj.points.windows(2) {
            *bigram
                .entry((w[0].location.clone(), w[1].location.clone()))
                .or_insert(0) += 1;
        }
    }

    CorrelationStats {
        n_users: dataset.user_count,
        guess_floor: DEFAULT_GUESS_FLOOR,
        users_at: users_at.into_iter().map(|(k, v)| (k, v.len())).collect(),
        unigram,
        bigram,
    }
}

impl CorrelationStats {
    /// Replace the guess-probability floor (default 0.5).
    pub fn with_guess_floor(mut self, floor: f64) -> Self {
        self.guess_floor = floor;
        self
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn guess_floor(&self) -> f64 {
        self.guess_floor
    }

    pub fn users_at(&self, loc: &LocationId) -> usize {
        self.users_at.get(loc).copied().unwrap_or(0)
    }

    pub fn unigram(&self, loc: &LocationId) -> usize {
        self.unigram.get(loc).copied().unwrap_or(0)
    }

    pub fn bigram(&self, from: &LocationId, to: &LocationId) -> usize {
        self.bigram
            .get(&(from.clone(), to.clone()))
            .copied()
            .unwrap_or(0)
    }

    /// Attacker's floored random-guess probability for `loc`:
    /// max(floor, users_at(loc) / N).
    pub fn guess_prob(&self, loc: &LocationId) -> Result<f64, StatsError> {
        if self.n_users == 0 {
            return Err(StatsError::UndefinedStatistics);
        }
        let ratio = self.users_at(loc) as f64 / self.n_users as f64;
        Ok(ratio.max(self.guess_floor))
    }

    /// P(loc | prev): bigram(prev, loc) / unigram(prev), 0 when `prev` was
    /// never observed.
    pub fn cond_prob_prev(&self, prev: &LocationId, loc: &LocationId) -> f64 {
        let denom = self.unigram(prev);
        if denom == 0 {
            return 0.0;
        }
        self.bigram(prev, loc) as f64 / denom as f64
    }

    /// P(loc | next): bigram(loc, next) / unigram(next), 0 when `next` was
    /// never observed.
    pub fn cond_prob_next(&self, loc: &LocationId, next: &LocationId) -> f64 {
        let denom = self.unigram(next);
        if denom == 0 {
            return 0.0;
        }
        self.bigram(loc, next) as f64 / denom as f64
    }

    /// Whether knowing the predecessor strictly beats the random guess on `loc`.
    pub fn is_strong_prev(&self, prev: &LocationId, loc: &LocationId) -> Result<bool, StatsError> {
        Ok(self.cond_prob_prev(prev, loc) > self.guess_prob(loc)?)
    }

    /// Whether knowing the successor strictly beats the random guess on `loc`.
    pub fn is_strong_next(&self, loc: &LocationId, next: &LocationId) -> Result<bool, StatsError> {
        Ok(self.cond_prob_next(loc, next) > self.guess_prob(loc)?)
    }

    /// Debug dump with sorted keys, for audits and oracle comparison.
    pub fn to_json(&self) -> serde_json::Value {
        let users_at: BTreeMap<&str, usize> = self
            .users_at
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        let unigram: BTreeMap<&str, usize> = self
            .unigram
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        let mut bigram: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for ((from, to), count) in &self.bigram {
            bigram
                .entry(from.as_str())
                .or_default()
                .insert(to.as_str(), *count);
        }
        json!({
            "n_users": self.n_users,
            "guess_floor": self.guess_floor,
            "users_at": users_at,
            "unigram": unigram,
            "bigram": bigram,
        })
    }

    /// Test-support constructor from explicit counts.
    pub fn from_counts(
        n_users: usize,
        users_at: HashMap<LocationId, usize>,
        unigram: HashMap<LocationId, usize>,
        bigram: HashMap<(LocationId, LocationId), usize>,
    ) -> Self {
        CorrelationStats {
            n_users,
            guess_floor: DEFAULT_GUESS_FLOOR,
            users_at,
            unigram,
            bigram,
        }
    }
}
