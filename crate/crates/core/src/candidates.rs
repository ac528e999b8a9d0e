//! Pattern index over parent -> sequence -> child windows and the candidate
//! set construction rules.
//!
//! A candidate for a region must share the region's anchors, contain no
//! location from the owner's sensitive set, be weakly connected to both
//! anchors, and stay reachable under the speed bound once its points receive
//! timestamps interpolated between the anchor timestamps.

use std::collections::HashMap;

use crate::geo::{reachable, Coord};
use crate::regions::SensitiveRegion;
use crate::stats::{CorrelationStats, StatsError};
use crate::trajectory::{Dataset, LocationId};

/// Index of every `(parent, child, gap length m)` window in a dataset with
/// the distinct interior sequences and their occurrence counts.
#[derive(Debug, Clone)]
pub struct PatternIndex {
    max_len: usize,
    entries: HashMap<(LocationId, LocationId, usize), Vec<(Vec<LocationId>, usize)>>,
}

/// Scan every trajectory window of interior length `1..=max_len` and count
/// the interior sequences per `(parent, child, length)` key.
pub fn build_pattern_index(dataset: &Dataset, max_len: usize) -> PatternIndex {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut building: HashMap<(LocationId, LocationId, usize), HashMap<Vec<LocationId>, usize>> =
        HashMap::new();
    for traj in &dataset.trajectories {
        let points = &traj.points;
        for m in 1..=max_len {
            if points.len() < m + 2 {
                break;
            }
            for window in points.windows(m + 2) {
                let key = (
                    window[0].location.clone(),
                    window[m + 1].location.clone(),
                    m,
                );
                let seq: Vec<LocationId> =
                    window[1..=m].iter().map(|p| p.location.clone()).collect();
                *building.entry(key).or_default().entry(seq).or_insert(0) += 1;
            }
        }
    }
    let entries = building
        .into_iter()
        .map(|(key, seqs)| {
            let mut list: Vec<(Vec<LocationId>, usize)> = seqs.into_iter().collect();
            list.sort_by(|a, b| a.0.cmp(&b.0));
            (key, list)
        })
        .collect();
    PatternIndex { max_len, entries }
}

impl PatternIndex {
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct sequences of length `m` observed between `parent` and `child`.
    pub fn lookup(
        &self,
        parent: &LocationId,
        child: &LocationId,
        m: usize,
    ) -> &[(Vec<LocationId>, usize)] {
        self.entries
            .get(&(parent.clone(), child.clone(), m))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sequences of length `m` following `parent`, aggregated over all
    /// children. Used when a region sits at the end of its trajectory.
    pub fn lookup_by_parent(&self, parent: &LocationId, m: usize) -> Vec<(Vec<LocationId>, usize)> {
        self.aggregate(|(p, _, len)| len == &m && p == parent)
    }

    /// Sequences of length `m` preceding `child`, aggregated over all
    /// parents. Used when a region sits at the start of its trajectory.
    pub fn lookup_by_child(&self, child: &LocationId, m: usize) -> Vec<(Vec<LocationId>, usize)> {
        self.aggregate(|(_, c, len)| len == &m && c == child)
    }

    fn aggregate<F>(&self, keep: F) -> Vec<(Vec<LocationId>, usize)>
    where
        F: Fn(&(LocationId, LocationId, usize)) -> bool,
    {
        let mut merged: HashMap<&[LocationId], usize> = HashMap::new();
        for (key, list) in &self.entries {
            if !keep(key) {
                continue;
            }
            for (seq, count) in list {
                *merged.entry(seq.as_slice()).or_insert(0) += count;
            }
        }
        let mut out: Vec<(Vec<LocationId>, usize)> = merged
            .into_iter()
            .map(|(seq, count)| (seq.to_vec(), count))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// A replacement sequence with its dataset occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub sequence: Vec<LocationId>,
    pub count: usize,
}

/// The distinct valid replacement sequences for one region (the output
/// domain of the randomized response mechanism).
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    /// Sorted by sequence; pairwise distinct.
    pub candidates: Vec<Candidate>,
    /// Occurrence count of the region's own content under the same lookup,
    /// used by the utility metrics.
    pub original_count: usize,
    /// Per-region privacy budget, filled by the allocator stage.
    pub epsilon: Option<f64>,
}

impl CandidateSet {
    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Timestamps for `m` interpolated points strictly between `t_start` and
/// `t_end`, at fractions 1/(m+1) .. m/(m+1) (integer floor).
pub fn interpolated_timestamps(t_start: i64, t_end: i64, m: usize) -> Vec<i64> {
    let steps = (m + 1) as i64;
    (1..=m as i64)
        .map(|i| t_start + (t_end - t_start) * i / steps)
        .collect()
}

/// Build the candidate set for `region`.
///
/// Sequences of length 1..=span length are pulled from the index entries
/// matching the region's anchors (a single anchor at trajectory boundaries),
/// then filtered: no sensitive element, weak connection to both anchors, and
/// speed-bounded reachability along the interpolated hop chain. The region's
/// own content is never a candidate. An empty result signals the suppression
/// fallback.
pub fn candidates_for(
    region: &SensitiveRegion,
    index: &PatternIndex,
    stats: &CorrelationStats,
    sensitive: &std::collections::HashSet<LocationId>,
    delta_speed: f64,
    registry: &HashMap<LocationId, Coord>,
) -> Result<CandidateSet, StatsError> {
    let parent = region.parent.point();
    let child = region.child.point();
    if parent.is_none() && child.is_none() {
        return Ok(CandidateSet::default());
    }

    let n = region.span.len();
    let t_parent = region.parent_timestamp();
    let t_child = region.child_timestamp();
    let mut candidates = Vec::new();
    let mut original_count = 0;

    for m in 1..=n.min(index.max_len()) {
        let pool: Vec<(Vec<LocationId>, usize)> = match (parent, child) {
            (Some(p), Some(c)) => index.lookup(&p.location, &c.location, m).to_vec(),
            (Some(p), None) => index.lookup_by_parent(&p.location, m),
            (None, Some(c)) => index.lookup_by_child(&c.location, m),
            (None, None) => unreachable!(),
        };
        for (sequence, count) in pool {
            if sequence == region.sequence {
                original_count = count;
                continue;
            }
            if sequence.iter().any(|l| sensitive.contains(l)) {
                continue;
            }
            let first = sequence.first().expect("sequences are non-empty");
            let last = sequence.last().expect("sequences are non-empty");
            if let Some(p) = parent {
                if stats.is_strong_prev(&p.location, first)? {
                    continue;
                }
            }
            if let Some(c) = child {
                if stats.is_strong_next(last, &c.location)? {
                    continue;
                }
            }
            if !hops_reachable(
                &sequence,
                parent.map(|p| (p.coord(), p.timestamp)),
                child.map(|c| (c.coord(), c.timestamp)),
                interpolated_timestamps(t_parent, t_child, m),
                delta_speed,
                registry,
            ) {
                continue;
            }
            candidates.push(Candidate { sequence, count });
        }
    }

    candidates.sort_by(|a, b| a.sequence.cmp(&b.sequence));
    Ok(CandidateSet { candidates, original_count, epsilon: None })
}

fn hops_reachable(
    sequence: &[LocationId],
    parent: Option<(Coord, i64)>,
    child: Option<(Coord, i64)>,
    timestamps: Vec<i64>,
    delta_speed: f64,
    registry: &HashMap<LocationId, Coord>,
) -> bool {
    let mut chain: Vec<(Coord, i64)> = Vec::with_capacity(sequence.len() + 2);
    if let Some(p) = parent {
        chain.push(p);
    }
    for (loc, ts) in sequence.iter().zip(timestamps) {
        match registry.get(loc) {
            Some(coord) => chain.push((*coord, ts)),
            // Unknown coordinates cannot be certified reachable.
            None => return false,
        }
    }
    if let Some(c) = child {
        chain.push(c);
    }
    chain
        .windows(2)
        .all(|w| reachable(w[0].0, w[0].1, w[1].0, w[1].1, delta_speed))
}
