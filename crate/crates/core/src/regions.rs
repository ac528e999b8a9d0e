//! Sensitive-region detection: locate each sensitive point, extend one hop
//! per side under strong correlation, and merge touching spans.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::Serialize;

use crate::stats::{CorrelationStats, StatsError};
use crate::trajectory::{Dataset, LocationId, ParseError, TrajPoint, Trajectory, UserId};

/// Per-user sets of self-declared sensitive locations.
#[derive(Debug, Clone, Default)]
pub struct SensitiveSet {
    per_user: HashMap<UserId, HashSet<LocationId>>,
}

impl SensitiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user: UserId, location: LocationId) {
        self.per_user.entry(user).or_default().insert(location);
    }

    pub fn get(&self, user: &UserId) -> Option<&HashSet<LocationId>> {
        self.per_user.get(user)
    }

    pub fn is_empty(&self) -> bool {
        self.per_user.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.per_user.len()
    }

    /// Parse the `user_id<TAB>location_id` file format, one entry per line.
    pub fn parse_tsv<R: BufRead>(reader: R) -> Result<Self, ParseError> {
        let mut set = SensitiveSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(user), Some(loc), None) if !user.is_empty() && !loc.is_empty() => {
                    set.insert(UserId::from(user), LocationId::from(loc));
                }
                _ => {
                    return Err(ParseError::Malformed {
                        line: idx + 1,
                        reason: "expected user_id<TAB>location_id".to_string(),
                    })
                }
            }
        }
        Ok(set)
    }
}

/// Inclusive index interval into a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start..=self.end).contains(&index)
    }
}

/// The trajectory point just outside a region, or the trajectory boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    Boundary,
    Point(TrajPoint),
}

impl Anchor {
    pub fn location(&self) -> Option<&LocationId> {
        match self {
            Anchor::Boundary => None,
            Anchor::Point(p) => Some(&p.location),
        }
    }

    pub fn point(&self) -> Option<&TrajPoint> {
        match self {
            Anchor::Boundary => None,
            Anchor::Point(p) => Some(p),
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Anchor::Boundary)
    }
}

/// Why a sensitive index produced its span: which sides were extended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionOrigin {
    pub sensitive_index: usize,
    pub extended_prev: bool,
    pub extended_next: bool,
}

/// A contiguous span to be replaced, with its outside anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveRegion {
    pub span: Span,
    /// Location ids at the span, in order.
    pub sequence: Vec<LocationId>,
    pub parent: Anchor,
    pub child: Anchor,
    /// Timestamp of the first point in the span.
    pub first_timestamp: i64,
    /// Timestamp of the last point in the span.
    pub last_timestamp: i64,
    pub origins: Vec<RegionOrigin>,
}

impl SensitiveRegion {
    /// Timestamp to interpolate from on the parent side: the parent point's
    /// timestamp, or the span's first timestamp at a trajectory boundary.
    pub fn parent_timestamp(&self) -> i64 {
        self.parent
            .point()
            .map(|p| p.timestamp)
            .unwrap_or(self.first_timestamp)
    }

    /// Counterpart of [`parent_timestamp`](Self::parent_timestamp) on the
    /// child side.
    pub fn child_timestamp(&self) -> i64 {
        self.child
            .point()
            .map(|p| p.timestamp)
            .unwrap_or(self.last_timestamp)
    }
}

/// Locate every sensitive point of `trajectory`, extend each one hop per side
/// where the neighbor is strongly correlated, and merge overlapping or
/// adjacent spans into disjoint regions sorted by start.
pub fn detect_regions(
    trajectory: &Trajectory,
    sensitive: &HashSet<LocationId>,
    stats: &CorrelationStats,
) -> Result<Vec<SensitiveRegion>, StatsError> {
    if sensitive.is_empty() {
        return Ok(Vec::new());
    }
    let points = &trajectory.points;
    let mut spans: Vec<(Span, RegionOrigin)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !sensitive.contains(&p.location) {
            continue;
        }
        let mut start = i;
        let mut end = i;
        let mut extended_prev = false;
        let mut extended_next = false;
        if i > 0 && stats.is_strong_prev(&points[i - 1].location, &p.location)? {
            start = i - 1;
            extended_prev = true;
        }
        if i + 1 < points.len() && stats.is_strong_next(&p.location, &points[i + 1].location)? {
            end = i + 1;
            extended_next = true;
        }
        spans.push((
            Span { start, end },
            RegionOrigin { sensitive_index: i, extended_prev, extended_next },
        ));
    }

    // Merge overlapping or adjacent spans so regions stay disjoint.
    let mut regions: Vec<SensitiveRegion> = Vec::new();
    let mut iter = spans.into_iter();
    let Some((first_span, first_origin)) = iter.next() else {
        return Ok(Vec::new());
    };
    let mut span = first_span;
    let mut origins = vec![first_origin];
    for (next, origin) in iter {
        if next.start <= span.end + 1 {
            span.end = span.end.max(next.end);
            origins.push(origin);
        } else {
            regions.push(build_region(points, span, std::mem::take(&mut origins)));
            span = next;
            origins.push(origin);
        }
    }
    regions.push(build_region(points, span, origins));
    Ok(regions)
}

fn build_region(points: &[TrajPoint], span: Span, origins: Vec<RegionOrigin>) -> SensitiveRegion {
    let parent = if span.start > 0 {
        Anchor::Point(points[span.start - 1].clone())
    } else {
        Anchor::Boundary
    };
    let child = if span.end + 1 < points.len() {
        Anchor::Point(points[span.end + 1].clone())
    } else {
        Anchor::Boundary
    };
    SensitiveRegion {
        sequence: points[span.start..=span.end]
            .iter()
            .map(|p| p.location.clone())
            .collect(),
        first_timestamp: points[span.start].timestamp,
        last_timestamp: points[span.end].timestamp,
        span,
        parent,
        child,
        origins,
    }
}

/// Run [`detect_regions`] over the whole dataset with each user's own
/// sensitive set. The result maps trajectory index (into
/// `dataset.trajectories`) to that trajectory's regions; trajectories without
/// regions are omitted.
pub fn detect_all(
    dataset: &Dataset,
    sensitive_sets: &SensitiveSet,
    stats: &CorrelationStats,
) -> Result<BTreeMap<usize, Vec<SensitiveRegion>>, StatsError> {
    let mut out = BTreeMap::new();
    for (idx, traj) in dataset.trajectories.iter().enumerate() {
        let Some(sensitive) = sensitive_sets.get(&traj.user) else {
            continue;
        };
        let regions = detect_regions(traj, sensitive, stats)?;
        if !regions.is_empty() {
            out.insert(idx, regions);
        }
    }
    Ok(out)
}

/// One row of the region audit report.
#[derive(Debug, Serialize)]
pub struct RegionAuditEntry {
    pub trajectory_index: usize,
    pub user: String,
    pub span: Span,
    pub sequence: Vec<String>,
    pub parent: Option<String>,
    pub child: Option<String>,
    pub origins: Vec<RegionOrigin>,
}

/// Flatten detected regions into a serializable audit report.
pub fn audit_entries(
    dataset: &Dataset,
    regions: &BTreeMap<usize, Vec<SensitiveRegion>>,
) -> Vec<RegionAuditEntry> {
    let mut entries = Vec::new();
    for (&traj_idx, region_list) in regions {
        for region in region_list {
            entries.push(RegionAuditEntry {
                trajectory_index: traj_idx,
                user: dataset.trajectories[traj_idx].user.to_string(),
                span: region.span,
                sequence: region.sequence.iter().map(|l| l.to_string()).collect(),
                parent: region.parent.location().map(|l| l.to_string()),
                child: region.child.location().map(|l| l.to_string()),
                origins: region.origins.clone(),
            });
        }
    }
    entries
}
