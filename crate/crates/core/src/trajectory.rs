//! Check-in and trajectory data model, TSV ingestion, and session segmentation.
//!
//! The check-in format is the public 5-column TSV: user id, ISO-8601 UTC
//! time, latitude, longitude, location id. Trajectories are per-user,
//! time-sorted runs of check-ins split whenever the gap between consecutive
//! check-ins exceeds a session gap.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Coord;

/// Location id reserved for suppressed points in published files.
pub const SUPPRESSED_LOCATION: &str = "SUPPRESSED";

/// Opaque user identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_string())
    }
}

/// Opaque POI identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationId(pub String);

impl LocationId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The reserved suppression marker.
    pub fn suppressed() -> Self {
        LocationId(SUPPRESSED_LOCATION.to_string())
    }

    pub fn is_suppressed(&self) -> bool {
        self.0 == SUPPRESSED_LOCATION
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LocationId {
    fn from(s: &str) -> Self {
        LocationId(s.to_string())
    }
}

/// A single timestamped POI visit.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckIn {
    pub user: UserId,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    pub location: LocationId,
}

impl CheckIn {
    pub fn coord(&self) -> Coord {
        Coord::new(self.lat, self.lon)
    }
}

/// One point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajPoint {
    pub location: LocationId,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl TrajPoint {
    pub fn coord(&self) -> Coord {
        Coord::new(self.lat, self.lon)
    }
}

/// An ordered sequence of points produced by one user.
///
/// Invariants: at least one point; timestamps non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub user: UserId,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locations(&self) -> impl Iterator<Item = &LocationId> {
        self.points.iter().map(|p| &p.location)
    }
}

/// A full corpus of trajectories plus global lookup data.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    /// Sorted by user id, then chronologically within each user.
    pub trajectories: Vec<Trajectory>,
    /// Number of distinct users.
    pub user_count: usize,
    /// First-seen coordinates per location id (input order).
    pub poi_registry: HashMap<LocationId, Coord>,
}

impl Dataset {
    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Total number of points across all trajectories.
    pub fn point_count(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }
}

/// A skipped input line and the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

/// How malformed check-in lines are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// First malformed line aborts the parse.
    Strict,
    /// Malformed lines are skipped and reported as diagnostics.
    Lenient,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error reading input: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_line(line: &str) -> Result<CheckIn, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 tab-separated fields, got {}", fields.len()));
    }
    if fields[0].is_empty() {
        return Err("empty user id".to_string());
    }
    if fields[4].is_empty() {
        return Err("empty location id".to_string());
    }
    let timestamp = parse_timestamp(fields[1])?;
    if timestamp < 0 {
        return Err(format!("timestamp before epoch: {}", fields[1]));
    }
    let lat: f64 = fields[2]
        .parse()
        .map_err(|_| format!("invalid latitude: {}", fields[2]))?;
    let lon: f64 = fields[3]
        .parse()
        .map_err(|_| format!("invalid longitude: {}", fields[3]))?;
    let coord = Coord::new(lat, lon);
    if !coord.in_range() {
        return Err(format!("coordinates out of range: {lat}, {lon}"));
    }
    Ok(CheckIn {
        user: UserId::from(fields[0]),
        timestamp,
        lat,
        lon,
        location: LocationId::from(fields[4]),
    })
}

/// Parse an ISO-8601 UTC time such as `2010-10-19T23:55:27Z` to epoch seconds.
pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.with_timezone(&Utc).timestamp())
        .map_err(|_| format!("invalid ISO-8601 time: {s}"))
}

/// Format epoch seconds as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(ts: i64) -> String {
    let dt = Utc.timestamp_opt(ts, 0).single().expect("timestamp in range");
    dt.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parse a check-in TSV stream.
///
/// Returns the well-formed check-ins in input order. In lenient mode each
/// malformed line is skipped with a diagnostic; in strict mode the first
/// malformed line aborts with its line number and reason.
pub fn parse_checkins<R: BufRead>(
    reader: R,
    mode: ParseMode,
) -> Result<(Vec<CheckIn>, Vec<LineDiagnostic>), ParseError> {
    let mut checkins = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        match parse_line(&line) {
            Ok(c) => checkins.push(c),
            Err(reason) => match mode {
                ParseMode::Strict => return Err(ParseError::Malformed { line: line_no, reason }),
                ParseMode::Lenient => diagnostics.push(LineDiagnostic { line: line_no, reason }),
            },
        }
    }
    Ok((checkins, diagnostics))
}

/// Serialize check-ins back to the 5-column TSV format.
pub fn write_checkins<W: Write>(w: &mut W, checkins: &[CheckIn]) -> std::io::Result<()> {
    for c in checkins {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            c.user,
            format_timestamp(c.timestamp),
            c.lat,
            c.lon,
            c.location
        )?;
    }
    Ok(())
}

/// Group check-ins into per-user trajectories split at `session_gap` seconds.
///
/// Check-ins are sorted per user by timestamp (ties broken by location id,
/// then input order); a new trajectory starts whenever the gap to the
/// previous check-in strictly exceeds `session_gap`. The POI registry keeps
/// the first-seen coordinates of each location in input order.
pub fn segment_trajectories(checkins: &[CheckIn], session_gap: i64) -> Dataset {
    assert!(session_gap > 0, "session_gap must be positive");
    let mut registry: HashMap<LocationId, Coord> = HashMap::new();
    for c in checkins {
        registry.entry(c.location.clone()).or_insert_with(|| c.coord());
    }

    let mut per_user: HashMap<&UserId, Vec<&CheckIn>> = HashMap::new();
    for c in checkins {
        per_user.entry(&c.user).or_default().push(c);
    }
    let users: BTreeSet<&UserId> = per_user.keys().copied().collect();

    let mut trajectories = Vec::new();
    for user in &users {
        let mut entries = per_user.remove(*user).unwrap();
        entries.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.location.cmp(&b.location))
        });
        let mut current: Vec<TrajPoint> = Vec::new();
        let mut prev_ts: Option<i64> = None;
        for c in entries {
            if let Some(prev) = prev_ts {
                if c.timestamp - prev > session_gap {
                    trajectories.push(Trajectory {
                        user: (*user).clone(),
                        points: std::mem::take(&mut current),
                    });
                }
            }
            current.push(TrajPoint {
                location: c.location.clone(),
                timestamp: c.timestamp,
                lat: c.lat,
                lon: c.lon,
            });
            prev_ts = Some(c.timestamp);
        }
        if !current.is_empty() {
            trajectories.push(Trajectory {
                user: (*user).clone(),
                points: current,
            });
        }
    }

    Dataset {
        trajectories,
        user_count: users.len(),
        poi_registry: registry,
    }
}

/// Write a dataset as a trajectory TSV: one line per point with
/// user id, per-user trajectory index, point index, ISO-8601 time,
/// latitude, longitude, location id.
pub fn write_trajectories<W: Write>(w: &mut W, dataset: &Dataset) -> std::io::Result<()> {
    let mut traj_index: HashMap<&UserId, usize> = HashMap::new();
    for traj in &dataset.trajectories {
        let idx = traj_index.entry(&traj.user).or_insert(0);
        for (point_idx, p) in traj.points.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                traj.user,
                idx,
                point_idx,
                format_timestamp(p.timestamp),
                p.lat,
                p.lon,
                p.location
            )?;
        }
        *idx += 1;
    }
    Ok(())
}

/// Read a trajectory TSV previously written by [`write_trajectories`].
///
/// Trajectory order follows the file; the user count and POI registry are
/// rebuilt from the points.
pub fn read_trajectories<R: BufRead>(reader: R) -> Result<Dataset, ParseError> {
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut current_key: Option<(UserId, usize)> = None;
    let mut registry: HashMap<LocationId, Coord> = HashMap::new();
    let mut users: BTreeSet<UserId> = BTreeSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(ParseError::Malformed {
                line: line_no,
                reason: format!("expected 7 tab-separated fields, got {}", fields.len()),
            });
        }
        let malformed = |reason: String| ParseError::Malformed { line: line_no, reason };
        let user = UserId::from(fields[0]);
        let traj_idx: usize = fields[1]
            .parse()
            .map_err(|_| malformed(format!("invalid trajectory index: {}", fields[1])))?;
        let timestamp = parse_timestamp(fields[3]).map_err(|r| malformed(r))?;
        let lat: f64 = fields[4]
            .parse()
            .map_err(|_| malformed(format!("invalid latitude: {}", fields[4])))?;
        let lon: f64 = fields[5]
            .parse()
            .map_err(|_| malformed(format!("invalid longitude: {}", fields[5])))?;
        let location = LocationId::from(fields[6]);

        users.insert(user.clone());
        if !location.is_suppressed() {
            registry
                .entry(location.clone())
                .or_insert_with(|| Coord::new(lat, lon));
        }
        let point = TrajPoint { location, timestamp, lat, lon };
        let key = (user.clone(), traj_idx);
        if current_key.as_ref() != Some(&key) {
            trajectories.push(Trajectory { user, points: Vec::new() });
            current_key = Some(key);
        }
        trajectories.last_mut().unwrap().points.push(point);
    }

    Ok(Dataset {
        trajectories,
        user_count: users.len(),
        poi_registry: registry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn checkin(user: &str, ts: i64, lat: f64, lon: f64, loc: &str) -> CheckIn {
        CheckIn {
            user: UserId::from(user),
            timestamp: ts,
            lat,
            lon,
            location: LocationId::from(loc),
        }
    }

    #[test]
    fn parses_gowalla_style_line() {
        let input = "12\t2010-10-19T23:55:27Z\t30.2359\t-97.7951\t22847";
        let (checkins, diags) = parse_checkins(Cursor::new(input), ParseMode::Strict).unwrap();
        assert!(diags.is_empty());
        assert_eq!(
            checkins,
            vec![checkin("12", 1287532527, 30.2359, -97.7951, "22847")]
        );
    }

    #[test]
    fn empty_stream_yields_nothing() {
        let (checkins, diags) = parse_checkins(Cursor::new(""), ParseMode::Strict).unwrap();
        assert!(checkins.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn out_of_range_latitude_is_malformed() {
        let input = "1\t2010-10-19T23:55:27Z\t91.0\t0.0\t5";
        let (checkins, diags) = parse_checkins(Cursor::new(input), ParseMode::Lenient).unwrap();
        assert!(checkins.is_empty());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 1);

        let err = parse_checkins(Cursor::new(input), ParseMode::Strict).unwrap_err();
        match err {
            ParseError::Malformed { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn strict_mode_reports_first_bad_line() {
        let input = "1\t2010-10-19T23:55:27Z\t10.0\t0.0\t5\nnot a line\n";
        let err = parse_checkins(Cursor::new(input), ParseMode::Strict).unwrap_err();
        match err {
            ParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn pre_epoch_timestamp_is_malformed() {
        let input = "1\t1969-12-31T23:59:59Z\t10.0\t0.0\t5";
        let (checkins, diags) = parse_checkins(Cursor::new(input), ParseMode::Lenient).unwrap();
        assert!(checkins.is_empty());
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn single_checkin_single_trajectory() {
        let ds = segment_trajectories(&[checkin("u", 100, 1.0, 2.0, "a")], 21_600);
        assert_eq!(ds.trajectories.len(), 1);
        assert_eq!(ds.trajectories[0].len(), 1);
        assert_eq!(ds.user_count, 1);
    }

    #[test]
    fn gap_below_session_gap_keeps_one_trajectory() {
        let cs = vec![
            checkin("u", 0, 1.0, 2.0, "a"),
            checkin("u", 3600, 1.0, 2.5, "b"),
        ];
        let ds = segment_trajectories(&cs, 21_600);
        assert_eq!(ds.trajectories.len(), 1);
        assert_eq!(ds.trajectories[0].len(), 2);
    }

    #[test]
    fn gap_above_session_gap_splits() {
        let cs = vec![
            checkin("u", 0, 1.0, 2.0, "a"),
            checkin("u", 3600, 1.0, 2.5, "b"),
        ];
        let ds = segment_trajectories(&cs, 1800);
        assert_eq!(ds.trajectories.len(), 2);
        assert_eq!(ds.trajectories[0].len(), 1);
        assert_eq!(ds.trajectories[1].len(), 1);
    }

    #[test]
    fn registry_keeps_first_seen_coordinates() {
        let cs = vec![
            checkin("u", 0, 1.0, 2.0, "a"),
            checkin("v", 10, 9.0, 9.0, "a"),
        ];
        let ds = segment_trajectories(&cs, 21_600);
        assert_eq!(ds.poi_registry[&LocationId::from("a")], Coord::new(1.0, 2.0));
        assert_eq!(ds.user_count, 2);
    }

    #[test]
    fn trajectory_file_round_trip() {
        let cs = vec![
            checkin("u", 0, 1.0, 2.0, "a"),
            checkin("u", 600, 1.5, 2.0, "b"),
            checkin("v", 50_000, -3.25, 120.0, "c"),
        ];
        let ds = segment_trajectories(&cs, 21_600);
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &ds).unwrap();
        let back = read_trajectories(Cursor::new(&buf)).unwrap();
        assert_eq!(back.trajectories, ds.trajectories);
        assert_eq!(back.user_count, ds.user_count);
    }

    fn checkin_strategy() -> impl Strategy<Value = CheckIn> {
        (
            0u8..5,
            0i64..2_000_000_000,
            -89.9f64..89.9,
            -179.9f64..179.9,
            0u16..40,
        )
            .prop_map(|(u, ts, lat, lon, loc)| {
                checkin(&format!("u{u}"), ts, lat, lon, &format!("p{loc}"))
            })
    }

    proptest! {
        #[test]
        fn parse_then_serialize_round_trips(cs in proptest::collection::vec(checkin_strategy(), 0..40)) {
            let mut buf = Vec::new();
            write_checkins(&mut buf, &cs).unwrap();
            let (parsed, diags) = parse_checkins(Cursor::new(&buf), ParseMode::Strict).unwrap();
            prop_assert!(diags.is_empty());
            prop_assert_eq!(&parsed, &cs);
            let mut buf2 = Vec::new();
            write_checkins(&mut buf2, &parsed).unwrap();
            prop_assert_eq!(buf, buf2);
        }

        #[test]
        fn segmentation_preserves_per_user_order(
            cs in proptest::collection::vec(checkin_strategy(), 1..60),
            gap in 1i64..100_000_000,
        ) {
            let ds = segment_trajectories(&cs, gap);
            // Concatenating each user's trajectories recovers that user's
            // time-sorted check-ins exactly.
            let users: BTreeSet<_> = cs.iter().map(|c| c.user.clone()).collect();
            for user in users {
                let mut expected: Vec<&CheckIn> = cs.iter().filter(|c| c.user == user).collect();
                expected.sort_by(|a, b| {
                    a.timestamp.cmp(&b.timestamp).then_with(|| a.location.cmp(&b.location))
                });
                let got: Vec<TrajPoint> = ds
                    .trajectories
                    .iter()
                    .filter(|t| t.user == user)
                    .flat_map(|t| t.points.iter().cloned())
                    .collect();
                prop_assert_eq!(got.len(), expected.len());
                for (g, e) in got.iter().zip(expected.iter()) {
                    prop_assert_eq!(&g.location, &e.location);
                    prop_assert_eq!(g.timestamp, e.timestamp);
                }
                // Timestamps non-decreasing inside every trajectory.
                for t in ds.trajectories.iter().filter(|t| t.user == user) {
                    prop_assert!(!t.is_empty());
                    for w in t.points.windows(2) {
                        prop_assert!(w[0].timestamp <= w[1].timestamp);
                        prop_assert!(w[1].timestamp - w[0].timestamp <= gap);
                    }
                }
            }
        }
    }
}
