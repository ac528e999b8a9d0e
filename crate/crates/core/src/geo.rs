//! Geodesic primitives: great-circle distance and speed-bounded reachability.

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84-style coordinate pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub lat: f64,
    pub lon: f64,
}

impl Coord {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Both components within the valid degree ranges.
    pub fn in_range(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance in meters between two coordinates.
///
/// Zero iff the coordinates are identical; symmetric in its arguments.
pub fn haversine(a: Coord, b: Coord) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let d_lat = (b.lat - a.lat).to_radians();
    let d_lon = (b.lon - a.lon).to_radians();
    let h = (d_lat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Whether a move from `a` at `t_a` to `b` at `t_b` stays within the maximum
/// speed `delta_speed` (meters/second), i.e. dis(a, b) / |t_a - t_b| <= delta.
///
/// When the timestamps coincide the move is reachable only if the distance is
/// zero; the guard avoids the division.
pub fn reachable(a: Coord, t_a: i64, b: Coord, t_b: i64, delta_speed: f64) -> bool {
    let dist = haversine(a, b);
    if t_a == t_b {
        return dist == 0.0;
    }
    let dt = (t_a - t_b).abs() as f64;
    dist <= delta_speed * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points_have_zero_distance() {
        let p = Coord::new(30.2359, -97.7951);
        assert_eq!(haversine(p, p), 0.0);
    }

    #[test]
    fn one_degree_of_longitude_at_equator() {
        // Closed form: R * pi / 180 = 111194.92664455874 m.
        let d = haversine(Coord::new(0.0, 0.0), Coord::new(0.0, 1.0));
        assert!((d - 111_194.926_644_558_74).abs() < 1e-6);
        assert!((d - 111_195.0).abs() <= 1.0);
    }

    #[test]
    fn reachable_zero_distance_any_timestamps() {
        let p = Coord::new(10.0, 10.0);
        assert!(reachable(p, 0, p, 0, 30.0));
        assert!(reachable(p, 0, p, 999, 30.0));
    }

    #[test]
    fn reachable_follows_speed_inequality() {
        // 1000 m in 100 s at delta 30 -> 10 m/s, reachable.
        let a = Coord::new(0.0, 0.0);
        let b = Coord::new(0.0, 1000.0 / 111_194.926_644_558_74);
        assert!(reachable(a, 0, b, 100, 30.0));
        // 10_000 m in 100 s -> 100 m/s, not reachable.
        let c = Coord::new(0.0, 10_000.0 / 111_194.926_644_558_74);
        assert!(!reachable(a, 0, c, 100, 30.0));
    }

    #[test]
    fn same_timestamp_distinct_points_not_reachable() {
        let a = Coord::new(0.0, 0.0);
        let b = Coord::new(0.0, 0.1);
        assert!(!reachable(a, 50, b, 50, 1e9));
    }

    fn coord_strategy() -> impl Strategy<Value = Coord> {
        (-90.0f64..90.0, -180.0f64..180.0).prop_map(|(lat, lon)| Coord::new(lat, lon))
    }

    proptest! {
        #[test]
        fn haversine_symmetric(a in coord_strategy(), b in coord_strategy()) {
            prop_assert_eq!(haversine(a, b), haversine(b, a));
        }

        #[test]
        fn haversine_triangle_inequality(
            a in coord_strategy(),
            b in coord_strategy(),
            c in coord_strategy(),
        ) {
            let ab = haversine(a, b);
            let bc = haversine(b, c);
            let ac = haversine(a, c);
            prop_assert!(ac <= (ab + bc) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn reachable_symmetric(
            a in coord_strategy(),
            b in coord_strategy(),
            t_a in 0i64..1_000_000,
            t_b in 0i64..1_000_000,
            delta in 1.0f64..200.0,
        ) {
            prop_assert_eq!(
                reachable(a, t_a, b, t_b, delta),
                reachable(b, t_b, a, t_a, delta)
            );
        }
    }
}
