//! Space-time points, observations and the anisotropic metric distance.

use serde::{Deserialize, Serialize};

/// A location in planar meters plus a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    /// meters east of the projection origin
    pub x: f64,
    /// meters north of the projection origin
    pub y: f64,
    /// seconds since the Unix epoch
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }
}

/// A calibrated (or raw) concentration reading in µg/m³.
///
/// Negative values may appear after calibration and are kept as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub point: SpaceTimePoint,
    pub sensor_id: String,
    pub value: f64,
}

impl Observation {
    pub fn new(sensor_id: impl Into<String>, point: SpaceTimePoint, value: f64) -> Self {
        Self {
            point,
            sensor_id: sensor_id.into(),
            value,
        }
    }

    pub fn with_value(&self, value: f64) -> Self {
        Self {
            point: self.point,
            sensor_id: self.sensor_id.clone(),
            value,
        }
    }
}

/// Unsigned separation between two space-time points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lag {
    /// spatial separation, meters
    pub h: f64,
    /// temporal separation, seconds
    pub u: f64,
}

impl Lag {
    /// Combined distance `sqrt(h² + (K·u)²)` for an anisotropy ratio `k` in m/s.
    pub fn metric(&self, k: f64) -> f64 {
        self.h.hypot(k * self.u)
    }
}

/// Euclidean spatial separation and absolute time separation.
pub fn lag(a: &SpaceTimePoint, b: &SpaceTimePoint) -> Lag {
    Lag {
        h: (a.x - b.x).hypot(a.y - b.y),
        u: (a.t - b.t).abs(),
    }
}

/// Space-time distance under the metric model, `k` converting seconds to meters.
pub fn metric_distance(a: &SpaceTimePoint, b: &SpaceTimePoint, k: f64) -> f64 {
    lag(a, b).metric(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, y, t)
    }

    #[test]
    fn lag_examples() {
        let l = lag(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 0.0));
        assert_eq!((l.h, l.u), (0.0, 0.0));
        let l = lag(&p(0.0, 0.0, 0.0), &p(3.0, 4.0, 0.0));
        assert_eq!((l.h, l.u), (5.0, 0.0));
        let l = lag(&p(0.0, 0.0, 10.0), &p(3.0, 4.0, 2.0));
        assert_eq!((l.h, l.u), (5.0, 8.0));
    }

    #[test]
    fn metric_examples() {
        let a = p(12.0, -3.0, 99.0);
        assert_eq!(metric_distance(&a, &a, 42.0), 0.0);
        assert_eq!(metric_distance(&p(0.0, 0.0, 0.0), &p(3.0, 4.0, 0.0), 100.0), 5.0);
        let d = metric_distance(&p(0.0, 0.0, 0.0), &p(3.0, 4.0, 2.0), 10.0);
        assert_relative_eq!(d, 425f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(d, 20.6155, epsilon = 1e-4);
    }

    fn point() -> impl Strategy<Value = SpaceTimePoint> {
        (-1e4..1e4f64, -1e4..1e4f64, 0.0..1e5f64).prop_map(|(x, y, t)| p(x, y, t))
    }

    proptest! {
        #[test]
        fn pseudometric(a in point(), b in point(), c in point(), k in 0.0..200.0f64) {
            let ab = metric_distance(&a, &b, k);
            let ba = metric_distance(&b, &a, k);
            let ac = metric_distance(&a, &c, k);
            let cb = metric_distance(&c, &b, k);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= ac + cb + 1e-9 * (1.0 + ab));
        }

        #[test]
        fn zero_k_is_spatial(a in point(), b in point()) {
            prop_assert_eq!(metric_distance(&a, &b, 0.0), (a.x - b.x).hypot(a.y - b.y));
        }

        #[test]
        fn lag_symmetric(a in point(), b in point()) {
            prop_assert_eq!(lag(&a, &b), lag(&b, &a));
        }
    }
}
