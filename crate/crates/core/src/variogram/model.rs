use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Lag;

/// Shape of the joint variogram applied to the metric space-time distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Spherical,
    /// `1 − exp(−d/range)`; the range is the distance constant, not the practical range.
    Exponential,
    /// Linear up to the range, flat beyond it.
    #[serde(alias = "linear")]
    LinearBounded,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Spherical, Family::Exponential, Family::LinearBounded];

    /// Normalized structure function of `r = d / range`, rising from 0 to 1.
    pub fn shape(self, r: f64) -> f64 {
        match self {
            Family::Spherical => {
                if r >= 1.0 {
                    1.0
                } else {
                    1.5 * r - 0.5 * r * r * r
                }
            }
            Family::Exponential => -(-r).exp_m1(),
            Family::LinearBounded => r.min(1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Spherical => "spherical",
            Family::Exponential => "exponential",
            Family::LinearBounded => "linear",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spherical" | "spheric" | "sph" => Ok(Family::Spherical),
            "exponential" | "exp" => Ok(Family::Exponential),
            "linear" | "linear_bounded" => Ok(Family::LinearBounded),
            other => Err(Error::InvalidParameter(format!("unknown variogram family '{other}'"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric space-time variogram `γ(h, u) = γ_joint(sqrt(h² + (K·u)²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub family: Family,
    /// partial sill, (µg/m³)²
    pub sill: f64,
    /// nugget, (µg/m³)²
    pub nugget: f64,
    /// meters
    pub range: f64,
    /// space-time anisotropy, meters per second
    #[serde(rename = "K")]
    pub k: f64,
}

impl VariogramModel {
    pub fn new(family: Family, sill: f64, nugget: f64, range: f64, k: f64) -> Result<Self> {
        let m = Self {
            family,
            sill,
            nugget,
            range,
            k,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sill > 0.0
            && self.sill.is_finite()
            && self.nugget >= 0.0
            && self.nugget.is_finite()
            && self.range > 0.0
            && self.range.is_finite()
            && self.k >= 0.0
            && self.k.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "variogram model needs sill > 0, nugget >= 0, range > 0, K >= 0; got {self:?}"
            )))
        }
    }

    /// Plateau of the model, nugget plus partial sill.
    pub fn total_sill(&self) -> f64 {
        self.sill + self.nugget
    }

    /// Semivariance at metric distance `d`; zero exactly at the origin.
    pub fn gamma_at(&self, d: f64) -> f64 {
        if d <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * self.family.shape(d / self.range)
        }
    }

    /// Right-limit of the variogram at `d`: equals the nugget at zero distance.
    ///
    /// This is the semivariance between two distinct measurements, where the
    /// nugget carries independent measurement error.
    pub fn gamma_between(&self, d: f64) -> f64 {
        if d <= 0.0 {
            self.nugget
        } else {
            self.gamma_at(d)
        }
    }

    pub fn gamma(&self, h: f64, u: f64) -> f64 {
        self.gamma_at(self.distance(h, u))
    }

    pub fn gamma_lag(&self, lag: Lag) -> f64 {
        self.gamma(lag.h, lag.u)
    }

    pub fn distance(&self, h: f64, u: f64) -> f64 {
        h.hypot(self.k * u)
    }

    /// Covariance `C(d) = C(0) − γ(d)` for the second-order stationary case.
    pub fn covariance_at(&self, d: f64) -> f64 {
        self.total_sill() - self.gamma_at(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table_sk() -> VariogramModel {
        VariogramModel::new(Family::Spherical, 82.30, 5.00, 30415.43, 105.16).unwrap()
    }

    #[test]
    fn zero_lag() {
        for family in Family::ALL {
            let m = VariogramModel::new(family, 3.0, 1.0, 10.0, 2.0).unwrap();
            assert_eq!(m.gamma(0.0, 0.0), 0.0);
            assert_eq!(m.gamma_between(0.0), 1.0);
        }
    }

    #[test]
    fn spherical_reference_values() {
        let m = table_sk();
        assert_relative_eq!(m.gamma(30415.43, 0.0), 87.30, epsilon = 1e-9);
        assert_relative_eq!(m.gamma(1e6, 0.0), 87.30, epsilon = 1e-9);
        assert_relative_eq!(m.gamma(30415.43 / 2.0, 0.0), 61.58, epsilon = 0.01);
        // temporal lag converted through K
        assert_relative_eq!(m.gamma(0.0, 30415.43 / 2.0 / 105.16), 61.58, epsilon = 0.01);
    }

    #[test]
    fn family_shapes() {
        assert_relative_eq!(Family::Exponential.shape(1.0), 1.0 - (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(Family::LinearBounded.shape(0.25), 0.25);
        assert_eq!(Family::LinearBounded.shape(4.0), 1.0);
        assert_eq!(Family::Spherical.shape(2.0), 1.0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(VariogramModel::new(Family::Spherical, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(VariogramModel::new(Family::Spherical, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(VariogramModel::new(Family::Spherical, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(VariogramModel::new(Family::Spherical, 1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        let json = serde_json::to_string(&table_sk()).unwrap();
        assert!(json.contains("\"K\":105.16"));
        let back: VariogramModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table_sk());
    }

    proptest! {
        #[test]
        fn nondecreasing_and_bounded(
            fam in 0usize..3, sill in 0.1..100.0f64, nugget in 0.0..10.0f64,
            range in 1.0..1e4f64, d1 in 0.0..5e4f64, d2 in 0.0..5e4f64
        ) {
            let m = VariogramModel::new(Family::ALL[fam], sill, nugget, range, 1.0).unwrap();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(m.gamma_at(lo) <= m.gamma_at(hi) + 1e-12);
            prop_assert!(m.gamma_at(hi) <= m.total_sill() + 1e-12);
        }
    }
}
