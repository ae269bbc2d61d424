//! Simple kriging on station residuals, ordinary kriging and kriging with
//! the station series as external drift.
//!
//! All three share the moving k-nearest neighborhood under the fitted
//! space-time metric. OK and KED are assembled in variogram form with
//! Lagrange borders; SK uses the covariance form `C(d) = C(0) − γ(d)`.

use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Observation, SpaceTimePoint};
use crate::ingest::ReferenceSeries;
use crate::linalg::{solve, SquareMatrix};
use crate::variogram::{ResidualKind, VariogramModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KrigingMethod {
    /// simple kriging with the station series as known mean
    Sk,
    /// ordinary kriging
    Ok,
    /// kriging with external drift `f0 = 1`, `f1 = F(t)`
    Ked,
}

impl KrigingMethod {
    pub const ALL: [KrigingMethod; 3] = [KrigingMethod::Sk, KrigingMethod::Ok, KrigingMethod::Ked];

    pub fn needs_reference(self) -> bool {
        !matches!(self, KrigingMethod::Ok)
    }

    /// Residual quantity whose variogram drives this method.
    pub fn residual_kind(self) -> ResidualKind {
        match self {
            KrigingMethod::Sk => ResidualKind::StationResidual,
            KrigingMethod::Ok => ResidualKind::Raw,
            KrigingMethod::Ked => ResidualKind::DriftResidual,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KrigingMethod::Sk => "sk",
            KrigingMethod::Ok => "ok",
            KrigingMethod::Ked => "ked",
        }
    }
}

impl FromStr for KrigingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sk" => Ok(KrigingMethod::Sk),
            "ok" => Ok(KrigingMethod::Ok),
            "ked" => Ok(KrigingMethod::Ked),
            other => Err(Error::InvalidParameter(format!("unknown kriging method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodConfig {
    /// number of nearest observations
    pub k: usize,
    /// metric-distance cutoff, meters
    pub max_radius: Option<f64>,
}

impl Default for NeighborhoodConfig {
    fn default() -> Self {
        Self {
            k: 50,
            max_radius: None,
        }
    }
}

/// Treatment of a target that coincides with a datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// right-hand side uses γ(0⁺) = nugget, filtering measurement error
    #[default]
    Filter,
    /// right-hand side uses γ(0) = 0, honouring the datum exactly
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// µg/m³
    pub value: f64,
    /// kriging variance, (µg/m³)²; absent for deterministic interpolators
    pub variance: Option<f64>,
    pub n_neighbors: usize,
}

/// Full output of one kriging solve.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingSolution {
    pub prediction: Prediction,
    /// one weight per distinct neighbor location
    pub weights: Vec<f64>,
    /// Lagrange multipliers (none for SK, one for OK, two for KED)
    pub multipliers: Vec<f64>,
    /// KED degraded to OK because the drift was constant over the neighborhood
    pub fell_back_to_ok: bool,
}

/// Indices of the `cfg.k` observations closest to `target` under the metric
/// with anisotropy `k_aniso`, nearest first. Ties go to the earlier
/// timestamp, then the lower sensor id.
pub fn select_neighbors(
    target: &SpaceTimePoint,
    obs: &[Observation],
    cfg: &NeighborhoodConfig,
    k_aniso: f64,
) -> Result<Vec<usize>> {
    if obs.is_empty() {
        return Err(Error::InsufficientData("no observations to krige from".into()));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("neighborhood size must be at least 1".into()));
    }
    let mut cand: Vec<(f64, usize)> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            (
                (o.point.x - target.x)
                    .hypot(o.point.y - target.y)
                    .hypot(k_aniso * (o.point.t - target.t)),
                i,
            )
        })
        .filter(|&(d, _)| cfg.max_radius.is_none_or(|r| d <= r))
        .collect();
    if cand.is_empty() {
        return Err(Error::NoNeighbors);
    }
    let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        a.0.total_cmp(&b.0)
            .then_with(|| obs[a.1].point.t.total_cmp(&obs[b.1].point.t))
            .then_with(|| obs[a.1].sensor_id.cmp(&obs[b.1].sensor_id))
            .then(a.1.cmp(&b.1))
    };
    if cand.len() > cfg.k {
        cand.select_nth_unstable_by(cfg.k - 1, order);
        cand.truncate(cfg.k);
    }
    cand.sort_by(order);
    Ok(cand.into_iter().map(|(_, i)| i).collect())
}

#[derive(Debug, Clone, Copy)]
struct Datum {
    point: SpaceTimePoint,
    value: f64,
    /// index of the first contributing neighbor
    origin: usize,
}

/// Collapses observations at identical (x, y, t) into their mean.
fn merge_duplicates(neighbors: impl IntoIterator<Item = (SpaceTimePoint, f64)>) -> Vec<Datum> {
    let mut merged: Vec<(Datum, usize)> = Vec::new();
    for (i, (point, value)) in neighbors.into_iter().enumerate() {
        match merged.iter_mut().find(|(d, _)| d.point == point) {
            Some((d, count)) => {
                *count += 1;
                d.value += (value - d.value) / *count as f64;
            }
            None => merged.push((
                Datum {
                    point,
                    value,
                    origin: i,
                },
                1,
            )),
        }
    }
    if merged.iter().any(|(_, c)| *c > 1) {
        log::debug!("averaged co-located duplicate observations before kriging");
    }
    merged.into_iter().map(|(d, _)| d).collect()
}

fn distance(model: &VariogramModel, a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y).hypot(model.k * (a.t - b.t))
}

/// Variogram matrix between data, γ(0) on the diagonal and γ(0⁺) for
/// distinct data at zero metric distance.
fn gamma_matrix(data: &[Datum], model: &VariogramModel, size: usize) -> Result<SquareMatrix> {
    let mut m = SquareMatrix::zeros(size);
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            let d = distance(model, &data[i].point, &data[j].point);
            if d == 0.0 && model.nugget == 0.0 {
                return Err(Error::CoincidentPoints {
                    first: data[i].origin,
                    second: data[j].origin,
                });
            }
            let g = model.gamma_between(d);
            m.set(i, j, g);
            m.set(j, i, g);
        }
    }
    Ok(m)
}

fn target_gamma(data: &[Datum], target: &SpaceTimePoint, model: &VariogramModel, mode: TargetMode) -> Vec<f64> {
    data.iter()
        .map(|d| {
            let dist = distance(model, &d.point, target);
            match (dist == 0.0, mode) {
                (true, TargetMode::Filter) => model.nugget,
                (true, TargetMode::Exact) => 0.0,
                (false, _) => model.gamma_at(dist),
            }
        })
        .collect()
}

const CONSTRAINT_TOLERANCE: f64 = 1e-9;

fn check_constraint(what: &str, got: f64, want: f64) -> Result<()> {
    let err = (got - want).abs();
    if err > CONSTRAINT_TOLERANCE * want.abs().max(1.0) {
        return Err(Error::IllConditioned(format!("{what}: constraint residual {err:e}")));
    }
    Ok(())
}

fn clamp_variance(v: f64) -> f64 {
    if v < 0.0 {
        log::warn!("kriging variance {v:e} clamped to zero");
        0.0
    } else {
        v
    }
}

fn to_points(neighbors: &[Observation]) -> impl Iterator<Item = (SpaceTimePoint, f64)> + '_ {
    neighbors.iter().map(|o| (o.point, o.value))
}

fn require_nonempty(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InsufficientData("kriging needs at least one neighbor".into()))
    } else {
        Ok(())
    }
}

/// Ordinary kriging: weights sum to one through a single Lagrange multiplier.
pub fn krige_ok(
    target: &SpaceTimePoint,
    neighbors: &[Observation],
    model: &VariogramModel,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    require_nonempty(neighbors.len())?;
    ok_system(target, &merge_duplicates(to_points(neighbors)), model, mode)
}

fn ok_system(
    target: &SpaceTimePoint,
    data: &[Datum],
    model: &VariogramModel,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    let n = data.len();
    let mut a = gamma_matrix(data, model, n + 1)?;
    for i in 0..n {
        a.set(i, n, 1.0);
        a.set(n, i, 1.0);
    }
    let g0 = target_gamma(data, target, model, mode);
    let mut b = g0.clone();
    b.push(1.0);
    let x = solve(&a, &b)?;
    let (weights, mu) = (x[..n].to_vec(), x[n]);
    check_constraint("ordinary kriging weight sum", weights.iter().sum(), 1.0)?;

    let value = weights.iter().zip(data).map(|(w, d)| w * d.value).sum();
    let variance = weights.iter().zip(&g0).map(|(w, g)| w * g).sum::<f64>() + mu;
    Ok(KrigingSolution {
        prediction: Prediction {
            value,
            variance: Some(clamp_variance(variance)),
            n_neighbors: n,
        },
        weights,
        multipliers: vec![mu],
        fell_back_to_ok: false,
    })
}

/// Simple kriging of station residuals `z − F(t)`, adding `F` back at the target.
pub fn krige_sk(
    target: &SpaceTimePoint,
    neighbors: &[Observation],
    model: &VariogramModel,
    reference: &ReferenceSeries,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    require_nonempty(neighbors.len())?;
    let mean_target = reference.interpolate(target.t)?;
    let residuals = neighbors
        .iter()
        .enumerate()
        .map(|(i, o)| {
            Ok((
                o.point,
                o.value - reference.interpolate(o.point.t).map_err(|e| Error::at(i, e))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    sk_system(target, &merge_duplicates(residuals), model, mean_target, mode)
}

fn sk_system(
    target: &SpaceTimePoint,
    residuals: &[Datum],
    model: &VariogramModel,
    mean_target: f64,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    let n = residuals.len();
    let c0 = model.total_sill();
    let mut c = gamma_matrix(residuals, model, n)?;
    for i in 0..n {
        for j in 0..n {
            c.set(i, j, if i == j { c0 } else { c0 - c.get(i, j) });
        }
    }
    let rhs: Vec<f64> = target_gamma(residuals, target, model, mode)
        .into_iter()
        .map(|g| c0 - g)
        .collect();
    let weights = solve(&c, &rhs)?;
    let value = mean_target + weights.iter().zip(residuals).map(|(w, d)| w * d.value).sum::<f64>();
    let variance = c0 - weights.iter().zip(&rhs).map(|(w, c)| w * c).sum::<f64>();
    Ok(KrigingSolution {
        prediction: Prediction {
            value,
            variance: Some(clamp_variance(variance)),
            n_neighbors: n,
        },
        weights,
        multipliers: Vec::new(),
        fell_back_to_ok: false,
    })
}

/// Kriging with external drift on `f0 = 1` and `f1 = F(t)`.
///
/// When `F` is constant across the neighborhood the drift column is
/// collinear with the unit column and the solve falls back to OK.
pub fn krige_ked(
    target: &SpaceTimePoint,
    neighbors: &[Observation],
    model: &VariogramModel,
    reference: &ReferenceSeries,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    require_nonempty(neighbors.len())?;
    let drift_target = reference.interpolate(target.t)?;
    let data = merge_duplicates(to_points(neighbors));
    let drift = data
        .iter()
        .map(|d| reference.interpolate(d.point.t).map_err(|e| Error::at(d.origin, e)))
        .collect::<Result<Vec<_>>>()?;
    ked_system(target, &data, &drift, drift_target, model, mode)
}

fn ked_system(
    target: &SpaceTimePoint,
    data: &[Datum],
    drift: &[f64],
    drift_target: f64,
    model: &VariogramModel,
    mode: TargetMode,
) -> Result<KrigingSolution> {
    let n = data.len();
    let lo = drift.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = drift.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
        log::warn!("external drift constant over the neighborhood; using ordinary kriging");
        let mut s = ok_system(target, data, model, mode)?;
        s.fell_back_to_ok = true;
        return Ok(s);
    }
    let mut a = gamma_matrix(data, model, n + 2)?;
    for (i, &f) in drift.iter().enumerate() {
        a.set(i, n, 1.0);
        a.set(n, i, 1.0);
        a.set(i, n + 1, f);
        a.set(n + 1, i, f);
    }
    let g0 = target_gamma(data, target, model, mode);
    let mut b = g0.clone();
    b.push(1.0);
    b.push(drift_target);
    let x = solve(&a, &b)?;
    let weights = x[..n].to_vec();
    let (mu0, mu1) = (x[n], x[n + 1]);
    check_constraint("external drift unit constraint", weights.iter().sum(), 1.0)?;
    check_constraint(
        "external drift constraint",
        weights.iter().zip(drift).map(|(w, f)| w * f).sum(),
        drift_target,
    )?;

    let value = weights.iter().zip(data).map(|(w, d)| w * d.value).sum();
    let variance = weights.iter().zip(&g0).map(|(w, g)| w * g).sum::<f64>() + mu0 + mu1 * drift_target;
    Ok(KrigingSolution {
        prediction: Prediction {
            value,
            variance: Some(clamp_variance(variance)),
            n_neighbors: n,
        },
        weights,
        multipliers: vec![mu0, mu1],
        fell_back_to_ok: false,
    })
}

/// Everything needed to krige at arbitrary targets.
#[derive(Debug, Clone, Copy)]
pub struct Kriger<'a> {
    pub method: KrigingMethod,
    pub obs: &'a [Observation],
    pub model: VariogramModel,
    pub reference: Option<&'a ReferenceSeries>,
    pub neighborhood: NeighborhoodConfig,
    pub mode: TargetMode,
}

impl<'a> Kriger<'a> {
    pub fn new(
        method: KrigingMethod,
        obs: &'a [Observation],
        model: VariogramModel,
        reference: Option<&'a ReferenceSeries>,
        neighborhood: NeighborhoodConfig,
    ) -> Result<Self> {
        model.validate()?;
        if method.needs_reference() && reference.is_none() {
            return Err(Error::InvalidParameter(format!(
                "method {} requires a reference series",
                method.name()
            )));
        }
        Ok(Self {
            method,
            obs,
            model,
            reference,
            neighborhood,
            mode: TargetMode::default(),
        })
    }

    pub fn with_mode(mut self, mode: TargetMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn solve(&self, target: &SpaceTimePoint) -> Result<KrigingSolution> {
        let idx = select_neighbors(target, self.obs, &self.neighborhood, self.model.k)?;
        let neighbors: Vec<Observation> = idx.iter().map(|&i| self.obs[i].clone()).collect();
        match self.method {
            KrigingMethod::Ok => krige_ok(target, &neighbors, &self.model, self.mode),
            KrigingMethod::Sk => krige_sk(
                target,
                &neighbors,
                &self.model,
                self.reference.expect("checked"),
                self.mode,
            ),
            KrigingMethod::Ked => krige_ked(
                target,
                &neighbors,
                &self.model,
                self.reference.expect("checked"),
                self.mode,
            ),
        }
    }

    pub fn predict(&self, target: &SpaceTimePoint) -> Result<Prediction> {
        self.solve(target).map(|s| s.prediction)
    }

    /// Per-target results in input order; one failing target does not
    /// affect the others.
    pub fn predict_batch(&self, targets: &[SpaceTimePoint]) -> Vec<Result<Prediction>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            targets.par_iter().map(|t| self.predict(t)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            targets.iter().map(|t| self.predict(t)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variogram::Family;
    use approx::assert_relative_eq;

    fn obs(id: &str, x: f64, y: f64, t: f64, v: f64) -> Observation {
        Observation::new(id, SpaceTimePoint::new(x, y, t), v)
    }

    fn model(nugget: f64) -> VariogramModel {
        VariogramModel::new(Family::Spherical, 10.0, nugget, 100.0, 1.0).unwrap()
    }

    #[test]
    fn neighbor_saturation_and_nearest() {
        let data = vec![
            obs("a", 0.0, 0.0, 0.0, 1.0),
            obs("a", 5.0, 0.0, 0.0, 2.0),
            obs("a", 9.0, 0.0, 0.0, 3.0),
        ];
        let cfg = NeighborhoodConfig {
            k: 10,
            max_radius: None,
        };
        let mut all = select_neighbors(&SpaceTimePoint::new(4.0, 0.0, 0.0), &data, &cfg, 1.0).unwrap();
        all.sort();
        assert_eq!(all, [0, 1, 2]);
        let one = NeighborhoodConfig { k: 1, max_radius: None };
        assert_eq!(
            select_neighbors(&SpaceTimePoint::new(8.0, 0.0, 0.0), &data, &one, 1.0).unwrap(),
            [2]
        );
    }

    #[test]
    fn neighbor_tie_break() {
        let data = vec![
            obs("b", 1.0, 0.0, 5.0, 1.0),
            obs("a", -1.0, 0.0, 5.0, 1.0),
            obs("z", 0.0, 1.0, 3.0, 1.0),
        ];
        let cfg = NeighborhoodConfig { k: 2, max_radius: None };
        let target = SpaceTimePoint::new(0.0, 0.0, 4.0);
        // all at distance sqrt(2) with K = 1; earlier time first, then sensor id
        assert_eq!(select_neighbors(&target, &data, &cfg, 1.0).unwrap(), [2, 1]);
    }

    #[test]
    fn neighbor_radius() {
        let data = vec![obs("a", 100.0, 0.0, 0.0, 1.0)];
        let cfg = NeighborhoodConfig {
            k: 3,
            max_radius: Some(10.0),
        };
        assert!(matches!(
            select_neighbors(&SpaceTimePoint::new(0.0, 0.0, 0.0), &data, &cfg, 1.0),
            Err(Error::NoNeighbors)
        ));
        assert!(select_neighbors(&SpaceTimePoint::new(0.0, 0.0, 0.0), &[], &cfg, 1.0).is_err());
    }

    #[test]
    fn ok_single_neighbor() {
        let s = krige_ok(
            &SpaceTimePoint::new(3.0, 4.0, 0.0),
            &[obs("a", 0.0, 0.0, 0.0, 7.5)],
            &model(1.0),
            TargetMode::Filter,
        )
        .unwrap();
        assert_eq!(s.weights, [1.0]);
        assert_eq!(s.prediction.value, 7.5);
    }

    #[test]
    fn ok_pure_nugget_averages() {
        let m = VariogramModel::new(Family::Spherical, 1e-9, 4.0, 1.0, 0.0).unwrap();
        let data = vec![
            obs("a", 10.0, 0.0, 0.0, 1.0),
            obs("a", 0.0, 25.0, 0.0, 2.0),
            obs("a", -40.0, -3.0, 0.0, 3.0),
        ];
        let s = krige_ok(&SpaceTimePoint::new(0.0, 0.0, 0.0), &data, &m, TargetMode::Filter).unwrap();
        for w in &s.weights {
            assert_relative_eq!(*w, 1.0 / 3.0, epsilon = 1e-8);
        }
        assert_relative_eq!(s.prediction.value, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn coincident_zero_nugget_is_singular() {
        let m = VariogramModel::new(Family::Spherical, 10.0, 0.0, 100.0, 0.0).unwrap();
        // same place, different time, K = 0
        let data = vec![
            obs("a", 0.0, 0.0, 0.0, 1.0),
            obs("a", 1.0, 0.0, 0.0, 1.0),
            obs("a", 0.0, 0.0, 9.0, 2.0),
        ];
        let err = krige_ok(&SpaceTimePoint::new(5.0, 0.0, 0.0), &data, &m, TargetMode::Filter).unwrap_err();
        assert!(matches!(err, Error::CoincidentPoints { first: 0, second: 2 }));
    }

    #[test]
    fn exact_duplicates_are_averaged() {
        let data = vec![obs("a", 0.0, 0.0, 0.0, 1.0), obs("b", 0.0, 0.0, 0.0, 3.0)];
        let s = krige_ok(
            &SpaceTimePoint::new(50.0, 0.0, 0.0),
            &data,
            &model(0.0),
            TargetMode::Filter,
        )
        .unwrap();
        assert_eq!(s.prediction.n_neighbors, 1);
        assert_eq!(s.prediction.value, 2.0);
    }

    #[test]
    fn sk_mean_reproduction() {
        let reference = ReferenceSeries::new(vec![(0.0, 40.0), (100.0, 60.0)]).unwrap();
        let data: Vec<_> = (0..5)
            .map(|i| {
                let t = i as f64 * 20.0;
                obs("a", i as f64 * 7.0, 3.0, t, reference.interpolate(t).unwrap())
            })
            .collect();
        let s = krige_sk(
            &SpaceTimePoint::new(1.0, 1.0, 50.0),
            &data,
            &model(1.0),
            &reference,
            TargetMode::Filter,
        )
        .unwrap();
        assert_relative_eq!(s.prediction.value, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn sk_half_covariance_weight() {
        // linear-bounded model with zero nugget: C(d) = C(0)/2 at d = range/2
        let m = VariogramModel::new(Family::LinearBounded, 8.0, 0.0, 100.0, 0.0).unwrap();
        let reference = ReferenceSeries::constant(30.0, 0.0, 10.0).unwrap();
        let s = krige_sk(
            &SpaceTimePoint::new(50.0, 0.0, 0.0),
            &[obs("a", 0.0, 0.0, 0.0, 34.0)],
            &m,
            &reference,
            TargetMode::Filter,
        )
        .unwrap();
        assert_relative_eq!(s.weights[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.prediction.value, 32.0, epsilon = 1e-12);
        assert_relative_eq!(s.prediction.variance.unwrap(), 8.0 - 0.5 * 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ked_constant_drift_falls_back() {
        let reference = ReferenceSeries::constant(30.0, 0.0, 100.0).unwrap();
        let data = vec![
            obs("a", 0.0, 0.0, 0.0, 1.0),
            obs("a", 30.0, 0.0, 10.0, 4.0),
            obs("a", 0.0, 20.0, 20.0, 2.0),
        ];
        let target = SpaceTimePoint::new(5.0, 5.0, 5.0);
        let ked = krige_ked(&target, &data, &model(1.0), &reference, TargetMode::Filter).unwrap();
        let ok = krige_ok(&target, &data, &model(1.0), TargetMode::Filter).unwrap();
        assert!(ked.fell_back_to_ok);
        assert_eq!(ked.prediction, ok.prediction);
    }

    #[test]
    fn ked_reproduces_exact_drift() {
        let reference = ReferenceSeries::new(vec![(0.0, 20.0), (50.0, 35.0), (100.0, 28.0)]).unwrap();
        let m = VariogramModel::new(Family::Exponential, 1e-6, 5.0, 30.0, 0.5).unwrap();
        let data: Vec<_> = (0..12)
            .map(|i| {
                let t = (i * 37 % 100) as f64;
                obs(
                    "a",
                    (i * 13 % 50) as f64,
                    (i * 7 % 30) as f64,
                    t,
                    2.0 + 3.0 * reference.interpolate(t).unwrap(),
                )
            })
            .collect();
        let target = SpaceTimePoint::new(10.0, 10.0, 64.0);
        let s = krige_ked(&target, &data, &m, &reference, TargetMode::Filter).unwrap();
        let expected = 2.0 + 3.0 * reference.interpolate(64.0).unwrap();
        assert_relative_eq!(s.prediction.value, expected, epsilon = 1e-6);
    }

    #[test]
    fn exactness_and_filtering() {
        let data = vec![
            obs("a", 0.0, 0.0, 0.0, 1.0),
            obs("a", 30.0, 0.0, 0.0, 4.0),
            obs("a", 0.0, 20.0, 0.0, 2.0),
        ];
        let at = SpaceTimePoint::new(30.0, 0.0, 0.0);
        let exact = krige_ok(&at, &data, &model(0.0), TargetMode::Filter).unwrap();
        assert_relative_eq!(exact.prediction.value, 4.0, epsilon = 1e-12);
        assert!(exact.prediction.variance.unwrap() < 1e-9);
        let filtered = krige_ok(&at, &data, &model(2.0), TargetMode::Filter).unwrap();
        assert!((filtered.prediction.value - 4.0).abs() > 1e-6);
        let honoured = krige_ok(&at, &data, &model(2.0), TargetMode::Exact).unwrap();
        assert_relative_eq!(honoured.prediction.value, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn kriger_requires_reference() {
        let data = vec![obs("a", 0.0, 0.0, 0.0, 1.0)];
        let nb = NeighborhoodConfig::default();
        assert!(Kriger::new(KrigingMethod::Ked, &data, model(1.0), None, nb).is_err());
        assert!(Kriger::new(KrigingMethod::Sk, &data, model(1.0), None, nb).is_err());
        assert!(Kriger::new(KrigingMethod::Ok, &data, model(1.0), None, nb).is_ok());
    }

    #[test]
    fn batch_matches_single_calls() {
        let data: Vec<_> = (0..40)
            .map(|i| {
                obs(
                    "a",
                    (i * 17 % 97) as f64,
                    (i * 29 % 89) as f64,
                    (i % 5) as f64 * 10.0,
                    ((i * i) % 23) as f64,
                )
            })
            .collect();
        let k = Kriger::new(
            KrigingMethod::Ok,
            &data,
            model(0.5),
            None,
            NeighborhoodConfig { k: 8, max_radius: None },
        )
        .unwrap();
        assert!(k.predict_batch(&[]).is_empty());
        let t = SpaceTimePoint::new(40.0, 40.0, 12.0);
        let targets = vec![t, SpaceTimePoint::new(5.0, 80.0, 33.0), t];
        let batch = k.predict_batch(&targets);
        assert_eq!(batch[0].as_ref().unwrap(), batch[2].as_ref().unwrap());
        for (target, got) in targets.iter().zip(&batch) {
            assert_eq!(got.as_ref().unwrap(), &k.predict(target).unwrap());
        }
    }
}
