//! Space-time inverse distance weighting and cross-validated choice of the
//! time-to-space conversion constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{compute_indicators, split_random};
use crate::geometry::{Observation, SpaceTimePoint};
use crate::krige::{select_neighbors, NeighborhoodConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdwConfig {
    /// distance exponent
    pub power: f64,
    /// squared time-to-space conversion, m²/s²
    pub c: f64,
    /// neighborhood size
    pub k: usize,
}

impl Default for IdwConfig {
    fn default() -> Self {
        Self {
            power: 2.0,
            c: 1.0,
            k: 50,
        }
    }
}

impl IdwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.power > 0.0) || !(self.c >= 0.0) || !self.c.is_finite() || self.k == 0 {
            return Err(Error::InvalidParameter(format!(
                "IDW needs p > 0, C >= 0, k >= 1; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Equivalent metric anisotropy: `d² = h² + C·u²` means `K = sqrt(C)`.
    pub fn anisotropy(&self) -> f64 {
        self.c.sqrt()
    }
}

/// Default search grid for C: 9 log-spaced values from 1e−2 to 1e6 m²/s².
pub fn default_c_candidates() -> Vec<f64> {
    (0..9).map(|i| 10f64.powi(i - 2)).collect()
}

fn idw_distance(a: &SpaceTimePoint, b: &SpaceTimePoint, c: f64) -> f64 {
    let dt = a.t - b.t;
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + c * dt * dt).sqrt()
}

/// Normalized weights over `neighbors`. Coincident samples (zero distance)
/// share the full weight equally.
pub fn idw_weights(target: &SpaceTimePoint, neighbors: &[Observation], cfg: &IdwConfig) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::InsufficientData("IDW needs at least one neighbor".into()));
    }
    let d: Vec<f64> = neighbors
        .iter()
        .map(|o| idw_distance(&o.point, target, cfg.c))
        .collect();
    let zeros = d.iter().filter(|&&v| v == 0.0).count();
    if zeros > 0 {
        let w = 1.0 / zeros as f64;
        return Ok(d.iter().map(|&v| if v == 0.0 { w } else { 0.0 }).collect());
    }
    let raw: Vec<f64> = d.iter().map(|&v| v.powf(-cfg.power)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

pub fn idw_predict(target: &SpaceTimePoint, neighbors: &[Observation], cfg: &IdwConfig) -> Result<f64> {
    let w = idw_weights(target, neighbors, cfg)?;
    Ok(w.iter().zip(neighbors).map(|(w, o)| w * o.value).sum())
}

/// Neighborhood selection plus [`idw_predict`].
#[derive(Debug, Clone, Copy)]
pub struct Idw<'a> {
    pub obs: &'a [Observation],
    pub cfg: IdwConfig,
    pub max_radius: Option<f64>,
}

impl<'a> Idw<'a> {
    pub fn new(obs: &'a [Observation], cfg: IdwConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            obs,
            cfg,
            max_radius: None,
        })
    }

    pub fn predict(&self, target: &SpaceTimePoint) -> Result<(f64, usize)> {
        let nb = NeighborhoodConfig {
            k: self.cfg.k,
            max_radius: self.max_radius,
        };
        let idx = select_neighbors(target, self.obs, &nb, self.cfg.anisotropy())?;
        let neighbors: Vec<Observation> = idx.iter().map(|&i| self.obs[i].clone()).collect();
        Ok((idw_predict(target, &neighbors, &self.cfg)?, neighbors.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CTuning {
    pub best: f64,
    /// (candidate, mean RMSE over folds)
    pub scores: Vec<(f64, f64)>,
}

/// Picks the candidate C with the lowest mean RMSE over a seeded random
/// `folds`-fold cross-validation at a 75 % training fraction.
pub fn tune_c(train: &[Observation], candidates: &[f64], base: &IdwConfig, folds: usize, seed: u64) -> Result<CTuning> {
    if candidates.len() < 2 {
        return Err(Error::InvalidParameter("C tuning needs at least 2 candidates".into()));
    }
    let splits = split_random(train.len(), 0.75, folds, seed)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let cfg = IdwConfig { c, ..*base };
        cfg.validate()?;
        let mut total = 0.0;
        for split in &splits {
            let fold_train: Vec<Observation> = split.train.iter().map(|&i| train[i].clone()).collect();
            let idw = Idw::new(&fold_train, cfg)?;
            let mut pred = Vec::with_capacity(split.test.len());
            let mut actual = Vec::with_capacity(split.test.len());
            for &i in &split.test {
                pred.push(idw.predict(&train[i].point)?.0);
                actual.push(train[i].value);
            }
            total += compute_indicators(&pred, &actual)?.rmse;
        }
        scores.push((c, total / splits.len() as f64));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(c, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((c, s)),
        })
        .map(|(c, _)| c)
        .expect("non-empty candidates");
    Ok(CTuning { best, scores })
}
