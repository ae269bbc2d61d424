//! Validation harness: scenario samplers, k-fold cross-validation over a
//! sweep of training fractions, and the BIAS / RMSE / CORR indicators.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Observation, SpaceTimePoint};
use crate::idw::{default_c_candidates, tune_c, Idw, IdwConfig};
use crate::ingest::ReferenceSeries;
use crate::krige::{Kriger, KrigingMethod, NeighborhoodConfig};
use crate::variogram::{
    default_h_max, empirical_variogram, fit_wls_multistart, prepare_residuals, BinGrid, Family, VariogramModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Indicators {
    pub bias: f64,
    pub rmse: f64,
    /// Pearson correlation; absent when either vector is constant
    pub corr: Option<f64>,
}

pub fn compute_indicators(pred: &[f64], actual: &[f64]) -> Result<Indicators> {
    if pred.len() != actual.len() {
        return Err(Error::InvalidParameter(format!(
            "prediction/actual length mismatch: {} vs {}",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("indicators of an empty sample".into()));
    }
    let n = pred.len() as f64;
    let bias = pred.iter().zip(actual).map(|(p, a)| p - a).sum::<f64>() / n;
    let mse = pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / n;
    let mp = pred.iter().sum::<f64>() / n;
    let ma = actual.iter().sum::<f64>() / n;
    let (mut spa, mut spp, mut saa) = (0.0, 0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        spa += (p - mp) * (a - ma);
        spp += (p - mp) * (p - mp);
        saa += (a - ma) * (a - ma);
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let corr = if constant(pred) || constant(actual) || spp == 0.0 || saa == 0.0 {
        None
    } else {
        Some((spa / (spp * saa).sqrt()).clamp(-1.0, 1.0))
    };
    Ok(Indicators {
        bias,
        rmse: mse.sqrt(),
        corr,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub fold: usize,
    /// sorted observation indices
    pub train: Vec<usize>,
    /// sorted observation indices, disjoint from `train`
    pub test: Vec<usize>,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "training fraction must lie in (0, 1), got {fraction}"
        )))
    }
}

fn check_sizes(n: usize, fraction: f64, folds: usize) -> Result<usize> {
    check_fraction(fraction)?;
    if folds == 0 {
        return Err(Error::InvalidParameter("fold count must be at least 1".into()));
    }
    let n_train = (n as f64 * fraction).floor() as usize;
    let n_test = n - n_train;
    if n_train == 0 || (n as f64) * (1.0 - fraction) < folds as f64 {
        return Err(Error::InsufficientData(format!(
            "{n} observations cannot support {folds} folds at training fraction {fraction}"
        )));
    }
    Ok(n_test)
}

fn complement(n: usize, test: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, &t) in test.iter().enumerate().take(n) {
        if t {
            held.push(i);
        } else {
            train.push(i);
        }
    }
    (train, held)
}

/// Each fold draws an independent random training set of `⌊n·fraction⌋`
/// indices; the rest is the test set.
pub fn split_random(n: usize, fraction: f64, folds: usize, seed: u64) -> Result<Vec<Split>> {
    let n_test = check_sizes(n, fraction, folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    Ok((0..folds)
        .map(|fold| {
            idx.shuffle(&mut rng);
            let mut held = vec![false; n];
            for &i in &idx[..n_test] {
                held[i] = true;
            }
            let (train, test) = complement(n, &held);
            Split { fold, train, test }
        })
        .collect())
}

/// Test sets built from contiguous, time-ordered runs of each sensor's
/// track, with geometric run lengths of mean `mean_segment_length`.
/// The test size is exactly `n − ⌊n·fraction⌋`.
pub fn split_segments(
    obs: &[Observation],
    fraction: f64,
    mean_segment_length: f64,
    folds: usize,
    seed: u64,
) -> Result<Vec<Split>> {
    let n = obs.len();
    let n_test = check_sizes(n, fraction, folds)?;
    if !(mean_segment_length >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mean segment length must be at least 1, got {mean_segment_length}"
        )));
    }
    let tracks = sensor_tracks(obs);
    // flattened track order plus the end (exclusive) of each position's track
    let mut order = Vec::with_capacity(n);
    let mut track_end = Vec::with_capacity(n);
    for track in tracks.values() {
        let end = order.len() + track.len();
        order.extend_from_slice(track);
        track_end.extend(std::iter::repeat_n(end, track.len()));
    }
    let lengths = Geometric::new(1.0 / mean_segment_length).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Vec::with_capacity(folds);
    for fold in 0..folds {
        let mut marked = vec![false; n];
        let mut count = 0;
        while count < n_test {
            let mut start = rng.random_range(0..n);
            let mut tries = 0;
            while marked[start] {
                tries += 1;
                start = if tries < 64 {
                    rng.random_range(0..n)
                } else {
                    // dense regime: walk to the next free slot
                    (start + 1) % n
                };
            }
            let run = 1 + lengths.sample(&mut rng) as usize;
            let mut pos = start;
            let mut len = 0;
            while pos < track_end[start] && !marked[pos] && len < run && count < n_test {
                marked[pos] = true;
                pos += 1;
                len += 1;
                count += 1;
            }
        }
        let mut held = vec![false; n];
        for (pos, &m) in marked.iter().enumerate() {
            if m {
                held[order[pos]] = true;
            }
        }
        let (train, test) = complement(n, &held);
        splits.push(Split { fold, train, test });
    }
    Ok(splits)
}

/// Observation indices per sensor, ordered by time.
pub fn sensor_tracks(obs: &[Observation]) -> BTreeMap<&str, Vec<usize>> {
    let mut tracks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, o) in obs.iter().enumerate() {
        tracks.entry(o.sensor_id.as_str()).or_default().push(i);
    }
    for track in tracks.values_mut() {
        track.sort_by(|&a, &b| obs[a].point.t.total_cmp(&obs[b].point.t).then(a.cmp(&b)));
    }
    tracks
}

/// Line label per observation from a sensor → line table.
pub fn assign_lines(obs: &[Observation], lines: &BTreeMap<String, String>) -> Result<Vec<String>> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| {
            lines.get(&o.sensor_id).cloned().ok_or_else(|| {
                Error::at(
                    i,
                    Error::InvalidParameter(format!("sensor '{}' has no line assignment", o.sensor_id)),
                )
            })
        })
        .collect()
}

/// Leave-one-line-out: one fold per distinct line, in sorted line order.
pub fn split_by_line(lines: &[String]) -> Result<Vec<Split>> {
    let distinct: BTreeSet<&str> = lines.iter().map(String::as_str).collect();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "leave-line-out needs at least 2 lines, found {}",
            distinct.len()
        )));
    }
    Ok(distinct
        .into_iter()
        .enumerate()
        .map(|(fold, line)| {
            let held: Vec<bool> = lines.iter().map(|l| l == line).collect();
            let (train, test) = complement(lines.len(), &held);
            Split { fold, train, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    RandomPoints,
    PathSegments {
        mean_segment_length: f64,
    },
    /// line label per observation
    LeaveLineOut {
        lines: Vec<String>,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::RandomPoints => "random",
            Scenario::PathSegments { .. } => "segments",
            Scenario::LeaveLineOut { .. } => "lines",
        }
    }

    /// Splits for one training fraction. For leave-line-out the held-out
    /// line is the test set and the training pool of the remaining lines
    /// is subsampled to `fraction`.
    pub fn splits(&self, obs: &[Observation], fraction: f64, folds: usize, seed: u64) -> Result<Vec<Split>> {
        match self {
            Scenario::RandomPoints => split_random(obs.len(), fraction, folds, seed),
            Scenario::PathSegments { mean_segment_length } => {
                split_segments(obs, fraction, *mean_segment_length, folds, seed)
            }
            Scenario::LeaveLineOut { lines } => {
                check_fraction(fraction)?;
                if lines.len() != obs.len() {
                    return Err(Error::InvalidParameter(format!(
                        "{} line labels for {} observations",
                        lines.len(),
                        obs.len()
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut splits = split_by_line(lines)?;
                for s in &mut splits {
                    let keep = ((s.train.len() as f64) * fraction).floor().max(1.0) as usize;
                    s.train.shuffle(&mut rng);
                    s.train.truncate(keep);
                    s.train.sort_unstable();
                }
                Ok(splits)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sk,
    Ok,
    Ked,
    Idw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sk, Method::Ok, Method::Ked, Method::Idw];

    pub fn kriging(self) -> Option<KrigingMethod> {
        match self {
            Method::Sk => Some(KrigingMethod::Sk),
            Method::Ok => Some(KrigingMethod::Ok),
            Method::Ked => Some(KrigingMethod::Ked),
            Method::Idw => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sk => "sk",
            Method::Ok => "ok",
            Method::Ked => "ked",
            Method::Idw => "idw",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "idw" => Ok(Method::Idw),
            other => other.parse::<KrigingMethod>().map(|k| match k {
                KrigingMethod::Sk => Method::Sk,
                KrigingMethod::Ok => Method::Ok,
                KrigingMethod::Ked => Method::Ked,
            }),
        }
    }
}

/// Spatial/temporal binning used when variograms are refitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    /// `None` uses half the largest pairwise distance of the training data
    pub h_max: Option<f64>,
    pub nh: usize,
    pub u_max: f64,
    pub nu: usize,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            h_max: None,
            nh: 15,
            u_max: 6.0 * 3600.0,
            nu: 15,
        }
    }
}

impl BinSpec {
    pub fn grid_for(&self, obs: &[Observation]) -> Result<BinGrid> {
        let h_max = self.h_max.unwrap_or_else(|| default_h_max(obs));
        BinGrid::uniform(h_max, self.nh, self.u_max, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelPolicy {
    /// fit a fresh variogram on every training set
    Refit { family: Family, bins: BinSpec },
    /// use one model per kriging method for every fold
    Fixed(BTreeMap<Method, VariogramModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdwPolicy {
    Fixed(f64),
    /// cross-validate C on each training set
    Tune(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub methods: Vec<Method>,
    pub scenario: Scenario,
    pub fractions: Vec<f64>,
    pub folds: usize,
    pub policy: ModelPolicy,
    pub neighborhood: NeighborhoodConfig,
    pub idw: IdwConfig,
    pub idw_policy: IdwPolicy,
    pub seed: u64,
}

impl CvConfig {
    pub fn new(methods: Vec<Method>, scenario: Scenario, fractions: Vec<f64>, seed: u64) -> Self {
        Self {
            methods,
            scenario,
            fractions,
            folds: 4,
            policy: ModelPolicy::Refit {
                family: Family::Spherical,
                bins: BinSpec::default(),
            },
            neighborhood: NeighborhoodConfig::default(),
            idw: IdwConfig::default(),
            idw_policy: IdwPolicy::Tune(default_c_candidates()),
            seed,
        }
    }
}

/// Result of one (method, fraction, fold) job.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub method: Method,
    pub fraction: f64,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// test points whose prediction failed and were left out
    pub n_failed: usize,
    pub outcome: std::result::Result<Indicators, String>,
    pub model: Option<VariogramModel>,
    pub idw_c: Option<f64>,
}

/// Fold-averaged indicators for one (method, fraction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub method: Method,
    pub scenario: String,
    pub fraction: f64,
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    pub corr: Option<f64>,
    /// cells left out of at least one average (failed, or CORR undefined)
    pub n_cells_skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub cells: Vec<CvCell>,
    pub rows: Vec<CvRow>,
}

fn fraction_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn run_cv(obs: &[Observation], reference: Option<&ReferenceSeries>, cfg: &CvConfig) -> Result<CvReport> {
    if cfg.methods.is_empty() || cfg.fractions.is_empty() {
        return Err(Error::InvalidParameter(
            "cross-validation needs methods and fractions".into(),
        ));
    }
    for &f in &cfg.fractions {
        check_fraction(f)?;
    }
    for m in &cfg.methods {
        if m.kriging().is_some_and(KrigingMethod::needs_reference) && reference.is_none() {
            return Err(Error::InvalidParameter(format!(
                "method {} requires a reference series",
                m.name()
            )));
        }
        if let (ModelPolicy::Fixed(models), Some(_)) = (&cfg.policy, m.kriging()) {
            if !models.contains_key(m) {
                return Err(Error::InvalidParameter(format!(
                    "no fixed model for method {}",
                    m.name()
                )));
            }
        }
    }
    cfg.idw.validate()?;

    let mut jobs = Vec::new();
    for (fi, &fraction) in cfg.fractions.iter().enumerate() {
        let splits = cfg
            .scenario
            .splits(obs, fraction, cfg.folds, fraction_seed(cfg.seed, fi))?;
        for split in splits {
            for &method in &cfg.methods {
                jobs.push((fi, fraction, method, split.clone()));
            }
        }
    }

    let run = |(fi, fraction, method, split): &(usize, f64, Method, Split)| {
        run_cell(
            obs,
            reference,
            cfg,
            *method,
            *fraction,
            split,
            fraction_seed(cfg.seed, *fi) ^ split.fold as u64,
        )
    };
    #[cfg(feature = "parallel")]
    let cells: Vec<CvCell> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<CvCell> = jobs.iter().map(run).collect();

    let mut rows = Vec::new();
    for &fraction in &cfg.fractions {
        for &method in &cfg.methods {
            let group: Vec<&CvCell> = cells
                .iter()
                .filter(|c| c.method == method && c.fraction == fraction)
                .collect();
            rows.push(summarize(method, cfg.scenario.name(), fraction, &group));
        }
    }
    Ok(CvReport { cells, rows })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(method: Method, scenario: &str, fraction: f64, cells: &[&CvCell]) -> CvRow {
    let ok: Vec<&Indicators> = cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
    let corr: Vec<f64> = ok.iter().filter_map(|i| i.corr).collect();
    CvRow {
        method,
        scenario: scenario.to_string(),
        fraction,
        bias: mean(&ok.iter().map(|i| i.bias).collect::<Vec<_>>()),
        rmse: mean(&ok.iter().map(|i| i.rmse).collect::<Vec<_>>()),
        corr: mean(&corr),
        n_cells_skipped: cells.len() - corr.len(),
    }
}

fn fit_for(
    method: KrigingMethod,
    train: &[Observation],
    reference: Option<&ReferenceSeries>,
    policy: &ModelPolicy,
) -> Result<VariogramModel> {
    match policy {
        ModelPolicy::Fixed(models) => {
            let m = match method {
                KrigingMethod::Sk => Method::Sk,
                KrigingMethod::Ok => Method::Ok,
                KrigingMethod::Ked => Method::Ked,
            };
            models
                .get(&m)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("no fixed model for {}", m.name())))
        }
        ModelPolicy::Refit { family, bins } => {
            let residuals = prepare_residuals(train, reference, method.residual_kind())?;
            let emp = empirical_variogram(&residuals, &bins.grid_for(&residuals)?)?;
            Ok(fit_wls_multistart(&emp, *family)?.model)
        }
    }
}

fn run_cell(
    obs: &[Observation],
    reference: Option<&ReferenceSeries>,
    cfg: &CvConfig,
    method: Method,
    fraction: f64,
    split: &Split,
    seed: u64,
) -> CvCell {
    let train: Vec<Observation> = split.train.iter().map(|&i| obs[i].clone()).collect();
    let targets: Vec<SpaceTimePoint> = split.test.iter().map(|&i| obs[i].point).collect();
    let mut cell = CvCell {
        method,
        fraction,
        fold: split.fold,
        n_train: train.len(),
        n_test: targets.len(),
        n_failed: 0,
        outcome: Err(String::new()),
        model: None,
        idw_c: None,
    };

    let predictions: Result<Vec<Result<f64>>> = (|| match method.kriging() {
        Some(km) => {
            let model = fit_for(km, &train, reference, &cfg.policy)?;
            cell.model = Some(model);
            let kriger = Kriger::new(km, &train, model, reference, cfg.neighborhood)?;
            Ok(kriger
                .predict_batch(&targets)
                .into_iter()
                .map(|r| r.map(|p| p.value))
                .collect())
        }
        None => {
            let c = match &cfg.idw_policy {
                IdwPolicy::Fixed(c) => *c,
                IdwPolicy::Tune(candidates) => tune_c(&train, candidates, &cfg.idw, cfg.folds, seed)?.best,
            };
            cell.idw_c = Some(c);
            let idw = Idw::new(&train, IdwConfig { c, ..cfg.idw })?;
            Ok(targets.iter().map(|t| idw.predict(t).map(|(v, _)| v)).collect())
        }
    })();

    cell.outcome = match predictions {
        Err(e) => Err(e.to_string()),
        Ok(results) => {
            let (mut pred, mut actual) = (Vec::new(), Vec::new());
            let mut first_error = None;
            for (r, &i) in results.into_iter().zip(&split.test) {
                match r {
                    Ok(v) => {
                        pred.push(v);
                        actual.push(obs[i].value);
                    }
                    Err(e) => {
                        cell.n_failed += 1;
                        first_error.get_or_insert(e.to_string());
                    }
                }
            }
            if pred.is_empty() {
                Err(first_error.unwrap_or_else(|| "empty test set".into()))
            } else {
                compute_indicators(&pred, &actual).map_err(|e| e.to_string())
            }
        }
    };
    cell
}
