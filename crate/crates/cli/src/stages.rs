//! Typed pipeline stages shared by the subcommands and `pipeline`.

use std::collections::BTreeMap;
use std::path::Path;

use stkrige::calibrate::{apply_calibration, fit_all, CalibrationCoefficients};
use stkrige::evaluate::{run_cv, BinSpec, CvConfig, CvReport, IdwPolicy, Method, ModelPolicy, Scenario};
use stkrige::idw::{default_c_candidates, tune_c, Idw, IdwConfig};
use stkrige::ingest::{parse_mobile_csv, GeoOrigin, OZONE_MOLECULAR_WEIGHT};
use stkrige::krige::Kriger;
use stkrige::variogram::{
    directional_variogram, empirical_variogram, fit_wls_multistart, prepare_residuals, Direction, EmpiricalVariogram,
    FitReport, ResidualKind,
};
use stkrige::{Family, NeighborhoodConfig, Observation, ReferenceSeries, SpaceTimePoint, TargetMode, VariogramModel};

use crate::failure::{CliResult, Context, Failure};

pub fn ingest(
    mobile: &Path,
    reference: Option<&ReferenceSeries>,
    origin: Option<GeoOrigin>,
    molecular_weight: f64,
) -> CliResult<Vec<Observation>> {
    if !(molecular_weight > 0.0) {
        return Err(Failure::config(format!(
            "molecular weight must be positive, got {molecular_weight}"
        )));
    }
    let parsed = parse_mobile_csv(mobile).context(mobile.display())?;
    for (line, msg) in &parsed.errors {
        log::warn!("{} line {line}: {msg}", mobile.display());
    }
    if parsed.missing > 0 {
        log::warn!(
            "{}: {} rows with missing fields dropped",
            mobile.display(),
            parsed.missing
        );
    }
    let records = parsed.records;
    if records.is_empty() {
        log::warn!("{}: no observations", mobile.display());
        return Ok(Vec::new());
    }
    let origin = match origin {
        Some(o) => o,
        None => {
            let n = records.len() as f64;
            let lat = records.iter().map(|r| r.lat).sum::<f64>() / n;
            let lon = records.iter().map(|r| r.lon).sum::<f64>() / n;
            log::info!("projection origin defaults to the data centroid {lat},{lon}");
            GeoOrigin::new(lat, lon)?
        }
    };
    let mut obs: Vec<Observation> = records
        .iter()
        .map(|r| r.to_observation(origin, molecular_weight))
        .collect();
    if let Some(series) = reference {
        let before = obs.len();
        obs.retain(|o| series.covers(o.point.t));
        if obs.len() < before {
            log::warn!(
                "{} observations outside the reference period [{}, {}] dropped",
                before - obs.len(),
                series.start(),
                series.end()
            );
        }
    }
    Ok(obs)
}

pub fn default_molecular_weight() -> f64 {
    OZONE_MOLECULAR_WEIGHT
}

/// Fits and applies per-sensor calibrations. Sensors whose fit fails are
/// dropped with a warning; it is an error if every sensor fails.
pub fn calibrate(
    obs: &[Observation],
    reference: &ReferenceSeries,
) -> CliResult<(Vec<CalibrationCoefficients>, Vec<Observation>)> {
    let mut coeffs = BTreeMap::new();
    let mut first_error = None;
    for (sensor, fit) in fit_all(obs, reference) {
        match fit {
            Ok(c) => {
                coeffs.insert(sensor, c);
            }
            Err(e) => {
                log::warn!("sensor '{sensor}' not calibrated and dropped: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    if coeffs.is_empty() {
        if let Some(e) = first_error {
            return Err(Failure::from(e).context("no sensor could be calibrated"));
        }
    }
    let calibrated = obs
        .iter()
        .filter_map(|o| coeffs.get(&o.sensor_id).map(|c| apply_calibration(o, c)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((coeffs.into_values().collect(), calibrated))
}

pub struct VariogramParams {
    pub kind: ResidualKind,
    pub bins: BinSpec,
    pub direction: Option<Direction>,
}

pub fn variogram(
    obs: &[Observation],
    reference: Option<&ReferenceSeries>,
    p: &VariogramParams,
) -> CliResult<EmpiricalVariogram> {
    if p.kind != ResidualKind::Raw && reference.is_none() {
        return Err(Failure::config(format!(
            "residual kind {:?} requires a reference series",
            p.kind
        )));
    }
    let residuals = prepare_residuals(obs, reference, p.kind)?;
    let grid = p.bins.grid_for(&residuals)?;
    Ok(match p.direction {
        Some(d) => directional_variogram(&residuals, &grid, d)?,
        None => empirical_variogram(&residuals, &grid)?,
    })
}

pub fn fit(emp: &EmpiricalVariogram, family: Family) -> CliResult<FitReport> {
    let report = fit_wls_multistart(emp, family)?;
    if let Some(why) = &report.degeneracy {
        log::warn!("variogram fit is degenerate: {why}");
    }
    Ok(report)
}

/// How IDW obtains its space-time constant.
#[derive(Debug, Clone, Copy)]
pub enum IdwC {
    Fixed(f64),
    Tune { seed: u64 },
}

/// A prediction engine built once and applied to many targets.
pub enum Predictor<'a> {
    Kriging(Kriger<'a>),
    Idw(Idw<'a>),
}

pub struct PredictParams {
    pub method: Method,
    pub neighborhood: NeighborhoodConfig,
    pub mode: TargetMode,
    pub idw_c: IdwC,
}

impl<'a> Predictor<'a> {
    /// Returns the predictor and, for IDW, the C it uses.
    pub fn new(
        obs: &'a [Observation],
        model: Option<VariogramModel>,
        reference: Option<&'a ReferenceSeries>,
        p: &PredictParams,
    ) -> CliResult<(Self, Option<f64>)> {
        match p.method.kriging() {
            Some(km) => {
                let model = model.ok_or_else(|| {
                    Failure::config(format!("method {} needs a variogram model (--model)", p.method.name()))
                })?;
                if km.needs_reference() && reference.is_none() {
                    return Err(Failure::config(format!(
                        "method {} needs a reference series (--reference)",
                        p.method.name()
                    )));
                }
                let kriger = Kriger::new(km, obs, model, reference, p.neighborhood)?.with_mode(p.mode);
                Ok((Predictor::Kriging(kriger), None))
            }
            None => {
                let base = IdwConfig {
                    k: p.neighborhood.k,
                    ..IdwConfig::default()
                };
                let c = match p.idw_c {
                    IdwC::Fixed(c) => c,
                    IdwC::Tune { seed } => tune_c(obs, &default_c_candidates(), &base, 4, seed)?.best,
                };
                let mut idw = Idw::new(obs, IdwConfig { c, ..base })?;
                idw.max_radius = p.neighborhood.max_radius;
                Ok((Predictor::Idw(idw), Some(c)))
            }
        }
    }

    /// (value, variance, neighbors) per target, in order.
    pub fn predict(&self, targets: &[SpaceTimePoint]) -> Vec<stkrige::Result<(f64, Option<f64>, usize)>> {
        match self {
            Predictor::Kriging(k) => k
                .predict_batch(targets)
                .into_iter()
                .map(|r| r.map(|p| (p.value, p.variance, p.n_neighbors)))
                .collect(),
            Predictor::Idw(idw) => targets
                .iter()
                .map(|t| idw.predict(t).map(|(v, n)| (v, None, n)))
                .collect(),
        }
    }
}

pub struct CrossvalParams {
    pub methods: Vec<Method>,
    pub scenario: Scenario,
    pub fractions: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub family: Family,
    pub bins: BinSpec,
    pub fixed_model: Option<VariogramModel>,
    pub neighborhood: NeighborhoodConfig,
    pub idw_c: Option<f64>,
}

/// Checks cross-validation settings before any data is read.
pub fn check_crossval(methods: &[Method], fractions: &[f64], folds: usize) -> CliResult<()> {
    if methods.is_empty() || fractions.is_empty() {
        return Err(Failure::config(
            "cross-validation needs at least one method and one fraction",
        ));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
        return Err(Failure::config(format!(
            "training fraction must lie in (0, 1), got {f}"
        )));
    }
    if folds == 0 {
        return Err(Failure::config("cross-validation needs at least one fold"));
    }
    Ok(())
}

pub fn crossval(obs: &[Observation], reference: Option<&ReferenceSeries>, p: CrossvalParams) -> CliResult<CvReport> {
    let mut cfg = CvConfig::new(p.methods, p.scenario, p.fractions, p.seed);
    cfg.folds = p.folds;
    cfg.neighborhood = p.neighborhood;
    cfg.idw.k = p.neighborhood.k;
    cfg.policy = match p.fixed_model {
        Some(m) => ModelPolicy::Fixed(
            [Method::Sk, Method::Ok, Method::Ked]
                .into_iter()
                .map(|k| (k, m))
                .collect(),
        ),
        None => ModelPolicy::Refit {
            family: p.family,
            bins: p.bins,
        },
    };
    if let Some(c) = p.idw_c {
        cfg.idw_policy = IdwPolicy::Fixed(c);
    }
    let report = run_cv(obs, reference, &cfg)?;
    for cell in &report.cells {
        if let Err(e) = &cell.outcome {
            log::warn!(
                "{} fraction {} fold {} failed: {e}",
                cell.method.name(),
                cell.fraction,
                cell.fold
            );
        } else if cell.n_failed > 0 {
            log::warn!(
                "{} fraction {} fold {}: {} test points could not be predicted",
                cell.method.name(),
                cell.fraction,
                cell.fold,
                cell.n_failed
            );
        }
    }
    Ok(report)
}
