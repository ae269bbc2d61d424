use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrate::fit_line;
use crate::error::{Error, Result};
use crate::geometry::Observation;
use crate::ingest::ReferenceSeries;

/// Which detrended quantity a variogram is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// values as measured (ordinary kriging)
    Raw,
    /// value minus the station series (simple kriging)
    StationResidual,
    /// residual of an OLS fit on the station series (external drift)
    DriftResidual,
}

impl FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(ResidualKind::Raw),
            "station" | "station_residual" => Ok(ResidualKind::StationResidual),
            "drift" | "drift_residual" => Ok(ResidualKind::DriftResidual),
            other => Err(Error::InvalidParameter(format!("unknown residual kind '{other}'"))),
        }
    }
}

fn station_values(obs: &[Observation], reference: &ReferenceSeries) -> Result<Vec<f64>> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| reference.interpolate(o.point.t).map_err(|e| Error::at(i, e)))
        .collect()
}

/// Drift coefficients `(a0, a1)` of `z ≈ a0 + a1·F(t)` by OLS.
///
/// Falls back to an intercept-only fit when the station series is constant
/// over the sample.
pub fn fit_drift(obs: &[Observation], reference: &ReferenceSeries) -> Result<(f64, f64)> {
    if obs.is_empty() {
        return Err(Error::InsufficientData("drift fit on an empty sample".into()));
    }
    let f = station_values(obs, reference)?;
    let z: Vec<f64> = obs.iter().map(|o| o.value).collect();
    Ok(fit_line(&f, &z).unwrap_or_else(|| {
        log::warn!("station series constant over the sample; drift reduces to a mean");
        (z.iter().sum::<f64>() / z.len() as f64, 0.0)
    }))
}

/// Transforms observations into the quantity whose variogram each kriging
/// method needs. `reference` may be `None` only for [`ResidualKind::Raw`].
pub fn prepare_residuals(
    obs: &[Observation],
    reference: Option<&ReferenceSeries>,
    kind: ResidualKind,
) -> Result<Vec<Observation>> {
    if kind == ResidualKind::Raw {
        return Ok(obs.to_vec());
    }
    let reference =
        reference.ok_or_else(|| Error::InvalidParameter(format!("{kind:?} residuals require a reference series")))?;
    let f = station_values(obs, reference)?;
    match kind {
        ResidualKind::StationResidual => Ok(obs.iter().zip(&f).map(|(o, f)| o.with_value(o.value - f)).collect()),
        ResidualKind::DriftResidual => {
            let (a0, a1) = fit_drift(obs, reference)?;
            Ok(obs
                .iter()
                .zip(&f)
                .map(|(o, f)| o.with_value(o.value - (a0 + a1 * f)))
                .collect())
        }
        ResidualKind::Raw => unreachable!(),
    }
}
