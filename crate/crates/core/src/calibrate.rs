//! Per-sensor linear calibration against the reference station.
//!
//! Each sensor reading is modelled as `Z = a + h·Y + ε` with `Y` the station
//! value at the same instant. The fit regresses sensor on station and the
//! correction inverts that line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Observation;
use crate::ingest::ReferenceSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCoefficients {
    pub sensor_id: String,
    /// additive bias, µg/m³
    pub a: f64,
    /// multiplicative bias
    pub h: f64,
    pub n_pairs: usize,
    /// root mean square of the regression residuals, µg/m³
    pub residual_rms: f64,
}

/// Ordinary least squares line `y ≈ intercept + slope·x`.
///
/// Returns `None` when `x` has no spread.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Fits `Z = a + h·Y` to `(Z sensor, Y reference)` pairs.
pub fn fit_sensor_calibration(sensor_id: &str, pairs: &[(f64, f64)]) -> Result<CalibrationCoefficients> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "sensor '{sensor_id}' has {} calibration pairs, need at least 2",
            pairs.len()
        )));
    }
    let (zs, ys): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let first = ys[0];
    if ys.iter().all(|&y| y == first) {
        return Err(Error::DegenerateDesign(format!(
            "all reference values identical for sensor '{sensor_id}'"
        )));
    }
    let (a, h) =
        fit_line(&ys, &zs).ok_or_else(|| Error::DegenerateDesign(format!("no reference spread for '{sensor_id}'")))?;
    let ss: f64 = pairs.iter().map(|&(z, y)| (z - a - h * y).powi(2)).sum();
    Ok(CalibrationCoefficients {
        sensor_id: sensor_id.to_string(),
        a,
        h,
        n_pairs: pairs.len(),
        residual_rms: (ss / pairs.len() as f64).sqrt(),
    })
}

/// Maps a sensor reading onto the reference scale: `(value − a) / h`.
pub fn apply_calibration(obs: &Observation, coeffs: &CalibrationCoefficients) -> Result<Observation> {
    if obs.sensor_id != coeffs.sensor_id {
        return Err(Error::SensorMismatch {
            expected: coeffs.sensor_id.clone(),
            found: obs.sensor_id.clone(),
        });
    }
    if coeffs.h == 0.0 {
        return Err(Error::ZeroSlope(coeffs.sensor_id.clone()));
    }
    Ok(obs.with_value((obs.value - coeffs.a) / coeffs.h))
}

/// Builds `(Z, Y)` pairs with `Y` interpolated at each observation time.
pub fn pair_with_reference(obs: &[Observation], reference: &ReferenceSeries) -> Result<Vec<(f64, f64)>> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| {
            reference
                .interpolate(o.point.t)
                .map(|y| (o.value, y))
                .map_err(|e| Error::at(i, e))
        })
        .collect()
}

/// Fits one calibration per sensor. Each fit only sees that sensor's rows.
pub fn fit_all(obs: &[Observation], reference: &ReferenceSeries) -> BTreeMap<String, Result<CalibrationCoefficients>> {
    let mut by_sensor: BTreeMap<&str, Vec<Observation>> = BTreeMap::new();
    for o in obs {
        by_sensor.entry(&o.sensor_id).or_default().push(o.clone());
    }
    by_sensor
        .into_iter()
        .map(|(id, rows)| {
            let fit = pair_with_reference(&rows, reference).and_then(|pairs| fit_sensor_calibration(id, &pairs));
            (id.to_string(), fit)
        })
        .collect()
}

/// Applies per-sensor coefficients; sensors without coefficients are an error.
pub fn apply_all(obs: &[Observation], coeffs: &BTreeMap<String, CalibrationCoefficients>) -> Result<Vec<Observation>> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| {
            let c = coeffs.get(&o.sensor_id).ok_or_else(|| {
                Error::at(
                    i,
                    Error::InsufficientData(format!("no calibration for '{}'", o.sensor_id)),
                )
            })?;
            apply_calibration(o, c).map_err(|e| Error::at(i, e))
        })
        .collect()
}
