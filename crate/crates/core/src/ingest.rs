//! Parsing of mobile-sensor and reference-station files, unit conversion,
//! planar projection and reference-series interpolation.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::geometry::{Observation, SpaceTimePoint};

/// Molecular weight of ozone, g/mol.
pub const OZONE_MOLECULAR_WEIGHT: f64 = 48.0;

/// Molar volume constant (litres) at 1 atm and 20 °C, paired with 293 K.
const MOLAR_VOLUME_FACTOR: f64 = 12.187;
const STANDARD_TEMPERATURE_K: f64 = 293.0;

/// Mean Earth radius used by the equirectangular projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Converts a mixing ratio in ppb to a mass concentration in µg/m³.
pub fn ppb_to_ugm3(value: f64, molecular_weight: f64) -> f64 {
    value * MOLAR_VOLUME_FACTOR * molecular_weight / STANDARD_TEMPERATURE_K
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

impl GeoOrigin {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        validate_lat_lon(lat, lon)?;
        Ok(Self { lat, lon })
    }
}

fn validate_lat_lon(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::InvalidParameter(format!(
            "coordinates out of range: lat {lat}, lon {lon}"
        )));
    }
    Ok(())
}

/// Equirectangular projection about `origin`, returning (east, north) meters.
pub fn project(lat: f64, lon: f64, origin: GeoOrigin) -> (f64, f64) {
    let x = EARTH_RADIUS_M * origin.lat.to_radians().cos() * (lon - origin.lon).to_radians();
    let y = EARTH_RADIUS_M * (lat - origin.lat).to_radians();
    (x, y)
}

/// Inverse of [`project`].
pub fn unproject(x: f64, y: f64, origin: GeoOrigin) -> (f64, f64) {
    let lat = origin.lat + (y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    (lat, lon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ppb,
    Ugm3,
}

impl std::str::FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ppb" => Ok(Unit::Ppb),
            "ugm3" | "µg/m3" | "ug/m3" => Ok(Unit::Ugm3),
            other => Err(format!("unknown unit '{other}'")),
        }
    }
}

/// One row of a mobile-sensor file before projection and conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub sensor_id: String,
    pub timestamp: f64,
    pub lat: f64,
    pub lon: f64,
    pub raw_value: f64,
    pub unit: Unit,
}

impl RawRecord {
    pub fn value_ugm3(&self, molecular_weight: f64) -> f64 {
        match self.unit {
            Unit::Ppb => ppb_to_ugm3(self.raw_value, molecular_weight),
            Unit::Ugm3 => self.raw_value,
        }
    }

    pub fn to_observation(&self, origin: GeoOrigin, molecular_weight: f64) -> Observation {
        let (x, y) = project(self.lat, self.lon, origin);
        Observation::new(
            self.sensor_id.clone(),
            SpaceTimePoint::new(x, y, self.timestamp),
            self.value_ugm3(molecular_weight),
        )
    }
}

/// Behaviour of [`ReferenceSeries::interpolate_with`] outside the knot range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRange {
    #[default]
    Error,
    Clamp,
}

/// Station series `(t seconds, value µg/m³)`, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// A stretch between consecutive knots noticeably longer than the nominal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub start: f64,
    pub end: f64,
}

impl ReferenceSeries {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InsufficientData("reference series is empty".into()));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(format!(
                    "reference timestamps not strictly increasing at knot {}",
                    i + 1
                )));
            }
        }
        if let Some((i, _)) = knots
            .iter()
            .enumerate()
            .find(|(_, (t, v))| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!("non-finite reference knot {i}")));
        }
        let (times, values) = knots.into_iter().unzip();
        Ok(Self { times, values })
    }

    /// A flat series holding `value` over `[start, end]`.
    pub fn constant(value: f64, start: f64, end: f64) -> Result<Self> {
        if end > start {
            Self::new(vec![(start, value), (end, value)])
        } else {
            Self::new(vec![(start, value)])
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Piecewise-linear value at `t`; errors outside the knot range.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        self.interpolate_with(t, OutOfRange::Error)
    }

    pub fn interpolate_with(&self, t: f64, mode: OutOfRange) -> Result<f64> {
        if !self.covers(t) {
            return match mode {
                OutOfRange::Clamp if t < self.start() => Ok(self.values[0]),
                OutOfRange::Clamp if t > self.end() => Ok(self.values[self.len() - 1]),
                _ => Err(Error::OutOfRange {
                    t,
                    start: self.start(),
                    end: self.end(),
                }),
            };
        }
        // first knot strictly after t
        let hi = self.times.partition_point(|&k| k <= t);
        if hi == 0 {
            return Ok(self.values[0]);
        }
        let lo = hi - 1;
        if hi == self.len() || self.times[lo] == t {
            return Ok(self.values[lo]);
        }
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[lo] + w * (self.values[hi] - self.values[lo]))
    }

    /// Intervals longer than 1.5× the median knot spacing.
    pub fn gaps(&self) -> Vec<Gap> {
        if self.len() < 3 {
            return Vec::new();
        }
        let mut steps: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_by(f64::total_cmp);
        let median = steps[steps.len() / 2];
        self.times
            .windows(2)
            .filter(|w| w[1] - w[0] > 1.5 * median)
            .map(|w| Gap { start: w[0], end: w[1] })
            .collect()
    }
}

/// Parses an ISO-8601 timestamp into seconds since the epoch.
///
/// Offsets are honoured; timestamps without an offset are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 * 1e-6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 * 1e-6);
        }
    }
    None
}

/// Rows accepted from a file plus a per-row account of what was rejected.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    /// (1-based file line, reason) for unparseable rows
    pub errors: Vec<(usize, String)>,
    /// rows dropped because a field was empty
    pub missing: usize,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            errors: Vec::new(),
            missing: 0,
        }
    }
}

impl<T> Parsed<T> {
    fn finish(self) -> Result<Self> {
        if self.records.is_empty() && !self.errors.is_empty() {
            let (line, message) = self.errors[0].clone();
            return Err(Error::Parse {
                line,
                message: format!("no parseable rows ({} errors); first: {message}", self.errors.len()),
            });
        }
        Ok(self)
    }
}

const MOBILE_HEADER: [&str; 6] = ["sensor_id", "timestamp_iso8601", "lat", "lon", "value", "unit"];
const REFERENCE_HEADER: [&str; 2] = ["timestamp_iso8601", "value_ugm3"];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{}', found '{}'", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

fn parse_f64(field: &str, name: &str) -> std::result::Result<f64, String> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("bad {name} '{field}'"))
}

pub fn read_mobile_csv<R: Read>(input: R) -> Result<Parsed<RawRecord>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &MOBILE_HEADER)?;
    let mut out = Parsed::default();
    for (i, row) in rdr.records().enumerate() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.errors.push((i + 2, e.to_string()));
                continue;
            }
        };
        let line = line_of(&row, i + 2);
        if row.len() < MOBILE_HEADER.len() || row.iter().any(str::is_empty) {
            out.missing += 1;
            continue;
        }
        match parse_mobile_row(&row) {
            Ok(rec) => out.records.push(rec),
            Err(msg) => out.errors.push((line, msg)),
        }
    }
    out.finish()
}

fn parse_mobile_row(row: &csv::StringRecord) -> std::result::Result<RawRecord, String> {
    let timestamp = parse_timestamp(&row[1]).ok_or_else(|| format!("bad timestamp '{}'", &row[1]))?;
    let lat = parse_f64(&row[2], "lat")?;
    let lon = parse_f64(&row[3], "lon")?;
    validate_lat_lon(lat, lon).map_err(|e| e.to_string())?;
    Ok(RawRecord {
        sensor_id: row[0].to_string(),
        timestamp,
        lat,
        lon,
        raw_value: parse_f64(&row[4], "value")?,
        unit: row[5].parse()?,
    })
}

pub fn parse_mobile_csv(path: impl AsRef<Path>) -> Result<Parsed<RawRecord>> {
    read_mobile_csv(std::fs::File::open(path)?)
}

/// Reads reference knots. Rows are sorted by time; duplicate timestamps are
/// reported as row errors and only the first is kept.
pub fn read_reference_csv<R: Read>(input: R) -> Result<(ReferenceSeries, Parsed<(f64, f64)>)> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &REFERENCE_HEADER)?;
    let mut out: Parsed<(f64, f64)> = Parsed::default();
    for (i, row) in rdr.records().enumerate() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.errors.push((i + 2, e.to_string()));
                continue;
            }
        };
        let line = line_of(&row, i + 2);
        if row.len() < 2 || row.iter().any(str::is_empty) {
            out.missing += 1;
            continue;
        }
        let parsed = parse_timestamp(&row[0])
            .ok_or_else(|| format!("bad timestamp '{}'", &row[0]))
            .and_then(|t| Ok((t, parse_f64(&row[1], "value_ugm3")?)));
        match parsed {
            Ok(knot) => out.records.push(knot),
            Err(msg) => out.errors.push((line, msg)),
        }
    }
    let out = out.finish()?;
    let mut knots = out.records.clone();
    knots.sort_by(|a, b| a.0.total_cmp(&b.0));
    knots.dedup_by(|b, a| a.0 == b.0);
    let series = ReferenceSeries::new(knots)?;
    Ok((series, out))
}

pub fn parse_reference_csv(path: impl AsRef<Path>) -> Result<(ReferenceSeries, Parsed<(f64, f64)>)> {
    read_reference_csv(std::fs::File::open(path)?)
}
