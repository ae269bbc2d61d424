//! End-to-end run driven by a flat `key = value` configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use stkrige::evaluate::{BinSpec, Method};
use stkrige::ingest::GeoOrigin;
use stkrige::variogram::ResidualKind;
use stkrige::{Family, NeighborhoodConfig, TargetMode};

use crate::commands::{parse_list, parse_origin, scenario_for, write_coefficients, write_report};
use crate::failure::{CliResult, Failure};
use crate::io::{self, ModelFile, Table, TimeUnit};
use crate::map::{render, GridSpec, DEFAULT_CELL_CAP};
use crate::stages::{self, CrossvalParams, IdwC, PredictParams, Predictor, VariogramParams};

/// Every recognised configuration key.
pub const KEYS: &[&str] = &[
    "mobile",
    "reference",
    "origin",
    "molecular_weight",
    "out_dir",
    "method",
    "family",
    "kind",
    "hmax",
    "umax",
    "nh",
    "nu",
    "time_unit",
    "k",
    "radius",
    "exact",
    "idw_c",
    "seed",
    "crossval",
    "scenario",
    "fractions",
    "methods",
    "folds",
    "segment_length",
    "lines",
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "cell",
    "t_start",
    "t_end",
    "t_step",
    "cell_cap",
];

const GRID_KEYS: [&str; 8] = ["x_min", "x_max", "y_min", "y_max", "cell", "t_start", "t_end", "t_step"];

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// configuration file with one `key = value` per line
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// override a configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub mobile: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn check_key(key: &str, origin: &str) -> CliResult<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Failure::config(format!("{origin}: unknown config key '{key}'")))
    }
}

pub fn parse_config(text: &str, source: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("{source} line {}: expected key = value", i + 1)))?;
        let key = k.trim().to_string();
        check_key(&key, &format!("{source} line {}", i + 1))?;
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Merged settings; files are resolved relative to the working directory.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn resolve(a: &PipelineArgs) -> CliResult<Self> {
        let mut map = match &a.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        for kv in &a.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            check_key(k.trim(), "--set")?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let flags = [
            ("mobile", a.mobile.as_ref().map(|p| p.display().to_string())),
            ("reference", a.reference.as_ref().map(|p| p.display().to_string())),
            ("out_dir", a.out_dir.as_ref().map(|p| p.display().to_string())),
            ("method", a.method.clone()),
            ("seed", a.seed.map(|s| s.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Failure::config(format!("config field `{key}`: invalid value '{v}': {e}")))
            })
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn with<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| parse(v).map_err(|e| Failure::config(format!("config field `{key}`: {e}"))))
            .transpose()
    }

    fn existing_file(&self, key: &str) -> CliResult<Option<PathBuf>> {
        match self.raw(key) {
            None => Ok(None),
            Some(p) if Path::new(p).is_file() => Ok(Some(PathBuf::from(p))),
            Some(p) => Err(Failure::config(format!(
                "config field `{key}`: file '{p}' does not exist"
            ))),
        }
    }
}

fn stage<T>(name: &str, r: CliResult<T>) -> CliResult<T> {
    r.map_err(|e| e.context(format!("stage {name}")))
}

pub fn run(a: &PipelineArgs) -> CliResult<()> {
    let s = Settings::resolve(a)?;

    let mobile = s
        .existing_file("mobile")?
        .ok_or_else(|| Failure::config("config field `mobile` is required"))?;
    let out_dir = PathBuf::from(
        s.raw("out_dir")
            .ok_or_else(|| Failure::config("config field `out_dir` is required"))?,
    );
    let reference_path = s.existing_file("reference")?;
    let method: Method = s.get_or(
        "method",
        if reference_path.is_some() {
            Method::Ked
        } else {
            Method::Ok
        },
    )?;
    if method.kriging().is_some_and(|k| k.needs_reference()) && reference_path.is_none() {
        return Err(Failure::config(format!(
            "config field `reference` is required by method {}",
            method.name()
        )));
    }
    let seed: u64 = s.get_or("seed", 7)?;
    let origin: Option<GeoOrigin> = s.with("origin", parse_origin)?;
    let molecular_weight = s.get_or("molecular_weight", stages::default_molecular_weight())?;
    let family: Family = s.get_or("family", Family::Spherical)?;
    let kind: ResidualKind = s.get_or(
        "kind",
        method.kriging().map_or(ResidualKind::Raw, |k| k.residual_kind()),
    )?;
    if kind != ResidualKind::Raw && reference_path.is_none() {
        return Err(Failure::config(format!(
            "config field `reference` is required by kind {kind:?}"
        )));
    }
    let bins = BinSpec {
        h_max: s.get("hmax")?,
        nh: s.get_or("nh", 15)?,
        u_max: s.get_or("umax", 21_600.0)?,
        nu: s.get_or("nu", 15)?,
    };
    let time_unit = s.with("time_unit", |v| {
        <TimeUnit as clap::ValueEnum>::from_str(v, true).map_err(|e| format!("invalid value '{v}': {e}"))
    })?;
    let neighborhood = NeighborhoodConfig {
        k: s.get_or("k", 50)?,
        max_radius: s.get("radius")?,
    };
    if neighborhood.k == 0 {
        return Err(Failure::config("config field `k` must be at least 1"));
    }
    let exact: bool = s.get_or("exact", false)?;
    let idw_c: Option<f64> = s.get("idw_c")?;
    let run_crossval: bool = s.get_or("crossval", true)?;
    let default_methods = if reference_path.is_some() {
        Method::ALL.to_vec()
    } else {
        vec![Method::Ok, Method::Idw]
    };
    let methods = s.with("methods", parse_list::<Method>)?.unwrap_or(default_methods);
    let fractions = s
        .with("fractions", parse_list::<f64>)?
        .unwrap_or_else(|| vec![0.1, 0.25, 0.5, 0.75, 0.9]);
    let folds: usize = s.get_or("folds", 4)?;
    if run_crossval {
        stages::check_crossval(&methods, &fractions, folds)?;
    }
    let scenario_name = s.raw("scenario").unwrap_or("random").to_string();
    let lines = s.existing_file("lines")?;
    let grid = grid_settings(&s)?;
    let cell_cap: usize = s.get_or("cell_cap", DEFAULT_CELL_CAP)?;

    let mut artifacts: Vec<(&str, PathBuf)> = Vec::new();
    let reference = stage(
        "reference",
        reference_path.as_deref().map(io::read_reference).transpose(),
    )?;

    let obs = stage(
        "ingest",
        stages::ingest(&mobile, reference.as_ref(), origin, molecular_weight),
    )?;
    let path = out_dir.join("normalized.csv");
    stage("ingest", io::write_data(&path, None, &obs))?;
    artifacts.push(("ingest", path));

    let obs = match &reference {
        Some(r) => {
            let (coeffs, calibrated) = stage("calibrate", stages::calibrate(&obs, r))?;
            let path = out_dir.join("coefficients.csv");
            stage("calibrate", write_coefficients(&path, &coeffs))?;
            artifacts.push(("calibrate", path));
            let path = out_dir.join("calibrated.csv");
            stage("calibrate", io::write_data(&path, None, &calibrated))?;
            artifacts.push(("calibrate", path));
            calibrated
        }
        None => {
            log::warn!("no reference series: calibration skipped");
            obs
        }
    };

    let params = VariogramParams {
        kind,
        bins,
        direction: None,
    };
    let emp = stage("variogram", stages::variogram(&obs, reference.as_ref(), &params))?;
    let path = out_dir.join("variogram.csv");
    stage(
        "variogram",
        io::write_empirical(&path, &emp, &[format!("kind={kind:?}")]),
    )?;
    artifacts.push(("variogram", path));

    let report = stage("fit", stages::fit(&emp, family))?;
    let model = report.model;
    let path = out_dir.join("model.json");
    let file = ModelFile::from_model(&model, Some(report.objective), time_unit.unwrap_or_default());
    stage("fit", io::write_model(&path, &file))?;
    artifacts.push(("fit", path));

    if run_crossval {
        let scenario = stage(
            "crossval",
            scenario_for(
                &scenario_name,
                &obs,
                lines.as_deref(),
                s.get_or("segment_length", 20.0)?,
            ),
        )?;
        let cv = stage(
            "crossval",
            stages::crossval(
                &obs,
                reference.as_ref(),
                CrossvalParams {
                    methods,
                    scenario,
                    fractions,
                    folds,
                    seed,
                    family,
                    bins,
                    fixed_model: None,
                    neighborhood,
                    idw_c,
                },
            ),
        )?;
        let path = out_dir.join("crossval.csv");
        stage("crossval", write_report(&path, seed, &cv))?;
        artifacts.push(("crossval", path));
    }

    if let Some(grid) = grid {
        let params = PredictParams {
            method,
            neighborhood,
            mode: if exact { TargetMode::Exact } else { TargetMode::Filter },
            idw_c: idw_c.map_or(IdwC::Tune { seed }, IdwC::Fixed),
        };
        let (predictor, c) = stage("map", Predictor::new(&obs, Some(model), reference.as_ref(), &params))?;
        let extra: Vec<String> = c.map(|c| format!("idw C={c}")).into_iter().collect();
        let written = stage(
            "map",
            render(&predictor, &grid, cell_cap, &out_dir.join("map"), Some(seed), &extra),
        )?;
        artifacts.extend(written.into_iter().map(|p| ("map", p)));
    }

    let manifest = out_dir.join("manifest.csv");
    let mut table = Table::create(&manifest, Some(seed), &[], &["stage", "file", "sha256"])?;
    for (name, path) in &artifacts {
        let rel = path.strip_prefix(&out_dir).unwrap_or(path);
        table.row([name.to_string(), rel.display().to_string(), io::sha256_file(path)?])?;
    }
    table.finish()
}

fn grid_settings(s: &Settings) -> CliResult<Option<GridSpec>> {
    let present: Vec<&str> = GRID_KEYS.iter().copied().filter(|k| s.raw(k).is_some()).collect();
    if present.is_empty() {
        return Ok(None);
    }
    if let Some(missing) = GRID_KEYS.iter().find(|k| s.raw(k).is_none()) {
        return Err(Failure::config(format!(
            "config field `{missing}` is required when any map grid key is set"
        )));
    }
    let num = |k: &str| -> CliResult<f64> { Ok(s.get::<f64>(k)?.expect("checked present")) };
    let time = |k: &str| -> CliResult<f64> {
        s.with(k, |v| {
            io::parse_time(v).ok_or_else(|| format!("'{v}' is neither seconds nor ISO-8601"))
        })
        .map(|v| v.expect("checked present"))
    };
    Ok(Some(GridSpec {
        x_min: num("x_min")?,
        x_max: num("x_max")?,
        y_min: num("y_min")?,
        y_max: num("y_max")?,
        cell: num("cell")?,
        t_start: time("t_start")?,
        t_end: time("t_end")?,
        t_step: num("t_step")?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let map = parse_config("# comment\nmobile = a.csv\n\nseed=3\n", "cfg").unwrap();
        assert_eq!(map["mobile"], "a.csv");
        assert_eq!(map["seed"], "3");
        assert!(parse_config("bogus = 1", "cfg").is_err());
        assert!(parse_config("no equals sign", "cfg").is_err());
    }
}
