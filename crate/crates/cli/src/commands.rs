use std::path::PathBuf;

use clap::Args;
use stkrige::evaluate::{assign_lines, BinSpec, CvReport, Method, Scenario};
use stkrige::ingest::GeoOrigin;
use stkrige::synth::{Mean, Simulator, DEFAULT_POINT_CAP};
use stkrige::variogram::{Direction, ResidualKind};
use stkrige::{Family, NeighborhoodConfig, Observation, ReferenceSeries, TargetMode};

use crate::failure::{CliResult, Failure};
use crate::io::{self, fmt_opt, ModelFile, Table, TimeUnit};
use crate::stages::{self, CrossvalParams, IdwC, PredictParams, Predictor, VariogramParams};

pub fn parse_origin(s: &str) -> Result<GeoOrigin, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected LAT,LON")?;
    let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude '{lat}'"))?;
    let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude '{lon}'"))?;
    GeoOrigin::new(lat, lon).map_err(|e| e.to_string())
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|e| format!("'{}': {e}", p.trim())))
        .collect()
}

fn load_reference(path: Option<&PathBuf>) -> CliResult<Option<ReferenceSeries>> {
    path.map(|p| io::read_reference(p)).transpose()
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// mobile sensor CSV (sensor_id,timestamp_iso8601,lat,lon,value,unit)
    #[arg(long)]
    pub mobile: PathBuf,
    /// station CSV; rows outside its period are dropped
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// projection origin as LAT,LON (default: data centroid)
    #[arg(long, value_parser = parse_origin, allow_hyphen_values = true)]
    pub origin: Option<GeoOrigin>,
    /// molecular weight used for ppb conversion, g/mol
    #[arg(long, default_value_t = stages::default_molecular_weight())]
    pub molecular_weight: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ingest(a: &IngestArgs) -> CliResult<()> {
    let reference = load_reference(a.reference.as_ref())?;
    let obs = stages::ingest(&a.mobile, reference.as_ref(), a.origin, a.molecular_weight)?;
    io::write_data(&a.out, None, &obs)
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// normalized observations
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// coefficient table (sensor_id,a,h,n_pairs,residual_rms)
    #[arg(long)]
    pub out: PathBuf,
    /// also write the calibrated observations here
    #[arg(long)]
    pub apply: Option<PathBuf>,
}

pub fn write_coefficients(
    path: &std::path::Path,
    coeffs: &[stkrige::calibrate::CalibrationCoefficients],
) -> CliResult<()> {
    let mut t = Table::create(path, None, &[], &["sensor_id", "a", "h", "n_pairs", "residual_rms"])?;
    for c in coeffs {
        t.row([
            c.sensor_id.clone(),
            c.a.to_string(),
            c.h.to_string(),
            c.n_pairs.to_string(),
            c.residual_rms.to_string(),
        ])?;
    }
    t.finish()
}

pub fn calibrate(a: &CalibrateArgs) -> CliResult<()> {
    let reference = io::read_reference(&a.reference)?;
    let obs = io::read_data(&a.data)?;
    let (coeffs, calibrated) = stages::calibrate(&obs, &reference)?;
    write_coefficients(&a.out, &coeffs)?;
    if let Some(path) = &a.apply {
        io::write_data(path, None, &calibrated)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Raw,
    Station,
    Drift,
}

impl From<KindArg> for ResidualKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Raw => ResidualKind::Raw,
            KindArg::Station => ResidualKind::StationResidual,
            KindArg::Drift => ResidualKind::DriftResidual,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BinArgs {
    /// largest spatial lag, m (default: half the largest pairwise distance)
    #[arg(long)]
    pub hmax: Option<f64>,
    /// largest temporal lag, s
    #[arg(long, default_value_t = 21_600.0)]
    pub umax: f64,
    #[arg(long, default_value_t = 15)]
    pub nh: usize,
    #[arg(long, default_value_t = 15)]
    pub nu: usize,
}

impl BinArgs {
    pub fn spec(&self) -> BinSpec {
        BinSpec {
            h_max: self.hmax,
            nh: self.nh,
            u_max: self.umax,
            nu: self.nu,
        }
    }
}

#[derive(Debug, Args)]
pub struct VariogramArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "raw")]
    pub kind: KindArg,
    /// station CSV, required for station and drift residuals
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[command(flatten)]
    pub bins: BinArgs,
    /// restrict to pairs along this azimuth, degrees clockwise from north
    #[arg(long)]
    pub azimuth: Option<f64>,
    /// half-width of the directional sector, degrees
    #[arg(long, default_value_t = 22.5, requires = "azimuth")]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn variogram(a: &VariogramArgs) -> CliResult<()> {
    let reference = load_reference(a.reference.as_ref())?;
    let obs = io::read_data(&a.data)?;
    let direction = a.azimuth.map(|az| Direction::new(az, a.tol)).transpose()?;
    let params = VariogramParams {
        kind: a.kind.into(),
        bins: a.bins.spec(),
        direction,
    };
    let emp = stages::variogram(&obs, reference.as_ref(), &params)?;
    let mut extra = vec![format!("kind={:?}", a.kind).to_lowercase()];
    if let Some(d) = direction {
        extra.push(format!("azimuth={} tol={}", d.azimuth, d.tolerance));
    }
    io::write_empirical(&a.out, &emp, &extra)
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// empirical variogram written by `variogram`
    #[arg(long)]
    pub emp: PathBuf,
    #[arg(long, default_value = "spherical")]
    pub family: Family,
    /// unit in which K is reported
    #[arg(long, value_enum, default_value = "seconds")]
    pub time_unit: TimeUnit,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let emp = io::read_empirical(&a.emp)?;
    let report = stages::fit(&emp, a.family)?;
    io::write_model(
        &a.out,
        &ModelFile::from_model(&report.model, Some(report.objective), a.time_unit),
    )
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// target points (x,y,t)
    #[arg(long)]
    pub points: PathBuf,
    /// constant mean, µg/m³
    #[arg(
        long,
        default_value_t = 0.0,
        conflicts_with = "reference",
        allow_negative_numbers = true
    )]
    pub mean: f64,
    /// use the station series as a time-varying mean instead
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// largest point count for the dense factorization
    #[arg(long, default_value_t = DEFAULT_POINT_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let model = io::read_model(&a.model)?;
    let points = io::read_targets(&a.points)?;
    let mean = match load_reference(a.reference.as_ref())? {
        Some(r) => Mean::Series(r),
        None => Mean::Constant(a.mean),
    };
    let sim = Simulator::with_cap(points, &model, a.cap)?;
    if sim.jitter() > 0.0 {
        log::warn!("covariance factorized with diagonal jitter {:e}", sim.jitter());
    }
    let obs = sim.draw_observations(&mean, a.seed)?;
    io::write_data(&a.out, Some(a.seed), &obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Sk,
    Ok,
    Ked,
    Idw,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sk => Method::Sk,
            MethodArg::Ok => Method::Ok,
            MethodArg::Ked => Method::Ked,
            MethodArg::Idw => Method::Idw,
        }
    }
}

/// Options shared by `predict` and `map`.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// fitted variogram (kriging methods)
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// neighbors per prediction
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// search radius in metric distance, m
    #[arg(long)]
    pub radius: Option<f64>,
    /// interpolate exactly at sampled locations instead of filtering the nugget
    #[arg(long)]
    pub exact: bool,
    /// fixed IDW space-time constant, m²/s²
    #[arg(long = "C", conflicts_with = "tune_c")]
    pub c: Option<f64>,
    /// choose the IDW constant by cross-validation
    #[arg(long = "tune-C")]
    pub tune_c: bool,
    /// seed for C tuning
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

pub struct Engine {
    pub obs: Vec<Observation>,
    pub reference: Option<ReferenceSeries>,
    pub model: Option<stkrige::VariogramModel>,
    pub params: PredictParams,
}

impl EngineArgs {
    pub fn load(&self) -> CliResult<Engine> {
        let method = Method::from(self.method);
        if self.k == 0 {
            return Err(Failure::config("--k must be at least 1"));
        }
        let idw_c = match (method, self.c, self.tune_c) {
            (Method::Idw, Some(c), _) => IdwC::Fixed(c),
            (Method::Idw, None, true) => IdwC::Tune { seed: self.seed },
            (Method::Idw, None, false) => return Err(Failure::config("method idw needs --C <value> or --tune-C")),
            _ => IdwC::Fixed(0.0),
        };
        let model = match (&self.model, method.kriging()) {
            (Some(p), _) => Some(io::read_model(p)?),
            (None, Some(_)) => {
                return Err(Failure::config(format!("method {} needs --model", method.name())));
            }
            (None, None) => None,
        };
        if method.kriging().is_some_and(|k| k.needs_reference()) && self.reference.is_none() {
            return Err(Failure::config(format!("method {} needs --reference", method.name())));
        }
        Ok(Engine {
            obs: io::read_data(&self.data)?,
            reference: load_reference(self.reference.as_ref())?,
            model,
            params: PredictParams {
                method,
                neighborhood: NeighborhoodConfig {
                    k: self.k,
                    max_radius: self.radius,
                },
                mode: if self.exact {
                    TargetMode::Exact
                } else {
                    TargetMode::Filter
                },
                idw_c,
            },
        })
    }

    pub fn seed(&self) -> Option<u64> {
        (self.method == MethodArg::Idw && self.tune_c).then_some(self.seed)
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    /// target points (x,y,t)
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let engine = a.engine.load()?;
    let targets = io::read_targets(&a.targets)?;
    let (predictor, c) = Predictor::new(&engine.obs, engine.model, engine.reference.as_ref(), &engine.params)?;
    let extra: Vec<String> = c.map(|c| format!("idw C={c}")).into_iter().collect();
    let mut table = Table::create(
        &a.out,
        a.engine.seed(),
        &extra,
        &["x", "y", "t", "value", "variance", "n_neighbors"],
    )?;
    let results = predictor.predict(&targets);
    let mut failed = 0;
    for (t, r) in targets.iter().zip(results) {
        let (value, variance, n) = match r {
            Ok((v, var, n)) => (Some(v), var, n),
            Err(e) => {
                log::warn!("target ({}, {}, {}): {e}", t.x, t.y, t.t);
                failed += 1;
                (None, None, 0)
            }
        };
        table.row([
            t.x.to_string(),
            t.y.to_string(),
            t.t.to_string(),
            fmt_opt(value),
            fmt_opt(variance),
            n.to_string(),
        ])?;
    }
    table.finish()?;
    if failed > 0 {
        log::warn!("{failed} of {} targets could not be predicted", targets.len());
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, value_parser = ["random", "segments", "lines"], default_value = "random")]
    pub scenario: String,
    #[arg(long, value_parser = parse_list::<f64>, default_value = "0.1,0.25,0.5,0.75,0.9")]
    pub fractions: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse_list::<Method>, default_value = "sk,ok,ked,idw")]
    pub methods: ::std::vec::Vec<Method>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// mean run length of held-out path segments, observations
    #[arg(long, default_value_t = 20.0)]
    pub segment_length: f64,
    /// sensor_id,line table for the lines scenario (default: one line per sensor)
    #[arg(long)]
    pub lines: Option<PathBuf>,
    /// use this model in every fold instead of refitting
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "spherical")]
    pub family: Family,
    #[command(flatten)]
    pub bins: BinArgs,
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// fixed IDW constant (default: tuned per fold)
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn scenario_for(
    name: &str,
    obs: &[Observation],
    lines: Option<&std::path::Path>,
    segment_length: f64,
) -> CliResult<Scenario> {
    Ok(match name {
        "random" => Scenario::RandomPoints,
        "segments" => Scenario::PathSegments {
            mean_segment_length: segment_length,
        },
        "lines" => {
            let labels = match lines {
                Some(p) => assign_lines(obs, &io::read_line_map(p)?)?,
                None => obs.iter().map(|o| o.sensor_id.clone()).collect(),
            };
            Scenario::LeaveLineOut { lines: labels }
        }
        other => return Err(Failure::config(format!("unknown scenario '{other}'"))),
    })
}

pub fn write_report(path: &std::path::Path, seed: u64, report: &CvReport) -> CliResult<()> {
    let header = [
        "method",
        "scenario",
        "fraction",
        "bias",
        "rmse",
        "corr",
        "n_cells_skipped",
    ];
    let mut t = Table::create(path, Some(seed), &[], &header)?;
    for r in &report.rows {
        t.row([
            r.method.name().to_string(),
            r.scenario.clone(),
            r.fraction.to_string(),
            fmt_opt(r.bias),
            fmt_opt(r.rmse),
            fmt_opt(r.corr),
            r.n_cells_skipped.to_string(),
        ])?;
    }
    t.finish()
}

pub fn crossval(a: &CrossvalArgs) -> CliResult<()> {
    stages::check_crossval(&a.methods, &a.fractions, a.folds)?;
    let reference = load_reference(a.reference.as_ref())?;
    let obs = io::read_data(&a.data)?;
    let scenario = scenario_for(&a.scenario, &obs, a.lines.as_deref(), a.segment_length)?;
    let fixed_model = a.model.as_ref().map(|p| io::read_model(p)).transpose()?;
    let report = stages::crossval(
        &obs,
        reference.as_ref(),
        CrossvalParams {
            methods: a.methods.clone(),
            scenario,
            fractions: a.fractions.clone(),
            folds: a.folds,
            seed: a.seed,
            family: a.family,
            bins: a.bins.spec(),
            fixed_model,
            neighborhood: NeighborhoodConfig {
                k: a.k,
                max_radius: None,
            },
            idw_c: a.c,
        },
    )?;
    write_report(&a.out, a.seed, &report)
}
