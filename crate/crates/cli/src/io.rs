//! File formats shared by the subcommands.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stkrige::ingest::{parse_reference_csv, parse_timestamp};
use stkrige::variogram::{BinGrid, EmpiricalVariogram, VariogramBin};
use stkrige::{Family, Observation, ReferenceSeries, SpaceTimePoint, VariogramModel};

use crate::failure::{CliResult, Context, Failure};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DATA_HEADER: [&str; 5] = ["sensor_id", "t_seconds", "x_m", "y_m", "value_ugm3"];
const TARGET_HEADER: [&str; 3] = ["x", "y", "t"];
const EMP_HEADER: [&str; 8] = ["h_lo", "h_hi", "u_lo", "u_hi", "h_mean", "u_mean", "gamma", "n_pairs"];

pub fn comment_line(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# stkrige {VERSION} seed={s}"),
        None => format!("# stkrige {VERSION} seed=none"),
    }
}

/// CSV output that starts with the provenance comment line.
pub struct Table {
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(path: &Path, seed: Option<u64>, extra: &[String], header: &[&str]) -> CliResult<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).context(dir.display())?;
        }
        let mut file = BufWriter::new(File::create(path).context(path.display())?);
        writeln!(file, "{}", comment_line(seed))?;
        for line in extra {
            writeln!(file, "# {line}")?;
        }
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Failure::data(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn expect_header(rdr: &mut csv::Reader<File>, expected: &[&str], path: &Path) -> CliResult<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Failure::data(format!(
            "{}: expected header '{}', found '{}'",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn number(field: &str, name: &str, path: &Path, line: u64) -> CliResult<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Failure::data(format!("{} line {line}: bad {name} '{field}'", path.display())))
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

/// Reads a normalized observation table.
pub fn read_data(path: &Path) -> CliResult<Vec<Observation>> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &DATA_HEADER, path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.context(path.display())?;
        let line = line_of(&row);
        let t = number(&row[1], "t_seconds", path, line)?;
        let x = number(&row[2], "x_m", path, line)?;
        let y = number(&row[3], "y_m", path, line)?;
        let v = number(&row[4], "value_ugm3", path, line)?;
        out.push(Observation::new(&row[0], SpaceTimePoint::new(x, y, t), v));
    }
    Ok(out)
}

pub fn write_data(path: &Path, seed: Option<u64>, obs: &[Observation]) -> CliResult<()> {
    let mut table = Table::create(path, seed, &[], &DATA_HEADER)?;
    for o in obs {
        table.row([
            o.sensor_id.clone(),
            o.point.t.to_string(),
            o.point.x.to_string(),
            o.point.y.to_string(),
            o.value.to_string(),
        ])?;
    }
    table.finish()
}

/// Reads `x,y,t`; `t` may be seconds or an ISO-8601 timestamp.
pub fn read_targets(path: &Path) -> CliResult<Vec<SpaceTimePoint>> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &TARGET_HEADER, path)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.context(path.display())?;
        let line = line_of(&row);
        let x = number(&row[0], "x", path, line)?;
        let y = number(&row[1], "y", path, line)?;
        let t = parse_time(&row[2])
            .ok_or_else(|| Failure::data(format!("{} line {line}: bad t '{}'", path.display(), &row[2])))?;
        out.push(SpaceTimePoint::new(x, y, t));
    }
    Ok(out)
}

/// Seconds since the epoch, given either as a number or as ISO-8601.
pub fn parse_time(s: &str) -> Option<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .or_else(|| parse_timestamp(s))
}

pub fn read_reference(path: &Path) -> CliResult<ReferenceSeries> {
    let (series, parsed) = parse_reference_csv(path).context(path.display())?;
    for (line, msg) in &parsed.errors {
        log::warn!("{} line {line}: {msg}", path.display());
    }
    if parsed.missing > 0 {
        log::warn!(
            "{}: {} rows with missing fields dropped",
            path.display(),
            parsed.missing
        );
    }
    for gap in series.gaps() {
        log::warn!(
            "{}: reference gap from t={} to t={} s is interpolated across",
            path.display(),
            gap.start,
            gap.end
        );
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Seconds,
    Minutes,
    Hours,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Hours => 3600.0,
        }
    }
}

/// On-disk model: K is expressed in meters per `time_unit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: Family,
    pub sill: f64,
    pub nugget: f64,
    pub range: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub objective: Option<f64>,
    #[serde(default)]
    pub time_unit: TimeUnit,
}

impl ModelFile {
    pub fn from_model(m: &VariogramModel, objective: Option<f64>, time_unit: TimeUnit) -> Self {
        Self {
            family: m.family,
            sill: m.sill,
            nugget: m.nugget,
            range: m.range,
            k: m.k * time_unit.seconds(),
            objective,
            time_unit,
        }
    }

    pub fn model(&self) -> CliResult<VariogramModel> {
        Ok(VariogramModel::new(
            self.family,
            self.sill,
            self.nugget,
            self.range,
            self.k / self.time_unit.seconds(),
        )?)
    }
}

pub fn read_model(path: &Path) -> CliResult<VariogramModel> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    file.model().context(path.display())
}

pub fn write_model(path: &Path, file: &ModelFile) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(file).map_err(|e| Failure::data(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).context(dir.display())?;
    }
    std::fs::write(path, bytes).context(path.display())
}

pub fn write_empirical(path: &Path, emp: &EmpiricalVariogram, extra: &[String]) -> CliResult<()> {
    let (he, ue) = (emp.grid.h_edges(), emp.grid.u_edges());
    let mut table = Table::create(path, None, extra, &EMP_HEADER)?;
    for b in &emp.bins {
        table.row([
            he[b.h_index].to_string(),
            he[b.h_index + 1].to_string(),
            ue[b.u_index].to_string(),
            ue[b.u_index + 1].to_string(),
            b.h_mean.to_string(),
            b.u_mean.to_string(),
            fmt_opt(b.gamma),
            b.n_pairs.to_string(),
        ])?;
    }
    table.finish()
}

/// Rebuilds the bin grid from the bin limits; every bin, occupied or not,
/// must be present.
pub fn read_empirical(path: &Path) -> CliResult<EmpiricalVariogram> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &EMP_HEADER, path)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.context(path.display())?;
        let line = line_of(&row);
        let mut v = [0.0; 6];
        for (k, name) in EMP_HEADER[..6].iter().enumerate() {
            v[k] = number(&row[k], name, path, line)?;
        }
        let gamma = match &row[6] {
            "" => None,
            g => Some(number(g, "gamma", path, line)?),
        };
        let n_pairs = row[7]
            .parse::<u64>()
            .map_err(|_| Failure::data(format!("{} line {line}: bad n_pairs '{}'", path.display(), &row[7])))?;
        rows.push((v, gamma, n_pairs));
    }
    let edges = |lo: usize, hi: usize| {
        let mut e: Vec<f64> = rows.iter().flat_map(|(v, _, _)| [v[lo], v[hi]]).collect();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    };
    let grid = BinGrid::new(edges(0, 1), edges(2, 3)).context(path.display())?;
    let index = |edges: &[f64], x: f64| edges.iter().position(|&e| e == x);
    let mut bins: Vec<VariogramBin> = Vec::with_capacity(rows.len());
    for (v, gamma, n_pairs) in rows {
        let (Some(h_index), Some(u_index)) = (index(grid.h_edges(), v[0]), index(grid.u_edges(), v[2])) else {
            return Err(Failure::data(format!("{}: inconsistent bin limits", path.display())));
        };
        bins.push(VariogramBin {
            h_index,
            u_index,
            h_mean: v[4],
            u_mean: v[5],
            gamma,
            n_pairs,
        });
    }
    bins.sort_by_key(|b| (b.h_index, b.u_index));
    bins.dedup_by_key(|b| (b.h_index, b.u_index));
    if bins.len() != grid.nh() * grid.nu() {
        return Err(Failure::data(format!(
            "{}: {} bins for a {}x{} grid",
            path.display(),
            bins.len(),
            grid.nh(),
            grid.nu()
        )));
    }
    Ok(EmpiricalVariogram { grid, bins })
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).context(path.display())?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `sensor_id,line` table used by the leave-line-out scenario.
pub fn read_line_map(path: &Path) -> CliResult<std::collections::BTreeMap<String, String>> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &["sensor_id", "line"], path)?;
    let mut out = std::collections::BTreeMap::new();
    for row in rdr.records() {
        let row = row.context(path.display())?;
        out.insert(row[0].to_string(), row[1].to_string());
    }
    Ok(out)
}
