//! Gridded prediction: one CSV slice per time step plus a manifest.

use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use stkrige::SpaceTimePoint;

use crate::commands::EngineArgs;
use crate::failure::{CliResult, Failure};
use crate::io::{fmt_opt, parse_time, Table};
use crate::stages::Predictor;

pub const DEFAULT_CELL_CAP: usize = 1_000_000;

fn parse_time_arg(s: &str) -> Result<f64, String> {
    parse_time(s).ok_or_else(|| format!("'{s}' is neither seconds nor an ISO-8601 timestamp"))
}

/// Raster geometry; cells are addressed by their centers and the time
/// range includes both ends.
#[derive(Debug, Clone, Copy, PartialEq, Args)]
pub struct GridSpec {
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y_max: f64,
    /// cell size, m
    #[arg(long)]
    pub cell: f64,
    /// first slice time (seconds or ISO-8601)
    #[arg(long, value_parser = parse_time_arg)]
    pub t_start: f64,
    /// last slice time (seconds or ISO-8601)
    #[arg(long, value_parser = parse_time_arg)]
    pub t_end: f64,
    /// time between slices, s
    #[arg(long)]
    pub t_step: f64,
}

impl GridSpec {
    pub fn validate(&self, cell_cap: usize) -> CliResult<()> {
        let finite = [
            self.x_min,
            self.x_max,
            self.y_min,
            self.y_max,
            self.cell,
            self.t_start,
            self.t_end,
            self.t_step,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Failure::config("grid needs finite bounds with max > min on each axis"));
        }
        if !(self.cell > 0.0) || !(self.t_step > 0.0) || self.t_end < self.t_start {
            return Err(Failure::config("grid needs cell > 0, t_step > 0 and t_end >= t_start"));
        }
        let (nx, ny) = self.shape();
        if nx.saturating_mul(ny) > cell_cap {
            return Err(Failure::config(format!(
                "grid has {nx}x{ny} cells per slice, above the cap of {cell_cap}"
            )));
        }
        Ok(())
    }

    fn count(span: f64, step: f64) -> usize {
        // tolerate round-off so that exact multiples do not gain a cell
        ((span / step) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn shape(&self) -> (usize, usize) {
        (
            Self::count(self.x_max - self.x_min, self.cell),
            Self::count(self.y_max - self.y_min, self.cell),
        )
    }

    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_end - self.t_start) / self.t_step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.t_start + i as f64 * self.t_step).collect()
    }

    pub fn cells(&self, t: f64) -> Vec<SpaceTimePoint> {
        let (nx, ny) = self.shape();
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(SpaceTimePoint::new(
                    self.x_min + (i as f64 + 0.5) * self.cell,
                    self.y_min + (j as f64 + 0.5) * self.cell,
                    t,
                ));
            }
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub grid: GridSpec,
    /// largest number of cells per slice
    #[arg(long, default_value_t = DEFAULT_CELL_CAP)]
    pub cell_cap: usize,
    /// directory receiving the slices and manifest.csv
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Writes the slices and manifest; returns the paths written, manifest last.
pub fn render(
    predictor: &Predictor<'_>,
    grid: &GridSpec,
    cell_cap: usize,
    out_dir: &Path,
    seed: Option<u64>,
    extra: &[String],
) -> CliResult<Vec<PathBuf>> {
    grid.validate(cell_cap)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::data(format!("{}: {e}", out_dir.display())))?;
    let times = grid.times();
    let slices: Vec<CliResult<(PathBuf, [String; 5])>> = times
        .par_iter()
        .enumerate()
        .map(|(index, &t)| render_slice(predictor, grid, index, t, out_dir, seed, extra))
        .collect();
    let mut written = Vec::with_capacity(slices.len() + 1);
    let mut manifest_rows = Vec::with_capacity(slices.len());
    for slice in slices {
        let (path, row) = slice?;
        written.push(path);
        manifest_rows.push(row);
    }
    let manifest = out_dir.join("manifest.csv");
    let mut table = Table::create(
        &manifest,
        seed,
        extra,
        &["slice", "t_seconds", "file", "n_cells", "n_absent"],
    )?;
    for row in manifest_rows {
        table.row(row)?;
    }
    table.finish()?;
    written.push(manifest);
    Ok(written)
}

fn render_slice(
    predictor: &Predictor<'_>,
    grid: &GridSpec,
    index: usize,
    t: f64,
    out_dir: &Path,
    seed: Option<u64>,
    extra: &[String],
) -> CliResult<(PathBuf, [String; 5])> {
    let cells = grid.cells(t);
    let name = format!("slice_{index:04}.csv");
    let path = out_dir.join(&name);
    let mut table = Table::create(&path, seed, extra, &["x", "y", "value", "variance"])?;
    let mut absent = 0;
    let mut failures = 0;
    for (p, r) in cells.iter().zip(predictor.predict(&cells)) {
        let (value, variance) = match r {
            Ok((v, var, _)) => (Some(v), var),
            Err(e) => {
                absent += 1;
                if !matches!(e, stkrige::Error::NoNeighbors | stkrige::Error::InsufficientData(_)) {
                    failures += 1;
                    log::debug!("cell ({}, {}) at t={t}: {e}", p.x, p.y);
                }
                (None, None)
            }
        };
        table.row([p.x.to_string(), p.y.to_string(), fmt_opt(value), fmt_opt(variance)])?;
    }
    table.finish()?;
    if failures > 0 {
        log::warn!("slice {index} (t={t}): {failures} cells failed and are left absent");
    }
    let row = [
        index.to_string(),
        t.to_string(),
        name,
        cells.len().to_string(),
        absent.to_string(),
    ];
    Ok((path, row))
}

pub fn map(a: &MapArgs) -> CliResult<()> {
    a.grid.validate(a.cell_cap)?;
    let engine = a.engine.load()?;
    if engine.obs.is_empty() {
        log::warn!("no observations; every cell will be absent");
    }
    let (predictor, c) = Predictor::new(&engine.obs, engine.model, engine.reference.as_ref(), &engine.params)?;
    let extra: Vec<String> = c.map(|c| format!("idw C={c}")).into_iter().collect();
    render(&predictor, &a.grid, a.cell_cap, &a.out_dir, a.engine.seed(), &extra)?;
    Ok(())
}
