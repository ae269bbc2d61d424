//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The exported functions are thin wrappers; the logic lives in plain Rust
//! so it can be tested natively.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stkrige::idw::{Idw, IdwConfig};
use stkrige::krige::Kriger;
use stkrige::synth::{Mean, Simulator};
use stkrige::{
    Family, KrigingMethod, NeighborhoodConfig, Observation, ReferenceSeries, SpaceTimePoint, VariogramModel,
};
use wasm_bindgen::prelude::*;

/// Side of the square demo domain, m.
pub const SIDE: f64 = 5000.0;
/// Observations are spread over this period, s.
pub const PERIOD: f64 = 3600.0;
/// The map is drawn at this instant.
pub const MAP_TIME: f64 = PERIOD / 2.0;
pub const MEAN: f64 = 40.0;
const MAX_POINTS: usize = 2000;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

pub fn model(family: &str, sill: f64, nugget: f64, range: f64, k: f64) -> Result<VariogramModel, String> {
    let family: Family = family.parse().map_err(|e| format!("{e}"))?;
    VariogramModel::new(family, sill, nugget, range, k).map_err(|e| e.to_string())
}

/// `n` samples of γ(h, u) for h in [0, h_max], one run per time lag.
pub fn curves(m: &VariogramModel, h_max: f64, n: usize, time_lags: &[f64]) -> Vec<f64> {
    let step = if n > 1 { h_max / (n - 1) as f64 } else { 0.0 };
    time_lags
        .iter()
        .flat_map(|&u| (0..n).map(move |i| m.gamma(i as f64 * step, u)))
        .collect()
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn variogram_curves(
    family: &str,
    sill: f64,
    nugget: f64,
    range: f64,
    k: f64,
    h_max: f64,
    n: usize,
    time_lags: &[f64],
) -> Result<Vec<f64>, JsError> {
    let m = model(family, sill, nugget, range, k).map_err(js)?;
    Ok(curves(&m, h_max, n, time_lags))
}

/// A simulated field: scattered observations over an hour and the true
/// values on a grid at the middle of that hour.
#[wasm_bindgen]
pub struct Scene {
    model: VariogramModel,
    obs: Vec<Observation>,
    truth: Vec<f64>,
    grid_n: usize,
}

impl Scene {
    pub fn build(model: VariogramModel, n_obs: usize, grid_n: usize, seed: u64) -> Result<Self, String> {
        if n_obs == 0 || grid_n == 0 || n_obs + grid_n * grid_n > MAX_POINTS {
            return Err(format!(
                "need at least one observation and one cell, and at most {MAX_POINTS} points in total"
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<SpaceTimePoint> = (0..n_obs)
            .map(|_| {
                SpaceTimePoint::new(
                    rng.random::<f64>() * SIDE,
                    rng.random::<f64>() * SIDE,
                    rng.random::<f64>() * PERIOD,
                )
            })
            .collect();
        points.extend(grid_cells(grid_n));
        let sim = Simulator::with_cap(points, &model, MAX_POINTS).map_err(|e| e.to_string())?;
        let mut all = sim
            .draw_observations(&Mean::Constant(MEAN), seed)
            .map_err(|e| e.to_string())?;
        let truth = all.split_off(n_obs).into_iter().map(|o| o.value).collect();
        Ok(Self {
            model,
            obs: all,
            truth,
            grid_n,
        })
    }

    /// Predicts every grid cell; cells that cannot be predicted are NaN.
    pub fn predict_grid(&self, method: &str, k: usize, c: f64) -> Result<Vec<f64>, String> {
        let cells = grid_cells(self.grid_n);
        let neighborhood = NeighborhoodConfig { k, max_radius: None };
        let values = match method {
            "idw" => {
                let idw = Idw::new(
                    &self.obs,
                    IdwConfig {
                        c,
                        k,
                        ..IdwConfig::default()
                    },
                )
                .map_err(|e| e.to_string())?;
                cells
                    .iter()
                    .map(|p| idw.predict(p).map(|(v, _)| v).unwrap_or(f64::NAN))
                    .collect()
            }
            "ok" | "sk" => {
                let (km, reference) = if method == "ok" {
                    (KrigingMethod::Ok, None)
                } else {
                    let r = ReferenceSeries::constant(MEAN, 0.0, PERIOD).map_err(|e| e.to_string())?;
                    (KrigingMethod::Sk, Some(r))
                };
                let kriger = Kriger::new(km, &self.obs, self.model, reference.as_ref(), neighborhood)
                    .map_err(|e| e.to_string())?;
                kriger
                    .predict_batch(&cells)
                    .into_iter()
                    .map(|r| r.map(|p| p.value).unwrap_or(f64::NAN))
                    .collect()
            }
            other => return Err(format!("unknown method '{other}' (expected ok, sk or idw)")),
        };
        Ok(values)
    }
}

fn grid_cells(n: usize) -> Vec<SpaceTimePoint> {
    let cell = SIDE / n as f64;
    (0..n * n)
        .map(|i| {
            let (col, row) = (i % n, i / n);
            SpaceTimePoint::new((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell, MAP_TIME)
        })
        .collect()
}

/// Root mean square difference over the finite entries.
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let (sum, n) = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .fold((0.0, 0usize), |(s, n), (x, y)| (s + (x - y).powi(2), n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        family: &str,
        sill: f64,
        nugget: f64,
        range: f64,
        k: f64,
        n_obs: usize,
        grid_n: usize,
        seed: u64,
    ) -> Result<Scene, JsError> {
        let m = model(family, sill, nugget, range, k).map_err(js)?;
        Scene::build(m, n_obs, grid_n, seed).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    #[wasm_bindgen(getter)]
    pub fn side(&self) -> f64 {
        SIDE
    }

    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    /// Observation coordinates and values as consecutive (x, y, t, value).
    pub fn observations(&self) -> Vec<f64> {
        self.obs
            .iter()
            .flat_map(|o| [o.point.x, o.point.y, o.point.t, o.value])
            .collect()
    }

    pub fn predict(&self, method: &str, k: usize, c: f64) -> Result<Vec<f64>, JsError> {
        self.predict_grid(method, k, c).map_err(js)
    }

    /// RMSE of a predicted grid against the simulated truth.
    pub fn score(&self, values: &[f64]) -> f64 {
        rmse(values, &self.truth)
    }
}
