//! Unconditional Gaussian random fields on arbitrary space-time point sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{Observation, SpaceTimePoint};
use crate::ingest::ReferenceSeries;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::variogram::VariogramModel;

pub const DEFAULT_POINT_CAP: usize = 3000;

/// Sensor id given to simulated observations.
pub const SIMULATED_SENSOR: &str = "sim";

#[derive(Debug, Clone)]
pub enum Mean {
    Constant(f64),
    /// the field is added to the interpolated series at each time
    Series(ReferenceSeries),
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub points: Vec<SpaceTimePoint>,
    pub model: VariogramModel,
    pub mean: Mean,
    pub seed: u64,
}

/// Factorized covariance over a fixed point set; draws are cheap once built.
#[derive(Debug, Clone)]
pub struct Simulator {
    points: Vec<SpaceTimePoint>,
    factor: Cholesky,
    jitter: f64,
}

/// Stationary covariance between the points. Distinct points at zero
/// metric distance share the partial sill only; the nugget is white noise.
pub fn covariance_matrix(points: &[SpaceTimePoint], model: &VariogramModel) -> SquareMatrix {
    let total = model.total_sill();
    SquareMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            total
        } else {
            let a = &points[i];
            let b = &points[j];
            total - model.gamma_between((a.x - b.x).hypot(a.y - b.y).hypot(model.k * (a.t - b.t)))
        }
    })
}

impl Simulator {
    pub fn new(points: Vec<SpaceTimePoint>, model: &VariogramModel) -> Result<Self> {
        Self::with_cap(points, model, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(points: Vec<SpaceTimePoint>, model: &VariogramModel, cap: usize) -> Result<Self> {
        model.validate()?;
        if points.is_empty() {
            return Err(Error::InsufficientData("simulation needs at least one point".into()));
        }
        if points.len() > cap {
            return Err(Error::InvalidParameter(format!(
                "{} points exceed the dense simulation cap of {cap}",
                points.len()
            )));
        }
        let (factor, jitter) = Cholesky::factor_with_jitter(&covariance_matrix(&points, model))?;
        Ok(Self { points, factor, jitter })
    }

    pub fn points(&self) -> &[SpaceTimePoint] {
        &self.points
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Zero-mean field values for `seed`, in point order.
    pub fn draw(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..self.points.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        self.factor.lower_mul(&g)
    }

    pub fn draw_observations(&self, mean: &Mean, seed: u64) -> Result<Vec<Observation>> {
        let field = self.draw(seed);
        self.points
            .iter()
            .zip(field)
            .enumerate()
            .map(|(i, (p, z))| {
                let m = match mean {
                    Mean::Constant(c) => *c,
                    Mean::Series(s) => s.interpolate(p.t).map_err(|e| Error::at(i, e))?,
                };
                Ok(Observation::new(SIMULATED_SENSOR, *p, m + z))
            })
            .collect()
    }
}

pub fn simulate(spec: &SimulationSpec) -> Result<Vec<Observation>> {
    Simulator::new(spec.points.clone(), &spec.model)?.draw_observations(&spec.mean, spec.seed)
}
