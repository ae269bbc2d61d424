//! Empirical space-time variograms, the metric model and its WLS fit.

mod empirical;
mod fit;
mod model;
mod residuals;

pub use empirical::{
    default_h_max, directional_variogram, empirical_variogram, BinGrid, Direction, EmpiricalVariogram, VariogramBin,
};
pub use fit::{fit_wls, fit_wls_multistart, initial_guess, wls_objective, FitReport};
pub use model::{Family, VariogramModel};
pub use residuals::{fit_drift, prepare_residuals, ResidualKind};
