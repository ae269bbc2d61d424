//! Weighted least squares fit of a metric model to an empirical variogram.
//!
//! The objective is the pair-count weighted relative misfit
//! `Σ n·(γ̂/γ(h̄,ū) − 1)²`, minimized with a bounded Nelder–Mead search
//! over (sill, nugget, range, K).

use serde::{Deserialize, Serialize};

use super::{EmpiricalVariogram, Family, VariogramModel};
use crate::error::{Error, Result};

/// Outcome of [`fit_wls`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: VariogramModel,
    pub objective: f64,
    pub initial_objective: f64,
    pub evaluations: usize,
    /// Set when the data cannot identify the structure (e.g. a flat surface).
    pub degeneracy: Option<String>,
}

/// Weighted least squares objective of `model` against the occupied bins.
pub fn wls_objective(emp: &EmpiricalVariogram, model: &VariogramModel) -> f64 {
    emp.occupied()
        .map(|b| {
            let g = model.gamma(b.h_mean, b.u_mean);
            let observed = b.gamma.unwrap_or(0.0);
            if g > 0.0 {
                b.n_pairs as f64 * (observed / g - 1.0).powi(2)
            } else if observed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// Maps unconstrained search coordinates onto valid parameters.
///
/// sill and range are log-scaled; nugget and K are squared so that both can
/// reach exactly zero.
#[derive(Debug, Clone, Copy)]
struct Transform {
    family: Family,
    sill0: f64,
    range0: f64,
    k0: f64,
    scale: f64,
}

impl Transform {
    const LOG_LIMIT: f64 = 40.0;

    fn model_at(&self, p: &[f64]) -> VariogramModel {
        let clamp = |v: f64| v.clamp(-Self::LOG_LIMIT, Self::LOG_LIMIT);
        VariogramModel {
            family: self.family,
            sill: self.sill0 * clamp(p[0]).exp(),
            nugget: self.scale * p[1] * p[1],
            range: self.range0 * clamp(p[2]).exp(),
            k: self.k0 * p[3] * p[3],
        }
    }

    fn params_of(&self, m: &VariogramModel) -> [f64; 4] {
        [
            (m.sill / self.sill0).ln(),
            (m.nugget / self.scale).sqrt(),
            (m.range / self.range0).ln(),
            (m.k / self.k0).sqrt(),
        ]
    }
}

/// Fits `family` to `emp`, starting from `init`.
///
/// The returned objective never exceeds the objective at `init`.
pub fn fit_wls(emp: &EmpiricalVariogram, family: Family, init: &VariogramModel) -> Result<FitReport> {
    let occupied = emp.occupied().count();
    if occupied < 4 {
        return Err(Error::InsufficientData(format!(
            "variogram fit needs at least 4 occupied bins, found {occupied}"
        )));
    }
    init.validate()?;
    let init = VariogramModel { family, ..*init };
    let initial_objective = wls_objective(emp, &init);
    if !initial_objective.is_finite() {
        return Err(Error::NonFinite(format!("WLS objective at initial model {init:?}")));
    }

    let max_u = emp.occupied().map(|b| b.u_mean).fold(0.0, f64::max);
    let k0 = if init.k > 0.0 {
        init.k
    } else if max_u > 0.0 {
        init.range / max_u
    } else {
        1.0
    };
    let tf = Transform {
        family,
        sill0: init.sill,
        range0: init.range,
        k0,
        scale: init.total_sill(),
    };
    let objective = |p: &[f64]| {
        let v = wls_objective(emp, &tf.model_at(p));
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x = tf.params_of(&init).to_vec();
    // restarting the simplex guards against premature collapse
    let mut best = initial_objective;
    let mut evaluations = 1;
    for _ in 0..12 {
        let (xn, fx, evals) = nelder_mead(&objective, &x, 0.25, 4000, 1e-14);
        evaluations += evals;
        let improved = fx < best;
        let gain = best - fx;
        if improved {
            x = xn;
            best = fx;
        }
        if !improved || gain <= 1e-12 * best.max(1e-300) {
            break;
        }
    }

    let model = tf.model_at(&x);
    let (model, objective) = if best <= initial_objective {
        (model, best)
    } else {
        (init, initial_objective)
    };
    let degeneracy = detect_degeneracy(emp, &model);
    if let Some(reason) = &degeneracy {
        log::debug!("variogram fit: {reason}");
    }
    Ok(FitReport {
        model,
        objective,
        initial_objective,
        evaluations,
        degeneracy,
    })
}

fn detect_degeneracy(emp: &EmpiricalVariogram, model: &VariogramModel) -> Option<String> {
    let values: Vec<f64> = emp.occupied().map(|b| model.gamma(b.h_mean, b.u_mean)).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-3 * hi.abs().max(f64::MIN_POSITIVE) {
        Some(format!(
            "fitted surface is flat over all bins (nugget + sill = {:.6}); range and K are not identified",
            model.total_sill()
        ))
    } else {
        None
    }
}

/// Heuristic starting model read off the empirical surface.
pub fn initial_guess(emp: &EmpiricalVariogram, family: Family) -> Result<VariogramModel> {
    let bins: Vec<_> = emp.occupied().collect();
    if bins.is_empty() {
        return Err(Error::InsufficientData(
            "empirical variogram has no occupied bins".into(),
        ));
    }
    let total_pairs: f64 = bins.iter().map(|b| b.n_pairs as f64).sum();
    let mean_gamma = bins
        .iter()
        .map(|b| b.gamma.unwrap_or(0.0) * b.n_pairs as f64)
        .sum::<f64>()
        / total_pairs;
    let plateau = mean_gamma.max(1e-12);
    let near = bins
        .iter()
        .min_by(|a, b| a.h_mean.hypot(a.u_mean).total_cmp(&b.h_mean.hypot(b.u_mean)))
        .and_then(|b| b.gamma)
        .unwrap_or(0.0);
    let nugget = (0.5 * near).min(0.5 * plateau);
    let sill = (plateau - nugget).max(0.1 * plateau);
    let h_max = emp.grid.h_max();
    let u_max = emp.grid.u_max();
    VariogramModel::new(family, sill, nugget, h_max / 3.0, h_max / u_max)
}

/// Runs [`fit_wls`] from several starting points and keeps the best result.
pub fn fit_wls_multistart(emp: &EmpiricalVariogram, family: Family) -> Result<FitReport> {
    let base = initial_guess(emp, family)?;
    let mut best: Option<FitReport> = None;
    for &range_factor in &[0.5, 1.0, 2.0] {
        for &k_factor in &[0.1, 1.0, 10.0] {
            let init = VariogramModel {
                range: base.range * range_factor,
                k: base.k * k_factor,
                ..base
            };
            let report = fit_wls(emp, family, &init)?;
            if best.as_ref().is_none_or(|b| report.objective < b.objective) {
                best = Some(report);
            }
        }
    }
    Ok(best.expect("at least one start"))
}

/// Plain Nelder–Mead simplex minimizer. Returns (argmin, min, evaluations).
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-8 {
            step * v[i].abs().max(1.0)
        } else {
            step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (fbest, fworst) = (values[0], values[n]);
        if (fworst - fbest).abs() <= ftol * (fbest.abs() + fworst.abs()) + 1e-300 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + coef * (simplex[n][j] - centroid[j]))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = along(-0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = f(&c);
            (c, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let (best, rest) = simplex.split_first_mut().expect("non-empty simplex");
        for (vertex, value) in rest.iter_mut().zip(&mut values[1..]) {
            for (v, b) in vertex.iter_mut().zip(best.iter()) {
                *v = b + 0.5 * (*v - b);
            }
            *value = f(vertex);
        }
        evals += n;
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].clone(), values[best], evals)
}
