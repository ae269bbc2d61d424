use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Observation;

/// Spatial and temporal bin edges. Both start at 0 and increase strictly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    h_edges: Vec<f64>,
    u_edges: Vec<f64>,
}

impl BinGrid {
    pub fn new(h_edges: Vec<f64>, u_edges: Vec<f64>) -> Result<Self> {
        for (name, edges) in [("spatial", &h_edges), ("temporal", &u_edges)] {
            if edges.len() < 2 || edges[0] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} bin edges must start at 0 and hold at least one bin"
                )));
            }
            if edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} bin edges must be finite and strictly increasing"
                )));
            }
        }
        Ok(Self { h_edges, u_edges })
    }

    /// Equal-width bins over `[0, h_max] × [0, u_max]`.
    pub fn uniform(h_max: f64, nh: usize, u_max: f64, nu: usize) -> Result<Self> {
        if nh == 0 || nu == 0 || !(h_max > 0.0) || !(u_max > 0.0) {
            return Err(Error::InvalidParameter("bin counts and limits must be positive".into()));
        }
        let edges = |max: f64, n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| if i == n { max } else { max * i as f64 / n as f64 })
                .collect()
        };
        Self::new(edges(h_max, nh), edges(u_max, nu))
    }

    pub fn h_edges(&self) -> &[f64] {
        &self.h_edges
    }

    pub fn u_edges(&self) -> &[f64] {
        &self.u_edges
    }

    pub fn nh(&self) -> usize {
        self.h_edges.len() - 1
    }

    pub fn nu(&self) -> usize {
        self.u_edges.len() - 1
    }

    pub fn h_max(&self) -> f64 {
        self.h_edges[self.nh()]
    }

    pub fn u_max(&self) -> f64 {
        self.u_edges[self.nu()]
    }

    /// Half-open bins `[e_i, e_{i+1})`, the last one closed on the right.
    fn index(edges: &[f64], v: f64) -> Option<usize> {
        let n = edges.len() - 1;
        if v < 0.0 || v > edges[n] {
            return None;
        }
        Some((edges.partition_point(|&e| e <= v) - 1).min(n - 1))
    }

    /// Flat bin index for a lag, or `None` outside the grid.
    pub fn locate(&self, h: f64, u: f64) -> Option<usize> {
        let i = Self::index(&self.h_edges, h)?;
        let j = Self::index(&self.u_edges, u)?;
        Some(i * self.nu() + j)
    }
}

/// Half of the largest pairwise spatial distance among the observations.
///
/// Uses the convex hull, so it stays cheap for large samples.
pub fn default_h_max(obs: &[Observation]) -> f64 {
    let mut pts: Vec<(f64, f64)> = obs.iter().map(|o| (o.point.x, o.point.y)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    let hull = convex_hull(&pts);
    let mut best = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            best = best.max((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    best / 2.0
}

// Andrew's monotone chain; input sorted and deduplicated.
fn convex_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if pts.len() < 3 {
        return pts.to_vec();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// One cell of the empirical variogram surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    pub h_index: usize,
    pub u_index: usize,
    /// mean spatial lag of the pairs, meters
    pub h_mean: f64,
    /// mean temporal lag of the pairs, seconds
    pub u_mean: f64,
    /// half mean squared difference; `None` for empty bins
    pub gamma: Option<f64>,
    pub n_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub grid: BinGrid,
    /// row-major over (spatial, temporal) bins
    pub bins: Vec<VariogramBin>,
}

impl EmpiricalVariogram {
    pub fn occupied(&self) -> impl Iterator<Item = &VariogramBin> {
        self.bins.iter().filter(|b| b.n_pairs > 0)
    }

    pub fn total_pairs(&self) -> u64 {
        self.bins.iter().map(|b| b.n_pairs).sum()
    }

    pub fn bin(&self, h_index: usize, u_index: usize) -> &VariogramBin {
        &self.bins[h_index * self.grid.nu() + u_index]
    }
}

/// Azimuthal selection of pair separation vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    /// degrees clockwise from north; 0 is north-south, 90 is east-west
    pub azimuth: f64,
    /// half-width of the accepted sector, degrees in (0, 90]
    pub tolerance: f64,
}

impl Direction {
    pub fn new(azimuth: f64, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance <= 90.0) || !azimuth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "directional tolerance must lie in (0, 90], got {tolerance}"
            )));
        }
        Ok(Self { azimuth, tolerance })
    }

    /// Whether the separation `(dx, dy)` falls in the sector (mod 180°).
    pub fn accepts(&self, dx: f64, dy: f64) -> bool {
        if dx == 0.0 && dy == 0.0 {
            return false;
        }
        let theta = dx.atan2(dy).to_degrees();
        let diff = (theta - self.azimuth).rem_euclid(180.0);
        diff.min(180.0 - diff) <= self.tolerance
    }
}

#[derive(Clone)]
struct Accumulator {
    sum_sq: Vec<f64>,
    sum_h: Vec<f64>,
    sum_u: Vec<f64>,
    count: Vec<u64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sum_sq: vec![0.0; n],
            sum_h: vec![0.0; n],
            sum_u: vec![0.0; n],
            count: vec![0; n],
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for k in 0..self.count.len() {
            self.sum_sq[k] += other.sum_sq[k];
            self.sum_h[k] += other.sum_h[k];
            self.sum_u[k] += other.sum_u[k];
            self.count[k] += other.count[k];
        }
    }
}

const ROWS_PER_CHUNK: usize = 64;

/// Omnidirectional space-time variogram.
pub fn empirical_variogram(obs: &[Observation], grid: &BinGrid) -> Result<EmpiricalVariogram> {
    compute(obs, grid, None)
}

/// Variogram restricted to pairs whose separation lies in `direction`'s sector.
/// Pairs at zero spatial separation carry no direction and are excluded.
pub fn directional_variogram(obs: &[Observation], grid: &BinGrid, direction: Direction) -> Result<EmpiricalVariogram> {
    compute(obs, grid, Some(direction))
}

fn compute(obs: &[Observation], grid: &BinGrid, direction: Option<Direction>) -> Result<EmpiricalVariogram> {
    if obs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "variogram needs at least 2 observations, got {}",
            obs.len()
        )));
    }
    // time-sorted so the inner loop can stop once the temporal cap is passed
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| obs[a].point.t.total_cmp(&obs[b].point.t).then(a.cmp(&b)));
    let sorted: Vec<&Observation> = order.iter().map(|&i| &obs[i]).collect();
    let n_bins = grid.nh() * grid.nu();
    let u_max = grid.u_max();

    let chunk = |start: usize| -> Accumulator {
        let mut acc = Accumulator::new(n_bins);
        for i in start..(start + ROWS_PER_CHUNK).min(sorted.len()) {
            let a = sorted[i];
            for b in &sorted[i + 1..] {
                let u = b.point.t - a.point.t;
                if u > u_max {
                    break;
                }
                let (dx, dy) = (b.point.x - a.point.x, b.point.y - a.point.y);
                if let Some(dir) = direction {
                    if !dir.accepts(dx, dy) {
                        continue;
                    }
                }
                let h = dx.hypot(dy);
                if let Some(k) = grid.locate(h, u) {
                    let dz = a.value - b.value;
                    acc.sum_sq[k] += 0.5 * dz * dz;
                    acc.sum_h[k] += h;
                    acc.sum_u[k] += u;
                    acc.count[k] += 1;
                }
            }
        }
        acc
    };

    let starts: Vec<usize> = (0..sorted.len()).step_by(ROWS_PER_CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<Accumulator> = {
        use rayon::prelude::*;
        starts.par_iter().map(|&s| chunk(s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Accumulator> = starts.iter().map(|&s| chunk(s)).collect();

    // merged in chunk order so results do not depend on scheduling
    let mut total = Accumulator::new(n_bins);
    for p in &parts {
        total.merge(p);
    }

    let bins = (0..n_bins)
        .map(|k| {
            let n = total.count[k];
            let (h_index, u_index) = (k / grid.nu(), k % grid.nu());
            if n == 0 {
                let h_mid = 0.5 * (grid.h_edges[h_index] + grid.h_edges[h_index + 1]);
                let u_mid = 0.5 * (grid.u_edges[u_index] + grid.u_edges[u_index + 1]);
                VariogramBin {
                    h_index,
                    u_index,
                    h_mean: h_mid,
                    u_mean: u_mid,
                    gamma: None,
                    n_pairs: 0,
                }
            } else {
                let nf = n as f64;
                VariogramBin {
                    h_index,
                    u_index,
                    h_mean: total.sum_h[k] / nf,
                    u_mean: total.sum_u[k] / nf,
                    gamma: Some(total.sum_sq[k] / nf),
                    n_pairs: n,
                }
            }
        })
        .collect();
    Ok(EmpiricalVariogram {
        grid: grid.clone(),
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimePoint;

    fn obs(x: f64, y: f64, t: f64, v: f64) -> Observation {
        Observation::new("s", SpaceTimePoint::new(x, y, t), v)
    }

    #[test]
    fn grid_validation() {
        assert!(BinGrid::new(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![1.0, 2.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::new(vec![0.0, 2.0, 2.0], vec![0.0, 1.0]).is_err());
        assert!(BinGrid::uniform(0.0, 3, 1.0, 1).is_err());
        let g = BinGrid::uniform(6000.0, 15, 21600.0, 15).unwrap();
        assert_eq!(g.h_edges().len(), 16);
        assert_eq!(g.h_max(), 6000.0);
    }

    #[test]
    fn locate_edges() {
        let g = BinGrid::uniform(10.0, 2, 4.0, 2).unwrap();
        assert_eq!(g.locate(0.0, 0.0), Some(0));
        assert_eq!(g.locate(5.0, 0.0), Some(2));
        assert_eq!(g.locate(10.0, 4.0), Some(3));
        assert_eq!(g.locate(10.1, 0.0), None);
        assert_eq!(g.locate(1.0, 4.1), None);
    }

    #[test]
    fn single_pair() {
        let g = BinGrid::uniform(10.0, 1, 10.0, 1).unwrap();
        let emp = empirical_variogram(&[obs(0.0, 0.0, 0.0, 0.0), obs(3.0, 4.0, 1.0, 4.0)], &g).unwrap();
        let bin = emp.bin(0, 0);
        assert_eq!(bin.gamma, Some(8.0));
        assert_eq!(bin.n_pairs, 1);
        assert_eq!((bin.h_mean, bin.u_mean), (5.0, 1.0));
    }

    #[test]
    fn constant_field() {
        let g = BinGrid::uniform(50.0, 5, 50.0, 5).unwrap();
        let data: Vec<_> = (0..30)
            .map(|i| obs((i * 7 % 31) as f64, (i * 3 % 17) as f64, i as f64, 4.2))
            .collect();
        let emp = empirical_variogram(&data, &g).unwrap();
        assert!(emp.occupied().count() > 0);
        assert!(emp.occupied().all(|b| b.gamma == Some(0.0)));
    }

    #[test]
    fn too_few_observations() {
        let g = BinGrid::uniform(1.0, 1, 1.0, 1).unwrap();
        assert!(matches!(
            empirical_variogram(&[obs(0.0, 0.0, 0.0, 1.0)], &g),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn direction_predicate() {
        let ew = Direction::new(90.0, 22.5).unwrap();
        let ns = Direction::new(0.0, 22.5).unwrap();
        assert!(ew.accepts(1.0, 0.0) && ew.accepts(-1.0, 0.0));
        assert!(!ns.accepts(1.0, 0.0));
        assert!(ns.accepts(0.0, -3.0));
        assert!(!ns.accepts(0.0, 0.0));
        assert!(Direction::new(0.0, 0.0).is_err());
        assert!(Direction::new(0.0, 91.0).is_err());
        let all = Direction::new(0.0, 90.0).unwrap();
        assert!(all.accepts(1.0, 0.0) && all.accepts(0.3, -0.9));
    }

    #[test]
    fn collinear_directional() {
        let g = BinGrid::uniform(100.0, 5, 100.0, 5).unwrap();
        let data: Vec<_> = (0..20)
            .map(|i| obs(i as f64 * 4.5, 0.0, (i % 7) as f64 * 9.0, (i * i % 11) as f64))
            .collect();
        let omni = empirical_variogram(&data, &g).unwrap();
        let ew = directional_variogram(&data, &g, Direction::new(90.0, 22.5).unwrap()).unwrap();
        assert_eq!(omni, ew);
        let ns = directional_variogram(&data, &g, Direction::new(0.0, 22.5).unwrap()).unwrap();
        assert_eq!(ns.total_pairs(), 0);
    }

    #[test]
    fn half_max_distance() {
        let data = vec![
            obs(0.0, 0.0, 0.0, 0.0),
            obs(1.0, 1.0, 0.0, 0.0),
            obs(6.0, 8.0, 0.0, 0.0),
            obs(3.0, 1.0, 0.0, 0.0),
            obs(0.0, 8.0, 0.0, 0.0),
        ];
        assert_eq!(default_h_max(&data), 5.0);
        assert_eq!(default_h_max(&data[..1]), 0.0);
    }
}
