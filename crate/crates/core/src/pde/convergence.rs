//! Manufactured-solution convergence study for the heat operator.
//!
//! Profile `f(r) = (r − r0)²(r1 − r)²` has zero value and zero slope on both
//! circles, so any ring condition holds. With `y = t f(r)` both schemes are
//! exact in time and the error is purely spatial. Time orders come from
//! self-convergence of `y = sin(πt) f(r)` at fixed spatial resolution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::pde::coefficients::{RingCondition, SystemCoefficients};
use crate::pde::field::{norm_l2_q, SourceField, SpaceTimeField};
use crate::pde::linear::{solve_forward_linear, Scheme};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyAxis {
    Space,
    Time,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub axis: StudyAxis,
    pub scheme: Scheme,
    /// `n_r` for space studies, `n_t` for time studies.
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_j / e_{j+1})`.
    pub slopes: Vec<f64>,
    pub band: (f64, f64),
    pub pass: bool,
}

impl OrderRow {
    fn new(axis: StudyAxis, scheme: Scheme, resolutions: Vec<usize>, errors: Vec<f64>, band: (f64, f64)) -> Self {
        let slopes: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let pass = !slopes.is_empty() && slopes.iter().all(|s| (band.0..=band.1).contains(s));
        Self { axis, scheme, resolutions, errors, slopes, band, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<OrderRow>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub r0: f64,
    pub r1: f64,
    pub t_final: f64,
    pub n_theta: usize,
    pub space_n_r: Vec<usize>,
    pub space_n_t: usize,
    pub time_n_t: Vec<usize>,
    pub time_n_r: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            r0: 1.0,
            r1: 2.0,
            t_final: 1.0,
            n_theta: 8,
            space_n_r: vec![17, 33, 65],
            space_n_t: 5,
            time_n_t: vec![9, 17, 33, 65],
            time_n_r: 33,
        }
    }
}

/// `(f, Δf)` for the manufactured profile.
pub fn profile(r: f64, r0: f64, r1: f64) -> (f64, f64) {
    let p = (r - r0) * (r1 - r);
    let dp = r0 + r1 - 2.0 * r;
    let f1 = 2.0 * p * dp;
    let f2 = 2.0 * dp * dp - 4.0 * p;
    (p * p, f2 + f1 / r)
}

fn heat(grid: &PolarGrid) -> SystemCoefficients {
    SystemCoefficients::heat(grid, RingCondition::NEUMANN, RingCondition::NEUMANN)
}

/// Discrete `L²(Q)` error of `y = t f(r)` at one radial resolution.
pub fn space_error(cfg: &ConvergenceConfig, scheme: Scheme, n_r: usize) -> Result<f64> {
    let (r0, r1) = (cfg.r0, cfg.r1);
    let grid = PolarGrid::new(r0, r1, n_r, cfg.n_theta, cfg.t_final, cfg.space_n_t)?;
    let g = SpaceTimeField::from_fn(1, &grid, |_, t, r, _| {
        let (f, lap) = profile(r, r0, r1);
        f - t * lap
    });
    let y = solve_forward_linear(&heat(&grid), &SourceField::new(g, &grid)?, &vec![0.0; grid.n_nodes()], &grid, scheme)?;
    let mut err = SpaceTimeField::from_fn(1, &grid, |_, t, r, _| t * profile(r, r0, r1).0);
    err.values.iter_mut().zip(&y.values).for_each(|(e, v)| *e -= v);
    Ok(norm_l2_q(&err, &grid))
}

fn time_solution(cfg: &ConvergenceConfig, scheme: Scheme, n_t: usize) -> Result<(PolarGrid, SpaceTimeField)> {
    let (r0, r1) = (cfg.r0, cfg.r1);
    let grid = PolarGrid::new(r0, r1, cfg.time_n_r, cfg.n_theta, cfg.t_final, n_t)?;
    let w = PI / cfg.t_final;
    let g = SpaceTimeField::from_fn(1, &grid, |_, t, r, _| {
        let (f, lap) = profile(r, r0, r1);
        w * (w * t).cos() * f - (w * t).sin() * lap
    });
    let y = solve_forward_linear(&heat(&grid), &SourceField::new(g, &grid)?, &vec![0.0; grid.n_nodes()], &grid, scheme)?;
    Ok((grid, y))
}

/// `L²(Q)` differences between successive time refinements, measured on the
/// coarser time grid of each pair.
pub fn time_self_errors(cfg: &ConvergenceConfig, scheme: Scheme) -> Result<Vec<f64>> {
    let sols: Vec<(PolarGrid, SpaceTimeField)> = cfg.time_n_t.iter().map(|&n| time_solution(cfg, scheme, n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for pair in sols.windows(2) {
        let ((gc, yc), (_, yf)) = (&pair[0], &pair[1]);
        let stride = (yf.n_t - 1) / (yc.n_t - 1);
        let mut d = yc.clone();
        for m in 0..yc.n_t {
            let fine = yf.slice(0, m * stride);
            d.slice_mut(0, m).iter_mut().zip(fine).for_each(|(a, b)| *a -= b);
        }
        out.push(norm_l2_q(&d, gc));
    }
    Ok(out)
}

/// Space and time studies for both schemes with the default bands.
pub fn run_convergence_suite(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
        let errors = cfg.space_n_r.iter().map(|&n| space_error(cfg, scheme, n)).collect::<Result<Vec<_>>>()?;
        rows.push(OrderRow::new(StudyAxis::Space, scheme, cfg.space_n_r.clone(), errors, (1.7, 2.3)));
    }
    for (scheme, band) in [(Scheme::BackwardEuler, (0.8, 1.2)), (Scheme::CrankNicolson, (1.7, 2.3))] {
        let errors = time_self_errors(cfg, scheme)?;
        rows.push(OrderRow::new(StudyAxis::Time, scheme, cfg.time_n_t.clone(), errors, band));
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceTable { rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_laplacian_matches_finite_differences() {
        let (r, h) = (1.37, 1e-4);
        let f = |x: f64| profile(x, 1.0, 2.0).0;
        let fd = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h) + (f(r + h) - f(r - h)) / (2.0 * h * r);
        assert!((profile(r, 1.0, 2.0).1 - fd).abs() < 1e-6);
        assert_eq!(profile(1.0, 1.0, 2.0).0, 0.0);
    }

    #[test]
    fn space_error_drops_with_refinement() {
        let cfg = ConvergenceConfig { n_theta: 4, space_n_t: 3, ..Default::default() };
        let (a, b) = (space_error(&cfg, Scheme::BackwardEuler, 9).unwrap(), space_error(&cfg, Scheme::BackwardEuler, 17).unwrap());
        assert!(b < a / 3.0, "{a} {b}");
    }
}
