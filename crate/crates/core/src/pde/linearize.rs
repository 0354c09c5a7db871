use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::pde::coefficients::Coupling;
use crate::pde::field::{SourceField, SpaceTimeField, StateField};
use crate::pde::nonlinearity::{HypothesisCase, NonlinearityModel};
use crate::{Error, Result};

/// How the reaction term is folded into zero-order coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationMode {
    /// `c_i = ∫₀¹ ∂f_i/∂y_i(.., τ y_i, ..) dτ`, remainder `ḡ_i = −f_i(y)|_{y_i = 0}`.
    Diagonal,
    /// `c_il = ∫₀¹ ∂f_i/∂y_l(τ y) dτ`, remainder `ḡ = −f(0)`.
    Full,
}

impl LinearizationMode {
    pub fn for_case(case: HypothesisCase) -> Self {
        match case {
            HypothesisCase::CaseA => LinearizationMode::Diagonal,
            HypothesisCase::CaseB => LinearizationMode::Full,
        }
    }
}

/// Coupling `c^y` on every space-time node plus the remainder source `ḡ`.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub coupling: Coupling,
    pub gbar: SourceField,
}

pub const GAUSS_POINTS: usize = 16;

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-type initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

pub fn linearize_semilinear(f: &dyn NonlinearityModel, y: &StateField, grid: &PolarGrid, mode: LinearizationMode) -> Result<Linearization> {
    y.check_grid(grid)?;
    let n = y.n_comp;
    if f.n() != n {
        return Err(Error::ShapeMismatch(format!("nonlinearity has {} components, state has {n}", f.n())));
    }
    let (tau, wq) = gauss_legendre_unit(GAUSS_POINTS);
    let nn = grid.n_nodes();
    let mut coupling = vec![0.0; grid.n_t * nn * n * n];
    let mut gbar = SpaceTimeField::zeros(n, grid);
    let mut yk = vec![0.0; n];
    let mut arg = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let mut fv = vec![0.0; n];
    for m in 0..grid.n_t {
        let t = grid.time(m);
        for k in 0..nn {
            let x = grid.cartesian(k);
            for (i, v) in yk.iter_mut().enumerate() {
                *v = y.get(i, m, k);
            }
            let blk = &mut coupling[(m * nn + k) * n * n..(m * nn + k + 1) * n * n];
            match mode {
                LinearizationMode::Diagonal => {
                    for i in 0..n {
                        arg.copy_from_slice(&yk);
                        let mut acc = 0.0;
                        for (tq, wq) in tau.iter().zip(&wq) {
                            arg[i] = tq * yk[i];
                            f.jacobian(t, x, &arg, &mut jac);
                            acc += wq * jac[i * n + i];
                        }
                        blk[i * n + i] = acc;
                        arg[i] = 0.0;
                        f.eval(t, x, &arg, &mut fv);
                        let idx = gbar.idx(i, m, k);
                        gbar.values[idx] = -fv[i];
                    }
                }
                LinearizationMode::Full => {
                    for (tq, wq) in tau.iter().zip(&wq) {
                        for (a, v) in arg.iter_mut().zip(&yk) {
                            *a = tq * v;
                        }
                        f.jacobian(t, x, &arg, &mut jac);
                        for (b, j) in blk.iter_mut().zip(&jac) {
                            *b += wq * j;
                        }
                    }
                    arg.fill(0.0);
                    f.eval(t, x, &arg, &mut fv);
                    for i in 0..n {
                        let idx = gbar.idx(i, m, k);
                        gbar.values[idx] = -fv[i];
                    }
                }
            }
            if !blk.iter().all(|v| v.is_finite()) {
                return Err(Error::QuadratureFailure { step: m, node: k });
            }
        }
    }
    if !gbar.is_finite() {
        return Err(Error::QuadratureFailure { step: 0, node: 0 });
    }
    Ok(Linearization { coupling: Coupling::SpaceTime(coupling), gbar: SourceField::new(gbar, grid)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::nonlinearity::Reaction;

    #[test]
    fn gauss_rule_integrates_degree_31() {
        let (x, w) = gauss_legendre_unit(16);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for p in [1, 7, 20, 31] {
            let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "{p}");
        }
    }

    #[test]
    fn square_linearizes_to_identity_map() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let y = SpaceTimeField::from_fn(1, &g, |_, t, r, th| t * r * (2.0 + th.sin()) - 1.0);
        let lin = linearize_semilinear(&Reaction::square(), &y, &g, LinearizationMode::Diagonal).unwrap();
        let Coupling::SpaceTime(c) = &lin.coupling else { unreachable!() };
        for (cv, yv) in c.iter().zip(&y.values) {
            assert!((cv - yv).abs() < 1e-12);
        }
        assert_eq!(lin.gbar.l1, 0.0);
    }

    #[test]
    fn linear_map_linearizes_to_itself() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let y = SpaceTimeField::from_fn(2, &g, |c, t, r, _| c as f64 + t * r);
        let f = Reaction::Linear { matrix: vec![1.0, -2.0, 0.5, 3.0], case: HypothesisCase::CaseA };
        let lin = linearize_semilinear(&f, &y, &g, LinearizationMode::Full).unwrap();
        let Coupling::SpaceTime(c) = &lin.coupling else { unreachable!() };
        for blk in c.chunks(4) {
            for (a, b) in blk.iter().zip([1.0, -2.0, 0.5, 3.0]) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn case_b_remainder_is_nonnegative() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let y = SpaceTimeField::from_fn(2, &g, |c, t, r, th| t * (r + c as f64) * (1.0 + th.cos()));
        let lin = linearize_semilinear(&Reaction::cross_depletion(), &y, &g, LinearizationMode::Diagonal).unwrap();
        assert!(lin.gbar.field.min() >= 0.0);
        // ḡ_1 = y_2 here
        for m in 0..g.n_t {
            for k in 0..g.n_nodes() {
                assert_eq!(lin.gbar.field.get(0, m, k), y.get(1, m, k));
            }
        }
    }

    #[test]
    fn non_finite_partials_are_reported() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let mut y = SpaceTimeField::zeros(1, &g);
        y.values[7] = f64::INFINITY;
        assert!(matches!(
            linearize_semilinear(&Reaction::square(), &y, &g, LinearizationMode::Diagonal),
            Err(Error::QuadratureFailure { .. })
        ));
    }
}
