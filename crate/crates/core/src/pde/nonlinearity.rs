use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::{Error, Result};

/// Which sign hypothesis a reaction term is meant to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisCase {
    /// `f_i = 0` whenever `y_i = 0`.
    CaseA,
    /// `f_i ≤ 0` whenever `y_i = 0`, and `∂f_i/∂y_l ≤ 0` for `i ≠ l`.
    CaseB,
}

/// Reaction term `f(t, x, y)` entering `y_t + L y + f(y) = g`.
pub trait NonlinearityModel: Send + Sync {
    fn n(&self) -> usize;
    fn case(&self) -> HypothesisCase;
    fn eval(&self, t: f64, x: [f64; 2], y: &[f64], out: &mut [f64]);
    /// Row-major `n x n` matrix of `∂f_i/∂y_l`.
    fn jacobian(&self, t: f64, x: [f64; 2], y: &[f64], out: &mut [f64]);
}

/// Built-in reaction terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reaction {
    Zero {
        n: usize,
    },
    /// `f_i = a_i y_i²`.
    Quadratic {
        coef: Vec<f64>,
    },
    /// `f = M y`, row-major `M`.
    Linear {
        matrix: Vec<f64>,
        case: HypothesisCase,
    },
    /// `f_i = y_i Σ_l a_il y_l`.
    LotkaVolterra {
        matrix: Vec<f64>,
    },
}

impl Reaction {
    /// `f(y) = y²`.
    pub fn square() -> Self {
        Reaction::Quadratic { coef: vec![1.0] }
    }

    /// `f = (−y₂, −y₁)`.
    pub fn cross_depletion() -> Self {
        Reaction::Linear { matrix: vec![0.0, -1.0, -1.0, 0.0], case: HypothesisCase::CaseB }
    }

    fn dim_of(len: usize) -> usize {
        (len as f64).sqrt().round() as usize
    }
}

impl NonlinearityModel for Reaction {
    fn n(&self) -> usize {
        match self {
            Reaction::Zero { n } => *n,
            Reaction::Quadratic { coef } => coef.len(),
            Reaction::Linear { matrix, .. } | Reaction::LotkaVolterra { matrix } => Self::dim_of(matrix.len()),
        }
    }

    fn case(&self) -> HypothesisCase {
        match self {
            Reaction::Linear { case, .. } => *case,
            _ => HypothesisCase::CaseA,
        }
    }

    fn eval(&self, _t: f64, _x: [f64; 2], y: &[f64], out: &mut [f64]) {
        let n = self.n();
        match self {
            Reaction::Zero { .. } => out.fill(0.0),
            Reaction::Quadratic { coef } => {
                for i in 0..n {
                    out[i] = coef[i] * y[i] * y[i];
                }
            }
            Reaction::Linear { matrix, .. } => {
                for i in 0..n {
                    out[i] = (0..n).map(|l| matrix[i * n + l] * y[l]).sum();
                }
            }
            Reaction::LotkaVolterra { matrix } => {
                for i in 0..n {
                    out[i] = y[i] * (0..n).map(|l| matrix[i * n + l] * y[l]).sum::<f64>();
                }
            }
        }
    }

    fn jacobian(&self, _t: f64, _x: [f64; 2], y: &[f64], out: &mut [f64]) {
        let n = self.n();
        out.fill(0.0);
        match self {
            Reaction::Zero { .. } => {}
            Reaction::Quadratic { coef } => {
                for i in 0..n {
                    out[i * n + i] = 2.0 * coef[i] * y[i];
                }
            }
            Reaction::Linear { matrix, .. } => out.copy_from_slice(matrix),
            Reaction::LotkaVolterra { matrix } => {
                for i in 0..n {
                    let s: f64 = (0..n).map(|l| matrix[i * n + l] * y[l]).sum();
                    for l in 0..n {
                        out[i * n + l] = y[i] * matrix[i * n + l];
                    }
                    out[i * n + i] += s;
                }
            }
        }
    }
}

/// Spread of `|f(t, x, 0)|` tolerated by the probe.
pub const PROBE_TOL: f64 = 1e-14;

/// Check `f(t, x, 0) = 0` on a lattice of space-time probes: every fourth
/// radius and angle at five times.
pub fn check_probe(f: &dyn NonlinearityModel, grid: &PolarGrid) -> Result<()> {
    let n = f.n();
    let zero = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut probe = 0;
    for q in 0..5 {
        let t = grid.t_final * q as f64 / 4.0;
        for i in (0..grid.n_r).step_by(4.max(grid.n_r / 8)) {
            for j in (0..grid.n_theta).step_by(4.max(grid.n_theta / 8)) {
                f.eval(t, grid.cartesian(grid.node(i, j)), &zero, &mut out);
                if let Some(v) = out.iter().find(|v| !(v.abs() <= PROBE_TOL)) {
                    return Err(Error::NonlinearityProbe { probe, value: *v });
                }
                probe += 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Shifted;
    impl NonlinearityModel for Shifted {
        fn n(&self) -> usize {
            1
        }
        fn case(&self) -> HypothesisCase {
            HypothesisCase::CaseA
        }
        fn eval(&self, t: f64, _: [f64; 2], y: &[f64], out: &mut [f64]) {
            out[0] = y[0] + t;
        }
        fn jacobian(&self, _: f64, _: [f64; 2], _: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let models = [
            Reaction::square(),
            Reaction::cross_depletion(),
            Reaction::LotkaVolterra { matrix: vec![-1.0, 0.5, -0.25, 2.0] },
            Reaction::Quadratic { coef: vec![1.0, -3.0] },
        ];
        for f in &models {
            let n = f.n();
            let y: Vec<f64> = (0..n).map(|i| 0.3 + 0.7 * i as f64).collect();
            let mut jac = vec![0.0; n * n];
            f.jacobian(0.0, [1.0, 0.0], &y, &mut jac);
            for l in 0..n {
                let h = 1e-6;
                let (mut yp, mut ym) = (y.clone(), y.clone());
                yp[l] += h;
                ym[l] -= h;
                let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
                f.eval(0.0, [1.0, 0.0], &yp, &mut fp);
                f.eval(0.0, [1.0, 0.0], &ym, &mut fm);
                for i in 0..n {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    assert!((fd - jac[i * n + l]).abs() < 1e-7, "{f:?} {i} {l}");
                }
            }
        }
    }

    #[test]
    fn probe_rejects_nonzero_at_origin() {
        let g = PolarGrid::new(1.0, 2.0, 9, 8, 1.0, 3).unwrap();
        assert!(check_probe(&Reaction::square(), &g).is_ok());
        assert!(check_probe(&Reaction::cross_depletion(), &g).is_ok());
        // t = 0 passes, later probe times fail
        assert!(matches!(check_probe(&Shifted, &g), Err(Error::NonlinearityProbe { .. })));
    }
}
