use crate::geometry::grid::PolarGrid;
use crate::linalg::LinearSolver;
use crate::pde::coefficients::SystemCoefficients;
use crate::pde::field::{SourceField, StateField};
use crate::pde::linear::{coupling_at, interleave, scatter, BlockSpace};
use crate::pde::nonlinearity::{check_probe, NonlinearityModel};
use crate::{Error, Result};

/// Newton controls for the implicit step.
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Residual target relative to `max(1, |Y|_∞)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before a full step is accepted anyway.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 25, max_halvings: 8 }
    }
}

struct Stepper<'a> {
    grid: &'a PolarGrid,
    coeffs: &'a SystemCoefficients,
    f: &'a dyn NonlinearityModel,
    space: BlockSpace,
    xs: Vec<[f64; 2]>,
}

impl Stepper<'_> {
    /// Scaled residual `Y − y_prev + dt (L Y + C Y + f(Y) − g)`.
    fn residual(&self, m1: usize, y: &[f64], prev: &[f64], g: &[f64]) -> Vec<f64> {
        let n = self.coeffs.n;
        let dt = self.grid.dt();
        let t = self.grid.time(m1);
        let lin = self.space.apply(y, coupling_at(self.coeffs, self.grid.n_nodes(), m1, m1, 1.0));
        let mut fk = vec![0.0; n];
        let mut r = vec![0.0; y.len()];
        for (k, x) in self.xs.iter().enumerate() {
            self.f.eval(t, *x, &y[k * n..(k + 1) * n], &mut fk);
            for i in 0..n {
                let q = k * n + i;
                r[q] = if self.space.is_dirichlet(q) { y[q] } else { y[q] - prev[q] + dt * (lin[q] + fk[i] - g[q]) };
            }
        }
        r
    }

    fn jacobian(&self, m1: usize, y: &[f64]) -> Result<LinearSolver> {
        let n = self.coeffs.n;
        let t = self.grid.time(m1);
        let mut jac = vec![0.0; self.xs.len() * n * n];
        for (k, x) in self.xs.iter().enumerate() {
            self.f.jacobian(t, *x, &y[k * n..(k + 1) * n], &mut jac[k * n * n..(k + 1) * n * n]);
        }
        let base = coupling_at(self.coeffs, self.grid.n_nodes(), m1, m1, 1.0);
        let c = |k: usize, i: usize, l: usize| base(k, i, l) + jac[k * n * n + i * n + l];
        LinearSolver::new(self.space.matrix(1.0, self.grid.dt(), c))
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Backward Euler with Newton iteration per step.
pub fn solve_forward_semilinear_with(
    coeffs: &SystemCoefficients,
    f: &dyn NonlinearityModel,
    g: &SourceField,
    y0: &[f64],
    grid: &PolarGrid,
    opts: &NewtonOptions,
) -> Result<StateField> {
    let n = coeffs.n;
    if f.n() != n || g.field.n_comp != n || y0.len() != n * grid.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "system has {n} components; nonlinearity {}, source {}, initial slice {} values",
            f.n(),
            g.field.n_comp,
            y0.len()
        )));
    }
    g.field.check_grid(grid)?;
    check_probe(f, grid)?;
    let st =
        Stepper { grid, coeffs, f, space: BlockSpace::new(coeffs, grid)?, xs: (0..grid.n_nodes()).map(|k| grid.cartesian(k)).collect() };
    let mut y = StateField::zeros(n, grid);
    for c in 0..n {
        y.slice_mut(c, 0).copy_from_slice(&y0[c * grid.n_nodes()..(c + 1) * grid.n_nodes()]);
    }
    let mut prev = interleave(&y, 0);
    for m in 0..grid.n_t - 1 {
        let m1 = m + 1;
        let gm = interleave(&g.field, m1);
        let mut cur = prev.clone();
        let mut r = st.residual(m1, &cur, &prev, &gm);
        let mut rn = norm_inf(&r);
        let mut iter = 0;
        while rn > opts.tol * norm_inf(&cur).max(1.0) {
            if iter == opts.max_iter || !rn.is_finite() {
                return Err(Error::NewtonDivergence { step: m1, residual: rn });
            }
            let delta = st.jacobian(m1, &cur)?.solve(&r)?;
            let mut omega = 1.0;
            let mut halvings = 0;
            loop {
                let trial: Vec<f64> = cur.iter().zip(&delta).map(|(a, d)| a - omega * d).collect();
                let rt = st.residual(m1, &trial, &prev, &gm);
                let rtn = norm_inf(&rt);
                if rtn < rn || halvings == opts.max_halvings {
                    cur = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                omega *= 0.5;
                halvings += 1;
            }
            iter += 1;
        }
        scatter(&mut y, m1, &cur);
        prev = cur;
    }
    Ok(y)
}

pub fn solve_forward_semilinear(
    coeffs: &SystemCoefficients,
    f: &dyn NonlinearityModel,
    g: &SourceField,
    y0: &[f64],
    grid: &PolarGrid,
) -> Result<StateField> {
    solve_forward_semilinear_with(coeffs, f, g, y0, grid, &NewtonOptions::default())
}
