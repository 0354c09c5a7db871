use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::linalg::{Csr, LinearSolver};
use crate::pde::coefficients::SystemCoefficients;
use crate::pde::field::{SourceField, StateField};
use crate::pde::operator::{assemble_unchecked, ComponentOperator};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

impl Scheme {
    /// Implicitness of the θ-scheme.
    pub fn theta(self) -> f64 {
        match self {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

/// Spatial operator of the whole system on interleaved unknowns
/// `node * n + component`.
#[derive(Clone, Debug)]
pub(crate) struct BlockSpace {
    pub n: usize,
    pub n_nodes: usize,
    pub ops: Vec<ComponentOperator>,
}

impl BlockSpace {
    pub fn new(coeffs: &SystemCoefficients, grid: &PolarGrid) -> Result<Self> {
        coeffs.validate(grid)?;
        let ops = (0..coeffs.n).map(|c| assemble_unchecked(coeffs, grid, c)).collect();
        Ok(Self { n: coeffs.n, n_nodes: grid.n_nodes(), ops })
    }

    pub fn dim(&self) -> usize {
        self.n * self.n_nodes
    }

    #[inline]
    pub fn is_dirichlet(&self, g: usize) -> bool {
        self.ops[g % self.n].dirichlet[g / self.n]
    }

    /// `shift I + scale (L + C)` with identity rows on Dirichlet unknowns.
    /// `coupling(k, i, l)` gives the zero-order block at node `k`.
    pub fn matrix(&self, shift: f64, scale: f64, coupling: impl Fn(usize, usize, usize) -> f64) -> Csr {
        let n = self.n;
        let rows = (0..self.dim())
            .map(|gi| {
                let (k, i) = (gi / n, gi % n);
                if self.ops[i].dirichlet[k] {
                    return vec![(gi, 1.0)];
                }
                let mut row: Vec<(usize, f64)> = self.ops[i].matrix.row(k).map(|(c, v)| (c * n + i, scale * v)).collect();
                row.push((gi, shift));
                for l in 0..n {
                    let c = coupling(k, i, l);
                    if c != 0.0 {
                        row.push((k * n + l, scale * c));
                    }
                }
                row
            })
            .collect();
        Csr::from_rows(self.dim(), rows)
    }

    /// `(L + C) y`, zero on Dirichlet unknowns.
    pub fn apply(&self, y: &[f64], coupling: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
        let n = self.n;
        (0..self.dim())
            .map(|gi| {
                let (k, i) = (gi / n, gi % n);
                if self.ops[i].dirichlet[k] {
                    return 0.0;
                }
                let lap: f64 = self.ops[i].matrix.row(k).map(|(c, v)| v * y[c * n + i]).sum();
                lap + (0..n).map(|l| coupling(k, i, l) * y[k * n + l]).sum::<f64>()
            })
            .collect()
    }
}

/// Time slice `m` of a field as an interleaved vector.
pub(crate) fn interleave(field: &StateField, m: usize) -> Vec<f64> {
    let n = field.n_comp;
    let mut out = vec![0.0; n * field.n_nodes];
    for c in 0..n {
        for (k, v) in field.slice(c, m).iter().enumerate() {
            out[k * n + c] = *v;
        }
    }
    out
}

pub(crate) fn scatter(field: &mut StateField, m: usize, v: &[f64]) {
    let n = field.n_comp;
    for c in 0..n {
        for (k, dst) in field.slice_mut(c, m).iter_mut().enumerate() {
            *dst = v[k * n + c];
        }
    }
}

/// Coupling matrix evaluated at a fractional time level.
pub(crate) fn coupling_at<'a>(
    coeffs: &'a SystemCoefficients,
    n_nodes: usize,
    m_lo: usize,
    m_hi: usize,
    w_hi: f64,
) -> impl Fn(usize, usize, usize) -> f64 + 'a {
    let n = coeffs.n;
    move |k, i, l| {
        let hi = coeffs.coupling.at(n, n_nodes, m_hi, k, i, l);
        if w_hi == 1.0 || !coeffs.coupling.is_time_dependent() {
            hi
        } else {
            w_hi * hi + (1.0 - w_hi) * coeffs.coupling.at(n, n_nodes, m_lo, k, i, l)
        }
    }
}

/// Implicit θ-scheme for the linear coupled system. The block matrix is
/// factored once when the coupling does not depend on time.
pub struct ForwardSolver<'a> {
    grid: &'a PolarGrid,
    coeffs: &'a SystemCoefficients,
    space: BlockSpace,
    scheme: Scheme,
    fixed: Option<LinearSolver>,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(coeffs: &'a SystemCoefficients, grid: &'a PolarGrid, scheme: Scheme) -> Result<Self> {
        let space = BlockSpace::new(coeffs, grid)?;
        let mut solver = Self { grid, coeffs, space, scheme, fixed: None };
        if !coeffs.coupling.is_time_dependent() {
            solver.fixed = Some(solver.step_solver(0)?);
        }
        Ok(solver)
    }

    fn step_solver(&self, m: usize) -> Result<LinearSolver> {
        let th = self.scheme.theta();
        let c = coupling_at(self.coeffs, self.grid.n_nodes(), m, m + 1, th);
        LinearSolver::new(self.space.matrix(1.0, th * self.grid.dt(), c))
    }

    /// March from `y0` (component-major, `n * n_nodes`) under source `g`.
    pub fn solve(&self, g: &SourceField, y0: &[f64]) -> Result<StateField> {
        let (grid, n) = (self.grid, self.coeffs.n);
        g.field.check_grid(grid)?;
        if g.field.n_comp != n {
            return Err(Error::ShapeMismatch(format!("source has {} components, system has {n}", g.field.n_comp)));
        }
        if y0.len() != n * grid.n_nodes() {
            return Err(Error::ShapeMismatch(format!("initial slice has {} values, expected {}", y0.len(), n * grid.n_nodes())));
        }
        let mut y = StateField::zeros(n, grid);
        for c in 0..n {
            y.slice_mut(c, 0).copy_from_slice(&y0[c * grid.n_nodes()..(c + 1) * grid.n_nodes()]);
        }
        let th = self.scheme.theta();
        let dt = grid.dt();
        let mut cur = interleave(&y, 0);
        for m in 0..grid.n_t - 1 {
            let owned;
            let solver = match &self.fixed {
                Some(s) => s,
                None => {
                    owned = self.step_solver(m)?;
                    &owned
                }
            };
            let explicit = if th < 1.0 {
                self.space.apply(&cur, coupling_at(self.coeffs, grid.n_nodes(), m, m + 1, th))
            } else {
                vec![0.0; cur.len()]
            };
            let g_lo = interleave(&g.field, m);
            let g_hi = interleave(&g.field, m + 1);
            let rhs: Vec<f64> = (0..cur.len())
                .map(|q| {
                    if self.space.is_dirichlet(q) {
                        0.0
                    } else {
                        cur[q] - dt * (1.0 - th) * explicit[q] + dt * (th * g_hi[q] + (1.0 - th) * g_lo[q])
                    }
                })
                .collect();
            cur = solver.solve(&rhs)?;
            scatter(&mut y, m + 1, &cur);
        }
        Ok(y)
    }
}

pub fn solve_forward_linear(
    coeffs: &SystemCoefficients,
    g: &SourceField,
    y0: &[f64],
    grid: &PolarGrid,
    scheme: Scheme,
) -> Result<StateField> {
    ForwardSolver::new(coeffs, grid, scheme)?.solve(g, y0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::coefficients::{Coupling, RingCondition};
    use crate::pde::field::SpaceTimeField;

    fn grid(n_r: usize, n_t: usize) -> PolarGrid {
        PolarGrid::new(1.0, 2.0, n_r, 16, 1.0, n_t).unwrap()
    }

    #[test]
    fn neumann_unit_source_gives_linear_growth() {
        for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            for (n_r, n_t) in [(5, 3), (17, 11), (33, 21)] {
                let g = grid(n_r, n_t);
                let c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
                let src = SourceField::new(SpaceTimeField::from_fn(1, &g, |_, _, _, _| 1.0), &g).unwrap();
                let y = solve_forward_linear(&c, &src, &vec![0.0; g.n_nodes()], &g, scheme).unwrap();
                let exact = SpaceTimeField::from_fn(1, &g, |_, t, _, _| t);
                assert!(y.max_abs_diff(&exact) < 1e-10, "{scheme:?} {n_r}");
            }
        }
    }

    #[test]
    fn zero_data_zero_solution() {
        let g = grid(9, 5);
        let c = SystemCoefficients::heat(&g, RingCondition::robin(1.0), RingCondition::DIRICHLET);
        let src = SourceField::new(SpaceTimeField::zeros(1, &g), &g).unwrap();
        let y = solve_forward_linear(&c, &src, &vec![0.0; g.n_nodes()], &g, Scheme::BackwardEuler).unwrap();
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn constants_are_preserved() {
        let g = grid(9, 9);
        let mut c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
        for (k, a) in c.components[0].diffusion.iter_mut().enumerate() {
            let th = g.polar(k).1;
            *a = [[2.0 + th.sin(), 0.3], [0.3, 1.0]];
        }
        let src = SourceField::new(SpaceTimeField::zeros(1, &g), &g).unwrap();
        for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            let y = solve_forward_linear(&c, &src, &vec![0.7; g.n_nodes()], &g, scheme).unwrap();
            assert!(y.values.iter().all(|v| (v - 0.7).abs() < 1e-10));
        }
    }

    #[test]
    fn coupled_constant_mode_matches_matrix_exponential() {
        // spatially constant data: y' + C y = 0 per node, with C = [[1, -1], [-1, 1]]
        // eigen-split: y1 + y2 is conserved, y1 - y2 decays like e^{-2t}
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 401).unwrap();
        let c = SystemCoefficients::coupled(
            &g,
            vec![1.0, -1.0, -1.0, 1.0],
            crate::stencil::IDENTITY,
            RingCondition::NEUMANN,
            RingCondition::NEUMANN,
        );
        let src = SourceField::new(SpaceTimeField::zeros(2, &g), &g).unwrap();
        let mut y0 = vec![1.0; g.n_nodes()];
        y0.extend(vec![0.0; g.n_nodes()]);
        let y = solve_forward_linear(&c, &src, &y0, &g, Scheme::CrankNicolson).unwrap();
        let m = g.n_t - 1;
        let d = (-2.0f64).exp();
        assert!((y.get(0, m, 3) - 0.5 * (1.0 + d)).abs() < 1e-5);
        assert!((y.get(1, m, 3) - 0.5 * (1.0 - d)).abs() < 1e-5);
    }

    #[test]
    fn time_dependent_coupling_is_supported() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 201).unwrap();
        // y' = -t y  =>  y = exp(-t²/2)
        let mut vals = Vec::new();
        for m in 0..g.n_t {
            vals.extend(std::iter::repeat_n(g.time(m), g.n_nodes()));
        }
        let mut c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
        c.coupling = Coupling::SpaceTime(vals);
        let src = SourceField::new(SpaceTimeField::zeros(1, &g), &g).unwrap();
        let y = solve_forward_linear(&c, &src, &vec![1.0; g.n_nodes()], &g, Scheme::CrankNicolson).unwrap();
        assert!((y.get(0, g.n_t - 1, 0) - (-0.5f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn shape_mismatch() {
        let g = grid(5, 3);
        let c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
        let src = SourceField::new(SpaceTimeField::zeros(1, &g), &g).unwrap();
        assert!(matches!(solve_forward_linear(&c, &src, &[0.0; 3], &g, Scheme::BackwardEuler), Err(Error::ShapeMismatch(_))));
    }
}
