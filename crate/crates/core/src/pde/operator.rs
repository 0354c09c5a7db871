use crate::geometry::grid::PolarGrid;
use crate::linalg::Csr;
use crate::pde::coefficients::SystemCoefficients;
use crate::stencil::{self, PolarTensor, Row, StencilInput};
use crate::Result;

/// Discrete `-div(A_i grad .) + b_i . grad` for one component, with the
/// boundary closure folded in. Dirichlet nodes carry identity rows.
#[derive(Clone, Debug)]
pub struct ComponentOperator {
    pub matrix: Csr,
    pub dirichlet: Vec<bool>,
}

impl ComponentOperator {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul(u)
    }
}

pub fn assemble_operator(coeffs: &SystemCoefficients, grid: &PolarGrid, component: usize) -> Result<ComponentOperator> {
    coeffs.validate(grid)?;
    Ok(assemble_unchecked(coeffs, grid, component))
}

pub(crate) fn assemble_unchecked(coeffs: &SystemCoefficients, grid: &PolarGrid, component: usize) -> ComponentOperator {
    let comp = &coeffs.components[component];
    let n = grid.n_nodes();
    let tensor: Vec<PolarTensor> = (0..n).map(|k| PolarTensor::from_cartesian(&comp.diffusion[k], grid.polar(k).1)).collect();
    let drift: Vec<[f64; 2]> = (0..n).map(|k| stencil::to_polar_vector(comp.drift[k], grid.polar(k).1)).collect();
    let eta = |k: usize| coeffs.eta_at(grid, component, k);
    let input = StencilInput { grid, tensor: &tensor, drift: comp.has_drift().then_some(drift.as_slice()), eta: &eta };
    let mut dirichlet = vec![false; n];
    let rows = (0..n)
        .map(|k| {
            if coeffs.is_dirichlet(grid, component, k) {
                dirichlet[k] = true;
                Row::unit(k, 1.0).0
            } else {
                input.operator_row(k).0
            }
        })
        .collect();
    ComponentOperator { matrix: Csr::from_rows(n, rows), dirichlet }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::coefficients::RingCondition;
    use crate::Error;

    #[test]
    fn neumann_rows_annihilate_constants() {
        let g = PolarGrid::new(1.0, 2.0, 9, 12, 1.0, 3).unwrap();
        let mut c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
        // anisotropic, spatially varying tensor and drift keep the property
        for (k, a) in c.components[0].diffusion.iter_mut().enumerate() {
            let (r, th) = g.polar(k);
            *a = [[1.0 + 0.3 * th.cos(), 0.2 * r], [0.2 * r, 2.0]];
        }
        c.components[0].drift = vec![[0.3, -0.1]; g.n_nodes()];
        let op = assemble_operator(&c, &g, 0).unwrap();
        let ones = vec![1.0; g.n_nodes()];
        let out = op.apply(&ones);
        assert!(out.iter().all(|v| v.abs() < 1e-10), "{:?}", out.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn dirichlet_manufactured_second_order() {
        // -Δ of (r-1)^2 (2-r)^2 in polar form: -(f'' + f'/r)
        let f = |r: f64| (r - 1.0).powi(2) * (2.0 - r).powi(2);
        let d1 = |r: f64| 2.0 * (r - 1.0) * (2.0 - r).powi(2) - 2.0 * (r - 1.0).powi(2) * (2.0 - r);
        let d2 = |r: f64| 2.0 * (2.0 - r).powi(2) - 8.0 * (r - 1.0) * (2.0 - r) + 2.0 * (r - 1.0).powi(2);
        let err = |n_r: usize| {
            let g = PolarGrid::new(1.0, 2.0, n_r, 8, 1.0, 3).unwrap();
            let c = SystemCoefficients::heat(&g, RingCondition::DIRICHLET, RingCondition::DIRICHLET);
            let op = assemble_operator(&c, &g, 0).unwrap();
            let u = g.sample(|r, _| f(r));
            let lu = op.apply(&u);
            (g.n_theta..g.n_nodes() - g.n_theta)
                .map(|k| {
                    let r = g.polar(k).0;
                    (lu[k] + d2(r) + d1(r) / r).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(17), err(33), err(65));
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!(p1 > 1.8 && p2 > 1.8, "orders {p1} {p2} ({e1} {e2} {e3})");
    }

    #[test]
    fn invalid_flag_is_rejected() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let mut c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::NEUMANN);
        c.components[0].beta[0] = 2.0;
        assert!(matches!(assemble_operator(&c, &g, 0), Err(Error::BoundaryFlagInvalid { .. })));
    }

    #[test]
    fn isotropic_operator_is_m_matrix() {
        let g = PolarGrid::new(1.0, 2.0, 9, 12, 1.0, 3).unwrap();
        let c = SystemCoefficients::heat(&g, RingCondition::robin(2.0), RingCondition::NEUMANN);
        let op = assemble_operator(&c, &g, 0).unwrap();
        for i in 0..op.matrix.n {
            for (col, v) in op.matrix.row(i) {
                if col == i {
                    assert!(v > 0.0);
                } else {
                    assert!(v <= 1e-14, "row {i} col {col}: {v}");
                }
            }
        }
    }
}
