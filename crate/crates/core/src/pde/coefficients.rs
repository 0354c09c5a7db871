use serde::{Deserialize, Serialize};

use crate::geometry::grid::{PolarGrid, Ring};
use crate::stencil::{self, Mat2, IDENTITY};
use crate::{Error, Result};

/// `β ∂_ν_A y + η y = 0` on one circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingCondition {
    pub beta: f64,
    pub eta: f64,
}

impl RingCondition {
    pub const NEUMANN: Self = Self { beta: 1.0, eta: 0.0 };
    pub const DIRICHLET: Self = Self { beta: 0.0, eta: 1.0 };

    pub fn robin(eta: f64) -> Self {
        Self { beta: 1.0, eta }
    }
}

/// Per-component coefficients. Boundary fields are indexed by boundary slot:
/// `j` on the inner circle, `n_theta + j` on the outer one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCoefficients {
    pub diffusion: Vec<Mat2>,
    /// Cartesian drift per node.
    pub drift: Vec<[f64; 2]>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ComponentCoefficients {
    pub fn uniform(grid: &PolarGrid, diffusion: Mat2, drift: [f64; 2], inner: RingCondition, outer: RingCondition) -> Self {
        let nt = grid.n_theta;
        let mut beta = vec![inner.beta; nt];
        beta.extend(std::iter::repeat_n(outer.beta, nt));
        let mut eta = vec![inner.eta; nt];
        eta.extend(std::iter::repeat_n(outer.eta, nt));
        Self { diffusion: vec![diffusion; grid.n_nodes()], drift: vec![drift; grid.n_nodes()], beta, eta }
    }

    pub fn has_drift(&self) -> bool {
        self.drift.iter().any(|b| b[0] != 0.0 || b[1] != 0.0)
    }
}

/// Zero-order coupling `c_il`, stored row-major per node and time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// One `n x n` matrix for all of Q.
    Constant(Vec<f64>),
    /// `n x n` per spatial node.
    Spatial(Vec<f64>),
    /// `n x n` per space-time node, index `(m * n_nodes + k) * n * n`.
    SpaceTime(Vec<f64>),
}

impl Coupling {
    pub fn zero(n: usize) -> Self {
        Coupling::Constant(vec![0.0; n * n])
    }

    #[inline]
    pub fn at(&self, n: usize, n_nodes: usize, m: usize, k: usize, i: usize, l: usize) -> f64 {
        match self {
            Coupling::Constant(c) => c[i * n + l],
            Coupling::Spatial(c) => c[k * n * n + i * n + l],
            Coupling::SpaceTime(c) => c[(m * n_nodes + k) * n * n + i * n + l],
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Coupling::SpaceTime(_))
    }

    fn values(&self) -> &[f64] {
        match self {
            Coupling::Constant(c) | Coupling::Spatial(c) | Coupling::SpaceTime(c) => c,
        }
    }

    /// `max |c_il|` over Q.
    pub fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest diagonal entry over Q.
    pub fn max_diagonal(&self, n: usize) -> f64 {
        self.values().chunks(n * n).flat_map(|blk| (0..n).map(move |i| blk[i * n + i])).fold(f64::NEG_INFINITY, f64::max)
    }

    fn expected_len(&self, n: usize, grid: &PolarGrid) -> usize {
        match self {
            Coupling::Constant(_) => n * n,
            Coupling::Spatial(_) => grid.n_nodes() * n * n,
            Coupling::SpaceTime(_) => grid.n_t * grid.n_nodes() * n * n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemCoefficients {
    pub n: usize,
    pub components: Vec<ComponentCoefficients>,
    pub coupling: Coupling,
}

/// Boundary slot of a spatial node, if it lies on a circle.
pub fn boundary_slot(grid: &PolarGrid, k: usize) -> Option<usize> {
    let (i, j) = grid.ij(k);
    if i == 0 {
        Some(j)
    } else if i == grid.n_r - 1 {
        Some(grid.n_theta + j)
    } else {
        None
    }
}

pub fn slot_ring(grid: &PolarGrid, slot: usize) -> Ring {
    if slot < grid.n_theta {
        Ring::Inner
    } else {
        Ring::Outer
    }
}

impl SystemCoefficients {
    pub fn new(components: Vec<ComponentCoefficients>, coupling: Coupling) -> Self {
        Self { n: components.len(), components, coupling }
    }

    /// Scalar heat equation `y_t − Δy = g` with the given closures.
    pub fn heat(grid: &PolarGrid, inner: RingCondition, outer: RingCondition) -> Self {
        Self::new(vec![ComponentCoefficients::uniform(grid, IDENTITY, [0.0, 0.0], inner, outer)], Coupling::zero(1))
    }

    /// Identical isotropic components with a constant coupling matrix.
    pub fn coupled(grid: &PolarGrid, coupling: Vec<f64>, diffusion: Mat2, inner: RingCondition, outer: RingCondition) -> Self {
        let n = (coupling.len() as f64).sqrt() as usize;
        assert_eq!(n * n, coupling.len(), "coupling must be square");
        let c = ComponentCoefficients::uniform(grid, diffusion, [0.0, 0.0], inner, outer);
        Self::new(vec![c; n], Coupling::Constant(coupling))
    }

    /// Validate against (H2) and return the ellipticity constant.
    pub fn validate(&self, grid: &PolarGrid) -> Result<f64> {
        let nn = grid.n_nodes();
        if self.components.len() != self.n || self.n == 0 {
            return Err(Error::ShapeMismatch(format!("{} components declared, {} given", self.n, self.components.len())));
        }
        let clen = self.coupling.expected_len(self.n, grid);
        if self.coupling.values().len() != clen {
            return Err(Error::ShapeMismatch(format!("coupling has {} entries, expected {clen}", self.coupling.values().len())));
        }
        if self.coupling.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite coupling".into()));
        }
        let mut ell = f64::INFINITY;
        for (ci, c) in self.components.iter().enumerate() {
            if c.diffusion.len() != nn || c.drift.len() != nn || c.beta.len() != 2 * grid.n_theta || c.eta.len() != 2 * grid.n_theta {
                return Err(Error::ShapeMismatch(format!("component {ci} fields do not match the grid")));
            }
            for (k, a) in c.diffusion.iter().enumerate() {
                if !stencil::is_symmetric(a) {
                    return Err(Error::NonSymmetricDiffusion { component: ci, node: k });
                }
                let e = stencil::min_eigenvalue(a);
                if !(e > 0.0) || !e.is_finite() {
                    return Err(Error::EllipticityViolated { component: ci, node: k, min_eig: e });
                }
                ell = ell.min(e);
            }
            for (slot, (&b, &e)) in c.beta.iter().zip(&c.eta).enumerate() {
                let node = if slot < grid.n_theta { slot } else { grid.node(grid.n_r - 1, slot - grid.n_theta) };
                if b != 0.0 && b != 1.0 {
                    return Err(Error::BoundaryFlagInvalid { component: ci, node, value: b });
                }
                if !(e >= 0.0) || !e.is_finite() {
                    return Err(Error::InvalidCoefficients(format!("eta = {e} < 0 at node {node} (component {ci})")));
                }
                if !(b + e > 0.0) {
                    return Err(Error::InvalidCoefficients(format!("beta + eta = 0 at node {node} (component {ci})")));
                }
            }
        }
        Ok(ell)
    }

    /// Whether any Dirichlet node exists for component `i`.
    pub fn is_dirichlet(&self, grid: &PolarGrid, i: usize, k: usize) -> bool {
        boundary_slot(grid, k).is_some_and(|s| self.components[i].beta[s] == 0.0)
    }

    pub fn eta_at(&self, grid: &PolarGrid, i: usize, k: usize) -> f64 {
        boundary_slot(grid, k).map_or(0.0, |s| self.components[i].eta[s])
    }

    pub fn beta_at(&self, grid: &PolarGrid, i: usize, k: usize) -> f64 {
        boundary_slot(grid, k).map_or(1.0, |s| self.components[i].beta[s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_boundary() {
        let g = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 3).unwrap();
        let mut c = SystemCoefficients::heat(&g, RingCondition::NEUMANN, RingCondition::robin(1.0));
        assert_eq!(c.validate(&g).unwrap(), 1.0);
        c.components[0].beta[3] = 2.0;
        assert!(matches!(c.validate(&g), Err(Error::BoundaryFlagInvalid { node: 3, .. })));
        c.components[0].beta[3] = 1.0;
        c.components[0].eta[9] = -0.1;
        assert!(matches!(c.validate(&g), Err(Error::InvalidCoefficients(_))));
        c.components[0].eta[9] = 0.0;
        c.components[0].beta[9] = 0.0;
        assert!(c.validate(&g).is_err());
        c.components[0].eta[9] = 1.0;
        c.components[0].diffusion[4] = [[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(c.validate(&g), Err(Error::EllipticityViolated { node: 4, .. })));
    }

    #[test]
    fn coupling_accessors() {
        let c = Coupling::Constant(vec![-1.0, -0.5, 0.0, 2.0]);
        assert_eq!(c.at(2, 10, 3, 7, 0, 1), -0.5);
        assert_eq!(c.max_diagonal(2), 2.0);
        assert_eq!(c.sup_norm(), 2.0);
    }
}
