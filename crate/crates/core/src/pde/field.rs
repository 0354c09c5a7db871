use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::{Error, Result};

/// `n_comp x n_t x n_nodes` array of nodal values, component-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    pub n_comp: usize,
    pub n_t: usize,
    pub n_nodes: usize,
    pub values: Vec<f64>,
}

/// Solution trajectory `y`.
pub type StateField = SpaceTimeField;

impl SpaceTimeField {
    pub fn zeros(n_comp: usize, grid: &PolarGrid) -> Self {
        Self { n_comp, n_t: grid.n_t, n_nodes: grid.n_nodes(), values: vec![0.0; n_comp * grid.n_t * grid.n_nodes()] }
    }

    /// Sample `f(component, t, r, θ)` on every space-time node.
    pub fn from_fn(n_comp: usize, grid: &PolarGrid, f: impl Fn(usize, f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(n_comp, grid);
        for c in 0..n_comp {
            for m in 0..grid.n_t {
                let t = grid.time(m);
                for k in 0..grid.n_nodes() {
                    let (r, th) = grid.polar(k);
                    let i = out.idx(c, m, k);
                    out.values[i] = f(c, t, r, th);
                }
            }
        }
        out
    }

    #[inline]
    pub fn idx(&self, c: usize, m: usize, k: usize) -> usize {
        (c * self.n_t + m) * self.n_nodes + k
    }

    #[inline]
    pub fn get(&self, c: usize, m: usize, k: usize) -> f64 {
        self.values[self.idx(c, m, k)]
    }

    pub fn slice(&self, c: usize, m: usize) -> &[f64] {
        let s = self.idx(c, m, 0);
        &self.values[s..s + self.n_nodes]
    }

    pub fn slice_mut(&mut self, c: usize, m: usize) -> &mut [f64] {
        let s = self.idx(c, m, 0);
        &mut self.values[s..s + self.n_nodes]
    }

    /// Time slice `m` of every component, concatenated component-major.
    pub fn time_slice(&self, m: usize) -> Vec<f64> {
        (0..self.n_comp).flat_map(|c| self.slice(c, m).iter().copied()).collect()
    }

    /// Single-component view as its own field.
    pub fn component(&self, c: usize) -> Self {
        let len = self.n_t * self.n_nodes;
        Self { n_comp: 1, n_t: self.n_t, n_nodes: self.n_nodes, values: self.values[c * len..(c + 1) * len].to_vec() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.n_comp, self.n_t, self.n_nodes) != (other.n_comp, other.n_t, other.n_nodes) {
            return Err(Error::ShapeMismatch(format!(
                "fields differ: {:?} vs {:?}",
                (self.n_comp, self.n_t, self.n_nodes),
                (other.n_comp, other.n_t, other.n_nodes)
            )));
        }
        Ok(())
    }

    pub fn check_grid(&self, grid: &PolarGrid) -> Result<()> {
        if self.n_t != grid.n_t || self.n_nodes != grid.n_nodes() {
            return Err(Error::ShapeMismatch(format!("field is {}x{}, grid is {}x{}", self.n_t, self.n_nodes, grid.n_t, grid.n_nodes())));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// Space-time quadrature: trapezoid in time, polar weights in space.
fn quadrature(field: &SpaceTimeField, grid: &PolarGrid, f: impl Fn(f64) -> f64) -> f64 {
    let wt = grid.time_weights();
    let mut total = 0.0;
    for c in 0..field.n_comp {
        for (m, w_m) in wt.iter().enumerate() {
            let s: f64 = field.slice(c, m).iter().zip(&grid.quad_weights).map(|(v, w)| w * f(*v)).sum();
            total += w_m * s;
        }
    }
    total
}

/// `‖y‖_{L²(Q)}`, summing squares over components.
pub fn norm_l2_q(field: &SpaceTimeField, grid: &PolarGrid) -> f64 {
    quadrature(field, grid, |v| v * v).sqrt()
}

/// `‖y‖_{L¹(Q)}`, summing absolute values over components.
pub fn norm_l1_q(field: &SpaceTimeField, grid: &PolarGrid) -> f64 {
    quadrature(field, grid, f64::abs)
}

/// Source `g` with cached `L²(Q)` and `L¹(Q)` norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceField {
    pub field: SpaceTimeField,
    pub l2: f64,
    pub l1: f64,
}

impl SourceField {
    pub fn new(field: SpaceTimeField, grid: &PolarGrid) -> Result<Self> {
        field.check_grid(grid)?;
        let l2 = norm_l2_q(&field, grid);
        let l1 = norm_l1_q(&field, grid);
        Ok(Self { field, l2, l1 })
    }

    /// `‖g‖₂ / ‖g‖₁`, the quantity bounded by `k` in the source class.
    pub fn norm_ratio(&self) -> f64 {
        self.l2 / self.l1
    }

    /// Largest relative deviation of the cache from a fresh computation.
    pub fn cache_error(&self, grid: &PolarGrid) -> f64 {
        let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        rel(self.l2, norm_l2_q(&self.field, grid)).max(rel(self.l1, norm_l1_q(&self.field, grid)))
    }

    pub fn scaled(&self, s: f64, grid: &PolarGrid) -> Result<Self> {
        Self::new(self.field.scaled(s), grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_norms_are_exact() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 5).unwrap();
        let one = SpaceTimeField::from_fn(1, &g, |_, _, _, _| 1.0);
        assert!((norm_l1_q(&one, &g) - 3.0 * PI).abs() < 1e-12);
        assert!((norm_l2_q(&one, &g) - (3.0 * PI).sqrt()).abs() < 1e-12);
        let zero = SpaceTimeField::zeros(2, &g);
        assert_eq!(norm_l1_q(&zero, &g), 0.0);
        assert_eq!(norm_l2_q(&zero, &g), 0.0);
        let s = SourceField::new(one, &g).unwrap();
        assert!(s.cache_error(&g) < 1e-12);
    }

    #[test]
    fn half_annulus_converges_first_order() {
        let err = |n_theta: usize| {
            let g = PolarGrid::new(1.0, 2.0, 9, n_theta, 1.0, 3).unwrap();
            let f = SpaceTimeField::from_fn(1, &g, |_, _, _, th| if th > 0.0 && th < PI { 1.0 } else { 0.0 });
            (norm_l1_q(&f, &g) - 1.5 * PI).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e2 < e1 && (e1 / e2 - 2.0).abs() < 0.1, "{e1} {e2}");
    }
}
