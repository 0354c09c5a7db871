use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which circle carries Γ₀. The level function increases from Γ₀ to Γ₁.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    InnerIsGamma0,
    OuterIsGamma0,
}

/// The two connected components of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    Gamma0,
    Gamma1,
}

/// Physical circle of the annulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ring {
    Inner,
    Outer,
}

impl Ring {
    /// Sign of the outward normal relative to the radial unit vector.
    pub fn normal_sign(self) -> f64 {
        match self {
            Ring::Inner => -1.0,
            Ring::Outer => 1.0,
        }
    }
}

/// Tensor grid on `[r0, r1] x [0, 2π) x [0, T]`.
///
/// Spatial node `k = i * n_theta + j` sits at radius `r0 + i hr` and angle
/// `j hθ`; the angular direction is periodic. Quadrature weights carry the
/// `r dr dθ` Jacobian with trapezoidal end weights in `r`, which makes the
/// total exact for the annulus area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub r0: f64,
    pub r1: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub t_final: f64,
    pub n_t: usize,
    pub orientation: Orientation,
    pub gamma0_nodes: Vec<usize>,
    pub gamma1_nodes: Vec<usize>,
    pub quad_weights: Vec<f64>,
}

impl PolarGrid {
    pub fn new(r0: f64, r1: f64, n_r: usize, n_theta: usize, t_final: f64, n_t: usize) -> Result<Self> {
        Self::with_orientation(r0, r1, n_r, n_theta, t_final, n_t, Orientation::default())
    }

    pub fn with_orientation(
        r0: f64,
        r1: f64,
        n_r: usize,
        n_theta: usize,
        t_final: f64,
        n_t: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() || !r1.is_finite() {
            return Err(Error::NonPositiveRadius { r0, r1 });
        }
        if !(r1 > r0) {
            return Err(Error::DegenerateResolution(format!("empty annulus: r1 = {r1} <= r0 = {r0}")));
        }
        if n_r < 3 || n_theta < 4 || n_t < 3 {
            return Err(Error::DegenerateResolution(format!("need n_r >= 3, n_theta >= 4, n_t >= 3 (got {n_r}, {n_theta}, {n_t})")));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::DegenerateResolution(format!("time horizon must be positive (got {t_final})")));
        }

        let hr = (r1 - r0) / (n_r - 1) as f64;
        let ht = 2.0 * PI / n_theta as f64;
        let mut quad_weights = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let end = if i == 0 || i == n_r - 1 { 0.5 } else { 1.0 };
            let w = end * (r0 + i as f64 * hr) * hr * ht;
            quad_weights.extend(std::iter::repeat_n(w, n_theta));
        }

        let inner: Vec<usize> = (0..n_theta).collect();
        let outer: Vec<usize> = ((n_r - 1) * n_theta..n_r * n_theta).collect();
        let (gamma0_nodes, gamma1_nodes) = match orientation {
            Orientation::InnerIsGamma0 => (inner, outer),
            Orientation::OuterIsGamma0 => (outer, inner),
        };

        Ok(Self { r0, r1, n_r, n_theta, t_final, n_t, orientation, gamma0_nodes, gamma1_nodes, quad_weights })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn hr(&self) -> f64 {
        (self.r1 - self.r0) / (self.n_r - 1) as f64
    }

    pub fn htheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n_t - 1) as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.n_r - 1 {
            self.r1
        } else {
            self.r0 + i as f64 * self.hr()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.htheta()
    }

    pub fn time(&self, m: usize) -> f64 {
        if m == self.n_t - 1 {
            self.t_final
        } else {
            m as f64 * self.dt()
        }
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Node index with periodic wrap in the angular direction.
    #[inline]
    pub fn node_wrapped(&self, i: usize, j: isize) -> usize {
        let n = self.n_theta as isize;
        i * self.n_theta + j.rem_euclid(n) as usize
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n_theta, k % self.n_theta)
    }

    pub fn polar(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.radius(i), self.theta(j))
    }

    pub fn cartesian(&self, k: usize) -> [f64; 2] {
        let (r, th) = self.polar(k);
        [r * th.cos(), r * th.sin()]
    }

    pub fn area(&self) -> f64 {
        PI * (self.r1 * self.r1 - self.r0 * self.r0)
    }

    /// Trapezoidal weights in time.
    pub fn time_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_t).map(|m| if m == 0 || m == self.n_t - 1 { 0.5 * dt } else { dt }).collect()
    }

    /// Radial index of a physical circle.
    pub fn ring_index(&self, ring: Ring) -> usize {
        match ring {
            Ring::Inner => 0,
            Ring::Outer => self.n_r - 1,
        }
    }

    pub fn ring_radius(&self, ring: Ring) -> f64 {
        match ring {
            Ring::Inner => self.r0,
            Ring::Outer => self.r1,
        }
    }

    pub fn ring_of(&self, boundary: Boundary) -> Ring {
        match (boundary, self.orientation) {
            (Boundary::Gamma0, Orientation::InnerIsGamma0) | (Boundary::Gamma1, Orientation::OuterIsGamma0) => Ring::Inner,
            _ => Ring::Outer,
        }
    }

    pub fn boundary_nodes(&self, boundary: Boundary) -> &[usize] {
        match boundary {
            Boundary::Gamma0 => &self.gamma0_nodes,
            Boundary::Gamma1 => &self.gamma1_nodes,
        }
    }

    /// Arc-length weight `r dθ` of a node on the given boundary.
    pub fn arc_weight(&self, boundary: Boundary) -> f64 {
        self.ring_radius(self.ring_of(boundary)) * self.htheta()
    }

    /// Sample a function of `(r, θ)` at every spatial node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|k| {
                let (r, th) = self.polar(k);
                f(r, th)
            })
            .collect()
    }

    /// Same resolution parameters with `n_r`, `n_theta` doubled in cell count.
    pub fn refined(&self) -> Result<Self> {
        Self::with_orientation(
            self.r0,
            self.r1,
            2 * (self.n_r - 1) + 1,
            2 * self.n_theta,
            self.t_final,
            2 * (self.n_t - 1) + 1,
            self.orientation,
        )
    }
}
