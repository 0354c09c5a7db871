//! Finite-difference stencils in the polar metric.
//!
//! Fluxes are formed on cell faces so that `div(A grad u)` is in conservative
//! form: the rows annihilate constants exactly, and boundary rows use the
//! flux prescribed by the Robin closure in place of a ghost node.

use crate::geometry::grid::{PolarGrid, Ring};

/// Dense 2x2 matrix in Cartesian components, row-major.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Symmetric tensor expressed in the local `(r̂, θ̂)` frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarTensor {
    pub rr: f64,
    pub rt: f64,
    pub tt: f64,
}

impl PolarTensor {
    pub fn from_cartesian(a: &Mat2, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let er = [c, s];
        let et = [-s, c];
        let quad = |u: [f64; 2], v: [f64; 2]| u[0] * (a[0][0] * v[0] + a[0][1] * v[1]) + u[1] * (a[1][0] * v[0] + a[1][1] * v[1]);
        Self { rr: quad(er, er), rt: 0.5 * (quad(er, et) + quad(et, er)), tt: quad(et, et) }
    }

    fn mean(&self, other: &Self) -> Self {
        Self { rr: 0.5 * (self.rr + other.rr), rt: 0.5 * (self.rt + other.rt), tt: 0.5 * (self.tt + other.tt) }
    }
}

/// Radial and angular components of a Cartesian vector at angle `theta`.
pub fn to_polar_vector(v: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
}

pub fn to_cartesian_vector(v: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(a: &Mat2) -> f64 {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    0.5 * tr - disc
}

pub fn is_symmetric(a: &Mat2) -> bool {
    let scale = a[0][1].abs().max(a[1][0].abs()).max(1.0);
    (a[0][1] - a[1][0]).abs() <= 1e-12 * scale
}

/// A sparse linear functional on a nodal field: `sum c_k u_k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row(pub Vec<(usize, f64)>);

impl Row {
    pub fn unit(k: usize, c: f64) -> Self {
        Row(vec![(k, c)])
    }

    pub fn add(&mut self, other: &Row, scale: f64) {
        if scale != 0.0 {
            self.0.extend(other.0.iter().map(|&(k, c)| (k, c * scale)));
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for e in &mut self.0 {
            e.1 *= s;
        }
        self
    }

    /// Merge duplicate columns and drop exact zeros; sorted by column.
    pub fn compress(mut self) -> Self {
        self.0.sort_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.0.len());
        for (k, c) in self.0 {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|e| e.1 != 0.0);
        Row(out)
    }

    pub fn apply(&self, u: &[f64]) -> f64 {
        self.0.iter().map(|&(k, c)| c * u[k]).sum()
    }
}

/// Everything needed to build rows of `-div(A grad u) + b . grad u`.
pub struct StencilInput<'a> {
    pub grid: &'a PolarGrid,
    /// Diffusion tensor per node, polar frame.
    pub tensor: &'a [PolarTensor],
    /// Drift per node, polar components `(b_r, b_θ)`.
    pub drift: Option<&'a [[f64; 2]]>,
    /// Robin coefficient `η` at a boundary node (used only on boundary rows).
    pub eta: &'a dyn Fn(usize) -> f64,
}

impl StencilInput<'_> {
    fn u_theta(&self, i: usize, j: usize) -> Row {
        let g = self.grid;
        let c = 0.5 / g.htheta();
        Row(vec![(g.node_wrapped(i, j as isize + 1), c), (g.node_wrapped(i, j as isize - 1), -c)])
    }

    /// Radial flux `a_rr u_r + a_rt u_θ / r` prescribed by the closure on a ring.
    fn boundary_flux(&self, i: usize, j: usize) -> Row {
        let g = self.grid;
        let ring = if i == 0 { Ring::Inner } else { Ring::Outer };
        let k = g.node(i, j);
        Row::unit(k, -ring.normal_sign() * (self.eta)(k))
    }

    fn u_r(&self, i: usize, j: usize) -> Row {
        let g = self.grid;
        if i > 0 && i < g.n_r - 1 {
            let c = 0.5 / g.hr();
            return Row(vec![(g.node(i + 1, j), c), (g.node(i - 1, j), -c)]);
        }
        let k = g.node(i, j);
        let a = self.tensor[k];
        let mut row = self.boundary_flux(i, j);
        row.add(&self.u_theta(i, j), -a.rt / g.radius(i));
        row.scaled(1.0 / a.rr)
    }

    fn radial_face_flux(&self, i: usize, j: usize) -> Row {
        // face between i and i + 1
        let g = self.grid;
        let (k0, k1) = (g.node(i, j), g.node(i + 1, j));
        let a = self.tensor[k0].mean(&self.tensor[k1]);
        let mut row = Row(vec![(k1, a.rr / g.hr()), (k0, -a.rr / g.hr())]);
        let mixed0 = self.tensor[k0].rt / g.radius(i);
        let mixed1 = self.tensor[k1].rt / g.radius(i + 1);
        if mixed0 != 0.0 || mixed1 != 0.0 {
            row.add(&self.u_theta(i, j), 0.5 * mixed0);
            row.add(&self.u_theta(i + 1, j), 0.5 * mixed1);
        }
        row
    }

    fn angular_face_flux(&self, i: usize, j: usize) -> Row {
        // face between j and j + 1
        let g = self.grid;
        let k0 = g.node(i, j);
        let k1 = g.node_wrapped(i, j as isize + 1);
        let a = self.tensor[k0].mean(&self.tensor[k1]);
        let c = a.tt / (g.radius(i) * g.htheta());
        let mut row = Row(vec![(k1, c), (k0, -c)]);
        let (m0, m1) = (self.tensor[k0].rt, self.tensor[k1].rt);
        if m0 != 0.0 || m1 != 0.0 {
            row.add(&self.u_r(i, j), 0.5 * m0);
            row.add(&self.u_r(i, (j + 1) % g.n_theta), 0.5 * m1);
        }
        row
    }

    /// Row of `div(A grad u)` at node `k`.
    pub fn divergence_row(&self, k: usize) -> Row {
        let g = self.grid;
        let (i, j) = g.ij(k);
        let r = g.radius(i);
        let hr = g.hr();
        let mut row = Row::default();

        if i == 0 {
            let rf = 0.5 * (g.radius(0) + g.radius(1));
            let s = 2.0 / (r * hr);
            row.add(&self.radial_face_flux(0, j), s * rf);
            row.add(&self.boundary_flux(0, j), -s * r);
        } else if i == g.n_r - 1 {
            let rf = 0.5 * (g.radius(i - 1) + g.radius(i));
            let s = 2.0 / (r * hr);
            row.add(&self.boundary_flux(i, j), s * r);
            row.add(&self.radial_face_flux(i - 1, j), -s * rf);
        } else {
            let rp = 0.5 * (g.radius(i) + g.radius(i + 1));
            let rm = 0.5 * (g.radius(i - 1) + g.radius(i));
            let s = 1.0 / (r * hr);
            row.add(&self.radial_face_flux(i, j), s * rp);
            row.add(&self.radial_face_flux(i - 1, j), -s * rm);
        }

        let s = 1.0 / (r * g.htheta());
        let jm = (j + g.n_theta - 1) % g.n_theta;
        row.add(&self.angular_face_flux(i, j), s);
        row.add(&self.angular_face_flux(i, jm), -s);
        row.compress()
    }

    /// Row of `-div(A grad u) + b . grad u` at node `k`.
    pub fn operator_row(&self, k: usize) -> Row {
        let mut row = self.divergence_row(k).scaled(-1.0);
        if let Some(drift) = self.drift {
            let b = drift[k];
            let (i, j) = self.grid.ij(k);
            if b[0] != 0.0 {
                row.add(&self.u_r(i, j), b[0]);
            }
            if b[1] != 0.0 {
                row.add(&self.u_theta(i, j), b[1] / self.grid.radius(i));
            }
        }
        row.compress()
    }
}

/// Discrete gradient of a nodal field in polar components `(u_r, u_θ / r)`.
///
/// Central differences inside, one-sided second-order stencils on the rings.
pub fn polar_gradient(grid: &PolarGrid, u: &[f64], k: usize) -> [f64; 2] {
    let (i, j) = grid.ij(k);
    let hr = grid.hr();
    let n = grid.n_r;
    let at = |ii: usize| u[grid.node(ii, j)];
    let ur = if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * hr)
    } else if i == n - 1 {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * hr)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * hr)
    };
    let ut = (u[grid.node_wrapped(i, j as isize + 1)] - u[grid.node_wrapped(i, j as isize - 1)]) / (2.0 * grid.htheta());
    [ur, ut / grid.radius(i)]
}
