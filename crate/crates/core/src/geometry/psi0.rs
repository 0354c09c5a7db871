//! Level function ψ₀ of the annulus: constant on each boundary component with
//! nonvanishing gradient in between.

use serde::{Deserialize, Serialize};

use crate::geometry::grid::{Boundary, Orientation, PolarGrid};
use crate::stencil::{self, Mat2, PolarTensor, StencilInput};
use crate::{par, Error, Result};

/// Default candidate exponents for the subharmonic exponentiation.
pub const DEFAULT_MU_GRID: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Gradient magnitudes at or below this count as vanishing.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi0Field {
    pub values: Vec<f64>,
    /// Cartesian gradient per node.
    pub gradient: Vec<[f64; 2]>,
    pub k0: f64,
    pub k1: f64,
    pub grad_min: f64,
}

impl Psi0Field {
    fn from_values(grid: &PolarGrid, values: Vec<f64>, k0: f64, k1: f64) -> Self {
        let gradient: Vec<[f64; 2]> =
            (0..grid.n_nodes()).map(|k| stencil::to_cartesian_vector(stencil::polar_gradient(grid, &values, k), grid.polar(k).1)).collect();
        let grad_min = gradient.iter().map(|g| g[0].hypot(g[1])).fold(f64::INFINITY, f64::min);
        Self { values, gradient, k0, k1, grad_min }
    }

    /// Largest deviation of the boundary traces from `k0`, `k1`.
    pub fn trace_spread(&self, grid: &PolarGrid) -> f64 {
        let dev = |nodes: &[usize], level: f64| nodes.iter().map(|&k| (self.values[k] - level).abs()).fold(0.0, f64::max);
        dev(&grid.gamma0_nodes, self.k0).max(dev(&grid.gamma1_nodes, self.k1))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// ψ₀ = r (or −r when Γ₀ is the outer circle).
pub fn construct_psi0_radial(grid: &PolarGrid) -> Psi0Field {
    let sign = match grid.orientation {
        Orientation::InnerIsGamma0 => 1.0,
        Orientation::OuterIsGamma0 => -1.0,
    };
    let values = grid.sample(|r, _| sign * r);
    let gradient = (0..grid.n_nodes())
        .map(|k| {
            let th = grid.polar(k).1;
            [sign * th.cos(), sign * th.sin()]
        })
        .collect();
    let (k0, k1) = if sign > 0.0 { (grid.r0, grid.r1) } else { (-grid.r1, -grid.r0) };
    Psi0Field { values, gradient, k0, k1, grad_min: 1.0 }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 100_000 }
    }
}

/// Bilinear interpolation of the seed gradient `(ψ_r, ψ_θ / r)` over the grid.
struct GradientSampler<'a> {
    grid: &'a PolarGrid,
    grad: Vec<[f64; 2]>,
}

impl GradientSampler<'_> {
    fn at(&self, r: f64, theta: f64) -> [f64; 2] {
        let g = self.grid;
        let x = ((r - g.r0) / g.hr()).clamp(0.0, (g.n_r - 1) as f64);
        let i = (x.floor() as usize).min(g.n_r - 2);
        let fx = x - i as f64;
        let y = theta.rem_euclid(2.0 * std::f64::consts::PI) / g.htheta();
        let j = (y.floor() as usize) % g.n_theta;
        let fy = y - y.floor();
        let j1 = (j + 1) % g.n_theta;
        let v = |ii: usize, jj: usize| self.grad[g.node(ii, jj)];
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (1.0 - fx) * ((1.0 - fy) * v(i, j)[c] + fy * v(i, j1)[c]) + fx * ((1.0 - fy) * v(i + 1, j)[c] + fy * v(i + 1, j1)[c]);
        }
        out
    }

    /// Backward normalized flow `-grad ψ / |grad ψ|²` in `(r, θ)` coordinates.
    fn rhs(&self, state: [f64; 2]) -> [f64; 2] {
        let [gr, gt] = self.at(state[0], state[1]);
        let n2 = gr * gr + gt * gt;
        [-gr / n2, -gt / (n2 * state[0])]
    }
}

/// Integrate from a node back to Γ₀ and return the elapsed flow parameter.
fn reaching_time(sampler: &GradientSampler<'_>, start: [f64; 2], target_r: f64, other_r: f64, opts: &FlowOptions) -> Option<f64> {
    // Bogacki–Shampine 3(2) with crossing detection on r = target_r.
    let dist = |r: f64| (r - target_r) * (other_r - target_r).signum();
    let mut y = start;
    let mut s = 0.0;
    let mut h = 0.05 * (other_r - target_r).abs();
    let mut k1 = sampler.rhs(y);
    for _ in 0..opts.max_steps {
        if dist(y[0]).abs() < 1e-13 {
            return Some(s);
        }
        let k2 = sampler.rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = sampler.rhs([y[0] + 0.75 * h * k2[0], y[1] + 0.75 * h * k2[1]]);
        let mut yn = [0.0; 2];
        for c in 0..2 {
            yn[c] = y[c] + h * (2.0 * k1[c] + 3.0 * k2[c] + 4.0 * k3[c]) / 9.0;
        }
        let k4 = sampler.rhs(yn);
        let mut err: f64 = 0.0;
        for c in 0..2 {
            let e = h * (-5.0 * k1[c] / 72.0 + k2[c] / 12.0 + k3[c] / 9.0 - k4[c] / 8.0);
            let sc = opts.atol + opts.rtol * y[c].abs().max(yn[c].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return None;
        }
        if err > 1.0 {
            h *= (0.9 * err.powf(-1.0 / 3.0)).max(0.2);
            continue;
        }
        let d_new = dist(yn[0]);
        if d_new < -1e-13 {
            // crossed Γ₀: shrink towards the crossing
            let d_old = dist(y[0]);
            h *= (d_old / (d_old - d_new)).clamp(0.05, 0.999);
            continue;
        }
        if d_new > dist(other_r) + 1e-9 {
            return None;
        }
        y = yn;
        s += h;
        k1 = k4;
        h *= (0.9 * err.max(1e-12).powf(-1.0 / 3.0)).min(4.0);
    }
    None
}

/// Build ψ₀ from a seed with nonvanishing gradient by integrating the
/// normalized gradient flow: ψ₀(x) = k0 + (flow time from Γ₀ to x).
pub fn construct_psi0_flow(grid: &PolarGrid, seed: &[f64], opts: &FlowOptions) -> Result<Psi0Field> {
    if seed.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch(format!("seed has {} values, grid has {} nodes", seed.len(), grid.n_nodes())));
    }
    let grad: Vec<[f64; 2]> = (0..grid.n_nodes()).map(|k| stencil::polar_gradient(grid, seed, k)).collect();
    let (node, min_grad) =
        grad.iter().enumerate().map(|(k, g)| (k, g[0].hypot(g[1]))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if min_grad <= GRADIENT_FLOOR {
        return Err(Error::VanishingGradient { min_grad, node });
    }

    let sampler = GradientSampler { grid, grad };
    let ring0 = grid.ring_of(Boundary::Gamma0);
    let ring1 = grid.ring_of(Boundary::Gamma1);
    let (target_r, other_r) = (grid.ring_radius(ring0), grid.ring_radius(ring1));
    let i0 = grid.ring_index(ring0);
    let k0 = grid.gamma0_nodes.iter().map(|&k| seed[k]).sum::<f64>() / grid.n_theta as f64;

    let times = par::try_map_range(grid.n_nodes(), |k| {
        let (i, _) = grid.ij(k);
        if i == i0 {
            return Ok(0.0);
        }
        let (r, th) = grid.polar(k);
        reaching_time(&sampler, [r, th], target_r, other_r, opts).ok_or(Error::FlowEscape { node: k })
    })?;
    let values: Vec<f64> = times.iter().map(|s| k0 + s).collect();
    let k1 = grid.gamma1_nodes.iter().map(|&k| values[k]).sum::<f64>() / grid.n_theta as f64;
    if !(k1 > k0) {
        return Err(Error::VanishingGradient { min_grad: 0.0, node: grid.gamma1_nodes[0] });
    }
    Ok(Psi0Field::from_values(grid, values, k0, k1))
}

/// Replace ψ₀ by an affine rescaling of `exp(μ ψ₀)` to `[k0, k1]` with the
/// smallest μ in `mu_grid` that makes the discrete `div(A grad ψ)` positive at
/// every interior node.
pub fn exponentiate_for_subharmonicity(
    grid: &PolarGrid,
    psi0: &Psi0Field,
    diffusion: &[Mat2],
    mu_grid: &[f64],
) -> Result<(Psi0Field, f64)> {
    if diffusion.len() != grid.n_nodes() || psi0.values.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch("diffusion field or psi0 does not match the grid".into()));
    }
    for (k, a) in diffusion.iter().enumerate() {
        if !stencil::is_symmetric(a) {
            return Err(Error::NonSymmetricDiffusion { component: 0, node: k });
        }
        let min_eig = stencil::min_eigenvalue(a);
        if !(min_eig > 0.0) {
            return Err(Error::EllipticityViolated { component: 0, node: k, min_eig });
        }
    }
    let tensor: Vec<PolarTensor> = (0..grid.n_nodes()).map(|k| PolarTensor::from_cartesian(&diffusion[k], grid.polar(k).1)).collect();
    let no_eta = |_: usize| 0.0;
    let input = StencilInput { grid, tensor: &tensor, drift: None, eta: &no_eta };
    let rows: Vec<_> = (grid.n_theta..grid.n_nodes() - grid.n_theta).map(|k| (k, input.divergence_row(k))).collect();

    let span = psi0.k1 - psi0.k0;
    for &mu in mu_grid {
        if !(mu > 0.0) {
            continue;
        }
        // exp(mu (psi0 - k0)); the dropped factor exp(mu k0) is positive
        let u: Vec<f64> = psi0.values.iter().map(|v| (mu * (v - psi0.k0)).exp()).collect();
        if rows.iter().all(|(_, row)| row.apply(&u) > 0.0) {
            let top = (mu * span).exp();
            let scale = span / (top - 1.0);
            let values: Vec<f64> = u.iter().map(|e| psi0.k0 + scale * (e - 1.0)).collect();
            let gradient: Vec<[f64; 2]> =
                psi0.gradient.iter().zip(&u).map(|(g, e)| [scale * mu * e * g[0], scale * mu * e * g[1]]).collect();
            let grad_min = gradient.iter().map(|g| g[0].hypot(g[1])).fold(f64::INFINITY, f64::min);
            let field = Psi0Field { values, gradient, k0: psi0.k0, k1: psi0.k1, grad_min };
            return Ok((field, mu));
        }
    }
    Err(Error::NoAdmissibleMu)
}

/// Discrete `div(A grad ψ)` at interior nodes (rings excluded).
pub fn interior_divergence(grid: &PolarGrid, values: &[f64], diffusion: &[Mat2]) -> Vec<f64> {
    let tensor: Vec<PolarTensor> = (0..grid.n_nodes()).map(|k| PolarTensor::from_cartesian(&diffusion[k], grid.polar(k).1)).collect();
    let no_eta = |_: usize| 0.0;
    let input = StencilInput { grid, tensor: &tensor, drift: None, eta: &no_eta };
    (grid.n_theta..grid.n_nodes() - grid.n_theta).map(|k| input.divergence_row(k).apply(values)).collect()
}
