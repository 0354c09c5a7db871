//! Boundary traces, conormal derivatives and the observation
//! `ζ = γ ∂_ν_A y + δ y` on Γ₁.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::carleman::LogSum;
use crate::geometry::grid::{Boundary, PolarGrid};
use crate::geometry::weights::WeightFields;
use crate::pde::coefficients::{boundary_slot, SystemCoefficients};
use crate::pde::field::StateField;
use crate::stencil::{polar_gradient, PolarTensor};
use crate::{Error, Result};

/// Observation coefficients on Γ₁, indexed `[component][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub gamma: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl ObservationSpec {
    pub fn uniform(n: usize, grid: &PolarGrid, gamma: f64, delta: f64, epsilon: f64) -> Self {
        Self { gamma: vec![vec![gamma; grid.n_theta]; n], delta: vec![vec![delta; grid.n_theta]; n], epsilon }
    }

    fn check_shape(&self, n: usize, grid: &PolarGrid) -> Result<()> {
        let ok = self.gamma.len() == n && self.delta.len() == n && self.gamma.iter().chain(&self.delta).all(|v| v.len() == grid.n_theta);
        if !ok {
            return Err(Error::ShapeMismatch(format!("observation spec must be {n} x {}", grid.n_theta)));
        }
        Ok(())
    }
}

/// Values on one boundary circle, index `(c * n_t + m) * n_theta + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySeries {
    pub n_comp: usize,
    pub n_t: usize,
    pub n_theta: usize,
    pub boundary: Boundary,
    pub values: Vec<f64>,
}

impl BoundarySeries {
    pub fn zeros(n_comp: usize, grid: &PolarGrid, boundary: Boundary) -> Self {
        Self { n_comp, n_t: grid.n_t, n_theta: grid.n_theta, boundary, values: vec![0.0; n_comp * grid.n_t * grid.n_theta] }
    }

    #[inline]
    pub fn idx(&self, c: usize, m: usize, j: usize) -> usize {
        (c * self.n_t + m) * self.n_theta + j
    }

    #[inline]
    pub fn get(&self, c: usize, m: usize, j: usize) -> f64 {
        self.values[self.idx(c, m, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    fn check_grid(&self, grid: &PolarGrid) -> Result<()> {
        if self.n_t != grid.n_t || self.n_theta != grid.n_theta {
            return Err(Error::ShapeMismatch(format!(
                "boundary series is {}x{}, grid is {}x{}",
                self.n_t, self.n_theta, grid.n_t, grid.n_theta
            )));
        }
        Ok(())
    }
}

/// Trace and conormal derivative on one circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub trace: BoundarySeries,
    pub conormal: BoundarySeries,
}

fn gamma1_coeffs(coeffs: &SystemCoefficients, grid: &PolarGrid, c: usize, j: usize) -> (f64, f64) {
    let k = grid.gamma1_nodes[j];
    let slot = boundary_slot(grid, k).expect("Γ₁ node lies on a circle");
    (coeffs.components[c].beta[slot], coeffs.components[c].eta[slot])
}

/// Smallest `γ η − β δ` over Γ₁; fails below `epsilon`.
pub fn check_compatibility(spec: &ObservationSpec, coeffs: &SystemCoefficients, grid: &PolarGrid) -> Result<f64> {
    spec.check_shape(coeffs.n, grid)?;
    let mut min = f64::INFINITY;
    for c in 0..coeffs.n {
        for j in 0..grid.n_theta {
            let (b, e) = gamma1_coeffs(coeffs, grid, c, j);
            let det = spec.gamma[c][j] * e - b * spec.delta[c][j];
            if !(det >= spec.epsilon) {
                return Err(Error::CompatibilityViolated { component: c, node: grid.gamma1_nodes[j], det });
            }
            min = min.min(det);
        }
    }
    Ok(min)
}

/// Restriction of `y` and `⟨A ∇y, ν⟩` to the given boundary.
pub fn extract_trace_and_conormal_on(
    y: &StateField,
    coeffs: &SystemCoefficients,
    grid: &PolarGrid,
    boundary: Boundary,
) -> Result<BoundaryTrace> {
    y.check_grid(grid)?;
    if y.n_comp != coeffs.n {
        return Err(Error::ShapeMismatch(format!("state has {} components, system has {}", y.n_comp, coeffs.n)));
    }
    let ring = grid.ring_of(boundary);
    let sign = ring.normal_sign();
    let nodes = grid.boundary_nodes(boundary);
    let mut trace = BoundarySeries::zeros(y.n_comp, grid, boundary);
    let mut conormal = trace.clone();
    for c in 0..y.n_comp {
        let tensors: Vec<PolarTensor> =
            nodes.iter().map(|&k| PolarTensor::from_cartesian(&coeffs.components[c].diffusion[k], grid.polar(k).1)).collect();
        for m in 0..grid.n_t {
            let u = y.slice(c, m);
            for (j, &k) in nodes.iter().enumerate() {
                let [ur, ut] = polar_gradient(grid, u, k);
                let a = tensors[j];
                let i = trace.idx(c, m, j);
                trace.values[i] = u[k];
                conormal.values[i] = sign * (a.rr * ur + a.rt * ut);
            }
        }
    }
    Ok(BoundaryTrace { trace, conormal })
}

/// [`extract_trace_and_conormal_on`] for the observed boundary Γ₁.
pub fn extract_trace_and_conormal(y: &StateField, coeffs: &SystemCoefficients, grid: &PolarGrid) -> Result<BoundaryTrace> {
    extract_trace_and_conormal_on(y, coeffs, grid, Boundary::Gamma1)
}

/// Largest `|β ∂_ν y + η y|` over Γ₁.
pub fn boundary_residual(trace: &BoundaryTrace, coeffs: &SystemCoefficients, grid: &PolarGrid) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..trace.trace.n_comp {
        for j in 0..grid.n_theta {
            let (b, e) = gamma1_coeffs(coeffs, grid, c, j);
            for m in 0..grid.n_t {
                let r = b * trace.conormal.get(c, m, j) + e * trace.trace.get(c, m, j);
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// `ζ_i = γ_i ∂_ν y_i + δ_i y_i` on Γ₁.
pub fn apply_observation(spec: &ObservationSpec, trace: &BoundaryTrace) -> BoundarySeries {
    let mut z = trace.trace.clone();
    for c in 0..z.n_comp {
        for m in 0..z.n_t {
            for j in 0..z.n_theta {
                let i = z.idx(c, m, j);
                z.values[i] = spec.gamma[c][j] * trace.conormal.values[i] + spec.delta[c][j] * trace.trace.values[i];
            }
        }
    }
    z
}

/// Result of inverting the boundary system node by node.
#[derive(Clone, Debug)]
pub struct Recovery {
    pub trace: BoundaryTrace,
    /// `(|β| + |η|) / (γη − βδ)` per `[component][j]`.
    pub k_node: Vec<Vec<f64>>,
    pub k_max: f64,
}

/// Solve `{β ∂_ν y + η y = 0, γ ∂_ν y + δ y = ζ}` at every Γ₁ node.
pub fn recover_trace_from_observation(
    zeta: &BoundarySeries,
    spec: &ObservationSpec,
    coeffs: &SystemCoefficients,
    grid: &PolarGrid,
) -> Result<Recovery> {
    spec.check_shape(zeta.n_comp, grid)?;
    zeta.check_grid(grid)?;
    let mut trace = zeta.clone();
    let mut conormal = zeta.clone();
    let mut k_node = vec![vec![0.0; grid.n_theta]; zeta.n_comp];
    for c in 0..zeta.n_comp {
        for j in 0..grid.n_theta {
            let (b, e) = gamma1_coeffs(coeffs, grid, c, j);
            let det = spec.gamma[c][j] * e - b * spec.delta[c][j];
            if !(det >= spec.epsilon) {
                return Err(Error::SingularRecovery { component: c, node: grid.gamma1_nodes[j], det });
            }
            k_node[c][j] = (b.abs() + e.abs()) / det;
            for m in 0..zeta.n_t {
                let i = zeta.idx(c, m, j);
                trace.values[i] = -b * zeta.values[i] / det;
                conormal.values[i] = e * zeta.values[i] / det;
            }
        }
    }
    let k_max = k_node.iter().flatten().fold(0.0, |a: f64, v| a.max(*v));
    Ok(Recovery { trace: BoundaryTrace { trace, conormal }, k_node, k_max })
}

/// `‖ζ‖_{L²(Σ)}` with arc length `r dθ` and trapezoid in time.
pub fn norm_l2_sigma(series: &BoundarySeries, grid: &PolarGrid) -> f64 {
    let arc = grid.arc_weight(series.boundary);
    let wt = grid.time_weights();
    let mut total = 0.0;
    for c in 0..series.n_comp {
        for (m, w) in wt.iter().enumerate() {
            let s: f64 = (0..series.n_theta).map(|j| series.get(c, m, j).powi(2)).sum();
            total += w * arc * s;
        }
    }
    total.sqrt()
}

/// `‖ζ‖_{L²(Σ₁)}`.
pub fn norm_l2_sigma1(series: &BoundarySeries, grid: &PolarGrid) -> f64 {
    norm_l2_sigma(series, grid)
}

/// Powers in `∫_Σ s^a λ^b φ^p |ζ|² e^{2sα}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightPowers {
    pub s: f64,
    pub lambda: f64,
    pub phi: f64,
}

/// Natural log of `∫_Σ s^a λ^b φ^p |ζ|² e^{2sα}`, accumulated in log space.
pub fn log_weighted_sigma(
    series: &BoundarySeries,
    weights: &WeightFields,
    grid: &PolarGrid,
    s: f64,
    lambda: f64,
    pow: WeightPowers,
) -> Result<f64> {
    series.check_grid(grid)?;
    if weights.n_t != grid.n_t || weights.n_nodes != grid.n_nodes() {
        return Err(Error::WeightGridMismatch("weights were built on a different grid".into()));
    }
    let nodes = grid.boundary_nodes(series.boundary);
    let log_arc = grid.arc_weight(series.boundary).ln();
    let wt = grid.time_weights();
    let mut acc = LogSum::new();
    for c in 0..series.n_comp {
        for m in 1..grid.n_t - 1 {
            let lw = wt[m].ln() + log_arc;
            for (j, &k) in nodes.iter().enumerate() {
                let v = series.get(c, m, j);
                if v != 0.0 {
                    acc.add_log(lw + weights.log_weight(m, k, pow.phi, s) + 2.0 * v.abs().ln());
                }
            }
        }
    }
    Ok(acc.value() + pow.s * s.ln() + pow.lambda * lambda.ln())
}

/// `∫_Σ s^a λ^b φ^p |ζ|² e^{2sα}`; may underflow to 0 for strong weights.
pub fn norm_weighted_sigma(
    series: &BoundarySeries,
    weights: &WeightFields,
    grid: &PolarGrid,
    s: f64,
    lambda: f64,
    pow: WeightPowers,
) -> Result<f64> {
    Ok(log_weighted_sigma(series, weights, grid, s, lambda, pow)?.exp())
}

/// Write `t,theta,component,zeta` rows.
pub fn write_observation_csv<W: Write>(series: &BoundarySeries, grid: &PolarGrid, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "theta", "component", "zeta"]).map_err(csv_err)?;
    for c in 0..series.n_comp {
        for m in 0..series.n_t {
            for j in 0..series.n_theta {
                w.write_record(&[
                    format!("{:e}", grid.time(m)),
                    format!("{:e}", grid.theta(j)),
                    c.to_string(),
                    format!("{:e}", series.get(c, m, j)),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a measurement file written by [`write_observation_csv`].
pub fn read_observation_csv<R: Read>(input: R, grid: &PolarGrid, n_comp: usize) -> Result<BoundarySeries> {
    let mut series = BoundarySeries::zeros(n_comp, grid, Boundary::Gamma1);
    let mut seen = vec![false; series.values.len()];
    let mut rdr = csv::Reader::from_reader(input);
    let tol = 1e-9 * grid.t_final.max(1.0);
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::ShapeMismatch(format!("bad measurement row {:?}", rec)))
        };
        let (t, th, c, z) = (field(0)?, field(1)?, field(2)?, field(3)?);
        let m = (t / grid.dt()).round() as usize;
        let j = (th / grid.htheta()).round() as usize;
        let c = c as usize;
        if c >= n_comp || m >= grid.n_t || j >= grid.n_theta || (grid.time(m) - t).abs() > tol {
            return Err(Error::ShapeMismatch(format!("measurement ({t}, {th}, {c}) is off the grid")));
        }
        let i = series.idx(c, m, j);
        series.values[i] = z;
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::ShapeMismatch(format!("measurement file lacks entry {missing}")));
    }
    Ok(series)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
