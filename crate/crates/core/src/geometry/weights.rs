//! Carleman weights
//!
//! ```text
//! φ(t,x) = e^{λψ(x)} / (t(T−t)),   α(t,x) = (e^{λψ(x)} − e^{1.5λ‖ψ‖}) / (t(T−t))
//! ```
//!
//! with ψ = ψ₀ + K and the reflected ψ̃ for the tilde pair. The fields are
//! kept as `ln φ` and `α`; every product `φ^p e^{2sα}` is formed as a single
//! exponential so that large λ never overflows an intermediate.

use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::geometry::psi0::Psi0Field;
use crate::{Error, Result};

/// Largest exponent that `f64::exp` can take without overflowing.
const EXP_LIMIT: f64 = 709.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub s: f64,
    pub k_shift: f64,
    pub mu: f64,
    /// `sup ψ = k1 + K`.
    pub psi_sup_norm: f64,
    /// Value of ψ on Γ₀, `k0 + K`; ψ̃ is the reflection of ψ about it.
    pub psi_gamma0: f64,
}

impl WeightParams {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// `sup ψ / inf ψ` over the closed domain.
    pub fn ratio(&self) -> f64 {
        self.psi_sup_norm / self.psi_gamma0
    }
}

/// Minimal shift with `(k1 + K)/(k0 + K) <= 8/7`, plus `margin`.
///
/// `lambda`, `s` and `mu` are set to 1 and meant to be overwritten with the
/// `with_*` builders.
pub fn choose_shift_k(psi0: &Psi0Field, margin: f64) -> WeightParams {
    choose_shift_k_with(psi0, margin, false)
}

/// As [`choose_shift_k`]; with `tilde_ratio` the reflected ψ̃ is also held to
/// the 8/7 ratio, which needs `K >= 8 k1 - 9 k0`.
pub fn choose_shift_k_with(psi0: &Psi0Field, margin: f64, tilde_ratio: bool) -> WeightParams {
    let (k0, k1) = (psi0.k0, psi0.k1);
    let mut k = (7.0 * k1 - 8.0 * k0).max(0.0);
    if tilde_ratio {
        k = k.max(8.0 * k1 - 9.0 * k0);
    }
    k += margin.max(0.0);
    WeightParams { lambda: 1.0, s: 1.0, k_shift: k, mu: 1.0, psi_sup_norm: k1 + k, psi_gamma0: k0 + k }
}

/// Weight fields sampled on the space-time grid. Time-major storage
/// `m * n_nodes + k`; the endpoint slices hold `ln φ = +∞`, `α = −∞`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightFields {
    pub params: WeightParams,
    pub n_t: usize,
    pub n_nodes: usize,
    pub psi: Vec<f64>,
    pub psi_tilde: Vec<f64>,
    pub log_phi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub log_phi_tilde: Vec<f64>,
    pub alpha_tilde: Vec<f64>,
}

impl WeightFields {
    #[inline]
    fn idx(&self, m: usize, k: usize) -> usize {
        m * self.n_nodes + k
    }

    fn is_endpoint(&self, m: usize) -> bool {
        m == 0 || m + 1 == self.n_t
    }

    pub fn phi(&self, m: usize, k: usize) -> f64 {
        self.log_phi[self.idx(m, k)].exp()
    }

    pub fn phi_tilde(&self, m: usize, k: usize) -> f64 {
        self.log_phi_tilde[self.idx(m, k)].exp()
    }

    pub fn alpha(&self, m: usize, k: usize) -> f64 {
        self.alpha[self.idx(m, k)]
    }

    pub fn alpha_tilde(&self, m: usize, k: usize) -> f64 {
        self.alpha_tilde[self.idx(m, k)]
    }

    /// `ln(φ^p e^{2sα})`, `−∞` at the time endpoints.
    pub fn log_weight(&self, m: usize, k: usize, p: f64, s: f64) -> f64 {
        if self.is_endpoint(m) {
            return f64::NEG_INFINITY;
        }
        let i = self.idx(m, k);
        p * self.log_phi[i] + 2.0 * s * self.alpha[i]
    }

    /// `φ^p e^{2sα}`, exactly 0 at the time endpoints.
    pub fn weight(&self, m: usize, k: usize, p: f64, s: f64) -> f64 {
        self.log_weight(m, k, p, s).exp()
    }

    /// Shift `α` and `α̃` by a constant (used to test weight invariances).
    pub fn shift_alpha(&mut self, delta: f64) {
        for m in 1..self.n_t - 1 {
            for k in 0..self.n_nodes {
                let i = self.idx(m, k);
                self.alpha[i] += delta;
                self.alpha_tilde[i] += delta;
            }
        }
    }
}

/// Evaluate ψ, ψ̃, φ, φ̃, α, α̃ on the grid.
///
/// ψ̃ is the reflection `2 ψ|_{Γ₀} − ψ = 2(k0 + K) − ψ`; under the common
/// normalization `k0 = 0` this is `2K − ψ`.
pub fn eval_weights(psi0: &Psi0Field, params: &WeightParams, grid: &PolarGrid) -> Result<WeightFields> {
    if psi0.values.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch("psi0 does not match the grid".into()));
    }
    let lambda = params.lambda;
    if !(lambda > 0.0) || !(params.s > 0.0) {
        return Err(Error::InvalidCoefficients(format!("weights need lambda > 0 and s > 0 (got {lambda}, {})", params.s)));
    }
    let t_final = grid.t_final;
    let big = 1.5 * lambda * params.psi_sup_norm;
    let tau_min = (1..grid.n_t - 1)
        .map(|m| {
            let t = grid.time(m);
            t * (t_final - t)
        })
        .fold(f64::INFINITY, f64::min);
    let exponent = big - tau_min.ln();
    if exponent > EXP_LIMIT {
        return Err(Error::OverflowGuard { exponent });
    }

    let n = grid.n_nodes();
    let psi: Vec<f64> = psi0.values.iter().map(|v| v + params.k_shift).collect();
    let psi_tilde: Vec<f64> = psi.iter().map(|p| 2.0 * params.psi_gamma0 - p).collect();

    let len = grid.n_t * n;
    let mut log_phi = vec![f64::INFINITY; len];
    let mut alpha = vec![f64::NEG_INFINITY; len];
    let mut log_phi_tilde = vec![f64::INFINITY; len];
    let mut alpha_tilde = vec![f64::NEG_INFINITY; len];

    // α = −exp(big + ln(1 − e^{λψ − big}) − ln τ)
    let alpha_of = |lp: f64, log_tau: f64| -(big + (-(lp - big).exp()).ln_1p() - log_tau).exp();
    for m in 1..grid.n_t - 1 {
        let t = grid.time(m);
        let log_tau = (t * (t_final - t)).ln();
        for k in 0..n {
            let i = m * n + k;
            let lp = lambda * psi[k];
            let lpt = lambda * psi_tilde[k];
            log_phi[i] = lp - log_tau;
            alpha[i] = alpha_of(lp, log_tau);
            log_phi_tilde[i] = lpt - log_tau;
            alpha_tilde[i] = alpha_of(lpt, log_tau);
        }
    }

    Ok(WeightFields { params: *params, n_t: grid.n_t, n_nodes: n, psi, psi_tilde, log_phi, alpha, log_phi_tilde, alpha_tilde })
}

/// Discrete maxima of `|φ_t|/φ²`, `|α_t|/φ²`, `|α_tt|/φ³` (and tilde
/// analogues) over the interior time nodes `2 <= m <= n_t − 3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBoundReport {
    pub phi_t: f64,
    pub alpha_t: f64,
    pub alpha_tt: f64,
    pub phi_tilde_t: f64,
    pub alpha_tilde_t: f64,
    pub alpha_tilde_tt: f64,
}

impl TimeBoundReport {
    pub fn all_finite(&self) -> bool {
        [self.phi_t, self.alpha_t, self.alpha_tt, self.phi_tilde_t, self.alpha_tilde_t, self.alpha_tilde_tt].iter().all(|v| v.is_finite())
    }

    /// Largest relative change of any entry against `other`.
    pub fn max_relative_change(&self, other: &Self) -> f64 {
        let a = [self.phi_t, self.alpha_t, self.alpha_tt, self.phi_tilde_t, self.alpha_tilde_t, self.alpha_tilde_tt];
        let b = [other.phi_t, other.alpha_t, other.alpha_tt, other.phi_tilde_t, other.alpha_tilde_t, other.alpha_tilde_tt];
        a.iter().zip(&b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs())).fold(0.0, f64::max)
    }
}

pub fn check_weight_time_bounds(weights: &WeightFields, grid: &PolarGrid) -> Result<TimeBoundReport> {
    if grid.n_t < 5 {
        return Err(Error::DegenerateResolution("time bounds need n_t >= 5".into()));
    }
    if weights.n_t != grid.n_t || weights.n_nodes != grid.n_nodes() {
        return Err(Error::WeightGridMismatch("time bound check".into()));
    }
    let dt = grid.dt();
    let n = weights.n_nodes;
    // |d/dt| of a field against φ^p, formed in log space
    let ratios = |log_phi: &[f64], alpha: &[f64]| {
        let mut out = [0.0f64; 3];
        for m in 2..=grid.n_t - 3 {
            for k in 0..n {
                let (im, i0, ip) = ((m - 1) * n + k, m * n + k, (m + 1) * n + k);
                let lp = log_phi[i0];
                let dphi = (log_phi[ip].exp() - log_phi[im].exp()) / (2.0 * dt);
                let dalpha = (alpha[ip] - alpha[im]) / (2.0 * dt);
                let ddalpha = (alpha[ip] - 2.0 * alpha[i0] + alpha[im]) / (dt * dt);
                out[0] = out[0].max((dphi.abs().ln() - 2.0 * lp).exp());
                out[1] = out[1].max((dalpha.abs().ln() - 2.0 * lp).exp());
                out[2] = out[2].max((ddalpha.abs().ln() - 3.0 * lp).exp());
            }
        }
        out
    };
    let plain = ratios(&weights.log_phi, &weights.alpha);
    let tilde = ratios(&weights.log_phi_tilde, &weights.alpha_tilde);
    Ok(TimeBoundReport {
        phi_t: plain[0],
        alpha_t: plain[1],
        alpha_tt: plain[2],
        phi_tilde_t: tilde[0],
        alpha_tilde_t: tilde[1],
        alpha_tilde_tt: tilde[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::psi0::construct_psi0_radial;

    fn psi_with(k0: f64, k1: f64) -> Psi0Field {
        Psi0Field { values: vec![k0, k1], gradient: vec![[1.0, 0.0]; 2], k0, k1, grad_min: 1.0 }
    }

    #[test]
    fn shift_examples() {
        let p = choose_shift_k(&psi_with(1.0, 2.0), 0.0);
        assert_eq!(p.k_shift, 6.0);
        assert!((p.ratio() - 8.0 / 7.0).abs() < 1e-15);
        assert_eq!(p.psi_sup_norm, 8.0);
        assert_eq!(choose_shift_k(&psi_with(0.0, 1.0), 0.0).k_shift, 7.0);
        assert_eq!(choose_shift_k(&psi_with(7.0, 8.0), 0.0).k_shift, 0.0);
        assert_eq!(choose_shift_k(&psi_with(0.0, 1.0), 0.5).k_shift, 7.5);
        // tilde constraint: reflected range [2k0 + K - k1, k0 + K]
        let p = choose_shift_k_with(&psi_with(0.0, 1.0), 0.0, true);
        assert_eq!(p.k_shift, 8.0);
        let inf_tilde = 2.0 * 0.0 + p.k_shift - 1.0;
        assert!((p.psi_gamma0 / inf_tilde - 8.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_closed_form_value() {
        // lambda = 1, psi = 7, ||psi|| = 8, T = 1, t = 0.5
        let grid = PolarGrid::new(1.0, 2.0, 3, 4, 1.0, 3).unwrap();
        let psi0 = construct_psi0_radial(&grid);
        let params = choose_shift_k(&psi0, 0.0).with_lambda(1.0).with_s(1.0);
        let w = eval_weights(&psi0, &params, &grid).unwrap();
        let a = w.alpha(1, grid.gamma0_nodes[0]);
        let expected = 4.0 * (7f64.exp() - 12f64.exp());
        assert!((a - expected).abs() / expected.abs() < 1e-13, "{a} vs {expected}");
        assert!((expected + 6.4663e5).abs() < 1e2);
    }

    #[test]
    fn reflection_matches_gamma0_and_normalized_form() {
        let grid = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 5).unwrap();
        let mut psi0 = construct_psi0_radial(&grid);
        psi0.values.iter_mut().for_each(|v| *v -= 1.0);
        (psi0.k0, psi0.k1) = (0.0, 1.0);
        let params = choose_shift_k(&psi0, 0.0).with_lambda(0.7);
        let w = eval_weights(&psi0, &params, &grid).unwrap();
        for k in 0..grid.n_nodes() {
            assert!((w.psi_tilde[k] - (2.0 * params.k_shift - w.psi[k])).abs() < 1e-14);
        }
        for &k in &grid.gamma0_nodes {
            assert_eq!(w.phi(2, k), w.phi_tilde(2, k));
            assert_eq!(w.alpha(2, k), w.alpha_tilde(2, k));
        }
        for &k in &grid.gamma1_nodes {
            assert!(w.alpha(2, k) > w.alpha_tilde(2, k));
        }
    }

    #[test]
    fn endpoint_convention() {
        let grid = PolarGrid::new(1.0, 2.0, 5, 8, 1.0, 9).unwrap();
        let psi0 = construct_psi0_radial(&grid);
        let params = choose_shift_k(&psi0, 0.0).with_lambda(0.3).with_s(2.0);
        let w = eval_weights(&psi0, &params, &grid).unwrap();
        for k in 0..grid.n_nodes() {
            assert_eq!(w.weight(0, k, 3.0, 2.0), 0.0);
            assert_eq!(w.weight(grid.n_t - 1, k, 1.0, 2.0), 0.0);
        }
        // tends to zero approaching the endpoints
        let k = grid.gamma1_nodes[0];
        assert!(w.log_weight(1, k, 3.0, 2.0) < w.log_weight(4, k, 3.0, 2.0));
    }

    #[test]
    fn overflow_guard_trips() {
        let grid = PolarGrid::new(1.0, 2.0, 3, 4, 1.0, 5).unwrap();
        let psi0 = construct_psi0_radial(&grid);
        let params = choose_shift_k(&psi0, 0.0).with_lambda(80.0);
        assert!(matches!(eval_weights(&psi0, &params, &grid), Err(Error::OverflowGuard { .. })));
        // log-space storage survives lambda = 20
        let params = params.with_lambda(20.0);
        let w = eval_weights(&psi0, &params, &grid).unwrap();
        assert!(w.alpha.iter().skip(grid.n_nodes()).take(grid.n_nodes()).all(|a| a.is_finite() && *a < 0.0));
    }
}
