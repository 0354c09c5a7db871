//! Both sides of the weighted inequality
//!
//! ```text
//! ∫_Q [sλ²φ|∇y|² + s³λ⁴φ³|y|²] e^{2sα} + ∫_{Σ₀} s²λ²φ²|y|² e^{2sα}
//!     ≤ C ( ∫_Q |ḡ|² e^{2sα} + ∫_{Σ₁} s³λ³φ³|ζ|² e^{2sα} )
//! ```
//!
//! evaluated on discrete solutions, and scans of the empirical constant over
//! `(s, λ)`. Every integral is accumulated in log space.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::grid::{Boundary, PolarGrid};
use crate::geometry::psi0::Psi0Field;
use crate::geometry::weights::{eval_weights, WeightFields, WeightParams};
use crate::observe::{log_weighted_sigma, BoundarySeries, WeightPowers};
use crate::pde::field::{SourceField, StateField};
use crate::stencil::polar_gradient;
use crate::{par, Error, Result};

/// Streaming `ln Σ e^{x_i}`.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    max: f64,
    sum: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    pub fn add_log(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.add_log(other.value());
    }

    /// `ln` of the total; `−∞` when nothing positive was added.
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let mut s = LogSum::new();
    s.add_log(a);
    s.add_log(b);
    s.value()
}

/// The four integrals and their ratio. Logs are authoritative; the plain
/// values may overflow or underflow for extreme parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub s: f64,
    pub lambda: f64,
    pub log_lhs_interior: f64,
    pub log_lhs_boundary: f64,
    pub log_rhs_source: f64,
    pub log_rhs_obs: f64,
    pub lhs_interior: f64,
    pub lhs_boundary: f64,
    pub rhs_source: f64,
    pub rhs_obs: f64,
    /// `ln(lhs / rhs)`; `None` when the right side vanishes.
    pub log_ratio: Option<f64>,
    pub ratio: Option<f64>,
}

impl CarlemanReport {
    fn from_logs(s: f64, lambda: f64, li: f64, lb: f64, rs: f64, ro: f64) -> Self {
        let lhs = log_add(li, lb);
        let rhs = log_add(rs, ro);
        let log_ratio = (rhs > f64::NEG_INFINITY).then_some(if lhs == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lhs - rhs });
        Self {
            s,
            lambda,
            log_lhs_interior: li,
            log_lhs_boundary: lb,
            log_rhs_source: rs,
            log_rhs_obs: ro,
            lhs_interior: li.exp(),
            lhs_boundary: lb.exp(),
            rhs_source: rs.exp(),
            rhs_obs: ro.exp(),
            log_ratio,
            ratio: log_ratio.map(f64::exp),
        }
    }

    pub fn log_lhs(&self) -> f64 {
        log_add(self.log_lhs_interior, self.log_lhs_boundary)
    }

    pub fn log_rhs(&self) -> f64 {
        log_add(self.log_rhs_source, self.log_rhs_obs)
    }
}

/// One `(y, ḡ, ζ)` triple.
#[derive(Clone, Debug)]
pub struct CorpusMember {
    pub y: StateField,
    pub gbar: SourceField,
    pub zeta: BoundarySeries,
}

/// Per-node quantities that do not depend on `(s, λ)`: squared values and
/// squared gradients, pre-multiplied by quadrature weights, as logs.
struct Integrands {
    /// `(m, k, ln(w |∇y|²), ln(w |y|²), ln(w |ḡ|²))`
    interior: Vec<(usize, usize, f64, f64, f64)>,
    /// `(m, k, ln(w |y|²))` on Σ₀
    sigma0: Vec<(usize, usize, f64)>,
}

fn integrands(member: &CorpusMember, grid: &PolarGrid) -> Result<Integrands> {
    let y = &member.y;
    y.check_grid(grid)?;
    member.gbar.field.check_same_shape(y)?;
    let wt = grid.time_weights();
    let mut interior = Vec::new();
    let mut sigma0 = Vec::new();
    let nodes0 = grid.boundary_nodes(Boundary::Gamma0);
    let log_arc0 = grid.arc_weight(Boundary::Gamma0).ln();
    for m in 1..grid.n_t - 1 {
        let lwt = wt[m].ln();
        for k in 0..grid.n_nodes() {
            let lw = lwt + grid.quad_weights[k].ln();
            let (mut g2, mut y2, mut b2) = (0.0, 0.0, 0.0);
            for c in 0..y.n_comp {
                let u = y.slice(c, m);
                let [ur, ut] = polar_gradient(grid, u, k);
                g2 += ur * ur + ut * ut;
                y2 += u[k] * u[k];
                b2 += member.gbar.field.get(c, m, k).powi(2);
            }
            interior.push((m, k, lw + g2.ln(), lw + y2.ln(), lw + b2.ln()));
        }
        for &k in nodes0 {
            let y2: f64 = (0..y.n_comp).map(|c| y.get(c, m, k).powi(2)).sum();
            sigma0.push((m, k, lwt + log_arc0 + y2.ln()));
        }
    }
    Ok(Integrands { interior, sigma0 })
}

fn check_weights(weights: &WeightFields, grid: &PolarGrid, lambda: f64) -> Result<()> {
    if weights.n_t != grid.n_t || weights.n_nodes != grid.n_nodes() {
        return Err(Error::WeightGridMismatch(format!(
            "weights are {}x{}, grid is {}x{}",
            weights.n_t,
            weights.n_nodes,
            grid.n_t,
            grid.n_nodes()
        )));
    }
    if (weights.params.lambda - lambda).abs() > 1e-15 * lambda.abs().max(1.0) {
        return Err(Error::WeightGridMismatch(format!("weights were built for lambda = {}, asked for {lambda}", weights.params.lambda)));
    }
    Ok(())
}

fn report_from(
    it: &Integrands,
    zeta: &BoundarySeries,
    weights: &WeightFields,
    grid: &PolarGrid,
    s: f64,
    lambda: f64,
) -> Result<CarlemanReport> {
    let (ls, ll) = (s.ln(), lambda.ln());
    let (mut li, mut lb, mut rs) = (LogSum::new(), LogSum::new(), LogSum::new());
    for &(m, k, lg, ly, lgb) in &it.interior {
        let w1 = weights.log_weight(m, k, 1.0, s);
        let w3 = weights.log_weight(m, k, 3.0, s);
        let w0 = weights.log_weight(m, k, 0.0, s);
        li.add_log(ls + 2.0 * ll + w1 + lg);
        li.add_log(3.0 * ls + 4.0 * ll + w3 + ly);
        rs.add_log(w0 + lgb);
    }
    for &(m, k, ly) in &it.sigma0 {
        lb.add_log(2.0 * ls + 2.0 * ll + weights.log_weight(m, k, 2.0, s) + ly);
    }
    let pow = WeightPowers { s: 3.0, lambda: 3.0, phi: 3.0 };
    let ro = log_weighted_sigma(zeta, weights, grid, s, lambda, pow)?;
    Ok(CarlemanReport::from_logs(s, lambda, li.value(), lb.value(), rs.value(), ro))
}

/// Evaluate both sides for one triple at one `(s, λ)`.
pub fn eval_carleman_sides(
    y: &StateField,
    gbar: &SourceField,
    zeta: &BoundarySeries,
    weights: &WeightFields,
    grid: &PolarGrid,
    s: f64,
    lambda: f64,
) -> Result<CarlemanReport> {
    check_weights(weights, grid, lambda)?;
    let member = CorpusMember { y: y.clone(), gbar: gbar.clone(), zeta: zeta.clone() };
    report_from(&integrands(&member, grid)?, zeta, weights, grid, s, lambda)
}

/// Upper-right quadrant of the scan grid where `Ĉ` has settled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationRegion {
    pub s_index: usize,
    pub lambda_index: usize,
    pub s_star: f64,
    pub lambda_star: f64,
    /// Largest `Ĉ` inside the region.
    pub c_region: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub s_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// `Ĉ(s, λ)` at `li * s_grid.len() + si`; `None` when every ratio is undefined.
    pub c_hat: Vec<Option<f64>>,
    /// Per member ratios, same layout as `c_hat`.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub n_corpus: usize,
    pub region: Option<StabilizationRegion>,
}

/// Relative-change threshold that defines the settled region.
pub const STABILIZATION_TOL: f64 = 0.10;

impl ScanTable {
    pub fn at(&self, si: usize, li: usize) -> Option<f64> {
        self.c_hat[li * self.s_grid.len() + si]
    }

    /// Worst relative change to the next grid point in either direction over
    /// the quadrant starting at `(si0, li0)`; `None` if some value is undefined.
    pub fn quadrant_change(&self, si0: usize, li0: usize) -> Option<f64> {
        let (ns, nl) = (self.s_grid.len(), self.lambda_grid.len());
        let mut worst = 0.0f64;
        for li in li0..nl {
            for si in si0..ns {
                let c = self.at(si, li)?;
                if si + 1 < ns {
                    worst = worst.max(rel_change(c, self.at(si + 1, li)?));
                }
                if li + 1 < nl {
                    worst = worst.max(rel_change(c, self.at(si, li + 1)?));
                }
            }
        }
        Some(worst)
    }

    /// Largest quadrant (at least two points along every axis with two or
    /// more points) whose internal relative changes all stay below `tol`.
    pub fn find_region(&self, tol: f64) -> Option<StabilizationRegion> {
        let (ns, nl) = (self.s_grid.len(), self.lambda_grid.len());
        let max_si = ns.saturating_sub(2);
        let max_li = nl.saturating_sub(2);
        let mut best: Option<(usize, usize, usize)> = None;
        for li in 0..=max_li {
            for si in 0..=max_si {
                let size = (ns - si) * (nl - li);
                if best.is_some_and(|b| b.2 >= size) {
                    continue;
                }
                if self.quadrant_change(si, li).is_some_and(|w| w < tol) {
                    best = Some((si, li, size));
                }
            }
        }
        best.map(|(si, li, _)| StabilizationRegion {
            s_index: si,
            lambda_index: li,
            s_star: self.s_grid[si],
            lambda_star: self.lambda_grid[li],
            c_region: self.region_max(si, li).unwrap_or(f64::NAN),
        })
    }

    /// Largest `Ĉ` over the quadrant starting at `(si0, li0)`.
    pub fn region_max(&self, si0: usize, li0: usize) -> Option<f64> {
        let mut out = f64::NEG_INFINITY;
        for li in li0..self.lambda_grid.len() {
            for si in si0..self.s_grid.len() {
                out = out.max(self.at(si, li)?);
            }
        }
        Some(out)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["s", "lambda", "C_hat", "n_corpus"]).map_err(io)?;
        for (li, l) in self.lambda_grid.iter().enumerate() {
            for (si, s) in self.s_grid.iter().enumerate() {
                let c = self.at(si, li).map_or_else(|| "undefined".to_string(), |v| format!("{v:e}"));
                w.write_record(&[format!("{s:e}"), format!("{l:e}"), c, self.n_corpus.to_string()]).map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn rel_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Scan `(s, λ)` over a corpus. Weights are rebuilt per `λ` from `psi0` and
/// `base` (which fixes the shift `K`).
pub fn scan_parameters(
    corpus: &[CorpusMember],
    psi0: &Psi0Field,
    base: &WeightParams,
    grid: &PolarGrid,
    s_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<ScanTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if s_grid.is_empty() || lambda_grid.is_empty() || !ascending(s_grid) || !ascending(lambda_grid) {
        return Err(Error::InvalidCoefficients("scan grids must be nonempty and ascending".into()));
    }
    let prepared: Vec<Integrands> = par::map(corpus, |m| integrands(m, grid)).into_iter().collect::<Result<_>>()?;
    let ns = s_grid.len();
    let mut ratios = vec![vec![None; ns * lambda_grid.len()]; corpus.len()];
    for (li, &lambda) in lambda_grid.iter().enumerate() {
        let weights = eval_weights(psi0, &base.with_lambda(lambda), grid)?;
        let idx: Vec<usize> = (0..corpus.len()).collect();
        let rows: Vec<Result<Vec<Option<f64>>>> = par::map(&idx, |&c| {
            s_grid.iter().map(|&s| Ok(report_from(&prepared[c], &corpus[c].zeta, &weights, grid, s, lambda)?.ratio)).collect()
        });
        for (c, row) in rows.into_iter().enumerate() {
            for (si, r) in row?.into_iter().enumerate() {
                ratios[c][li * ns + si] = r;
            }
        }
    }
    let c_hat = (0..ns * lambda_grid.len())
        .map(|q| ratios.iter().filter_map(|r| r[q]).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v)))))
        .collect();
    let mut table =
        ScanTable { s_grid: s_grid.to_vec(), lambda_grid: lambda_grid.to_vec(), c_hat, ratios, n_corpus: corpus.len(), region: None };
    table.region = table.find_region(STABILIZATION_TOL);
    Ok(table)
}

fn ascending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{choose_shift_k, construct_psi0_radial};
    use crate::observe::{apply_observation, extract_trace_and_conormal, ObservationSpec};
    use crate::pde::coefficients::{RingCondition, SystemCoefficients};
    use crate::pde::field::SpaceTimeField;
    use crate::pde::linear::{solve_forward_linear, Scheme};

    fn setup() -> (PolarGrid, Psi0Field, WeightParams) {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 17).unwrap();
        let psi = construct_psi0_radial(&g);
        let p = choose_shift_k(&psi, 0.0).with_lambda(0.2);
        (g, psi, p)
    }

    fn member(g: &PolarGrid, amp: f64) -> CorpusMember {
        let c = SystemCoefficients::heat(g, RingCondition::robin(1.0), RingCondition::robin(1.0));
        let src = SpaceTimeField::from_fn(1, g, |_, t, r, th| amp * (1.0 + t) * (2.0 + (th + r).sin()));
        let src = SourceField::new(src, g).unwrap();
        let y = solve_forward_linear(&c, &src, &vec![0.0; g.n_nodes()], g, Scheme::BackwardEuler).unwrap();
        let tr = extract_trace_and_conormal(&y, &c, g).unwrap();
        let zeta = apply_observation(&ObservationSpec::uniform(1, g, 1.0, 0.0, 0.5), &tr);
        CorpusMember { y, gbar: src, zeta }
    }

    #[test]
    fn logsum_matches_direct_sum() {
        let mut a = LogSum::new();
        assert_eq!(a.value(), f64::NEG_INFINITY);
        for v in [1.0f64, 2.0, 0.5, 10.0] {
            a.add_log(v.ln());
        }
        assert!((a.value() - 13.5f64.ln()).abs() < 1e-14);
        let mut b = LogSum::new();
        b.add_log(-2000.0);
        b.add_log(-2000.0);
        assert!((b.value() - (-2000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_triple_is_flagged() {
        let (g, psi, p) = setup();
        let w = eval_weights(&psi, &p, &g).unwrap();
        let zero = CorpusMember {
            y: SpaceTimeField::zeros(1, &g),
            gbar: SourceField::new(SpaceTimeField::zeros(1, &g), &g).unwrap(),
            zeta: BoundarySeries::zeros(1, &g, Boundary::Gamma1),
        };
        let r = eval_carleman_sides(&zero.y, &zero.gbar, &zero.zeta, &w, &g, 2.0, 0.2).unwrap();
        assert_eq!((r.lhs_interior, r.lhs_boundary, r.rhs_source, r.rhs_obs), (0.0, 0.0, 0.0, 0.0));
        assert!(r.ratio.is_none());
        let t = scan_parameters(&[zero], &psi, &p, &g, &[1.0, 2.0], &[0.1, 0.2]).unwrap();
        assert!(t.c_hat.iter().all(Option::is_none));
        assert!(t.region.is_none());
    }

    #[test]
    fn linear_growth_has_no_gradient_term() {
        let (g, psi, p) = setup();
        let w = eval_weights(&psi, &p, &g).unwrap();
        let y = SpaceTimeField::from_fn(1, &g, |_, t, _, _| t);
        let one = SourceField::new(SpaceTimeField::from_fn(1, &g, |_, _, _, _| 1.0), &g).unwrap();
        let z = BoundarySeries::zeros(1, &g, Boundary::Gamma1);
        let r = eval_carleman_sides(&y, &one, &z, &w, &g, 2.0, 0.2).unwrap();
        // rhs_source = ∫_Q e^{2sα} by direct quadrature
        let wt = g.time_weights();
        let mut direct = 0.0;
        for m in 0..g.n_t {
            for k in 0..g.n_nodes() {
                direct += wt[m] * g.quad_weights[k] * w.weight(m, k, 0.0, 2.0);
            }
        }
        assert!((r.rhs_source / direct - 1.0).abs() < 1e-12);
        // interior lhs is the |y|² part only
        let mut y_part = 0.0;
        for m in 0..g.n_t {
            for k in 0..g.n_nodes() {
                y_part += wt[m] * g.quad_weights[k] * 8.0 * 0.0016 * w.weight(m, k, 3.0, 2.0) * g.time(m).powi(2);
            }
        }
        assert!((r.lhs_interior / y_part - 1.0).abs() < 1e-12);
        assert!(r.lhs_boundary > 0.0 && r.ratio.unwrap().is_finite());
    }

    #[test]
    fn ratio_is_invariant_under_alpha_shift() {
        let (g, psi, p) = setup();
        let m = member(&g, 1.0);
        let w = eval_weights(&psi, &p, &g).unwrap();
        let mut w2 = w.clone();
        w2.shift_alpha(-3.0);
        let a = eval_carleman_sides(&m.y, &m.gbar, &m.zeta, &w, &g, 1.5, 0.2).unwrap();
        let b = eval_carleman_sides(&m.y, &m.gbar, &m.zeta, &w2, &g, 1.5, 0.2).unwrap();
        assert!((b.log_lhs_interior - a.log_lhs_interior + 9.0).abs() < 1e-10);
        assert!((b.log_rhs_obs - a.log_rhs_obs + 9.0).abs() < 1e-10);
        assert!((b.log_ratio.unwrap() - a.log_ratio.unwrap()).abs() < 1e-10);
    }

    #[test]
    fn singleton_scan_reproduces_member_ratio() {
        let (g, psi, p) = setup();
        let m = member(&g, 1.0);
        let s_grid = [0.5, 1.0, 2.0];
        let l_grid = [0.1, 0.2];
        let t = scan_parameters(std::slice::from_ref(&m), &psi, &p, &g, &s_grid, &l_grid).unwrap();
        for (li, &l) in l_grid.iter().enumerate() {
            let w = eval_weights(&psi, &p.with_lambda(l), &g).unwrap();
            for (si, &s) in s_grid.iter().enumerate() {
                let r = eval_carleman_sides(&m.y, &m.gbar, &m.zeta, &w, &g, s, l).unwrap();
                assert_eq!(t.at(si, li), r.ratio);
            }
        }
        assert!(matches!(scan_parameters(&[], &psi, &p, &g, &s_grid, &l_grid), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        let (g, psi, p) = setup();
        let m = member(&g, 1.0);
        let w = eval_weights(&psi, &p, &g).unwrap();
        assert!(matches!(eval_carleman_sides(&m.y, &m.gbar, &m.zeta, &w, &g, 1.0, 0.3), Err(Error::WeightGridMismatch(_))));
        let fine = g.refined().unwrap();
        let m2 = member(&fine, 1.0);
        assert!(matches!(eval_carleman_sides(&m2.y, &m2.gbar, &m2.zeta, &w, &fine, 1.0, 0.2), Err(Error::WeightGridMismatch(_))));
    }

    #[test]
    fn region_detection_on_synthetic_table() {
        let mut t = ScanTable {
            s_grid: vec![1.0, 2.0, 3.0, 4.0],
            lambda_grid: vec![0.1, 0.2, 0.3],
            c_hat: vec![],
            ratios: vec![],
            n_corpus: 1,
            region: None,
        };
        // settles for s >= 2 at every λ
        for _l in 0..3 {
            t.c_hat.extend([Some(10.0), Some(2.0), Some(1.95), Some(1.9)]);
        }
        let r = t.find_region(STABILIZATION_TOL).unwrap();
        assert_eq!((r.s_index, r.lambda_index), (1, 0));
        assert_eq!(r.c_region, 2.0);
    }
}
