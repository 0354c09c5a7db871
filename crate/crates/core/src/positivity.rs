//! Sign hypotheses and positivity checks on computed trajectories.

use serde::{Deserialize, Serialize};

use crate::geometry::grid::PolarGrid;
use crate::pde::coefficients::SystemCoefficients;
use crate::pde::field::{SourceField, StateField};
use crate::pde::nonlinearity::{HypothesisCase, NonlinearityModel};

/// Default relative tolerance for `min y ≥ −tol · max|y|`.
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Default relative floor for strict positivity.
pub const DEFAULT_REL_FLOOR: f64 = 1e-12;
/// Quadrature-weight fraction above which a zero set counts as nonnegligible.
pub const NONZERO_MEASURE: f64 = 1e-3;

/// First node where a sign hypothesis fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignWitness {
    pub i: usize,
    pub l: usize,
    pub step: usize,
    pub node: usize,
    /// Offending value, or the probe state for reaction terms.
    pub value: f64,
    pub what: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignCheck {
    pub pass: bool,
    pub witness: Option<SignWitness>,
}

impl SignCheck {
    fn fail(w: SignWitness) -> Self {
        Self { pass: false, witness: Some(w) }
    }

    const PASS: Self = Self { pass: true, witness: None };
}

/// `c_il ≤ 0` for `i ≠ l` on every space-time node.
pub fn check_sign_hypotheses(coeffs: &SystemCoefficients, grid: &PolarGrid) -> SignCheck {
    let n = coeffs.n;
    let steps = if coeffs.coupling.is_time_dependent() { grid.n_t } else { 1 };
    for m in 0..steps {
        for k in 0..grid.n_nodes() {
            for i in 0..n {
                for l in (0..n).filter(|&l| l != i) {
                    let v = coeffs.coupling.at(n, grid.n_nodes(), m, k, i, l);
                    if v > 0.0 {
                        return SignCheck::fail(SignWitness { i, l, step: m, node: k, value: v, what: "c_il > 0".into() });
                    }
                }
            }
        }
    }
    SignCheck::PASS
}

/// Probe levels for the nonnegative orthant.
const PROBE_LEVELS: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 3.0];

/// Reaction-term hypotheses on a lattice of nonnegative states: `f_i = 0`
/// (CaseA) or `f_i ≤ 0` (CaseB) at `y_i = 0`, and for CaseB also
/// `∂f_i/∂y_l ≤ 0` off the diagonal.
pub fn check_reaction_hypotheses(f: &dyn NonlinearityModel, grid: &PolarGrid) -> SignCheck {
    let n = f.n();
    let mut out = vec![0.0; n];
    let mut jac = vec![0.0; n * n];
    let combos = PROBE_LEVELS.len().pow(n as u32);
    let mut y = vec![0.0; n];
    for m in [0, grid.n_t / 2, grid.n_t - 1] {
        let t = grid.time(m);
        for k in (0..grid.n_nodes()).step_by((grid.n_nodes() / 16).max(1)) {
            let x = grid.cartesian(k);
            for code in 0..combos {
                let mut c = code;
                for v in y.iter_mut() {
                    *v = PROBE_LEVELS[c % PROBE_LEVELS.len()];
                    c /= PROBE_LEVELS.len();
                }
                for i in 0..n {
                    let saved = y[i];
                    y[i] = 0.0;
                    f.eval(t, x, &y, &mut out);
                    y[i] = saved;
                    let bad = match f.case() {
                        HypothesisCase::CaseA => out[i] != 0.0,
                        HypothesisCase::CaseB => out[i] > 0.0,
                    };
                    if bad {
                        return SignCheck::fail(SignWitness { i, l: i, step: m, node: k, value: out[i], what: "f_i at y_i = 0".into() });
                    }
                }
                if f.case() == HypothesisCase::CaseB {
                    f.jacobian(t, x, &y, &mut jac);
                    for i in 0..n {
                        for l in (0..n).filter(|&l| l != i) {
                            if jac[i * n + l] > 0.0 {
                                return SignCheck::fail(SignWitness {
                                    i,
                                    l,
                                    step: m,
                                    node: k,
                                    value: jac[i * n + l],
                                    what: "df_i/dy_l > 0".into(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    SignCheck::PASS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub component: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovingEntry {
    pub t: f64,
    pub component: usize,
    pub min_value: f64,
    pub floor: f64,
    pub pass: bool,
    /// `floor / 10 < min ≤ floor`: recorded, not failed.
    pub near_violation: bool,
    pub zero_set_fraction: f64,
    /// `∫₀^t ∫_Ω |g|` when a nonnegligible zero set was found and a source given.
    pub source_l1_before: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_value: f64,
    pub max_abs: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub first_violation: Option<Violation>,
    /// Rate of the `e^{γt}` rescaling applied before checking, if any.
    pub rescaling_gamma: Option<f64>,
    pub improving: Vec<ImprovingEntry>,
}

impl PositivityReport {
    /// Every improving entry passed strictly.
    pub fn improving_pass(&self) -> bool {
        self.improving.iter().all(|e| e.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn locate(y: &StateField, grid: &PolarGrid, i: usize) -> Violation {
    let per_c = y.n_t * y.n_nodes;
    let (c, rest) = (i / per_c, i % per_c);
    let (m, k) = (rest / y.n_nodes, rest % y.n_nodes);
    let (r, theta) = grid.polar(k);
    Violation { t: grid.time(m), r, theta, component: c, value: y.values[i] }
}

/// `min y ≥ −tol`, with `tol = rel_tol · max|y|`.
pub fn run_positivity_check(y: &StateField, grid: &PolarGrid, rel_tol: f64) -> PositivityReport {
    let max_abs = y.max_abs();
    let tolerance = rel_tol * max_abs;
    let (mut min_i, mut min_value) = (0, f64::INFINITY);
    for (i, v) in y.values.iter().enumerate() {
        if *v < min_value {
            min_value = *v;
            min_i = i;
        }
    }
    let pass = min_value >= -tolerance;
    PositivityReport {
        min_value,
        max_abs,
        tolerance,
        pass,
        first_violation: (!pass).then(|| locate(y, grid, min_i)),
        rescaling_gamma: None,
        improving: Vec::new(),
    }
}

/// As [`run_positivity_check`], first rescaling by `e^{γt}` with
/// `γ = 2 ‖c‖_∞ + 1` when some `c_ii > 0`.
pub fn run_positivity_check_for(y: &StateField, grid: &PolarGrid, coeffs: &SystemCoefficients, rel_tol: f64) -> PositivityReport {
    if coeffs.coupling.max_diagonal(coeffs.n) <= 0.0 {
        return run_positivity_check(y, grid, rel_tol);
    }
    let gamma = 2.0 * coeffs.coupling.sup_norm() + 1.0;
    let mut z = y.clone();
    for c in 0..z.n_comp {
        for m in 0..z.n_t {
            let s = (gamma * grid.time(m)).exp();
            z.slice_mut(c, m).iter_mut().for_each(|v| *v *= s);
        }
    }
    let mut rep = run_positivity_check(&z, grid, rel_tol);
    // report in the original scale
    if let Some(v) = rep.first_violation.as_mut() {
        v.value *= (-gamma * v.t).exp();
    }
    rep.min_value = y.min();
    rep.max_abs = y.max_abs();
    rep.rescaling_gamma = Some(gamma);
    rep
}

/// `∫₀^{t̄} ∫_Ω |g|` with the trapezoid rule up to the slice `m_bar`.
fn source_l1_up_to(g: &SourceField, grid: &PolarGrid, m_bar: usize) -> f64 {
    let dt = grid.dt();
    let mut total = 0.0;
    for c in 0..g.field.n_comp {
        for m in 0..=m_bar {
            let w = if m == 0 || m == m_bar { 0.5 * dt } else { dt };
            let s: f64 = g.field.slice(c, m).iter().zip(&grid.quad_weights).map(|(v, q)| q * v.abs()).sum();
            total += w * s;
        }
    }
    total
}

/// Strict positivity at the requested times for the given components.
pub fn run_positivity_improving_check(
    y: &StateField,
    grid: &PolarGrid,
    t_check: &[f64],
    components: &[usize],
    rel_floor: f64,
    g: Option<&SourceField>,
) -> PositivityReport {
    let mut rep = run_positivity_check(y, grid, DEFAULT_REL_TOL);
    let floor = rel_floor * rep.max_abs;
    let area: f64 = grid.quad_weights.iter().sum();
    for &t in t_check {
        let m = ((t / grid.dt()).round() as usize).min(grid.n_t - 1);
        for &c in components {
            let u = y.slice(c, m);
            let min_value = u.iter().copied().fold(f64::INFINITY, f64::min);
            let zero_w: f64 = u.iter().zip(&grid.quad_weights).filter(|(v, _)| v.abs() <= floor).map(|(_, w)| w).sum();
            let zero_set_fraction = zero_w / area;
            let pass = min_value > floor;
            rep.improving.push(ImprovingEntry {
                t: grid.time(m),
                component: c,
                min_value,
                floor,
                pass,
                near_violation: !pass && min_value > 0.1 * floor,
                zero_set_fraction,
                source_l1_before: g.filter(|_| zero_set_fraction > NONZERO_MEASURE).map(|g| source_l1_up_to(g, grid, m)),
            });
        }
    }
    rep
}
