//! Sampling from the source class `𝒢ₖ = {g ≥ 0 : ‖g‖_{L²(Q)} ≤ k ‖g‖_{L¹(Q)}}`
//! and empirical estimation of `C` in `‖g‖_{L²(Q)} ≤ C ‖ζ(y)‖_{L²(Σ₁)}`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::digest::digest_json;
use crate::geometry::grid::PolarGrid;
use crate::observe::{apply_observation, check_compatibility, extract_trace_and_conormal, norm_l2_sigma1, BoundarySeries, ObservationSpec};
use crate::pde::coefficients::SystemCoefficients;
use crate::pde::field::{SourceField, SpaceTimeField};
use crate::pde::linear::{ForwardSolver, Scheme};
use crate::pde::nonlinearity::Reaction;
use crate::pde::semilinear::solve_forward_semilinear;
use crate::positivity::{check_reaction_hypotheses, check_sign_hypotheses};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Bumps,
    RandomFourierSquared,
    IndicatorBlocks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceClassSpec {
    pub k: f64,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub max_attempts: usize,
}

impl SourceClassSpec {
    pub fn new(k: f64, sampler: SamplerKind, seed: u64) -> Self {
        Self { k, sampler, seed, max_attempts: 50 }
    }
}

/// Smooth bump, Gaussian in `r` and `t`, von Mises in `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub component: usize,
    pub r: f64,
    pub theta: f64,
    pub t: f64,
    pub width_r: f64,
    pub width_theta: f64,
    pub width_t: f64,
    pub height: f64,
}

impl Bump {
    fn eval(&self, t: f64, r: f64, th: f64) -> f64 {
        let dr = (r - self.r) / self.width_r;
        let dt = (t - self.t) / self.width_t;
        let ang = ((th - self.theta).cos() - 1.0) / (self.width_theta * self.width_theta);
        self.height * (-0.5 * (dr * dr + dt * dt) + ang).exp()
    }
}

/// Axis-aligned block in `(r, θ, t)`, periodic in `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub component: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub theta_lo: f64,
    pub theta_len: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub height: f64,
}

/// Square of a low-order separable Fourier field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierField {
    pub component: usize,
    /// `[p][q][l]` flattened: radial `p < 3`, angular `q < 5`, time `l < 2`.
    pub coef: Vec<f64>,
    pub r0: f64,
    pub r1: f64,
    pub t_final: f64,
}

impl FourierField {
    fn eval(&self, t: f64, r: f64, th: f64) -> f64 {
        let x = (r - self.r0) / (self.r1 - self.r0);
        let ang = [1.0, th.cos(), th.sin(), (2.0 * th).cos(), (2.0 * th).sin()];
        let mut s = 0.0;
        for p in 0..3 {
            let rp = (p as f64 * PI * x).cos();
            for (q, a) in ang.iter().enumerate() {
                for l in 0..2 {
                    let tl = (l as f64 * PI * t / self.t_final).cos();
                    s += self.coef[(p * 5 + q) * 2 + l] * rp * a * tl;
                }
            }
        }
        s * s
    }
}

/// Parametric nonnegative source before flattening.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceShape {
    Bumps { bumps: Vec<Bump> },
    FourierSquared { fields: Vec<FourierField> },
    Blocks { blocks: Vec<Block> },
}

impl SourceShape {
    pub fn eval(&self, c: usize, t: f64, r: f64, th: f64) -> f64 {
        match self {
            SourceShape::Bumps { bumps } => bumps.iter().filter(|b| b.component == c).map(|b| b.eval(t, r, th)).sum(),
            SourceShape::FourierSquared { fields } => fields.iter().filter(|f| f.component == c).map(|f| f.eval(t, r, th)).sum(),
            SourceShape::Blocks { blocks } => blocks
                .iter()
                .filter(|b| {
                    b.component == c
                        && (b.r_lo..=b.r_hi).contains(&r)
                        && (b.t_lo..=b.t_hi).contains(&t)
                        && (th - b.theta_lo).rem_euclid(2.0 * PI) <= b.theta_len
                })
                .map(|b| b.height)
                .sum(),
        }
    }

    pub fn on_grid(&self, n: usize, grid: &PolarGrid) -> SpaceTimeField {
        SpaceTimeField::from_fn(n, grid, |c, t, r, th| self.eval(c, t, r, th))
    }
}

/// A drawn source: `g = shape + offset` on every component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSource {
    pub id: usize,
    pub shape: SourceShape,
    pub offset: f64,
}

/// `1 / √(n |Q|)`, the norm ratio of a constant source.
pub fn k_min(grid: &PolarGrid, n: usize) -> f64 {
    1.0 / (n as f64 * measure_q(grid)).sqrt()
}

fn measure_q(grid: &PolarGrid) -> f64 {
    grid.quad_weights.iter().sum::<f64>() * grid.t_final
}

/// Smallest constant `c ≥ 0` with `‖f + c‖₂ ≤ k ‖f + c‖₁` for `f ≥ 0`.
///
/// With `D = n|Q|`, `‖f + c‖₂² = A − B²/D + u²/D` and `‖f + c‖₁ = u`, where
/// `A = ‖f‖₂²`, `B = ‖f‖₁`, `u = B + cD`; the ratio is decreasing in `u`.
pub fn flatten_offset(field: &SourceField, grid: &PolarGrid, k: f64) -> Option<f64> {
    let d = field.field.n_comp as f64 * measure_q(grid);
    let (a, b) = (field.l2 * field.l2, field.l1);
    if field.l2 <= k * b {
        return Some(0.0);
    }
    let gap = k * k - 1.0 / d;
    if !(gap > 0.0) {
        return None;
    }
    let u = ((a - b * b / d).max(0.0) / gap).sqrt() * (1.0 + 1e-12);
    Some(((u - b) / d).max(0.0))
}

fn draw_shape(kind: SamplerKind, rng: &mut ChaCha8Rng, grid: &PolarGrid, n: usize) -> SourceShape {
    let (r0, r1, tf) = (grid.r0, grid.r1, grid.t_final);
    let span = r1 - r0;
    match kind {
        SamplerKind::Bumps => {
            let count = rng.gen_range(1..=4);
            let bumps = (0..count)
                .map(|_| Bump {
                    component: rng.gen_range(0..n),
                    r: rng.gen_range(r0 + 0.1 * span..r1 - 0.1 * span),
                    theta: rng.gen_range(0.0..2.0 * PI),
                    t: rng.gen_range(0.2 * tf..0.8 * tf),
                    width_r: rng.gen_range(0.1..0.3) * span,
                    width_theta: rng.gen_range(0.3..1.0),
                    width_t: rng.gen_range(0.15..0.4) * tf,
                    height: rng.gen_range(0.5..2.0),
                })
                .collect();
            SourceShape::Bumps { bumps }
        }
        SamplerKind::RandomFourierSquared => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let fields = (0..n)
                .map(|component| {
                    let mut coef = vec![0.0; 30];
                    for p in 0..3 {
                        for q in 0..5 {
                            for l in 0..2 {
                                let decay = 1.0 + p as f64 + (q as f64 / 2.0).ceil() + l as f64;
                                coef[(p * 5 + q) * 2 + l] = normal.sample(rng) / decay;
                            }
                        }
                    }
                    FourierField { component, coef, r0, r1, t_final: tf }
                })
                .collect();
            SourceShape::FourierSquared { fields }
        }
        SamplerKind::IndicatorBlocks => {
            let count = rng.gen_range(1..=3);
            let blocks = (0..count)
                .map(|_| {
                    let r_lo = rng.gen_range(r0..r1 - 0.25 * span);
                    let t_lo = rng.gen_range(0.0..0.6 * tf);
                    Block {
                        component: rng.gen_range(0..n),
                        r_lo,
                        r_hi: r_lo + rng.gen_range(0.2..0.5) * span,
                        theta_lo: rng.gen_range(0.0..2.0 * PI),
                        theta_len: rng.gen_range(0.4..2.0),
                        t_lo,
                        t_hi: t_lo + rng.gen_range(0.2..0.4) * tf,
                        height: rng.gen_range(0.5..2.0),
                    }
                })
                .collect();
            SourceShape::Blocks { blocks }
        }
    }
}

/// Project a shape into `𝒢ₖ` on `grid` by flattening.
pub fn project_shape(shape: &SourceShape, id: usize, n: usize, grid: &PolarGrid, k: f64) -> Result<(SampledSource, SourceField)> {
    let raw = SourceField::new(shape.on_grid(n, grid), grid)?;
    if !(raw.l1 > 0.0) || !raw.l2.is_finite() || raw.field.min() < 0.0 {
        return Err(Error::ProjectionFailure);
    }
    let offset = flatten_offset(&raw, grid, k).ok_or(Error::ProjectionFailure)?;
    let mut field = raw.field;
    field.values.iter_mut().for_each(|v| *v += offset);
    let g = SourceField::new(field, grid)?;
    if g.l2 > k * g.l1 * (1.0 + 1e-10) {
        return Err(Error::ProjectionFailure);
    }
    Ok((SampledSource { id, shape: shape.clone(), offset }, g))
}

/// Draw sample `id` of the class; the stream depends only on `(seed, id)`.
pub fn sample_source_gk(spec: &SourceClassSpec, grid: &PolarGrid, n: usize, id: usize) -> Result<(SampledSource, SourceField)> {
    let kmin = k_min(grid, n);
    if spec.k < kmin {
        return Err(Error::ClassEmpty { k: spec.k, k_min: kmin });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(id as u64);
    for _ in 0..spec.max_attempts {
        let shape = draw_shape(spec.sampler, &mut rng, grid, n);
        if let Ok(out) = project_shape(&shape, id, n, grid, spec.k) {
            return Ok(out);
        }
    }
    Err(Error::RejectionExhausted { attempts: spec.max_attempts })
}

/// Membership in `𝒢ₖ`, recomputed from scratch.
pub fn in_class(g: &SourceField, grid: &PolarGrid, k: f64) -> bool {
    let fresh = SourceField::new(g.field.clone(), grid).expect("grid matches");
    fresh.field.min() >= 0.0 && fresh.l2 <= k * fresh.l1 * (1.0 + 1e-10)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatioOutcome {
    Ratio {
        value: f64,
    },
    /// `g = 0`: the ratio is `0/0`.
    NotApplicable,
    /// `ζ = 0` with `g ≠ 0`; impossible in the continuum, logged as a diagnostic.
    ZeroObservation {
        g_l2: f64,
    },
}

impl RatioOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            RatioOutcome::Ratio { value } => Some(*value),
            _ => None,
        }
    }
}

/// `‖g‖_{L²(Q)} / ‖ζ‖_{L²(Σ₁)}`.
pub fn stability_ratio(g: &SourceField, zeta: &BoundarySeries, grid: &PolarGrid) -> RatioOutcome {
    let z = norm_l2_sigma1(zeta, grid);
    match (g.l2 > 0.0, z > 0.0) {
        (false, _) => RatioOutcome::NotApplicable,
        (true, false) => RatioOutcome::ZeroObservation { g_l2: g.l2 },
        (true, true) => RatioOutcome::Ratio { value: g.l2 / z },
    }
}

/// Everything needed to run the source-to-observation map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityExperiment {
    pub grid: PolarGrid,
    pub coeffs: SystemCoefficients,
    pub observation: ObservationSpec,
    pub class: SourceClassSpec,
    pub n_samples: usize,
    pub scheme: Scheme,
    /// Semilinear when present.
    pub reaction: Option<Reaction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub k: f64,
    pub g_l2: f64,
    pub g_l1: f64,
    pub zeta_l2: f64,
    pub y_max: f64,
    pub outcome: RatioOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: f64,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub n_samples: usize,
    pub samples: Vec<SampleRecord>,
    pub c_hat: Option<f64>,
    pub m_observed: f64,
    pub zero_observations: usize,
    pub config_digest: String,
    pub digest: String,
}

impl StabilityReport {
    fn assemble(exp: &StabilityExperiment, k: f64, samples: Vec<SampleRecord>) -> Self {
        let c_hat = samples.iter().filter_map(|s| s.outcome.value()).fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
        let m_observed = samples.iter().fold(0.0, |a: f64, s| a.max(s.y_max));
        let zero_observations = samples.iter().filter(|s| matches!(s.outcome, RatioOutcome::ZeroObservation { .. })).count();
        let config_digest = digest_json(exp);
        let digest = digest_json(&(&config_digest, k, &samples, c_hat, m_observed));
        Self {
            k,
            seed: exp.class.seed,
            sampler: exp.class.sampler,
            n_samples: samples.len(),
            samples,
            c_hat,
            m_observed,
            zero_observations,
            config_digest,
            digest,
        }
    }

    pub fn write_ratios_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["id", "k", "g_l2", "g_l1", "zeta_l2", "ratio"]).map_err(io)?;
        for s in &self.samples {
            let ratio = s.outcome.value().map_or_else(|| "undefined".to_string(), |v| format!("{v:e}"));
            w.write_record(&[
                s.id.to_string(),
                format!("{:e}", s.k),
                format!("{:e}", s.g_l2),
                format!("{:e}", s.g_l1),
                format!("{:e}", s.zeta_l2),
                ratio,
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl StabilityExperiment {
    /// Sign and compatibility preconditions.
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate(&self.grid)?;
        let sign = check_sign_hypotheses(&self.coeffs, &self.grid);
        if let Some(w) = sign.witness {
            return Err(Error::InvalidCoefficients(format!("sign hypothesis fails: {} = {} at node {}", w.what, w.value, w.node)));
        }
        if let Some(f) = &self.reaction {
            if let Some(w) = check_reaction_hypotheses(f, &self.grid).witness {
                return Err(Error::InvalidCoefficients(format!("reaction hypothesis fails: {} = {} at node {}", w.what, w.value, w.node)));
            }
        }
        check_compatibility(&self.observation, &self.coeffs, &self.grid)?;
        Ok(())
    }

    /// Observation of the solution driven by `g` from zero initial data.
    pub fn observe(&self, g: &SourceField) -> Result<(BoundarySeries, f64)> {
        let y0 = vec![0.0; self.coeffs.n * self.grid.n_nodes()];
        let y = match &self.reaction {
            Some(f) => solve_forward_semilinear(&self.coeffs, f, g, &y0, &self.grid)?,
            None => ForwardSolver::new(&self.coeffs, &self.grid, self.scheme)?.solve(g, &y0)?,
        };
        let tr = extract_trace_and_conormal(&y, &self.coeffs, &self.grid)?;
        Ok((apply_observation(&self.observation, &tr), y.max_abs()))
    }

    fn run_sample(&self, id: usize, k: f64) -> Result<SampleRecord> {
        let spec = SourceClassSpec { k, ..self.class.clone() };
        let (_, g) = sample_source_gk(&spec, &self.grid, self.coeffs.n, id)?;
        let (zeta, y_max) = self.observe(&g)?;
        Ok(SampleRecord {
            id,
            k,
            g_l2: g.l2,
            g_l1: g.l1,
            zeta_l2: norm_l2_sigma1(&zeta, &self.grid),
            y_max,
            outcome: stability_ratio(&g, &zeta, &self.grid),
        })
    }

    fn run_ids(&self, ids: &[usize], k: f64) -> Result<Vec<SampleRecord>> {
        par::map(ids, |&id| self.run_sample(id, k).map_err(|e| Error::Sample { sample: id, source: Box::new(e) })).into_iter().collect()
    }
}

/// Run `n_samples` forward solves and collect the ratios.
pub fn estimate_constant(exp: &StabilityExperiment) -> Result<StabilityReport> {
    exp.validate()?;
    let ids: Vec<usize> = (0..exp.n_samples).collect();
    let samples = exp.run_ids(&ids, exp.class.k)?;
    Ok(StabilityReport::assemble(exp, exp.class.k, samples))
}

/// Reports for ascending `ks` over nested sample sets: level `j` keeps every
/// sample of the lower levels (they lie in the smaller, hence every larger,
/// class) and adds `n_samples` fresh draws at `ks[j]`.
pub fn estimate_constant_nested(exp: &StabilityExperiment, ks: &[f64]) -> Result<Vec<StabilityReport>> {
    exp.validate()?;
    if !ks.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidCoefficients("k levels must be ascending".into()));
    }
    let mut pool: Vec<SampleRecord> = Vec::new();
    let mut out = Vec::new();
    for (j, &k) in ks.iter().enumerate() {
        let ids: Vec<usize> = (j * exp.n_samples..(j + 1) * exp.n_samples).collect();
        pool.extend(exp.run_ids(&ids, k)?);
        out.push(StabilityReport::assemble(exp, k, pool.clone()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialResult {
    pub best: SampledSource,
    pub ratio: f64,
    /// Best ratio after each step; non-decreasing.
    pub trace: Vec<f64>,
}

fn bump_params(b: &Bump) -> [f64; 7] {
    [b.r, b.theta, b.t, b.width_r, b.width_theta, b.width_t, b.height]
}

fn set_bump_param(b: &mut Bump, p: usize, v: f64, grid: &PolarGrid) {
    let span = grid.r1 - grid.r0;
    match p {
        0 => b.r = v.clamp(grid.r0, grid.r1),
        1 => b.theta = v.rem_euclid(2.0 * PI),
        2 => b.t = v.clamp(0.0, grid.t_final),
        3 => b.width_r = v.clamp(0.03 * span, span),
        4 => b.width_theta = v.clamp(0.1, 3.0),
        5 => b.width_t = v.clamp(0.05 * grid.t_final, grid.t_final),
        _ => b.height = v.clamp(0.05, 10.0),
    }
}

/// Coordinate ascent of the stability ratio over bump parameters, projecting
/// into `𝒢ₖ` after every move. A move is kept only if it raises the ratio;
/// otherwise that coordinate's step is halved.
pub fn adversarial_search(start: &[Bump], exp: &StabilityExperiment, n_steps: usize) -> Result<AdversarialResult> {
    let n = exp.coeffs.n;
    let eval = |bumps: &[Bump]| -> Result<(SampledSource, f64)> {
        let shape = SourceShape::Bumps { bumps: bumps.to_vec() };
        let (src, g) = project_shape(&shape, 0, n, &exp.grid, exp.class.k)?;
        let (zeta, _) = exp.observe(&g)?;
        let r = stability_ratio(&g, &zeta, &exp.grid).value().ok_or(Error::ProjectionFailure)?;
        Ok((src, r))
    };
    let mut cur: Vec<Bump> = start.to_vec();
    let (mut best, mut ratio) = eval(&cur)?;
    let mut trace = Vec::with_capacity(n_steps);
    let n_params = 7 * cur.len();
    let span = exp.grid.r1 - exp.grid.r0;
    let mut steps: Vec<f64> = (0..n_params)
        .map(|q| match q % 7 {
            0 | 3 => 0.1 * span,
            1 | 4 => 0.4,
            2 | 5 => 0.1 * exp.grid.t_final,
            _ => 0.5,
        })
        .collect();
    for step in 0..n_steps {
        let q = step % n_params;
        let (bi, p) = (q / 7, q % 7);
        let base = bump_params(&cur[bi])[p];
        let mut improved = false;
        for dir in [1.0, -1.0] {
            let mut trial = cur.clone();
            set_bump_param(&mut trial[bi], p, base + dir * steps[q], &exp.grid);
            if let Ok((src, r)) = eval(&trial) {
                if r > ratio {
                    cur = trial;
                    best = src;
                    ratio = r;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps[q] *= 0.5;
        }
        trace.push(ratio);
    }
    Ok(AdversarialResult { best, ratio, trace })
}

/// Additive Gaussian noise with standard deviation `rel_sigma · max|ζ|`.
pub fn add_gaussian_noise(series: &BoundarySeries, rel_sigma: f64, seed: u64) -> BoundarySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = rel_sigma * series.max_abs();
    let mut out = series.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        out.values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::coefficients::RingCondition;

    fn experiment(n_samples: usize, seed: u64) -> StabilityExperiment {
        let grid = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 9).unwrap();
        let coeffs = SystemCoefficients::heat(&grid, RingCondition::robin(1.0), RingCondition::robin(1.0));
        let observation = ObservationSpec::uniform(1, &grid, 1.0, 0.0, 0.5);
        StabilityExperiment {
            grid,
            coeffs,
            observation,
            class: SourceClassSpec::new(1.0, SamplerKind::Bumps, seed),
            n_samples,
            scheme: Scheme::BackwardEuler,
            reaction: None,
        }
    }

    #[test]
    fn constant_source_ratio_and_class_floor() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 5).unwrap();
        let one = SourceField::new(SpaceTimeField::from_fn(1, &g, |_, _, _, _| 1.0), &g).unwrap();
        let expected = 1.0 / (3.0 * PI).sqrt();
        assert!((one.norm_ratio() - expected).abs() < 1e-12);
        assert!((k_min(&g, 1) - expected).abs() < 1e-12);
        assert!(in_class(&one, &g, 0.33));
        let spec = SourceClassSpec::new(0.1, SamplerKind::Bumps, 1);
        assert!(matches!(sample_source_gk(&spec, &g, 1, 0), Err(Error::ClassEmpty { .. })));
    }

    #[test]
    fn every_sampler_lands_in_class() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 9).unwrap();
        for kind in [SamplerKind::Bumps, SamplerKind::RandomFourierSquared, SamplerKind::IndicatorBlocks] {
            for k in [0.4, 1.0, 3.0] {
                for id in 0..10 {
                    for n in [1, 2] {
                        let spec = SourceClassSpec::new(k, kind, 9);
                        let (_, src) = sample_source_gk(&spec, &g, n, id).unwrap();
                        assert!(in_class(&src, &g, k), "{kind:?} k={k} id={id}");
                        assert!(src.cache_error(&g) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 9).unwrap();
        let spec = SourceClassSpec::new(1.0, SamplerKind::Bumps, 42);
        let (a, fa) = sample_source_gk(&spec, &g, 1, 3).unwrap();
        let (b, fb) = sample_source_gk(&spec, &g, 1, 3).unwrap();
        assert_eq!(digest_json(&(&a, &fa.field.values)), digest_json(&(&b, &fb.field.values)));
        let (c, _) = sample_source_gk(&spec, &g, 1, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flatten_hits_the_boundary_of_the_class() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 9).unwrap();
        let spike = SpaceTimeField::from_fn(1, &g, |_, t, r, th| {
            (-(r - 1.5f64).powi(2) * 200.0 - th * th * 20.0 - (t - 0.5f64).powi(2) * 50.0).exp()
        });
        let spike = SourceField::new(spike, &g).unwrap();
        assert!(spike.norm_ratio() > 1.0);
        let c = flatten_offset(&spike, &g, 1.0).unwrap();
        let mut f = spike.field.clone();
        f.values.iter_mut().for_each(|v| *v += c);
        let flat = SourceField::new(f, &g).unwrap();
        assert!(flat.norm_ratio() <= 1.0 && flat.norm_ratio() > 1.0 - 1e-9);
    }

    #[test]
    fn zero_source_is_not_applicable_and_scaling_is_invariant() {
        let exp = experiment(1, 3);
        let g = &exp.grid;
        let zero = SourceField::new(SpaceTimeField::zeros(1, g), g).unwrap();
        let (z, _) = exp.observe(&zero).unwrap();
        assert_eq!(stability_ratio(&zero, &z, g), RatioOutcome::NotApplicable);
        let (_, src) = sample_source_gk(&exp.class, g, 1, 0).unwrap();
        let (z1, _) = exp.observe(&src).unwrap();
        let src2 = src.scaled(2.0, g).unwrap();
        let (z2, _) = exp.observe(&src2).unwrap();
        let (r1, r2) = (stability_ratio(&src, &z1, g).value().unwrap(), stability_ratio(&src2, &z2, g).value().unwrap());
        assert!((r1 - r2).abs() <= 1e-10 * r1);
        let nz = BoundarySeries::zeros(1, g, crate::geometry::grid::Boundary::Gamma1);
        assert!(matches!(stability_ratio(&src, &nz, g), RatioOutcome::ZeroObservation { .. }));
    }

    #[test]
    fn single_sample_and_determinism() {
        let rep = estimate_constant(&experiment(1, 5)).unwrap();
        assert_eq!(rep.c_hat, rep.samples[0].outcome.value());
        let a = estimate_constant(&experiment(4, 7)).unwrap();
        let b = estimate_constant(&experiment(4, 7)).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.c_hat, a.samples.iter().filter_map(|s| s.outcome.value()).reduce(f64::max));
        assert_ne!(a.digest, estimate_constant(&experiment(4, 8)).unwrap().digest);
    }

    #[test]
    fn nested_levels_are_monotone() {
        let reps = estimate_constant_nested(&experiment(3, 11), &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(reps.iter().map(|r| r.n_samples).collect::<Vec<_>>(), vec![3, 6, 9]);
        for w in reps.windows(2) {
            assert!(w[1].c_hat.unwrap() >= w[0].c_hat.unwrap());
        }
    }

    #[test]
    fn adversarial_trace_is_monotone() {
        let exp = experiment(1, 1);
        let start = vec![Bump { component: 0, r: 1.5, theta: 1.0, t: 0.5, width_r: 0.2, width_theta: 0.5, width_t: 0.2, height: 1.0 }];
        let zero = adversarial_search(&start, &exp, 0).unwrap();
        assert!(zero.trace.is_empty());
        let res = adversarial_search(&start, &exp, 10).unwrap();
        assert!(res.ratio >= zero.ratio);
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn noise_is_seeded() {
        let g = PolarGrid::new(1.0, 2.0, 9, 16, 1.0, 9).unwrap();
        let mut z = BoundarySeries::zeros(1, &g, crate::geometry::grid::Boundary::Gamma1);
        z.values.fill(2.0);
        let a = add_gaussian_noise(&z, 0.01, 3);
        assert_eq!(a, add_gaussian_noise(&z, 0.01, 3));
        assert!(a.values.iter().all(|v| (v - 2.0).abs() < 0.2));
        assert_eq!(add_gaussian_noise(&z, 0.0, 3), z);
    }
}
