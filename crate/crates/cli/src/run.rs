//! One runner per experiment kind. Each writes its artifacts into `out` and
//! returns a one-line summary, or [`CliError::Failed`] when a check fails.

use clab::carleman::{scan_parameters, CorpusMember, STABILIZATION_TOL};
use clab::export::{write_field_binary, write_field_csv, write_weights_binary, write_weights_csv};
use clab::geometry::{choose_shift_k, construct_psi0_radial, eval_weights, exponentiate_for_subharmonicity};
use clab::observe::{
    apply_observation, extract_trace_and_conormal, norm_l2_sigma1, write_observation_csv, BoundarySeries, ObservationSpec,
};
use clab::pde::{
    run_convergence_suite, solve_forward_semilinear, ConvergenceConfig, ForwardSolver, NonlinearityModel, Reaction, StudyAxis,
    SystemCoefficients,
};
use clab::positivity::{
    check_sign_hypotheses, run_positivity_check_for, run_positivity_improving_check, DEFAULT_REL_FLOOR, DEFAULT_REL_TOL,
};
use clab::stability::{estimate_constant, sample_source_gk, stability_ratio, SourceClassSpec, StabilityExperiment};
use clab::{Boundary, PolarGrid, SourceField, SpaceTimeField, StateField};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, Format};
use crate::error::CliError;
use crate::output::Outputs;
use crate::svg;

/// Shared setup for the source-driven experiments.
struct Setup {
    grid: PolarGrid,
    coeffs: SystemCoefficients,
    observation: ObservationSpec,
    reaction: Option<Reaction>,
    class: SourceClassSpec,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let grid = cfg.grid()?;
        let coeffs = cfg.coefficients(&grid)?;
        let o = &cfg.observation;
        let observation = ObservationSpec::uniform(coeffs.n, &grid, o.gamma, o.delta, o.epsilon);
        let e = &cfg.experiment;
        let class = SourceClassSpec::new(e.k, e.sampler, e.seed);
        Ok(Self { reaction: cfg.reaction()?, grid, coeffs, observation, class })
    }

    fn source(&self, id: usize) -> Result<SourceField, CliError> {
        Ok(sample_source_gk(&self.class, &self.grid, self.coeffs.n, id)?.1)
    }

    fn solve(&self, cfg: &ExperimentConfig, g: &SourceField) -> Result<StateField, CliError> {
        let y0 = vec![0.0; self.coeffs.n * self.grid.n_nodes()];
        Ok(match &self.reaction {
            Some(f) => solve_forward_semilinear(&self.coeffs, f, g, &y0, &self.grid)?,
            None => ForwardSolver::new(&self.coeffs, &self.grid, cfg.experiment.scheme)?.solve(g, &y0)?,
        })
    }

    fn observe(&self, y: &StateField) -> Result<BoundarySeries, CliError> {
        Ok(apply_observation(&self.observation, &extract_trace_and_conormal(y, &self.coeffs, &self.grid)?))
    }

    /// `g − C y − f(y)`: the right-hand side once every zero-order term is
    /// moved to the source.
    fn gbar(&self, g: &SourceField, y: &StateField) -> Result<SourceField, CliError> {
        let (n, nn) = (self.coeffs.n, self.grid.n_nodes());
        let mut out = g.field.clone();
        let (mut yk, mut fk) = (vec![0.0; n], vec![0.0; n]);
        for m in 0..self.grid.n_t {
            let t = self.grid.time(m);
            for k in 0..nn {
                (0..n).for_each(|l| yk[l] = y.get(l, m, k));
                match &self.reaction {
                    Some(f) => f.eval(t, self.grid.cartesian(k), &yk, &mut fk),
                    None => fk.iter_mut().for_each(|v| *v = 0.0),
                }
                for i in 0..n {
                    let cy: f64 = (0..n).map(|l| self.coeffs.coupling.at(n, nn, m, k, i, l) * yk[l]).sum();
                    let idx = out.idx(i, m, k);
                    out.values[idx] -= cy + fk[i];
                }
            }
        }
        Ok(SourceField::new(out, &self.grid)?)
    }
}

/// `‖ζ_c(t, ·)‖` on the observed circle for each component.
fn observation_profiles(zeta: &BoundarySeries, grid: &PolarGrid) -> Vec<(String, Vec<(f64, f64)>)> {
    let arc = grid.arc_weight(Boundary::Gamma1);
    (0..zeta.n_comp)
        .map(|c| {
            let pts = (0..zeta.n_t)
                .map(|m| (grid.time(m), (0..zeta.n_theta).map(|j| zeta.get(c, m, j).powi(2) * arc).sum::<f64>().sqrt()))
                .collect();
            (format!("component {c}"), pts)
        })
        .collect()
}

fn write_field(out: &mut Outputs, cfg: &ExperimentConfig, stem: &str, f: &SpaceTimeField, grid: &PolarGrid) -> Result<(), CliError> {
    if cfg.output.wants(Format::Csv) {
        out.write_with(&format!("{stem}.csv"), |b| write_field_csv(f, grid, b))?;
    }
    if cfg.output.wants(Format::Bin) {
        out.write_with(&format!("{stem}.bin"), |b| write_field_binary(f, grid, b))?;
    }
    Ok(())
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    match kind {
        ExperimentKind::Forward => forward(cfg, out),
        ExperimentKind::Carleman => carleman(cfg, out),
        ExperimentKind::Stability => stability(cfg, out),
        ExperimentKind::Positivity => positivity(cfg, out),
        ExperimentKind::Convergence => convergence(cfg, out),
    }
}

fn forward(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct ForwardReport {
        n_components: usize,
        g_l2: f64,
        g_l1: f64,
        y_max: f64,
        y_min: f64,
        zeta_l2: f64,
        ratio: Option<f64>,
    }
    let s = Setup::new(cfg)?;
    let g = s.source(0)?;
    let y = s.solve(cfg, &g)?;
    let zeta = s.observe(&y)?;
    let rep = ForwardReport {
        n_components: s.coeffs.n,
        g_l2: g.l2,
        g_l1: g.l1,
        y_max: y.max_abs(),
        y_min: y.min(),
        zeta_l2: norm_l2_sigma1(&zeta, &s.grid),
        ratio: stability_ratio(&g, &zeta, &s.grid).value(),
    };
    write_field(out, cfg, "state", &y, &s.grid)?;
    write_field(out, cfg, "source", &g.field, &s.grid)?;
    if cfg.output.wants(Format::Csv) {
        out.write_with("observation.csv", |b| write_observation_csv(&zeta, &s.grid, b))?;
    }
    if cfg.output.wants(Format::Svg) {
        let plot = svg::time_series(&observation_profiles(&zeta, &s.grid), "observation on the outer circle", "t", "L2 norm in theta");
        out.write("observation.svg", plot.as_bytes())?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_report("forward.json", "forward", &rep)?;
    }
    Ok(format!("forward: |y|max = {:.6e}, |zeta| = {:.6e}", rep.y_max, rep.zeta_l2))
}

fn carleman(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    let s = Setup::new(cfg)?;
    let w = &cfg.weights;
    let ids: Vec<usize> = (0..cfg.experiment.n_samples.max(1)).collect();
    let corpus = clab::par::map(&ids, |&id| -> Result<CorpusMember, CliError> {
        let g = s.source(id)?;
        let y = s.solve(cfg, &g)?;
        let zeta = s.observe(&y)?;
        Ok(CorpusMember { gbar: s.gbar(&g, &y)?, y, zeta })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut psi = construct_psi0_radial(&s.grid);
    let mut mu = None;
    if !w.mu.is_empty() {
        let (p, m) = exponentiate_for_subharmonicity(&s.grid, &psi, &s.coeffs.components[0].diffusion, &w.mu)?;
        (psi, mu) = (p, Some(m));
    }
    let mut base = choose_shift_k(&psi, w.k_margin);
    if let Some(m) = mu {
        base = base.with_mu(m);
    }
    let table = scan_parameters(&corpus, &psi, &base, &s.grid, &w.s, &w.lambda)?;
    if cfg.output.wants(Format::Csv) {
        out.write_with("carleman_scan.csv", |b| table.write_csv(b))?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_report("carleman.json", "carleman", &table)?;
    }
    if cfg.output.wants(Format::Svg) {
        let rows: Vec<Vec<Option<f64>>> = (0..w.lambda.len()).map(|li| (0..w.s.len()).map(|si| table.at(si, li)).collect()).collect();
        out.write("carleman_heatmap.svg", svg::heatmap(&rows, &w.lambda, &w.s, "empirical Carleman constant", "lambda", "s").as_bytes())?;
    }
    if cfg.output.wants(Format::Csv) || cfg.output.wants(Format::Bin) {
        let weights = eval_weights(&psi, &base.with_lambda(w.lambda[0]), &s.grid)?;
        if cfg.output.wants(Format::Csv) {
            out.write_with("weights.csv", |b| write_weights_csv(&weights, &s.grid, b))?;
        }
        if cfg.output.wants(Format::Bin) {
            out.write_with("weights.bin", |b| write_weights_binary(&weights, &s.grid, b))?;
        }
    }
    Ok(match &table.region {
        Some(r) => format!("carleman: settled for s >= {}, lambda >= {}, C = {:.6e}", r.s_star, r.lambda_star, r.c_region),
        None => format!("carleman: no quadrant settles within {:.0}%", 100.0 * STABILIZATION_TOL),
    })
}

fn stability(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    let s = Setup::new(cfg)?;
    let exp = StabilityExperiment {
        grid: s.grid,
        coeffs: s.coeffs,
        observation: s.observation,
        class: s.class,
        n_samples: cfg.experiment.n_samples,
        scheme: cfg.experiment.scheme,
        reaction: s.reaction,
    };
    let rep = estimate_constant(&exp)?;
    if cfg.output.wants(Format::Csv) {
        out.write_with("ratios.csv", |b| rep.write_ratios_csv(b))?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_report("stability.json", "stability", &rep)?;
    }
    if cfg.output.wants(Format::Svg) {
        let ratios: Vec<f64> = rep.samples.iter().filter_map(|r| r.outcome.value()).collect();
        out.write("ratios.svg", svg::histogram(&ratios, 20, "stability ratios", "|g| / |zeta|").as_bytes())?;
    }
    Ok(match rep.c_hat {
        Some(c) => format!("stability: C_hat = {c:.6e} over {} samples, digest {}", rep.n_samples, rep.digest),
        None => format!("stability: no defined ratio over {} samples", rep.n_samples),
    })
}

fn positivity(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Summary {
        sign: clab::positivity::SignCheck,
        samples: Vec<clab::positivity::PositivityReport>,
        pass: bool,
    }
    let s = Setup::new(cfg)?;
    let sign = check_sign_hypotheses(&s.coeffs, &s.grid);
    let mut samples = Vec::new();
    if sign.pass {
        let ids: Vec<usize> = (0..cfg.experiment.n_samples.max(1)).collect();
        let comps: Vec<usize> = (0..s.coeffs.n).collect();
        samples = clab::par::map(&ids, |&id| -> Result<_, CliError> {
            let g = s.source(id)?;
            let y = s.solve(cfg, &g)?;
            let mut rep = run_positivity_check_for(&y, &s.grid, &s.coeffs, DEFAULT_REL_TOL);
            let t_mid = [0.5 * s.grid.t_final];
            rep.improving = run_positivity_improving_check(&y, &s.grid, &t_mid, &comps, DEFAULT_REL_FLOOR, Some(&g)).improving;
            Ok(rep)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    }
    let pass = sign.pass && samples.iter().all(|r| r.pass);
    let summary = Summary { sign, samples, pass };
    if cfg.output.wants(Format::Json) {
        out.write_report("positivity.json", "positivity", &summary)?;
    }
    if let Some(w) = &summary.sign.witness {
        return Err(CliError::Failed(format!("sign hypothesis fails: {} = {} at node {}", w.what, w.value, w.node)));
    }
    let worst = summary.samples.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
    if !pass {
        return Err(CliError::Failed(format!("positivity violated, min value {worst:.6e}")));
    }
    Ok(format!("positivity: {} samples nonnegative, min value {worst:.6e}", summary.samples.len()))
}

fn convergence(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<String, CliError> {
    let g = &cfg.geometry;
    let cc = ConvergenceConfig { r0: g.r0, r1: g.r1, t_final: g.t_final, ..ConvergenceConfig::default() };
    let table = run_convergence_suite(&cc)?;
    if cfg.output.wants(Format::Csv) {
        let mut text = String::from("axis,scheme,resolution,error,slope,band_lo,band_hi\n");
        for row in &table.rows {
            let axis = if row.axis == StudyAxis::Space { "space" } else { "time" };
            for (i, (n, e)) in row.resolutions.iter().zip(&row.errors).enumerate() {
                let slope = i.checked_sub(1).map_or_else(String::new, |j| format!("{:e}", row.slopes[j]));
                text.push_str(&format!("{axis},{:?},{n},{e:e},{slope},{},{}\n", row.scheme, row.band.0, row.band.1));
            }
        }
        out.write("convergence.csv", text.as_bytes())?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_report("convergence.json", "convergence", &table)?;
    }
    let slopes: Vec<String> =
        table.rows.iter().map(|r| format!("{:?}/{:?} {:.2}", r.axis, r.scheme, r.slopes.last().copied().unwrap_or(f64::NAN))).collect();
    if !table.pass {
        return Err(CliError::Failed(format!("orders out of band: {}", slopes.join(", "))));
    }
    Ok(format!("convergence: {}", slopes.join(", ")))
}
