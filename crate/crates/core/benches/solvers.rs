//! Data-parallel core vs the sequential fallback.
//!
//! The backend is fixed at compile time, so the comparison takes two runs
//! that share criterion baselines:
//!
//! ```text
//! cargo bench -p clab-core --bench solvers -- --save-baseline parallel
//! cargo bench -p clab-core --bench solvers --no-default-features -- --baseline parallel
//! ```
//!
//! Benchmark ids are identical in both builds, so the second run reports the
//! sequential timings relative to the parallel ones.

use std::time::Duration;

use clab::carleman::{scan_parameters, CorpusMember};
use clab::geometry::{choose_shift_k, construct_psi0_radial};
use clab::observe::{apply_observation, extract_trace_and_conormal, ObservationSpec};
use clab::pde::{solve_forward_linear, RingCondition, Scheme, SystemCoefficients};
use clab::stability::{estimate_constant, sample_source_gk, SamplerKind, SourceClassSpec, StabilityExperiment};
use clab::{par, PolarGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn experiment(n_r: usize, n_samples: usize) -> StabilityExperiment {
    let grid = PolarGrid::new(1.0, 2.0, n_r, 32, 1.0, 33).unwrap();
    let ring = RingCondition::robin(1.0);
    StabilityExperiment {
        coeffs: SystemCoefficients::heat(&grid, ring, ring),
        observation: ObservationSpec::uniform(1, &grid, 1.0, 0.0, 0.5),
        grid,
        class: SourceClassSpec::new(1.0, SamplerKind::Bumps, 1),
        n_samples,
        scheme: Scheme::BackwardEuler,
        reaction: None,
    }
}

fn backend() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

fn bench_stability(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_constant");
    for n_r in [17, 33] {
        let exp = experiment(n_r, 16);
        group.bench_with_input(BenchmarkId::new("n_r", n_r), &exp, |b, exp| b.iter(|| estimate_constant(exp).unwrap()));
    }
    group.finish();
    eprintln!("backend: {}", backend());
}

fn bench_carleman(c: &mut Criterion) {
    let exp = experiment(17, 8);
    let corpus: Vec<CorpusMember> = (0..8)
        .map(|i| {
            let (_, g) = sample_source_gk(&exp.class, &exp.grid, 1, i).unwrap();
            let y = solve_forward_linear(&exp.coeffs, &g, &vec![0.0; exp.grid.n_nodes()], &exp.grid, Scheme::BackwardEuler).unwrap();
            let zeta = apply_observation(&exp.observation, &extract_trace_and_conormal(&y, &exp.coeffs, &exp.grid).unwrap());
            CorpusMember { y, gbar: g, zeta }
        })
        .collect();
    let psi = construct_psi0_radial(&exp.grid);
    let base = choose_shift_k(&psi, 0.0);
    let s_grid = [1.0, 2.0, 4.0, 8.0];
    let l_grid = [0.1, 0.2, 0.4];
    c.bench_function("scan_parameters", |b| b.iter(|| scan_parameters(&corpus, &psi, &base, &exp.grid, &s_grid, &l_grid).unwrap()));
}

fn config() -> Criterion {
    Criterion::default().warm_up_time(Duration::from_secs(1)).measurement_time(Duration::from_secs(5)).sample_size(10)
}

criterion_group!(
    name = benches;
    config = config();
    targets = bench_stability, bench_carleman
);
criterion_main!(benches);
