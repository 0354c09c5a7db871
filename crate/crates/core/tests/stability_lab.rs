use clab::observe::ObservationSpec;
use clab::pde::{Reaction, RingCondition, Scheme, SystemCoefficients};
use clab::stability::{
    estimate_constant, project_shape, stability_ratio, Bump, SamplerKind, SourceClassSpec, SourceShape, StabilityExperiment,
};
use clab::PolarGrid;

fn experiment(n_samples: usize, reaction: Option<Reaction>) -> StabilityExperiment {
    let grid = PolarGrid::new(1.0, 2.0, 17, 32, 1.0, 33).unwrap();
    let ring = RingCondition::robin(1.0);
    StabilityExperiment {
        coeffs: SystemCoefficients::heat(&grid, ring, ring),
        observation: ObservationSpec::uniform(1, &grid, 1.0, 0.0, 0.5),
        grid,
        class: SourceClassSpec::new(2.0, SamplerKind::Bumps, 3),
        n_samples,
        scheme: Scheme::BackwardEuler,
        reaction,
    }
}

fn ratio_for_bump_at(exp: &StabilityExperiment, r: f64) -> f64 {
    let bump = Bump { component: 0, r, theta: 1.0, t: 0.5, width_r: 0.08, width_theta: 0.4, width_t: 0.15, height: 1.0 };
    let (_, g) = project_shape(&SourceShape::Bumps { bumps: vec![bump] }, 0, 1, &exp.grid, 3.0).unwrap();
    let (zeta, _) = exp.observe(&g).unwrap();
    stability_ratio(&g, &zeta, &exp.grid).value().unwrap()
}

#[test]
fn sources_far_from_the_observed_circle_are_harder_to_see() {
    let exp = experiment(1, None);
    let near = ratio_for_bump_at(&exp, 1.85);
    let far = ratio_for_bump_at(&exp, 1.15);
    assert!(far > 1.2 * near, "far {far} near {near}");
}

#[test]
fn small_quadratic_reaction_stays_close_to_the_linear_constant() {
    let linear = estimate_constant(&experiment(12, None)).unwrap();
    let semilinear = estimate_constant(&experiment(12, Some(Reaction::square()))).unwrap();
    let (a, b) = (linear.c_hat.unwrap(), semilinear.c_hat.unwrap());
    assert!(a / b < 2.0 && b / a < 2.0, "linear {a} semilinear {b}");
    assert!(semilinear.m_observed.is_finite());
}
