use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // geometry
    #[error("radii must satisfy 0 < r0 < r1 (got r0 = {r0}, r1 = {r1})")]
    NonPositiveRadius { r0: f64, r1: f64 },
    #[error("degenerate resolution: {0}")]
    DegenerateResolution(String),
    #[error("level function gradient vanishes: min |grad| = {min_grad:e} at node {node}")]
    VanishingGradient { min_grad: f64, node: usize },
    #[error("flow trajectory from node {node} left the annulus")]
    FlowEscape { node: usize },
    #[error("no admissible exponent in the mu grid")]
    NoAdmissibleMu,
    #[error("diffusion matrix is not symmetric at node {node} (component {component})")]
    NonSymmetricDiffusion { component: usize, node: usize },
    #[error("weight exponent {exponent:.1} overflows f64; lower lambda")]
    OverflowGuard { exponent: f64 },

    // pde
    #[error("ellipticity violated at node {node} (component {component}): min eigenvalue {min_eig:e}")]
    EllipticityViolated { component: usize, node: usize, min_eig: f64 },
    #[error("boundary flag beta = {value} at boundary node {node} (component {component}) is not in {{0, 1}}")]
    BoundaryFlagInvalid { component: usize, node: usize, value: f64 },
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("linear solve residual {residual:e} above tolerance {tolerance:e}")]
    SolverDivergence { residual: f64, tolerance: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Newton iteration diverged at time step {step} (residual {residual:e})")]
    NewtonDivergence { step: usize, residual: f64 },
    #[error("non-finite partial derivative during linearization at time {step}, node {node}")]
    QuadratureFailure { step: usize, node: usize },
    #[error("nonlinearity does not vanish at y = 0: |f| = {value:e} at probe {probe}")]
    NonlinearityProbe { probe: usize, value: f64 },

    // observe
    #[error("compatibility violated at Gamma_1 node {node}, component {component}: det = {det}")]
    CompatibilityViolated { component: usize, node: usize, det: f64 },
    #[error("recovery is singular at Gamma_1 node {node}, component {component}: det = {det}")]
    SingularRecovery { component: usize, node: usize, det: f64 },

    // carleman
    #[error("weights do not match the solution grid: {0}")]
    WeightGridMismatch(String),
    #[error("empty corpus")]
    EmptyCorpus,

    // stability
    #[error("k = {k} is below the class minimum {k_min}")]
    ClassEmpty { k: f64, k_min: f64 },
    #[error("source sampler exhausted {attempts} attempts")]
    RejectionExhausted { attempts: usize },
    #[error("projection back into the source class failed")]
    ProjectionFailure,
    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
