//! CLI errors and their process exit codes.

use clab::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
    /// The experiment ran but its pass/fail verdict is negative.
    #[error("check failed: {0}")]
    Failed(String),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_FAILED: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_GEOMETRY: u8 = 5;
pub const EXIT_PDE: u8 = 6;
pub const EXIT_OBSERVE: u8 = 7;
pub const EXIT_CARLEMAN: u8 = 8;
pub const EXIT_STABILITY: u8 = 9;

pub const EXIT_CODE_HELP: &str = "\
Exit codes:
  0  success
  1  unclassified error
  2  a check ran and failed (convergence orders, positivity)
  3  configuration could not be read or parsed
  4  output could not be written
  5  geometry or level-function error
  6  coefficient, solver or nonlinearity error
  7  observation error (compatibility, recovery)
  8  Carleman weight or corpus error
  9  source-class or sampling error";

fn core_code(e: &Error) -> u8 {
    match e {
        Error::NonPositiveRadius { .. }
        | Error::DegenerateResolution(_)
        | Error::VanishingGradient { .. }
        | Error::FlowEscape { .. }
        | Error::NoAdmissibleMu
        | Error::NonSymmetricDiffusion { .. }
        | Error::OverflowGuard { .. } => EXIT_GEOMETRY,
        Error::EllipticityViolated { .. }
        | Error::BoundaryFlagInvalid { .. }
        | Error::InvalidCoefficients(_)
        | Error::SolverDivergence { .. }
        | Error::ShapeMismatch(_)
        | Error::NewtonDivergence { .. }
        | Error::QuadratureFailure { .. }
        | Error::NonlinearityProbe { .. } => EXIT_PDE,
        Error::CompatibilityViolated { .. } | Error::SingularRecovery { .. } => EXIT_OBSERVE,
        Error::WeightGridMismatch(_) | Error::EmptyCorpus => EXIT_CARLEMAN,
        Error::ClassEmpty { .. } | Error::RejectionExhausted { .. } | Error::ProjectionFailure => EXIT_STABILITY,
        Error::Sample { source, .. } => core_code(source),
        Error::Io(_) => EXIT_IO,
        Error::Json(_) => EXIT_OTHER,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => core_code(e),
            CliError::Failed(_) => EXIT_FAILED,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_family() {
        let cases = [
            (CliError::Config("x".into()), EXIT_CONFIG),
            (CliError::Failed("x".into()), EXIT_FAILED),
            (Error::NoAdmissibleMu.into(), EXIT_GEOMETRY),
            (Error::InvalidCoefficients("x".into()).into(), EXIT_PDE),
            (Error::CompatibilityViolated { component: 0, node: 0, det: 0.0 }.into(), EXIT_OBSERVE),
            (Error::EmptyCorpus.into(), EXIT_CARLEMAN),
            (Error::Sample { sample: 3, source: Box::new(Error::ProjectionFailure) }.into(), EXIT_STABILITY),
        ];
        for (e, code) in cases {
            assert_eq!(e.exit_code(), code, "{e}");
        }
    }
}
