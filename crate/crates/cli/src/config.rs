//! Experiment configuration: TOML file, dotted-key overrides, presets.

use std::path::Path;

use clab::pde::{ComponentCoefficients, Coupling, Reaction, RingCondition, Scheme, SystemCoefficients};
use clab::stability::SamplerKind;
use clab::stencil::{Mat2, IDENTITY};
use clab::{Orientation, PolarGrid};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    pub coefficients: CoefficientsConfig,
    pub boundary: BoundaryConfig,
    pub observation: ObservationConfig,
    pub weights: WeightsConfig,
    pub experiment: ExperimentBlock,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometryConfig::default(),
            coefficients: CoefficientsConfig::default(),
            boundary: BoundaryConfig::default(),
            observation: ObservationConfig::default(),
            weights: WeightsConfig::default(),
            experiment: ExperimentBlock::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub r0: f64,
    pub r1: f64,
    pub n_r: usize,
    pub n_theta: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_t: usize,
    pub orientation: Orientation,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { r0: 1.0, r1: 2.0, n_r: 17, n_theta: 32, t_final: 1.0, n_t: 33, orientation: Orientation::InnerIsGamma0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Heat,
    Advection,
    Coupled2,
    /// Tables given in `components` and `coupling`.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentTable {
    #[serde(default = "identity")]
    pub diffusion: Mat2,
    #[serde(default)]
    pub drift: [f64; 2],
}

fn identity() -> Mat2 {
    IDENTITY
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub preset: Preset,
    pub components: Vec<ComponentTable>,
    /// Row-major `n x n` rows.
    pub coupling: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub beta: f64,
    pub eta: f64,
}

impl From<RingConfig> for RingCondition {
    fn from(r: RingConfig) -> Self {
        RingCondition { beta: r.beta, eta: r.eta }
    }
}

/// One ring condition for every component, or one per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerComponent {
    All(RingConfig),
    Each(Vec<RingConfig>),
}

impl PerComponent {
    fn get(&self, c: usize, n: usize) -> Result<RingCondition, CliError> {
        match self {
            PerComponent::All(r) => Ok((*r).into()),
            PerComponent::Each(v) if v.len() == n => Ok(v[c].into()),
            PerComponent::Each(v) => Err(CliError::Config(format!("boundary lists {} entries for {n} components", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub inner: PerComponent,
    pub outer: PerComponent,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        let robin = RingConfig { beta: 1.0, eta: 1.0 };
        Self { inner: PerComponent::All(robin), outer: PerComponent::All(robin) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self { gamma: 1.0, delta: 0.0, epsilon: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub lambda: Vec<f64>,
    pub s: Vec<f64>,
    /// Exponents tried for subharmonicity; empty keeps the radial level function.
    pub mu: Vec<f64>,
    pub k_margin: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { lambda: vec![0.1, 0.2, 0.4, 0.8, 1.6], s: (0..11).map(|i| f64::from(1u32 << i)).collect(), mu: Vec::new(), k_margin: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Forward,
    Carleman,
    #[default]
    Stability,
    Positivity,
    Convergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Forward => "forward",
            ExperimentKind::Carleman => "carleman",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Positivity => "positivity",
            ExperimentKind::Convergence => "convergence",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionChoice {
    #[default]
    None,
    Square,
    CrossDepletion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: ExperimentKind,
    pub n_samples: usize,
    pub k: f64,
    pub seed: u64,
    /// 0 lets the pool pick.
    pub workers: usize,
    pub sampler: SamplerKind,
    pub scheme: Scheme,
    pub reaction: ReactionChoice,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Stability,
            n_samples: 50,
            k: 1.0,
            seed: 0,
            workers: 0,
            sampler: SamplerKind::Bumps,
            scheme: Scheme::BackwardEuler,
            reaction: ReactionChoice::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
    Bin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json, Format::Svg] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Parse `key=value`; the value is read as a TOML scalar or array, falling
/// back to a bare string.
fn parse_override(raw: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, value) = raw.split_once('=').ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("override `{raw}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((path, parsed))
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut node = root;
    for p in parents {
        let entry = node.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("override path crosses non-table key `{p}`")))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Load `path` (defaults when `None`), then apply overrides in order.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for raw in overrides {
        let (key, value) = parse_override(raw)?;
        set_path(&mut table, &key, value)?;
    }
    let where_ = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
    let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e| CliError::Config(format!("{where_}: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "{where_}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<PolarGrid, CliError> {
        let g = &self.geometry;
        Ok(PolarGrid::with_orientation(g.r0, g.r1, g.n_r, g.n_theta, g.t_final, g.n_t, g.orientation)?)
    }

    /// Component tables and coupling implied by the preset.
    fn tables(&self) -> Result<(Vec<ComponentTable>, Vec<Vec<f64>>), CliError> {
        let plain = ComponentTable { diffusion: IDENTITY, drift: [0.0, 0.0] };
        Ok(match self.coefficients.preset {
            Preset::Heat => (vec![plain], vec![vec![0.0]]),
            Preset::Advection => (vec![ComponentTable { diffusion: IDENTITY, drift: [0.5, 0.25] }], vec![vec![0.0]]),
            Preset::Coupled2 => (vec![plain.clone(), plain], vec![vec![0.2, -0.5], vec![-0.3, 0.1]]),
            Preset::Custom => {
                let c = &self.coefficients;
                let n = c.components.len();
                if n == 0 {
                    return Err(CliError::Config("custom coefficients need at least one entry in `components`".into()));
                }
                let coupling = if c.coupling.is_empty() { vec![vec![0.0; n]; n] } else { c.coupling.clone() };
                if coupling.len() != n || coupling.iter().any(|row| row.len() != n) {
                    return Err(CliError::Config(format!("coupling must be {n} x {n}")));
                }
                (c.components.clone(), coupling)
            }
        })
    }

    pub fn n_components(&self) -> Result<usize, CliError> {
        Ok(self.tables()?.0.len())
    }

    pub fn coefficients(&self, grid: &PolarGrid) -> Result<SystemCoefficients, CliError> {
        let (tables, coupling) = self.tables()?;
        let n = tables.len();
        let components = tables
            .iter()
            .enumerate()
            .map(|(c, t)| {
                Ok(ComponentCoefficients::uniform(
                    grid,
                    t.diffusion,
                    t.drift,
                    self.boundary.inner.get(c, n)?,
                    self.boundary.outer.get(c, n)?,
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let coeffs = SystemCoefficients::new(components, Coupling::Constant(coupling.concat()));
        coeffs.validate(grid)?;
        Ok(coeffs)
    }

    pub fn reaction(&self) -> Result<Option<Reaction>, CliError> {
        let n = self.n_components()?;
        let r = match self.experiment.reaction {
            ReactionChoice::None => return Ok(None),
            ReactionChoice::Square => Reaction::Quadratic { coef: vec![1.0; n] },
            ReactionChoice::CrossDepletion if n == 2 => Reaction::cross_depletion(),
            ReactionChoice::CrossDepletion => return Err(CliError::Config("cross_depletion needs two components".into())),
        };
        Ok(Some(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_scalars_arrays_and_strings() {
        let cfg = load(
            None,
            &[
                "geometry.n_r=9".into(),
                "weights.lambda=[0.5, 1.0]".into(),
                "experiment.kind=carleman".into(),
                "coefficients.preset=coupled2".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.geometry.n_r, 9);
        assert_eq!(cfg.weights.lambda, vec![0.5, 1.0]);
        assert_eq!(cfg.experiment.kind, ExperimentKind::Carleman);
        assert_eq!(cfg.n_components().unwrap(), 2);
    }

    #[test]
    fn bad_keys_are_config_errors() {
        assert!(matches!(load(None, &["geometry.bogus=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(load(None, &["novalue".into()]), Err(CliError::Config(_))));
        let missing = load(Some(Path::new("/nonexistent/x.toml")), &[]);
        assert!(matches!(missing, Err(CliError::Config(m)) if m.contains("/nonexistent/x.toml")));
    }

    #[test]
    fn presets_build_valid_coefficients() {
        for p in ["heat", "advection", "coupled2"] {
            let cfg = load(None, &[format!("coefficients.preset={p}"), "geometry.n_r=9".into(), "geometry.n_theta=8".into()]).unwrap();
            let grid = cfg.grid().unwrap();
            assert!(cfg.coefficients(&grid).is_ok(), "{p}");
        }
    }
}
