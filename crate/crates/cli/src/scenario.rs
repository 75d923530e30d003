//! Scenario files: JSON or TOML, versioned, unknown fields rejected.
//!
//! The schema is documented in `SCENARIOS.md` at the crate root.

use std::path::Path;

use lieflow::dynamics::{FlowConfig, OutputMap};
use lieflow::fields::ControlFamily;
use lieflow::solver::{Init, OptimizerConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Ensemble given explicitly or drawn from the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EnsembleSpec {
    Points(Vec<Vec<f64>>),
    /// Uniform on `[-scale, scale]^d`, the whole torus, or the whole sphere.
    Random { count: usize, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub substeps: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            substeps: FlowConfig::default().substeps,
        }
    }
}

/// Optimizer settings; the seed comes from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iter: usize,
    pub initial_step: f64,
    pub c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub grad_tol: f64,
    pub init: Init,
    pub init_scale: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            max_iter: c.max_iter,
            initial_step: c.initial_step,
            c1: c.c1,
            backtrack: c.backtrack,
            max_backtracks: c.max_backtracks,
            grad_tol: c.grad_tol,
            init: c.init,
            init_scale: c.init_scale,
        }
    }
}

impl OptimizerSection {
    pub fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            max_iter: self.max_iter,
            initial_step: self.initial_step,
            c1: self.c1,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
            grad_tol: self.grad_tol,
            seed,
            init: self.init,
            init_scale: self.init_scale,
        }
    }
}

fn default_steer_threshold() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerScenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub family: ControlFamily,
    pub horizon: f64,
    pub steps: usize,
    pub beta: f64,
    /// Success when every member ends closer than this to its target.
    #[serde(default = "default_steer_threshold")]
    pub threshold: f64,
    pub sources: EnsembleSpec,
    pub targets: EnsembleSpec,
    #[serde(default)]
    pub output: OutputMap,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Two interleaved half circles with uniform noise, labels 0 and 1.
    TwoMoons { n: usize, noise: f64, scale: f64 },
    Points { x: Vec<Vec<f64>>, labels: Vec<Vec<f64>> },
}

fn default_nu() -> Vec<f64> {
    vec![0.0]
}

fn default_tolerance() -> f64 {
    0.25
}

fn default_min_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainScenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSpec,
    /// Base point of the label space; its length is the label dimension.
    #[serde(default = "default_nu")]
    pub nu: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub beta: f64,
    /// A point counts as fitted when its prediction is this close to its label.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Success when at least this fraction of points is fitted.
    #[serde(default = "default_min_fraction")]
    pub min_fraction: f64,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Hermite,
    Fourier,
    Laplace,
}

/// Target functions available to `approx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFunction {
    /// `e^{-(z − 1/2)²}`, Hermite basis.
    GaussianBump,
    /// `(1 − z²)³` on `[-1, 1]`, Hermite basis.
    C2Bump,
    /// `|sin φ|³ + cos(φ)/2`, Fourier basis.
    PeriodicC2,
    /// `e^{x₁ + x₂x₃/2}` on the sphere, Laplace basis.
    SphereExp,
    /// `|x₃|³` on the sphere, Laplace basis.
    SphereAbsCubed,
}

impl TargetFunction {
    pub fn basis(self) -> Basis {
        match self {
            TargetFunction::GaussianBump | TargetFunction::C2Bump => Basis::Hermite,
            TargetFunction::PeriodicC2 => Basis::Fourier,
            TargetFunction::SphereExp | TargetFunction::SphereAbsCubed => Basis::Laplace,
        }
    }
}

fn default_grid() -> usize {
    601
}

fn default_domain() -> [f64; 2] {
    [-3.0, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxScenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub basis: Basis,
    pub function: TargetFunction,
    pub orders: Vec<usize>,
    /// Grid points per axis (per angle on the sphere) for the sup norms.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Interval for the Hermite error grid.
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
}

/// Any scenario that carries a schema version and a seed.
pub trait Scenario: Serialize + DeserializeOwned {
    const COMMAND: &'static str;

    fn schema_version(&self) -> u32;
    fn seed_mut(&mut self) -> &mut u64;
}

macro_rules! scenario {
    ($t:ty, $name:literal) => {
        impl Scenario for $t {
            const COMMAND: &'static str = $name;

            fn schema_version(&self) -> u32 {
                self.schema_version
            }

            fn seed_mut(&mut self) -> &mut u64 {
                &mut self.seed
            }
        }
    };
}

scenario!(SteerScenario, "steer");
scenario!(TrainScenario, "train");
scenario!(ApproxScenario, "approx");

/// Parses a scenario; `.toml` files are TOML, anything else is JSON.
pub fn parse<S: Scenario>(text: &str, toml_format: bool) -> CliResult<S> {
    let scenario: S = if toml_format {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid scenario: {e}")))?
    } else {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid scenario: {e}")))?
    };
    if scenario.schema_version() != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            scenario.schema_version()
        )));
    }
    Ok(scenario)
}

/// Reads a scenario file and applies a seed override.
pub fn load<S: Scenario>(path: &Path, seed: Option<u64>) -> CliResult<S> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let toml_format = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let mut s: S = parse(&text, toml_format)?;
    if let Some(seed) = seed {
        *s.seed_mut() = seed;
    }
    Ok(s)
}

/// SHA-256 of the command name and the resolved settings as canonical JSON.
pub fn config_hash(command: &str, settings: &impl Serialize) -> String {
    let json = serde_json::to_string(settings).expect("settings serialize");
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

pub fn scenario_hash<S: Scenario>(s: &S) -> String {
    config_hash(S::COMMAND, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const STEER: &str = r#"{
        "schema_version": 1,
        "family": "gh:2",
        "horizon": 1.0,
        "steps": 20,
        "beta": 1e-4,
        "sources": {"random": {"count": 3, "scale": 1.0}},
        "targets": {"points": [[0, 0], [1, 0], [0, 1]]}
    }"#;

    #[test]
    fn steer_defaults_fill_in() {
        let s: SteerScenario = parse(STEER, false).unwrap();
        assert_eq!(s.threshold, 1e-2);
        assert_eq!(s.flow.substeps, 4);
        assert_eq!(s.optimizer.max_iter, 500);
        assert_eq!(s.output, OutputMap::Identity);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = STEER.replace("\"beta\"", "\"betta\": 1, \"beta\"");
        assert!(matches!(parse::<SteerScenario>(&bad, false), Err(CliError::Config(_))));
        let nested = STEER.replace("\"steps\": 20", "\"steps\": 20, \"optimizer\": {\"lr\": 1}");
        assert!(parse::<SteerScenario>(&nested, false).is_err());
    }

    #[test]
    fn schema_version_checked() {
        let v2 = STEER.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(parse::<SteerScenario>(&v2, false).is_err());
        let missing = STEER.replace("\"schema_version\": 1,", "");
        assert!(parse::<SteerScenario>(&missing, false).is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            schema_version = 1
            family = "gh:2"
            horizon = 1.0
            steps = 20
            beta = 1e-4
            sources = { random = { count = 3, scale = 1.0 } }
            targets = { points = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] }
        "#;
        let a: SteerScenario = parse(toml_text, true).unwrap();
        let b: SteerScenario = parse(STEER, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(scenario_hash(&a), scenario_hash(&b));
    }

    #[test]
    fn hash_tracks_seed() {
        let a: SteerScenario = parse(STEER, false).unwrap();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(scenario_hash(&a), scenario_hash(&b));
        assert_eq!(scenario_hash(&a).len(), 64);
    }

    #[test]
    fn train_dataset_variants() {
        let t: TrainScenario = parse(
            r#"{"schema_version":1,"dataset":{"two-moons":{"n":10,"noise":0.1,"scale":2.0}},
                "horizon":1.0,"steps":10,"beta":1e-4}"#,
            false,
        )
        .unwrap();
        assert_eq!(t.nu, vec![0.0]);
        assert_eq!(t.tolerance, 0.25);
        assert!(matches!(t.dataset, DatasetSpec::TwoMoons { n: 10, .. }));
    }

    #[test]
    fn approx_functions_know_their_basis() {
        assert_eq!(TargetFunction::PeriodicC2.basis(), Basis::Fourier);
        assert_eq!(TargetFunction::C2Bump.basis(), Basis::Hermite);
        assert_eq!(TargetFunction::SphereExp.basis(), Basis::Laplace);
    }
}
