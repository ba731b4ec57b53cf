use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ConfigError;
use crate::expr::{eval, parse_restricted, slope_bounds, Env, Expr, Var};
use crate::mc::{IncrementMode, RegressionBasis};
use crate::model::{Barrier, BarrierPair, Driver, ProblemSpec, TerminalCondition, TimeGrid};
use crate::runner::PenalizationSchedule;

fn default_steps() -> usize {
    100
}

fn none() -> String {
    "none".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Lattice,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub basis_degree: usize,
    pub increments: IncrementMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            seed: 42,
            basis_degree: 4,
            increments: IncrementMode::Coin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub tie_p_to_m: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            p: Vec::new(),
            m: vec![64.0],
            n: vec![64.0],
            tie_p_to_m: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("rbsde-out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// The configuration document, key for key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub driver: String,
    pub growth_k: f64,
    pub terminal: String,
    #[serde(default = "none")]
    pub lower: String,
    #[serde(default = "none")]
    pub upper: String,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_solver() -> SolverKind {
    SolverKind::Lattice
}

/// Everything a command needs besides the problem itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub config: RunConfig,
    pub schedule: PenalizationSchedule,
    pub basis: RegressionBasis,
    /// SHA-256 of the canonical JSON text (keys sorted).
    pub config_hash: String,
}

impl RunPlan {
    pub fn out_dir(&self) -> &Path {
        &self.config.output.dir
    }
}

/// Digest of a JSON document that ignores key order and whitespace.
pub fn canonical_hash(value: &serde_json::Value) -> String {
    let text = serde_json::to_string(value).expect("JSON values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn compile(field: &'static str, source: &str, allowed: &[Var]) -> Result<Expr, ConfigError> {
    parse_restricted(source, allowed).map_err(|source| ConfigError::Expr { field, source })
}

fn barrier(field: &'static str, source: &str) -> Result<Barrier, ConfigError> {
    if source.trim() == "none" {
        return Ok(Barrier::Unbounded);
    }
    let e = compile(field, source, &[Var::T, Var::X])?;
    Ok(Barrier::from_fn(move |t, x| {
        eval(&e, &Env::new().with(Var::T, t).with(Var::X, x)).unwrap_or(f64::NAN)
    }))
}

/// Builds the problem described by a parsed config.
pub fn build_problem(config: &RunConfig) -> Result<ProblemSpec, ConfigError> {
    let grid = TimeGrid::new(config.horizon, config.steps)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if !(config.growth_k >= 0.0 && config.growth_k.is_finite()) {
        return Err(ConfigError::Invalid(format!(
            "growth_k must be finite and nonnegative, got {}",
            config.growth_k
        )));
    }
    let fe = compile("driver", &config.driver, &[Var::T, Var::Y, Var::Z])?;
    let te = compile("terminal", &config.terminal, &[Var::X])?;
    let vars = crate::expr::free_vars(&fe);
    let slopes = slope_bounds(&fe);
    let label = config.driver.clone();
    let mut driver = Driver::new(config.growth_k, move |t, y, z| {
        eval(
            &fe,
            &Env::new().with(Var::T, t).with(Var::Y, y).with(Var::Z, z),
        )
        .unwrap_or(f64::NAN)
    })
    .with_dependence(vars.contains(&Var::Y), vars.contains(&Var::Z))
    .with_label(label);
    if let Some((ly, lz)) = slopes {
        driver = driver.with_lipschitz(ly.max(lz));
    }
    let terminal =
        TerminalCondition::new(move |x| eval(&te, &Env::new().with(Var::X, x)).unwrap_or(f64::NAN));
    let barriers = BarrierPair::new(
        barrier("lower", &config.lower)?,
        barrier("upper", &config.upper)?,
    );
    Ok(ProblemSpec::new(grid, driver, barriers, terminal))
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<(ProblemSpec, RunPlan), ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let config: RunConfig =
        serde_json::from_value(value.clone()).map_err(|e| ConfigError::Schema(e.to_string()))?;
    let spec = build_problem(&config)?;
    let pc = &config.penalty;
    let schedule =
        PenalizationSchedule::new(pc.p.clone(), pc.m.clone(), pc.n.clone(), pc.tie_p_to_m)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    schedule
        .check_levels(config.growth_k)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if config.mc.paths == 0 {
        return Err(ConfigError::Invalid("mc.paths must be positive".into()));
    }
    let basis = RegressionBasis::new(config.mc.basis_degree);
    let basis = if config.lower.trim() == "none" {
        basis
    } else {
        basis.with_barrier_feature()
    };
    Ok((
        spec,
        RunPlan {
            schedule,
            basis,
            config_hash: canonical_hash(&value),
            config,
        },
    ))
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<(ProblemSpec, RunPlan), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprError;

    const MINIMAL: &str = r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x"}"#;

    #[test]
    fn minimal_defaults() {
        let (spec, plan) = parse_config(MINIMAL).unwrap();
        assert_eq!(spec.grid.steps(), 100);
        assert_eq!(plan.config.solver, SolverKind::Lattice);
        assert_eq!(plan.config.output.formats, vec![Format::Csv, Format::Json]);
        assert_eq!(plan.schedule.cells().len(), 1);
        assert_eq!(plan.config.mc, McConfig::default());
        assert!(spec.barriers.lower.is_unbounded());
        assert_eq!(spec.driver.lipschitz(), Some(0.0));
    }

    #[test]
    fn barrier_cannot_use_y() {
        let text = r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","lower":"y"}"#;
        assert!(matches!(
            parse_config(text),
            Err(ConfigError::Expr {
                field: "lower",
                source: ExprError::Disallowed { .. }
            })
        ));
    }

    #[test]
    fn three_cell_schedule() {
        let text =
            r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","penalty":{"m":[4,16,64]}}"#;
        let (_, plan) = parse_config(text).unwrap();
        assert_eq!(plan.schedule.cells().len(), 3);
    }

    #[test]
    fn error_categories() {
        assert!(matches!(
            parse_config("{\"horizon\": 1,"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        let unknown = r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","colour":3}"#;
        assert!(matches!(parse_config(unknown), Err(ConfigError::Schema(_))));
        let typed = r#"{"horizon":"one","driver":"0","growth_k":1,"terminal":"x"}"#;
        assert!(matches!(parse_config(typed), Err(ConfigError::Schema(_))));
        let nested = r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","mc":{"path":3}}"#;
        assert!(matches!(parse_config(nested), Err(ConfigError::Schema(_))));
        let bad_expr = r#"{"horizon":1,"driver":"y +","growth_k":1,"terminal":"x"}"#;
        assert!(matches!(
            parse_config(bad_expr),
            Err(ConfigError::Expr {
                field: "driver",
                ..
            })
        ));
    }

    #[test]
    fn hash_ignores_key_order() {
        let a =
            r#"{"horizon":1,"driver":"0","growth_k":1,"terminal":"x","penalty":{"m":[4],"n":[8]}}"#;
        let b = r#"{ "penalty": {"n":[8], "m":[4]}, "terminal":"x", "growth_k":1, "driver":"0", "horizon":1 }"#;
        assert_eq!(
            parse_config(a).unwrap().1.config_hash,
            parse_config(b).unwrap().1.config_hash
        );
        assert_ne!(
            parse_config(a).unwrap().1.config_hash,
            parse_config(MINIMAL).unwrap().1.config_hash
        );
    }

    #[test]
    fn driver_expression_evaluates() {
        let text = r#"{"horizon":1,"driver":"-0.05*y","growth_k":0.05,"terminal":"pos(1 - exp(x))","lower":"pos(1 - exp(x - 0.5*t))"}"#;
        let (spec, _) = parse_config(text).unwrap();
        assert_eq!(spec.driver.eval(0.0, 2.0, 0.0), -0.1);
        assert_eq!(spec.driver.lipschitz(), Some(0.05));
        assert_eq!(spec.terminal.eval(0.0), 0.0);
        let l = spec
            .barriers
            .lower
            .at_point(1.0, -1.0, None)
            .unwrap()
            .unwrap();
        assert!((l - (1.0 - (-1.5f64).exp())).abs() < 1e-15);
    }
}
