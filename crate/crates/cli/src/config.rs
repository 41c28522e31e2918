//! Run configuration: a JSON document with `problem`, `schedule`, `params` and
//! `output` sections. See `docs/config.md` for the grammar.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unknown problem family `{0}`")]
    UnknownFamily(String),
    #[error("invalid configuration: {0}")]
    Semantic(String),
}

pub const FAMILIES: [&str; 4] = ["quadratic_coupling", "matrix_game", "shared_constraint", "minimization"];

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub rows: i64,
    pub cols: i64,
    pub data: Vec<f64>,
}

/// Nonsmooth term `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermConfig {
    Zero,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Orthant { r: Vec<f64> },
    Simplex,
    Singleton { point: Vec<f64> },
    L1 { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingTermConfig {
    pub kappa: f64,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPlayerConfig {
    pub phi: TermConfig,
    pub terms: Vec<CouplingTermConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedPlayerConfig {
    pub dim: i64,
    pub phi: TermConfig,
    pub target: Vec<f64>,
    /// Block `L_{1,i}` of the constraint, `m × dim`.
    pub row: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub dim: i64,
    pub phi: TermConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    LeastSquares { a: Matrix, b: Vec<f64> },
    Quadratic { hessian: Matrix, linear: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    QuadraticCoupling {
        dim: i64,
        players: Vec<QuadraticPlayerConfig>,
    },
    MatrixGame {
        payoff: Matrix,
        #[serde(default = "one")]
        chi: f64,
    },
    SharedConstraint {
        players: Vec<SharedPlayerConfig>,
        rhs: Vec<f64>,
    },
    Minimization {
        blocks: Vec<BlockConfig>,
        objective: ObjectiveConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKindConfig {
    Sync,
    Cyclic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKindConfig,
    pub seed: u64,
    /// Maximal lag `D`.
    pub max_lag: usize,
    /// Covering window `P`.
    pub window: usize,
    pub activation_prob: f64,
    pub block_size: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { kind: ScheduleKindConfig::Sync, seed: 0, max_lag: 0, window: 4, activation_prob: 0.5, block_size: 1 }
    }
}

/// A step size shared by all blocks, or one per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepConfig {
    Scalar(f64),
    PerBlock(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub lambda: f64,
    /// `None` selects the largest admissible value, `1/(constant + η)`.
    pub gamma: Option<StepConfig>,
    pub mu: Option<StepConfig>,
    pub nu: Option<StepConfig>,
    pub sigma: StepConfig,
    pub rho: StepConfig,
    pub max_iters: usize,
    pub tol: f64,
    pub stagnation_window: Option<usize>,
    pub parallel: bool,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            epsilon: nash_core::model::DEFAULT_EPSILON,
            eta: nash_core::model::DEFAULT_ETA,
            lambda: nash_core::model::DEFAULT_LAMBDA,
            gamma: None,
            mu: None,
            nu: None,
            sigma: StepConfig::Scalar(1.0),
            rho: StepConfig::Scalar(1.0),
            max_iters: nash_core::model::DEFAULT_MAX_ITERS,
            tol: nash_core::model::DEFAULT_TOL,
            stagnation_window: None,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

fn parse_error(e: serde_json::Error) -> ConfigError {
    ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses and checks a configuration; omitted sections and fields take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: Value = serde_json::from_str(text).map_err(parse_error)?;
    if let Some(family) = raw.pointer("/problem/family").and_then(Value::as_str) {
        if !FAMILIES.contains(&family) {
            return Err(ConfigError::UnknownFamily(family.to_string()));
        }
    }
    let config: RunConfig = serde_json::from_str(text).map_err(parse_error)?;
    config.check()?;
    Ok(config)
}

impl RunConfig {
    /// Canonical form: pretty JSON with every field present.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Semantic(m));
        let dim_ok = |what: &str, d: i64| if d < 0 { bad(format!("{what} must be nonnegative, got {d}")) } else { Ok(()) };
        let matrix_ok = |what: &str, m: &Matrix| {
            dim_ok(&format!("{what}.rows"), m.rows)?;
            dim_ok(&format!("{what}.cols"), m.cols)?;
            if m.data.len() as i64 != m.rows * m.cols {
                return bad(format!("{what} has {} entries, expected {} x {}", m.data.len(), m.rows, m.cols));
            }
            Ok(())
        };
        match &self.problem {
            ProblemConfig::QuadraticCoupling { dim, .. } => dim_ok("dim", *dim)?,
            ProblemConfig::MatrixGame { payoff, .. } => matrix_ok("payoff", payoff)?,
            ProblemConfig::SharedConstraint { players, .. } => {
                for (i, p) in players.iter().enumerate() {
                    dim_ok(&format!("players[{i}].dim"), p.dim)?;
                    matrix_ok(&format!("players[{i}].row"), &p.row)?;
                }
            }
            ProblemConfig::Minimization { blocks, objective } => {
                for (i, b) in blocks.iter().enumerate() {
                    dim_ok(&format!("blocks[{i}].dim"), b.dim)?;
                }
                match objective {
                    ObjectiveConfig::LeastSquares { a, .. } => matrix_ok("objective.a", a)?,
                    ObjectiveConfig::Quadratic { hessian, .. } => matrix_ok("objective.hessian", hessian)?,
                }
            }
        }
        let s = &self.schedule;
        if !(s.activation_prob > 0.0 && s.activation_prob <= 1.0) {
            return bad(format!("schedule.activation_prob must lie in (0, 1], got {}", s.activation_prob));
        }
        if s.block_size == 0 {
            return bad("schedule.block_size must be positive".into());
        }
        Ok(())
    }
}
