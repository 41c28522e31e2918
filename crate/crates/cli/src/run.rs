//! Problem assembly from a [`RunConfig`], validation, solving, and output files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::time::{Duration, Instant};

use nash_core::linops::LinOp;
use nash_core::problems::{self, BuildError, JointObjective, MinimizationBlock, QuadraticPlayer, QuadraticTerm};
use nash_core::smooth::CouplingGradient;
use nash_core::{
    solve, validate_params, validate_problem, NonsmoothTerm, ProblemSpec, Relaxation, Schedule, SmoothTerm, SolveResult,
    SolveStatus, SolverError, SolverParams, StepSchedule,
};

use crate::config::{Matrix, ObjectiveConfig, ProblemConfig, RunConfig, ScheduleKindConfig, StepConfig, TermConfig};
use crate::trace::write_trace;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_MAX_ITERS: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_ABORTED: i32 = 4;

const VALIDATION_SAMPLES: usize = 100;
const VALIDATION_SEED: u64 = 17;
/// Ticks over which step schedules and the block schedule are audited.
const AUDIT_HORIZON: usize = 1000;

#[derive(Debug)]
pub enum Outcome {
    Solved { result: Box<SolveResult<f64>>, elapsed: Duration },
    Refused(String),
    Aborted(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Solved { result, .. } => match result.status {
                SolveStatus::Converged => EXIT_CONVERGED,
                SolveStatus::MaxIters => EXIT_MAX_ITERS,
            },
            Outcome::Refused(_) => EXIT_REFUSED,
            Outcome::Aborted(_) => EXIT_ABORTED,
        }
    }
}

fn matrix(m: &Matrix) -> LinOp<f64> {
    LinOp::dense(m.rows as usize, m.cols as usize, m.data.clone()).expect("shape checked when parsing")
}

fn term(t: &TermConfig) -> NonsmoothTerm<f64> {
    match t {
        TermConfig::Zero => NonsmoothTerm::Zero,
        TermConfig::Box { lower, upper } => NonsmoothTerm::boxed(lower.clone(), upper.clone()),
        TermConfig::Ball { center, radius } => NonsmoothTerm::Ball { center: center.clone(), radius: *radius },
        TermConfig::Orthant { r } => NonsmoothTerm::ShiftedOrthant { r: r.clone() },
        TermConfig::Simplex => NonsmoothTerm::Simplex,
        TermConfig::Singleton { point } => NonsmoothTerm::Singleton(point.clone()),
        TermConfig::L1 { weight } => NonsmoothTerm::L1 { weight: *weight },
    }
}

pub fn build_problem(problem: &ProblemConfig) -> Result<ProblemSpec<f64>, BuildError> {
    let spec = match problem {
        ProblemConfig::QuadraticCoupling { dim, players } => {
            let dim = *dim as usize;
            let players = players
                .iter()
                .map(|p| QuadraticPlayer {
                    phi: term(&p.phi),
                    psi: SmoothTerm::Zero,
                    alpha: 0.0,
                    m: LinOp::identity(dim),
                    terms: p.terms.iter().map(|t| QuadraticTerm { kappa: t.kappa, omega: t.omega.clone() }).collect(),
                })
                .collect();
            problems::build_quadratic_coupling(dim, players)?.0
        }
        ProblemConfig::MatrixGame { payoff, chi } => {
            let (r, c) = (payoff.rows as usize, payoff.cols as usize);
            let rows: Vec<Vec<f64>> = (0..r).map(|i| payoff.data[i * c..(i + 1) * c].to_vec()).collect();
            problems::matrix_game(&rows, *chi)?.0
        }
        ProblemConfig::SharedConstraint { players, rhs } => {
            let dims: Vec<usize> = players.iter().map(|p| p.dim as usize).collect();
            let n: usize = dims.iter().sum();
            let offset: Vec<f64> = players.iter().flat_map(|p| p.target.iter().map(|t| -t)).collect();
            if offset.len() != n {
                return Err(BuildError::Dimension(format!("targets have {} entries for total dimension {n}", offset.len())));
            }
            let costs = CouplingGradient::affine(dims, LinOp::identity(n), offset, 1.0);
            problems::build_shared_constraint(
                players.iter().map(|p| term(&p.phi)).collect(),
                costs,
                vec![1.0; players.len()],
                players.iter().map(|p| matrix(&p.row)).collect(),
                rhs.clone(),
            )?
            .0
        }
        ProblemConfig::Minimization { blocks, objective } => {
            let blocks = blocks
                .iter()
                .map(|b| MinimizationBlock {
                    phi: term(&b.phi),
                    psi: SmoothTerm::Zero,
                    alpha: 0.0,
                    m: LinOp::identity(b.dim as usize),
                })
                .collect();
            let objective = match objective {
                ObjectiveConfig::LeastSquares { a, b } => JointObjective::LeastSquares { a: matrix(a), b: b.clone() },
                ObjectiveConfig::Quadratic { hessian, linear } => {
                    JointObjective::Quadratic { hessian: matrix(hessian), linear: linear.clone() }
                }
            };
            problems::build_minimization(blocks, objective, vec![], 1.0)?.0
        }
    };
    Ok(spec)
}

fn steps(config: &StepConfig) -> StepSchedule<f64> {
    match config {
        StepConfig::Scalar(v) => StepSchedule::Constant(*v),
        StepConfig::PerBlock(v) => StepSchedule::PerBlock(v.clone()),
    }
}

pub fn build_params(config: &RunConfig, spec: &ProblemSpec<f64>) -> SolverParams<f64> {
    let p = &config.params;
    let mut params = SolverParams::with_eta(spec, p.epsilon, p.eta);
    if let Some(g) = &p.gamma {
        params.gamma = steps(g);
    }
    if let Some(m) = &p.mu {
        params.mu = steps(m);
    }
    if let Some(n) = &p.nu {
        params.nu = steps(n);
    }
    params.sigma = steps(&p.sigma);
    params.rho = steps(&p.rho);
    params.lambda = Relaxation::Constant(p.lambda);
    params.max_iters = p.max_iters;
    params.tol = p.tol;
    params.stagnation_window = p.stagnation_window;
    params.parallel = p.parallel;
    params.max_lag = config.schedule.max_lag;
    params.window = config.schedule.window;
    params
}

pub fn build_schedule(config: &RunConfig) -> Schedule {
    let s = &config.schedule;
    match s.kind {
        ScheduleKindConfig::Sync => Schedule::synchronous(),
        ScheduleKindConfig::Cyclic => Schedule::cyclic(s.block_size, s.window),
        ScheduleKindConfig::Random => Schedule::random(s.seed, s.activation_prob, s.max_lag, s.window),
    }
}

/// Validate, then solve. Nothing is written.
pub fn execute(config: &RunConfig) -> Outcome {
    let spec = match build_problem(&config.problem) {
        Ok(s) => s,
        Err(e) => return Outcome::Refused(e.to_string()),
    };
    let params = build_params(config, &spec);
    let schedule = build_schedule(config);
    let mut report = validate_problem(&spec, VALIDATION_SAMPLES, VALIDATION_SEED);
    report.extend(validate_params(&spec, &params, AUDIT_HORIZON));
    let mut refusal = String::new();
    if !report.is_empty() {
        refusal.push_str(&report.to_string());
    }
    let audit = schedule.audit(AUDIT_HORIZON, spec.num_players(), spec.num_couplings());
    if !audit.is_empty() {
        refusal.push_str(&audit.to_string());
    }
    if !refusal.is_empty() {
        return Outcome::Refused(refusal);
    }
    let start = Instant::now();
    match solve(&spec, &params, &schedule, None) {
        Ok(result) => Outcome::Solved { result: Box::new(result), elapsed: start.elapsed() },
        Err(e @ SolverError::NumericalAbort { .. }) => Outcome::Aborted(e.to_string()),
        Err(e) => Outcome::Refused(e.to_string()),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_summary<W: Write>(mut out: W, config: &RunConfig, outcome: &Outcome) -> io::Result<()> {
    match outcome {
        Outcome::Solved { result, elapsed } => {
            let status = match result.status {
                SolveStatus::Converged => "converged",
                SolveStatus::MaxIters => "max_iters",
            };
            writeln!(out, "status: {status}")?;
            writeln!(out, "ticks: {}", result.iterations())?;
            writeln!(out, "wall_time_s: {:.6}", elapsed.as_secs_f64())?;
            writeln!(out, "stagnated: {}", result.stagnated)?;
            for (i, x) in result.x().iter().enumerate() {
                let xs: Vec<String> = x.iter().map(|v| num(*v)).collect();
                writeln!(out, "x[{i}]: {}", xs.join(" "))?;
            }
            for (k, v) in result.tuple.v_star.iter().enumerate() {
                let vs: Vec<String> = v.iter().map(|v| num(*v)).collect();
                writeln!(out, "v_star[{k}]: {}", vs.join(" "))?;
            }
            let c = &result.certificate;
            let list = |v: &[f64]| v.iter().map(|r| num(*r)).collect::<Vec<_>>().join(" ");
            let opt = |v: &[Option<f64>]| v.iter().map(|r| r.map_or("-".to_string(), num)).collect::<Vec<_>>().join(" ");
            writeln!(out, "residual.player_prox: {}", list(&c.player_prox))?;
            writeln!(out, "residual.player_dual: {}", list(&c.player_dual))?;
            writeln!(out, "residual.coupling_inclusion: {}", list(&c.coupling_inclusion))?;
            writeln!(out, "residual.player_feasibility: {}", opt(&c.player_feasibility))?;
            writeln!(out, "residual.coupling_feasibility: {}", opt(&c.coupling_feasibility))?;
            writeln!(out, "residual.max: {}", num(c.max_residual))?;
        }
        Outcome::Refused(why) => {
            writeln!(out, "status: refused")?;
            writeln!(out, "reason:\n{why}")?;
        }
        Outcome::Aborted(why) => {
            writeln!(out, "status: aborted")?;
            writeln!(out, "reason: {why}")?;
        }
    }
    writeln!(out, "config:")?;
    writeln!(out, "{}", config.to_canonical())
}

/// [`execute`], then write the trace and summary requested by `config.output`.
pub fn run(config: &RunConfig) -> io::Result<Outcome> {
    let outcome = execute(config);
    if let (Some(path), Outcome::Solved { result, .. }) = (&config.output.trace, &outcome) {
        let file = BufWriter::new(File::create(path)?);
        write_trace(file, &result.reports).map_err(io::Error::other)?;
    }
    if let Some(path) = &config.output.summary {
        let mut file = BufWriter::new(File::create(path)?);
        write_summary(&mut file, config, &outcome)?;
        file.flush()?;
    }
    Ok(outcome)
}
