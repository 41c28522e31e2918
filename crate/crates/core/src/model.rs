//! Problem model: players, couplings, the coupling gradient, solver parameters,
//! and the advisory validation of every hypothesis that can be checked by sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linops::LinOp;
use crate::prox::{NonsmoothTerm, ProxError};
use crate::scalar::{dot, lit, norm, sub, Scalar};
use crate::smooth::{CouplingGradient, SmoothTerm};

/// Player `i`: strategy space `H_i`, image space `K_i = M_i(H_i)`-side, and its losses.
#[derive(Debug, Clone)]
pub struct PlayerBlock<T: Scalar = f64> {
    pub dim_h: usize,
    pub dim_k: usize,
    pub phi: NonsmoothTerm<T>,
    pub psi: SmoothTerm<T>,
    /// Lipschitz constant of `∇ψ_i`.
    pub alpha: T,
    pub m: LinOp<T>,
    pub chi: T,
}

impl<T: Scalar> PlayerBlock<T> {
    /// Player with `M_i = Id`, `ψ_i = 0`.
    pub fn simple(dim: usize, phi: NonsmoothTerm<T>, chi: T) -> Self {
        Self {
            dim_h: dim,
            dim_k: dim,
            phi,
            psi: SmoothTerm::Zero,
            alpha: T::zero(),
            m: LinOp::identity(dim),
            chi,
        }
    }
}

/// Coupling `k`: `(g_k + h_k)(Σ_i L_{k,i} x_i)` shared by all players.
#[derive(Debug, Clone)]
pub struct CouplingBlock<T: Scalar = f64> {
    pub dim_g: usize,
    pub g: NonsmoothTerm<T>,
    pub h: SmoothTerm<T>,
    /// Lipschitz constant of `∇h_k`.
    pub beta: T,
    /// Absent players contribute the zero operator.
    pub l: BTreeMap<usize, LinOp<T>>,
}

impl<T: Scalar> CouplingBlock<T> {
    /// `Σ_i L_{k,i} x_i` given per-player blocks.
    pub fn mix<V: AsRef<[T]>>(&self, x: &[V]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim_g];
        for (i, op) in &self.l {
            op.apply_add(x[*i].as_ref(), &mut out);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec<T: Scalar = f64> {
    pub players: Vec<PlayerBlock<T>>,
    pub couplings: Vec<CouplingBlock<T>>,
    pub q: CouplingGradient<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(
        players: Vec<PlayerBlock<T>>,
        couplings: Vec<CouplingBlock<T>>,
        q: CouplingGradient<T>,
    ) -> Self {
        Self { players, couplings, q }
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn num_couplings(&self) -> usize {
        self.couplings.len()
    }

    pub fn dims_h(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.dim_h).collect()
    }

    pub fn dims_k(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.dim_k).collect()
    }

    pub fn dims_g(&self) -> Vec<usize> {
        self.couplings.iter().map(|c| c.dim_g).collect()
    }

    /// `M x = (M_i x_i)_i`, stacked.
    pub fn apply_m<V: AsRef<[T]>>(&self, x: &[V]) -> Vec<T> {
        let mut out = vec![T::zero(); self.q.total_dim()];
        let offsets = self.q.offsets();
        for (i, p) in self.players.iter().enumerate() {
            p.m.apply_add(x[i].as_ref(), &mut out[offsets[i]..offsets[i + 1]]);
        }
        out
    }

    /// Splits a stacked `K`-vector into per-player blocks.
    pub fn split_k(&self, stacked: &[T]) -> Vec<Vec<T>> {
        let offsets = self.q.offsets();
        (0..self.players.len()).map(|i| stacked[offsets[i]..offsets[i + 1]].to_vec()).collect()
    }
}

/// Per-block step-size schedule `(block, n) ↦ value`.
#[derive(Clone)]
pub enum StepSchedule<T: Scalar = f64> {
    Constant(T),
    PerBlock(Vec<T>),
    Custom(Arc<dyn Fn(usize, usize) -> T + Send + Sync>),
}

impl<T: Scalar> StepSchedule<T> {
    pub fn at(&self, block: usize, n: usize) -> T {
        match self {
            StepSchedule::Constant(v) => *v,
            StepSchedule::PerBlock(v) => v[block],
            StepSchedule::Custom(f) => f(block, n),
        }
    }
}

impl<T: Scalar> fmt::Debug for StepSchedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Constant(v) => write!(f, "Constant({v})"),
            StepSchedule::PerBlock(v) => write!(f, "PerBlock({v:?})"),
            StepSchedule::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Relaxation schedule `n ↦ λ_n`.
#[derive(Clone)]
pub enum Relaxation<T: Scalar = f64> {
    Constant(T),
    Custom(Arc<dyn Fn(usize) -> T + Send + Sync>),
}

impl<T: Scalar> Relaxation<T> {
    pub fn at(&self, n: usize) -> T {
        match self {
            Relaxation::Constant(v) => *v,
            Relaxation::Custom(f) => f(n),
        }
    }
}

impl<T: Scalar> fmt::Debug for Relaxation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relaxation::Constant(v) => write!(f, "Constant({v})"),
            Relaxation::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverParams<T: Scalar = f64> {
    pub epsilon: T,
    pub eta: T,
    /// Maximal lag `D`.
    pub max_lag: usize,
    /// Quasi-cyclic window `P`.
    pub window: usize,
    pub lambda: Relaxation<T>,
    pub gamma: StepSchedule<T>,
    pub mu: StepSchedule<T>,
    pub sigma: StepSchedule<T>,
    pub nu: StepSchedule<T>,
    pub rho: StepSchedule<T>,
    pub max_iters: usize,
    pub tol: T,
    /// Report stagnation after this many consecutive ticks without an update.
    pub stagnation_window: Option<usize>,
    /// Evaluate the block computations of a tick on the rayon pool.
    pub parallel: bool,
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_LAMBDA: f64 = 1.8;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

impl<T: Scalar> SolverParams<T> {
    /// Defaults: ε = 0.01, η = 0.1, λ = 1.8, σ = ϱ = 1, and the largest admissible
    /// γ_i = 1/(α_i+η), μ_i = 1/(χ_i+η), ν_k = 1/(β_k+η).
    pub fn for_problem(spec: &ProblemSpec<T>) -> Self {
        Self::with_eta(spec, lit(DEFAULT_EPSILON), lit(DEFAULT_ETA))
    }

    pub fn with_eta(spec: &ProblemSpec<T>, epsilon: T, eta: T) -> Self {
        let inv = |c: T| T::one() / (c + eta);
        Self {
            epsilon,
            eta,
            max_lag: 0,
            window: 0,
            lambda: Relaxation::Constant(lit(DEFAULT_LAMBDA)),
            gamma: StepSchedule::PerBlock(spec.players.iter().map(|p| inv(p.alpha)).collect()),
            mu: StepSchedule::PerBlock(spec.players.iter().map(|p| inv(p.chi)).collect()),
            sigma: StepSchedule::Constant(T::one()),
            nu: StepSchedule::PerBlock(spec.couplings.iter().map(|c| inv(c.beta)).collect()),
            rho: StepSchedule::Constant(T::one()),
            max_iters: DEFAULT_MAX_ITERS,
            tol: lit(DEFAULT_TOL),
            stagnation_window: None,
            parallel: false,
        }
    }
}

/// One detected violation of a modelling hypothesis or parameter condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoPlayers,
    Dimension(String),
    InvalidTerm { context: String, error: ProxError },
    NegativeConstant { context: String },
    AdjointInconsistent { context: String, error: f64 },
    GradientLipschitz { context: String, ratio: f64, bound: f64 },
    GradientMismatch { context: String, rel_error: f64 },
    QNotMonotone { inner: f64 },
    QChiBound { inner: f64, bound: f64 },
    QLipschitz { ratio: f64, kappa: f64 },
    EpsilonRange { epsilon: f64 },
    EtaNonPositive { eta: f64 },
    EpsilonTooLarge { inv_epsilon: f64, required: f64 },
    StepOutOfRange { schedule: &'static str, block: usize, n: usize, value: f64, lower: f64, upper: f64 },
    RelaxationOutOfRange { n: usize, value: f64 },
    BadStopping(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoPlayers => write!(f, "problem has no players"),
            Violation::Dimension(s) => write!(f, "dimension mismatch: {s}"),
            Violation::InvalidTerm { context, error } => write!(f, "{context}: {error}"),
            Violation::NegativeConstant { context } => {
                write!(f, "{context} must be nonnegative (positive for chi)")
            }
            Violation::AdjointInconsistent { context, error } => {
                write!(f, "{context}: adjoint inconsistency {error:.3e}")
            }
            Violation::GradientLipschitz { context, ratio, bound } => {
                write!(f, "{context}: sampled gradient Lipschitz ratio {ratio:.6e} exceeds {bound:.6e}")
            }
            Violation::GradientMismatch { context, rel_error } => {
                write!(f, "{context}: gradient differs from finite differences (rel {rel_error:.3e})")
            }
            Violation::QNotMonotone { inner } => {
                write!(f, "Q is not monotone: sampled <dy, dQ> = {inner:.6e}")
            }
            Violation::QChiBound { inner, bound } => {
                write!(f, "chi bound violated: <dy, dQ> = {inner:.6e} > {bound:.6e}")
            }
            Violation::QLipschitz { ratio, kappa } => {
                write!(f, "Q Lipschitz ratio {ratio:.6e} exceeds kappa {kappa:.6e}")
            }
            Violation::EpsilonRange { epsilon } => write!(f, "epsilon {epsilon} not in (0, 1)"),
            Violation::EtaNonPositive { eta } => write!(f, "eta {eta} must be positive"),
            Violation::EpsilonTooLarge { inv_epsilon, required } => write!(
                f,
                "1/epsilon = {inv_epsilon} must exceed max(alpha+eta, beta+eta, chi+eta) = {required}"
            ),
            Violation::StepOutOfRange { schedule, block, n, value, lower, upper } => write!(
                f,
                "{schedule}[{block}] at n = {n} is {value}, outside [{lower}, {upper}]"
            ),
            Violation::RelaxationOutOfRange { n, value } => {
                write!(f, "lambda at n = {n} is {value}, outside [epsilon, 2 - epsilon]")
            }
            Violation::BadStopping(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn has_dimension_errors(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::Dimension(_) | Violation::NoPlayers))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Relative tolerance that is `base` in double precision and scales with machine
/// epsilon for coarser types.
fn rel_tol<T: Scalar>(base: f64) -> T {
    let eps = to_f64(T::epsilon());
    lit(base.max(eps * base / f64::EPSILON).min(1e-2))
}

fn random_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<T> {
    (0..n).map(|_| lit(scale * rng.gen_range(-1.0..1.0))).collect()
}

/// Structural checks only: player count, dimensions, term definitions, constants.
pub fn check_structure<T: Scalar>(spec: &ProblemSpec<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.players.is_empty() {
        report.push(Violation::NoPlayers);
    }
    let q_dims = spec.q.dims();
    if q_dims.len() != spec.players.len() {
        report.push(Violation::Dimension(format!(
            "Q stacks {} blocks but there are {} players",
            q_dims.len(),
            spec.players.len()
        )));
    }
    for (i, p) in spec.players.iter().enumerate() {
        if p.dim_h == 0 || p.dim_k == 0 {
            report.push(Violation::Dimension(format!("player {i} has a zero dimension")));
        }
        if p.m.in_dim() != p.dim_h || p.m.out_dim() != p.dim_k {
            report.push(Violation::Dimension(format!(
                "player {i}: M maps {} -> {}, expected {} -> {}",
                p.m.in_dim(),
                p.m.out_dim(),
                p.dim_h,
                p.dim_k
            )));
        }
        if let Some(&d) = q_dims.get(i) {
            if d != p.dim_k {
                report.push(Violation::Dimension(format!(
                    "player {i}: Q block has dimension {d}, K_i has {}",
                    p.dim_k
                )));
            }
        }
        if let Some(d) = p.phi.dim() {
            if d != p.dim_h {
                report.push(Violation::Dimension(format!(
                    "player {i}: phi has dimension {d}, H_i has {}",
                    p.dim_h
                )));
            }
        }
        if let Some(d) = p.psi.dim() {
            if d != p.dim_h {
                report.push(Violation::Dimension(format!(
                    "player {i}: psi has dimension {d}, H_i has {}",
                    p.dim_h
                )));
            }
        }
        if let Err(error) = p.phi.validate() {
            report.push(Violation::InvalidTerm { context: format!("player {i} phi"), error });
        }
        if !(p.alpha >= T::zero()) {
            report.push(Violation::NegativeConstant { context: format!("player {i} alpha") });
        }
        if !(p.chi > T::zero()) {
            report.push(Violation::NegativeConstant { context: format!("player {i} chi") });
        }
    }
    let (q_in, q_out, q_off) = spec.q.structural_dims();
    let total = spec.q.total_dim();
    if q_in != total || q_out != total || q_off != total {
        report.push(Violation::Dimension(format!(
            "Q maps {q_in} -> {q_out} with offset {q_off}, stacked K has dimension {total}"
        )));
    }
    for (k, c) in spec.couplings.iter().enumerate() {
        if c.dim_g == 0 {
            report.push(Violation::Dimension(format!("coupling {k} has dimension 0")));
        }
        for (i, op) in &c.l {
            let Some(player) = spec.players.get(*i) else {
                report.push(Violation::Dimension(format!(
                    "coupling {k} references unknown player {i}"
                )));
                continue;
            };
            if op.out_dim() != c.dim_g || op.in_dim() != player.dim_h {
                report.push(Violation::Dimension(format!(
                    "coupling {k}: L[{i}] maps {} -> {}, expected {} -> {}",
                    op.in_dim(),
                    op.out_dim(),
                    player.dim_h,
                    c.dim_g
                )));
            }
        }
        if let Some(d) = c.g.dim() {
            if d != c.dim_g {
                report.push(Violation::Dimension(format!(
                    "coupling {k}: g has dimension {d}, G_k has {}",
                    c.dim_g
                )));
            }
        }
        if let Some(d) = c.h.dim() {
            if d != c.dim_g {
                report.push(Violation::Dimension(format!(
                    "coupling {k}: h has dimension {d}, G_k has {}",
                    c.dim_g
                )));
            }
        }
        if let Err(error) = c.g.validate() {
            report.push(Violation::InvalidTerm { context: format!("coupling {k} g"), error });
        }
        if !(c.beta >= T::zero()) {
            report.push(Violation::NegativeConstant { context: format!("coupling {k} beta") });
        }
    }
    report
}

fn check_adjoint<T: Scalar>(
    op: &LinOp<T>,
    context: &str,
    rng: &mut ChaCha8Rng,
    samples: usize,
    report: &mut ValidationReport,
) {
    let tol: T = rel_tol(1e-12);
    for _ in 0..samples {
        let x = random_vec::<T>(rng, op.in_dim(), 1.0);
        let y = random_vec::<T>(rng, op.out_dim(), 1.0);
        let lx = op.apply(&x).expect("dims checked");
        let lty = op.adjoint_apply(&y).expect("dims checked");
        let (lhs, rhs) = (dot(&lx, &y), dot(&x, &lty));
        let scale = T::one() + norm(&lx) * norm(&y) + norm(&x) * norm(&lty);
        if (lhs - rhs).abs() > tol * scale {
            report.push(Violation::AdjointInconsistent {
                context: context.to_string(),
                error: to_f64((lhs - rhs).abs()),
            });
            return;
        }
    }
}

fn check_smooth<T: Scalar>(
    term: &SmoothTerm<T>,
    dim: usize,
    lipschitz: T,
    context: &str,
    rng: &mut ChaCha8Rng,
    samples: usize,
    report: &mut ValidationReport,
) {
    if term.is_zero() {
        return;
    }
    let tol: T = rel_tol(1e-9);
    for _ in 0..samples {
        let x = random_vec::<T>(rng, dim, 5.0);
        let scale = [1e-3, 1e-1, 3.0][rng.gen_range(0..3)];
        let d = random_vec::<T>(rng, dim, scale);
        let x2: Vec<T> = x.iter().zip(&d).map(|(a, b)| *a + *b).collect();
        let dg = sub(&term.gradient(&x2), &term.gradient(&x));
        let (ng, nd) = (norm(&dg), norm(&sub(&x2, &x)));
        if ng > lipschitz * nd * (T::one() + tol) + tol * T::epsilon() {
            report.push(Violation::GradientLipschitz {
                context: context.to_string(),
                ratio: to_f64(ng / nd),
                bound: to_f64(lipschitz),
            });
            return;
        }
    }
    if let Some(rel_error) = finite_difference_error(|x| term.value(x), |x| term.gradient(x), dim, rng, samples) {
        if rel_error > to_f64(rel_tol::<T>(1e-5)) {
            report.push(Violation::GradientMismatch { context: context.to_string(), rel_error });
        }
    }
}

/// Largest relative error between a gradient and central finite differences of the
/// value, over `samples` random points.
pub fn finite_difference_error<T: Scalar>(
    value: impl Fn(&[T]) -> T,
    gradient: impl Fn(&[T]) -> Vec<T>,
    dim: usize,
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Option<f64> {
    let eps = to_f64(T::epsilon());
    let h = if eps < 1e-10 { 1e-6 } else { eps.cbrt() };
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_vec::<T>(rng, dim, 2.0);
        let g = gradient(&x);
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += lit(h);
            xm[j] -= lit(h);
            let fd = (to_f64(value(&xp)) - to_f64(value(&xm))) / (2.0 * h);
            let gj = to_f64(g[j]);
            let err = (fd - gj).abs() / gj.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst.is_finite().then_some(worst)
}

/// Samples `Q` for monotonicity, the χ-weighted upper bound and the κ Lipschitz bound.
pub fn check_coupling_gradient<T: Scalar>(
    spec: &ProblemSpec<T>,
    rng: &mut ChaCha8Rng,
    samples: usize,
    report: &mut ValidationReport,
) {
    let n = spec.q.total_dim();
    let offsets = spec.q.offsets();
    let tol: T = rel_tol(1e-9);
    let (mut mono, mut chi_bound, mut lip) = (false, false, false);
    for s in 0..samples {
        let scale = [1e-2, 1.0, 10.0][s % 3];
        let y = random_vec::<T>(rng, n, 5.0);
        let y2: Vec<T> = y.iter().map(|v| *v + lit::<T>(scale * rng.gen_range(-1.0..1.0))).collect();
        let dy = sub(&y, &y2);
        let dq = sub(&spec.q.eval(&y), &spec.q.eval(&y2));
        let inner = dot(&dy, &dq);
        let slack = tol * norm(&dy) * norm(&dq);
        if !mono && inner < -slack {
            mono = true;
            report.push(Violation::QNotMonotone { inner: to_f64(inner) });
        }
        let bound: T = spec
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let blk = &dy[offsets[i]..offsets[i + 1]];
                p.chi * dot(blk, blk)
            })
            .sum();
        if !chi_bound && inner > bound * (T::one() + tol) + slack {
            chi_bound = true;
            report.push(Violation::QChiBound { inner: to_f64(inner), bound: to_f64(bound) });
        }
        let kappa = spec.q.lipschitz_kappa;
        if !lip && norm(&dq) > kappa * norm(&dy) * (T::one() + tol) {
            lip = true;
            report.push(Violation::QLipschitz {
                ratio: to_f64(norm(&dq) / norm(&dy)),
                kappa: to_f64(kappa),
            });
        }
    }
    // ∂_i f_i against finite differences of f_i in its own block.
    for i in 0..spec.players.len() {
        let y0 = random_vec::<T>(rng, n, 2.0);
        if spec.q.partial_objective(i, &y0).is_none() {
            break;
        }
        let (lo, hi) = (offsets[i], offsets[i + 1]);
        let embed = |yi: &[T]| {
            let mut y = y0.clone();
            y[lo..hi].copy_from_slice(yi);
            y
        };
        let err = finite_difference_error(
            |yi| spec.q.partial_objective(i, &embed(yi)).unwrap(),
            |yi| spec.q.eval(&embed(yi))[lo..hi].to_vec(),
            hi - lo,
            rng,
            samples.min(20),
        );
        if let Some(rel_error) = err {
            if rel_error > to_f64(rel_tol::<T>(1e-5)) {
                report.push(Violation::GradientMismatch {
                    context: format!("partial gradient of f_{i}"),
                    rel_error,
                });
            }
        }
    }
}

/// Advisory check of the problem hypotheses: dimensions, term definitions, sampled
/// adjoint consistency, gradient Lipschitz bounds and finite differences, and the
/// monotonicity / χ / κ properties of `Q`. Sampled checks are skipped when the
/// structure is inconsistent.
pub fn validate_problem<T: Scalar>(
    spec: &ProblemSpec<T>,
    samples: usize,
    seed: u64,
) -> ValidationReport {
    let mut report = check_structure(spec);
    if report.has_dimension_errors() {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, p) in spec.players.iter().enumerate() {
        check_adjoint(&p.m, &format!("player {i} M"), &mut rng, samples, &mut report);
        check_smooth(&p.psi, p.dim_h, p.alpha, &format!("player {i} psi"), &mut rng, samples, &mut report);
    }
    for (k, c) in spec.couplings.iter().enumerate() {
        for (i, op) in &c.l {
            check_adjoint(op, &format!("coupling {k} L[{i}]"), &mut rng, samples, &mut report);
        }
        check_smooth(&c.h, c.dim_g, c.beta, &format!("coupling {k} h"), &mut rng, samples, &mut report);
    }
    check_coupling_gradient(spec, &mut rng, samples, &mut report);
    report
}

/// Checks `1/ε > max{α_i+η, β_k+η, χ_i+η}` and every schedule against its admissible
/// interval for `n = 0..=horizon`.
pub fn validate_params<T: Scalar>(
    spec: &ProblemSpec<T>,
    params: &SolverParams<T>,
    horizon: usize,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (eps, eta) = (params.epsilon, params.eta);
    if !(eps > T::zero() && eps < T::one()) {
        report.push(Violation::EpsilonRange { epsilon: to_f64(eps) });
        return report;
    }
    if !(eta > T::zero()) {
        report.push(Violation::EtaNonPositive { eta: to_f64(eta) });
        return report;
    }
    let required = spec
        .players
        .iter()
        .flat_map(|p| [p.alpha + eta, p.chi + eta])
        .chain(spec.couplings.iter().map(|c| c.beta + eta))
        .fold(T::neg_infinity(), T::max);
    let inv_eps = T::one() / eps;
    if !(inv_eps > required) {
        report.push(Violation::EpsilonTooLarge {
            inv_epsilon: to_f64(inv_eps),
            required: to_f64(required),
        });
    }
    if params.max_iters == 0 {
        report.push(Violation::BadStopping("max_iters must be positive".into()));
    }
    if !(params.tol > T::zero()) {
        report.push(Violation::BadStopping("tol must be positive".into()));
    }

    let mut check = |schedule: &'static str, sched: &StepSchedule<T>, blocks: &[T]| {
        if let StepSchedule::PerBlock(v) = sched {
            if v.len() != blocks.len() {
                report.push(Violation::Dimension(format!(
                    "{schedule} schedule has {} entries for {} blocks",
                    v.len(),
                    blocks.len()
                )));
                return;
            }
        }
        for (b, &upper) in blocks.iter().enumerate() {
            for n in 0..=horizon {
                let value = sched.at(b, n);
                if !(value >= eps && value <= upper) {
                    report.push(Violation::StepOutOfRange {
                        schedule,
                        block: b,
                        n,
                        value: to_f64(value),
                        lower: to_f64(eps),
                        upper: to_f64(upper),
                    });
                    break;
                }
                // Constant schedules need a single evaluation.
                if !matches!(sched, StepSchedule::Custom(_)) {
                    break;
                }
            }
        }
    };
    let inv = |c: T| T::one() / (c + eta);
    let gamma_ub: Vec<T> = spec.players.iter().map(|p| inv(p.alpha)).collect();
    let mu_ub: Vec<T> = spec.players.iter().map(|p| inv(p.chi)).collect();
    let sigma_ub = vec![inv_eps; spec.players.len()];
    let nu_ub: Vec<T> = spec.couplings.iter().map(|c| inv(c.beta)).collect();
    let rho_ub = vec![inv_eps; spec.couplings.len()];
    check("gamma", &params.gamma, &gamma_ub);
    check("mu", &params.mu, &mu_ub);
    check("sigma", &params.sigma, &sigma_ub);
    check("nu", &params.nu, &nu_ub);
    check("rho", &params.rho, &rho_ub);

    let two = lit::<T>(2.0);
    for n in 0..=horizon {
        let value = params.lambda.at(n);
        if !(value >= eps && value <= two - eps) {
            report.push(Violation::RelaxationOutOfRange { n, value: to_f64(value) });
            break;
        }
        if matches!(params.lambda, Relaxation::Constant(_)) {
            break;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consensus_like(alpha: f64) -> ProblemSpec {
        let a = LinOp::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let mut p1 = PlayerBlock::simple(1, NonsmoothTerm::interval(2.0, 3.0), 1.0);
        p1.alpha = alpha;
        let p2 = PlayerBlock::simple(1, NonsmoothTerm::interval(0.0, 1.0), 1.0);
        ProblemSpec::new(
            vec![p1, p2],
            vec![],
            CouplingGradient::affine(vec![1, 1], a, vec![0.0, 0.0], 2.0),
        )
    }

    fn unit_params(spec: &ProblemSpec) -> SolverParams {
        let mut params = SolverParams::for_problem(spec);
        params.gamma = StepSchedule::Constant(1.0 / 1.1);
        params.mu = StepSchedule::Constant(1.0 / 1.1);
        params.nu = StepSchedule::Constant(1.0 / 1.1);
        params.sigma = StepSchedule::Constant(1.0);
        params.rho = StepSchedule::Constant(1.0);
        params.lambda = Relaxation::Constant(1.8);
        params
    }

    #[test]
    fn params_with_unit_constants_are_valid() {
        let spec = consensus_like(1.0);
        let mut coupling = CouplingBlock {
            dim_g: 1,
            g: NonsmoothTerm::Zero,
            h: SmoothTerm::Zero,
            beta: 1.0,
            l: BTreeMap::new(),
        };
        coupling.l.insert(0, LinOp::identity(1));
        let spec = ProblemSpec::new(spec.players, vec![coupling], spec.q);
        let params = unit_params(&spec);
        let report = validate_params(&spec, &params, 50);
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn epsilon_too_large() {
        let spec = consensus_like(2.0);
        let mut params = unit_params(&spec);
        params.epsilon = 0.5;
        params.gamma = StepSchedule::Constant(0.5);
        let report = validate_params(&spec, &params, 10);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::EpsilonTooLarge { inv_epsilon, .. } if *inv_epsilon == 2.0)));
    }

    #[test]
    fn step_below_epsilon() {
        let spec = consensus_like(1.0);
        let mut params = unit_params(&spec);
        params.gamma =
            StepSchedule::Custom(Arc::new(|i, n| if i == 0 && n == 7 { 0.0 } else { 0.5 }));
        let report = validate_params(&spec, &params, 10);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            report.violations[0],
            Violation::StepOutOfRange { schedule: "gamma", block: 0, n: 7, .. }
        ));
        params.gamma = StepSchedule::Constant(0.5);
        params.lambda = Relaxation::Custom(Arc::new(|n| if n == 3 { 2.0 } else { 1.0 }));
        let report = validate_params(&spec, &params, 10);
        assert!(matches!(report.violations[0], Violation::RelaxationOutOfRange { n: 3, .. }));
    }

    #[test]
    fn dimension_mismatch_reported_once() {
        let mut spec = consensus_like(0.0);
        spec.players[0] = PlayerBlock::simple(2, NonsmoothTerm::boxed(vec![0.0; 2], vec![1.0; 2]), 1.0);
        spec.q = CouplingGradient::affine(vec![2, 1], LinOp::identity(3), vec![0.0; 3], 1.0);
        let mut coupling = CouplingBlock {
            dim_g: 2,
            g: NonsmoothTerm::Zero,
            h: SmoothTerm::Zero,
            beta: 0.0,
            l: BTreeMap::new(),
        };
        coupling.l.insert(0, LinOp::identity(2));
        spec.couplings.push(coupling);
        assert!(validate_problem(&spec, 10, 0).is_empty());
        // M_1 now maps 2 -> 3 while K_1 (and Q's first block) has dimension 2.
        spec.players[0].m = LinOp::dense(3, 2, vec![1.0; 6]).unwrap();
        let report = validate_problem(&spec, 10, 0);
        assert_eq!(report.violations.len(), 1, "{report}");
        assert!(matches!(report.violations[0], Violation::Dimension(_)));
    }

    #[test]
    fn negated_identity_is_not_monotone() {
        let mut spec = consensus_like(0.0);
        spec.q = CouplingGradient::affine(vec![1, 1], LinOp::scaled(2, -1.0), vec![0.0; 2], 1.0);
        let report = validate_problem(&spec, 50, 1);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::QNotMonotone { .. })));
    }

    #[test]
    fn understated_constants_are_caught() {
        let mut spec = consensus_like(0.0);
        spec.q.lipschitz_kappa = 1.0;
        spec.players[0].psi = SmoothTerm::squared_distance(3.0, &[1.0]);
        spec.players[0].alpha = 1.0;
        spec.players[1].chi = 0.1;
        let report = validate_problem(&spec, 50, 2);
        let has = |f: fn(&Violation) -> bool| report.violations.iter().any(f);
        assert!(has(|v| matches!(v, Violation::QLipschitz { .. })), "{report}");
        assert!(has(|v| matches!(v, Violation::GradientLipschitz { .. })), "{report}");
        assert!(has(|v| matches!(v, Violation::QChiBound { .. })), "{report}");
    }

    #[test]
    fn wrong_custom_gradient_fails_finite_differences() {
        let mut spec = consensus_like(0.0);
        spec.players[0].psi = SmoothTerm::custom(1, |x: &[f64]| x[0] * x[0], |x: &[f64]| vec![x[0]]);
        spec.players[0].alpha = 10.0;
        let report = validate_problem(&spec, 20, 3);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::GradientMismatch { .. })));
    }
}
