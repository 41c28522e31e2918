//! Asynchronous block-iterative primal-dual half-space projection iteration.
//!
//! Each tick evaluates, for the activated blocks and at their lagged ticks, a point
//! `ȳ = (a, q, b, c*, e*)` and a direction `ȳ* = (a*, q*, b*, c, e)` in the graph of
//! the Kuhn–Tucker operator of the game. Every solution lies in the half-space
//! `{p : ⟨p − ȳ, ȳ*⟩ ≤ 0}`, and the iterate is relaxedly projected onto it whenever
//! `π = ⟨ȳ − x_n, ȳ*⟩ < 0`.
//!
//! Arithmetic follows the displayed formulas literally (`γ⁻¹(x* − a)` multiplies by the
//! reciprocal, sums run over players then couplings in index order) without compensated
//! summation.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::model::{check_structure, ProblemSpec, SolverParams, ValidationReport};
use crate::oracle::{check_equilibrium, Certificate};
use crate::scalar::{dot, norm_sq, sub, Scalar};
use crate::scheduler::{Activation, Schedule, ScheduleGenerator, TickPlan};
use crate::tuple::{Tuple, TupleError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("problem is structurally inconsistent:\n{0}")]
    InvalidProblem(ValidationReport),
    #[error("initial tuple: {0}")]
    InitialTuple(#[from] TupleError),
    #[error("tick {tick} requested history tick {requested}, which is not retained")]
    MissingHistory { tick: usize, requested: usize },
    #[error("tick {tick}: {kind} {block} has no cached candidate (not activated at tick 0)")]
    UninitializedCache { tick: usize, kind: &'static str, block: usize },
    #[error("numerical abort at tick {tick}: pi = {pi}, denominator = {denominator}")]
    NumericalAbort { tick: usize, pi: f64, denominator: f64 },
}

/// Candidate quantities of a player: `(q_i, c*_i, a_i, s*_i, c_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerCandidate<T: Scalar = f64> {
    pub q: Vec<T>,
    pub c_star: Vec<T>,
    pub a: Vec<T>,
    pub s_star: Vec<T>,
    pub c: Vec<T>,
}

/// Candidate quantities of a coupling: `(b_k, e*_k, b*_k)` plus `e_k`, which is
/// refreshed every tick, and the raw `d*_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCandidate<T: Scalar = f64> {
    pub d_star: Vec<T>,
    pub b: Vec<T>,
    pub e_star: Vec<T>,
    pub b_star: Vec<T>,
    pub e: Vec<T>,
}

/// A retained iterate together with `Q(y)` at that iterate.
#[derive(Debug, Clone)]
pub struct Snapshot<T: Scalar> {
    pub tick: usize,
    pub tuple: Tuple<T>,
    pub q_of_y: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct IterState<T: Scalar = f64> {
    /// Index of the current iterate `x_n`.
    pub n: usize,
    /// Iterates `n − D ..= n`, oldest first.
    history: VecDeque<Snapshot<T>>,
    depth: usize,
    pub players: Vec<Option<PlayerCandidate<T>>>,
    pub couplings: Vec<Option<CouplingCandidate<T>>>,
    /// `(a*_i, q*_i)` of the last tick.
    pub a_star: Vec<Vec<T>>,
    pub q_star: Vec<Vec<T>>,
}

impl<T: Scalar> IterState<T> {
    pub fn new(spec: &ProblemSpec<T>, x0: Tuple<T>, max_lag: usize) -> Self {
        let q_of_y = spec.q.eval(&x0.y.concat());
        let mut history = VecDeque::with_capacity(max_lag + 1);
        history.push_back(Snapshot { tick: 0, tuple: x0, q_of_y });
        Self {
            n: 0,
            history,
            depth: max_lag + 1,
            players: vec![None; spec.num_players()],
            couplings: vec![None; spec.num_couplings()],
            a_star: spec.dims_h().into_iter().map(|d| vec![T::zero(); d]).collect(),
            q_star: spec.dims_k().into_iter().map(|d| vec![T::zero(); d]).collect(),
        }
    }

    pub fn current(&self) -> &Tuple<T> {
        &self.history.back().expect("history is never empty").tuple
    }

    pub fn snapshot(&self, tick: usize) -> Option<&Snapshot<T>> {
        let first = self.history.front()?.tick;
        if tick < first {
            return None;
        }
        self.history.get(tick - first).filter(|s| s.tick == tick)
    }

    pub fn retained_ticks(&self) -> Vec<usize> {
        self.history.iter().map(|s| s.tick).collect()
    }

    fn push(&mut self, snapshot: Snapshot<T>) {
        self.n = snapshot.tick;
        self.history.push_back(snapshot);
        while self.history.len() > self.depth {
            self.history.pop_front();
        }
    }

    fn player(&self, i: usize, tick: usize) -> Result<&PlayerCandidate<T>, SolverError> {
        self.players[i]
            .as_ref()
            .ok_or(SolverError::UninitializedCache { tick, kind: "player", block: i })
    }

    fn coupling(&self, k: usize, tick: usize) -> Result<&CouplingCandidate<T>, SolverError> {
        self.couplings[k]
            .as_ref()
            .ok_or(SolverError::UninitializedCache { tick, kind: "coupling", block: k })
    }

    /// Candidate point `ȳ = (a, q, b, c*, e*)` of the last tick.
    pub fn candidate_point(&self) -> Option<Tuple<T>> {
        let players: Option<Vec<_>> = self.players.iter().cloned().collect();
        let couplings: Option<Vec<_>> = self.couplings.iter().cloned().collect();
        let (players, couplings) = (players?, couplings?);
        Some(Tuple {
            x: players.iter().map(|p| p.a.clone()).collect(),
            y: players.iter().map(|p| p.q.clone()).collect(),
            z: couplings.iter().map(|c| c.b.clone()).collect(),
            u_star: players.iter().map(|p| p.c_star.clone()).collect(),
            v_star: couplings.iter().map(|c| c.e_star.clone()).collect(),
        })
    }

    /// Candidate direction `ȳ* = (a*, q*, b*, c, e)` of the last tick.
    pub fn candidate_direction(&self) -> Option<Tuple<T>> {
        let players: Option<Vec<_>> = self.players.iter().cloned().collect();
        let couplings: Option<Vec<_>> = self.couplings.iter().cloned().collect();
        let (players, couplings) = (players?, couplings?);
        Some(Tuple {
            x: self.a_star.clone(),
            y: self.q_star.clone(),
            z: couplings.iter().map(|c| c.b_star.clone()).collect(),
            u_star: players.iter().map(|p| p.c.clone()).collect(),
            v_star: couplings.iter().map(|c| c.e.clone()).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport<T: Scalar = f64> {
    pub n: usize,
    pub pi: T,
    /// Present iff `pi < 0`.
    pub theta: Option<T>,
    /// `‖x_{n+1} − x_n‖` over the full tuple.
    pub step_norm: T,
    /// Certificate residual of `x_{n+1}`.
    pub kkt_residual: T,
    pub activated: TickPlan,
}

fn lagged<T: Scalar>(state: &IterState<T>, tau: usize) -> Result<&Snapshot<T>, SolverError> {
    state
        .snapshot(tau)
        .ok_or(SolverError::MissingHistory { tick: state.n, requested: tau })
}

/// Player `i`'s candidate, reading the iterate and step sizes at tick `tau`.
pub fn player_local_step<T: Scalar>(
    spec: &ProblemSpec<T>,
    params: &SolverParams<T>,
    state: &IterState<T>,
    i: usize,
    tau: usize,
) -> Result<PlayerCandidate<T>, SolverError> {
    let snap = lagged(state, tau)?;
    let t = &snap.tuple;
    let p = &spec.players[i];
    let offsets = spec.q.offsets();
    let (x, y, u) = (&t.x[i], &t.y[i], &t.u_star[i]);
    let grad_f = &snap.q_of_y[offsets[i]..offsets[i + 1]];
    let gamma = params.gamma.at(i, tau);
    let mu = params.mu.at(i, tau);
    let sigma = params.sigma.at(i, tau);

    let q: Vec<T> = y
        .iter()
        .zip(u.iter().zip(grad_f))
        .map(|(yv, (uv, gv))| *yv + mu * (*uv - *gv))
        .collect();

    let mut mx = vec![T::zero(); p.dim_k];
    p.m.apply_add(x, &mut mx);
    let c_star: Vec<T> =
        u.iter().zip(mx.iter().zip(y)).map(|(uv, (m, yv))| *uv + sigma * (*m - *yv)).collect();

    let mut g = vec![T::zero(); p.dim_h];
    p.psi.gradient_add(x, &mut g);
    p.m.adjoint_apply_add(u, &mut g);
    for (k, c) in spec.couplings.iter().enumerate() {
        if let Some(l) = c.l.get(&i) {
            l.adjoint_apply_add(&t.v_star[k], &mut g);
        }
    }
    let x_star: Vec<T> = x.iter().zip(&g).map(|(xv, gv)| *xv - gamma * *gv).collect();
    let a = p.phi.prox_unchecked(gamma, &x_star);

    let inv_gamma = T::one() / gamma;
    let mut s_star: Vec<T> =
        x_star.iter().zip(&a).map(|(xs, av)| inv_gamma * (*xs - *av)).collect();
    p.psi.gradient_add(&a, &mut s_star);
    p.m.adjoint_apply_add(&c_star, &mut s_star);

    let mut ma = vec![T::zero(); p.dim_k];
    p.m.apply_add(&a, &mut ma);
    let c = sub(&q, &ma);

    Ok(PlayerCandidate { q, c_star, a, s_star, c })
}

/// Coupling `k`'s candidate, reading the iterate and step sizes at tick `delta`.
/// `e` is left empty; see [`refresh_e`].
pub fn coupling_local_step<T: Scalar>(
    spec: &ProblemSpec<T>,
    params: &SolverParams<T>,
    state: &IterState<T>,
    k: usize,
    delta: usize,
) -> Result<CouplingCandidate<T>, SolverError> {
    let snap = lagged(state, delta)?;
    let t = &snap.tuple;
    let c = &spec.couplings[k];
    let (z, v) = (&t.z[k], &t.v_star[k]);
    let nu = params.nu.at(k, delta);
    let rho = params.rho.at(k, delta);

    let grad_h = c.h.gradient(z);
    let d_star: Vec<T> = z
        .iter()
        .zip(v.iter().zip(&grad_h))
        .map(|(zv, (vv, gv))| *zv + nu * (*vv - *gv))
        .collect();
    let b = c.g.prox_unchecked(nu, &d_star);

    let lx = c.mix(&t.x);
    let e_star: Vec<T> =
        v.iter().zip(lx.iter().zip(z)).map(|(vv, (l, zv))| *vv + rho * (*l - *zv)).collect();

    let inv_nu = T::one() / nu;
    let mut b_star: Vec<T> = d_star.iter().zip(&b).map(|(d, bv)| inv_nu * (*d - *bv)).collect();
    c.h.gradient_add(&b, &mut b_star);
    for (bs, es) in b_star.iter_mut().zip(&e_star) {
        *bs -= *es;
    }
    Ok(CouplingCandidate { d_star, b, e_star, b_star, e: Vec::new() })
}

/// `e_k = b_k − Σ_i L_{k,i} a_i` for every coupling, from the freshest `a_i`.
pub fn refresh_e<T: Scalar>(spec: &ProblemSpec<T>, state: &mut IterState<T>) -> Result<(), SolverError> {
    let tick = state.n;
    let a: Vec<Vec<T>> = (0..spec.num_players())
        .map(|i| state.player(i, tick).map(|p| p.a.clone()))
        .collect::<Result<_, _>>()?;
    for (k, c) in spec.couplings.iter().enumerate() {
        let la = c.mix(&a);
        let cand = state.couplings[k]
            .as_mut()
            .ok_or(SolverError::UninitializedCache { tick, kind: "coupling", block: k })?;
        cand.e = sub(&cand.b, &la);
    }
    Ok(())
}

/// `a*_i = s*_i + Σ_k L*_{k,i} e*_k` and `q*_i = ∂_i f_i(q_n) − c*_i`, with `Q`
/// evaluated once on the full stacked `q_n`.
pub fn assemble_duals<T: Scalar>(spec: &ProblemSpec<T>, state: &mut IterState<T>) -> Result<(), SolverError> {
    let tick = state.n;
    let mut q_stacked = Vec::with_capacity(spec.q.total_dim());
    for i in 0..spec.num_players() {
        q_stacked.extend_from_slice(&state.player(i, tick)?.q);
    }
    let q_of_q = spec.q.eval(&q_stacked);
    let offsets = spec.q.offsets();
    let mut a_star = Vec::with_capacity(spec.num_players());
    let mut q_star = Vec::with_capacity(spec.num_players());
    for i in 0..spec.num_players() {
        let p = state.player(i, tick)?;
        let mut as_i = p.s_star.clone();
        for (k, c) in spec.couplings.iter().enumerate() {
            if let Some(l) = c.l.get(&i) {
                l.adjoint_apply_add(&state.coupling(k, tick)?.e_star, &mut as_i);
            }
        }
        a_star.push(as_i);
        q_star.push(sub(&q_of_q[offsets[i]..offsets[i + 1]], &p.c_star));
    }
    state.a_star = a_star;
    state.q_star = q_star;
    Ok(())
}

/// `π_n = ⟨ȳ − x_n, ȳ*⟩`, summed player by player, then coupling by coupling.
pub fn compute_pi<T: Scalar>(state: &IterState<T>) -> Result<T, SolverError> {
    let tick = state.n;
    let cur = state.current();
    let mut pi = T::zero();
    for i in 0..cur.x.len() {
        let p = state.player(i, tick)?;
        let term = dot(&sub(&p.a, &cur.x[i]), &state.a_star[i])
            + dot(&sub(&p.q, &cur.y[i]), &state.q_star[i])
            + dot(&p.c, &sub(&p.c_star, &cur.u_star[i]));
        pi += term;
    }
    for k in 0..cur.z.len() {
        let c = state.coupling(k, tick)?;
        let term = dot(&sub(&c.b, &cur.z[k]), &c.b_star) + dot(&c.e, &sub(&c.e_star, &cur.v_star[k]));
        pi += term;
    }
    Ok(pi)
}

/// `‖ȳ*‖²`
fn direction_norm_sq<T: Scalar>(state: &IterState<T>) -> Result<T, SolverError> {
    let tick = state.n;
    let mut total = T::zero();
    for i in 0..state.players.len() {
        let p = state.player(i, tick)?;
        total += norm_sq(&state.a_star[i]) + norm_sq(&state.q_star[i]) + norm_sq(&p.c);
    }
    for k in 0..state.couplings.len() {
        let c = state.coupling(k, tick)?;
        total += norm_sq(&c.b_star) + norm_sq(&c.e);
    }
    Ok(total)
}

/// Relaxed projection onto the separating half-space; advances the history.
/// Returns `(θ_n, x_{n+1})`.
pub fn apply_update<T: Scalar>(
    spec: &ProblemSpec<T>,
    state: &mut IterState<T>,
    params: &SolverParams<T>,
    pi: T,
) -> Result<(Option<T>, Tuple<T>), SolverError> {
    let n = state.n;
    let mut next = state.current().clone();
    let abort = |denominator: T| SolverError::NumericalAbort {
        tick: n,
        pi: pi.to_f64().unwrap_or(f64::NAN),
        denominator: denominator.to_f64().unwrap_or(f64::NAN),
    };
    if !pi.is_finite() {
        return Err(abort(T::nan()));
    }
    let theta = if pi < T::zero() {
        let denom = direction_norm_sq(state)?;
        if !(denom > T::zero()) || !denom.is_finite() {
            return Err(abort(denom));
        }
        let theta = params.lambda.at(n) * pi / denom;
        let step = |dst: &mut Vec<T>, dir: &[T]| {
            for (d, s) in dst.iter_mut().zip(dir) {
                *d += theta * *s;
            }
        };
        for i in 0..next.x.len() {
            let p = state.player(i, n)?;
            step(&mut next.x[i], &state.a_star[i]);
            step(&mut next.y[i], &state.q_star[i]);
            step(&mut next.u_star[i], &p.c);
        }
        for k in 0..next.z.len() {
            let c = state.coupling(k, n)?;
            step(&mut next.z[k], &c.b_star);
            step(&mut next.v_star[k], &c.e);
        }
        if next.x.iter().chain(&next.y).any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err(abort(denom));
        }
        Some(theta)
    } else {
        None
    };
    let q_of_y = spec.q.eval(&next.y.concat());
    state.push(Snapshot { tick: n + 1, tuple: next.clone(), q_of_y });
    Ok((theta, next))
}

/// Stepping interface over one run.
pub struct Solver<'a, T: Scalar = f64> {
    spec: &'a ProblemSpec<T>,
    params: &'a SolverParams<T>,
    schedule: ScheduleGenerator,
    state: IterState<T>,
}

impl<'a, T: Scalar> Solver<'a, T> {
    /// `x0 = None` starts from the all-zeros tuple.
    pub fn new(
        spec: &'a ProblemSpec<T>,
        params: &'a SolverParams<T>,
        schedule: &Schedule,
        x0: Option<Tuple<T>>,
    ) -> Result<Self, SolverError> {
        let report = check_structure(spec);
        if !report.is_empty() {
            return Err(SolverError::InvalidProblem(report));
        }
        let x0 = x0.unwrap_or_else(|| Tuple::zeros(spec));
        x0.check(spec)?;
        let depth = params.max_lag.max(schedule.max_lag);
        Ok(Self {
            spec,
            params,
            schedule: schedule.generator(spec.num_players(), spec.num_couplings()),
            state: IterState::new(spec, x0, depth),
        })
    }

    pub fn state(&self) -> &IterState<T> {
        &self.state
    }

    /// One iteration: candidates for the activated blocks, refresh of `e`, dual
    /// assembly, `π_n`, and the conditional projection.
    pub fn tick(&mut self) -> Result<TickReport<T>, SolverError> {
        let plan = self.schedule.next_plan();
        let (spec, params) = (self.spec, self.params);
        let state = &self.state;
        let players: Vec<(usize, PlayerCandidate<T>)>;
        let couplings: Vec<(usize, CouplingCandidate<T>)>;
        let player_job = |a: &Activation| player_local_step(spec, params, state, a.block, a.read_at).map(|c| (a.block, c));
        let coupling_job = |a: &Activation| coupling_local_step(spec, params, state, a.block, a.read_at).map(|c| (a.block, c));
        if params.parallel {
            let (p, c) = rayon::join(
                || plan.players.par_iter().map(player_job).collect::<Result<Vec<_>, _>>(),
                || plan.couplings.par_iter().map(coupling_job).collect::<Result<Vec<_>, _>>(),
            );
            players = p?;
            couplings = c?;
        } else {
            players = plan.players.iter().map(player_job).collect::<Result<_, _>>()?;
            couplings = plan.couplings.iter().map(coupling_job).collect::<Result<_, _>>()?;
        }
        for (i, cand) in players {
            self.state.players[i] = Some(cand);
        }
        for (k, cand) in couplings {
            self.state.couplings[k] = Some(cand);
        }
        refresh_e(spec, &mut self.state)?;
        assemble_duals(spec, &mut self.state)?;
        let pi = compute_pi(&self.state)?;
        let n = self.state.n;
        let prev = self.state.current().clone();
        let (theta, next) = apply_update(spec, &mut self.state, params, pi)?;
        let step_norm = if theta.is_some() { next.dist(&prev) } else { T::zero() };
        let cert = check_equilibrium(spec, &next.x, &next.u_star, &next.v_star);
        Ok(TickReport { n, pi, theta, step_norm, kkt_residual: cert.max_residual, activated: plan })
    }

    pub fn into_state(self) -> IterState<T> {
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Certificate residual reached `tol`.
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T: Scalar = f64> {
    pub tuple: Tuple<T>,
    pub reports: Vec<TickReport<T>>,
    pub certificate: Certificate<T>,
    pub status: SolveStatus,
    /// Longest run of consecutive ticks without an update reached the stagnation window.
    pub stagnated: bool,
}

impl<T: Scalar> SolveResult<T> {
    pub fn iterations(&self) -> usize {
        self.reports.len()
    }

    pub fn x(&self) -> &[Vec<T>] {
        &self.tuple.x
    }
}

/// Iterates until the certificate residual is at most `params.tol` or
/// `params.max_iters` ticks have run.
pub fn solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    params: &SolverParams<T>,
    schedule: &Schedule,
    x0: Option<Tuple<T>>,
) -> Result<SolveResult<T>, SolverError> {
    let mut solver = Solver::new(spec, params, schedule, x0)?;
    let mut reports = Vec::new();
    let mut status = SolveStatus::MaxIters;
    let (mut idle, mut stagnated) = (0usize, false);
    for _ in 0..params.max_iters {
        let report = solver.tick()?;
        let done = report.kkt_residual <= params.tol;
        if report.theta.is_none() {
            idle += 1;
            if params.stagnation_window.is_some_and(|w| idle >= w) && !done {
                stagnated = true;
            }
        } else {
            idle = 0;
        }
        reports.push(report);
        if done {
            status = SolveStatus::Converged;
            break;
        }
    }
    let tuple = solver.state().current().clone();
    let certificate = check_equilibrium(spec, &tuple.x, &tuple.u_star, &tuple.v_star);
    Ok(SolveResult { tuple, reports, certificate, status, stagnated })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::linops::LinOp;
    use crate::model::{CouplingBlock, PlayerBlock, Relaxation, StepSchedule};
    use crate::prox::NonsmoothTerm;
    use crate::smooth::{CouplingGradient, SmoothTerm};

    fn unit_params(spec: &ProblemSpec<f64>) -> SolverParams<f64> {
        let mut p = SolverParams::for_problem(spec);
        p.gamma = StepSchedule::Constant(1.0);
        p.mu = StepSchedule::Constant(1.0);
        p.nu = StepSchedule::Constant(1.0);
        p.lambda = Relaxation::Constant(1.0);
        p
    }

    fn free_player_with_coupling() -> ProblemSpec<f64> {
        let coupling = CouplingBlock {
            dim_g: 1,
            g: NonsmoothTerm::Zero,
            h: SmoothTerm::Zero,
            beta: 0.0,
            l: BTreeMap::new(),
        };
        ProblemSpec::new(
            vec![PlayerBlock::simple(1, NonsmoothTerm::Zero, 1.0)],
            vec![coupling],
            CouplingGradient::zero(vec![1]),
        )
    }

    #[test]
    fn player_step_with_zero_functions() {
        let spec = free_player_with_coupling();
        let params = unit_params(&spec);
        let x0 = Tuple { x: vec![vec![1.0]], y: vec![vec![2.0]], z: vec![vec![1.0]], u_star: vec![vec![3.0]], v_star: vec![vec![2.0]] };
        let state = IterState::new(&spec, x0, 0);
        let p = player_local_step(&spec, &params, &state, 0, 0).unwrap();
        assert_eq!(p, PlayerCandidate { q: vec![5.0], c_star: vec![2.0], a: vec![-2.0], s_star: vec![2.0], c: vec![7.0] });
        let c = coupling_local_step(&spec, &params, &state, 0, 0).unwrap();
        assert_eq!((c.d_star, c.b, c.e_star, c.b_star), (vec![3.0], vec![3.0], vec![1.0], vec![-1.0]));
    }

    #[test]
    fn missing_history_is_an_error() {
        let spec = free_player_with_coupling();
        let params = unit_params(&spec);
        let state = IterState::new(&spec, Tuple::zeros(&spec), 0);
        assert!(matches!(
            player_local_step(&spec, &params, &state, 0, 3),
            Err(SolverError::MissingHistory { tick: 0, requested: 3 })
        ));
    }

    #[test]
    fn shifted_orthant_coupling_projects_up() {
        let mut spec = free_player_with_coupling();
        spec.couplings[0].g = NonsmoothTerm::ShiftedOrthant { r: vec![5.0] };
        let params = unit_params(&spec);
        // d* = z + ν v* = 4.2
        let x0 = Tuple { x: vec![vec![0.0]], y: vec![vec![0.0]], z: vec![vec![4.0]], u_star: vec![vec![0.0]], v_star: vec![vec![0.2]] };
        let state = IterState::new(&spec, x0, 0);
        let c = coupling_local_step(&spec, &params, &state, 0, 0).unwrap();
        assert_eq!(c.b, vec![5.0]);
    }

    fn scalar_player_without_duals() -> ProblemSpec<f64> {
        let player = PlayerBlock {
            dim_h: 1,
            dim_k: 0,
            phi: NonsmoothTerm::Zero,
            psi: SmoothTerm::Zero,
            alpha: 0.0,
            m: LinOp::zero(1, 0),
            chi: 1.0,
        };
        ProblemSpec::new(vec![player], vec![], CouplingGradient::zero(vec![0]))
    }

    fn seeded_state(spec: &ProblemSpec<f64>, a: f64, a_star: f64) -> IterState<f64> {
        let mut state = IterState::new(spec, Tuple::zeros(spec), 0);
        state.players[0] = Some(PlayerCandidate { q: vec![], c_star: vec![], a: vec![a], s_star: vec![a_star], c: vec![] });
        state.a_star = vec![vec![a_star]];
        state
    }

    #[test]
    fn scalar_update_projects_onto_half_line() {
        let spec = scalar_player_without_duals();
        let params = unit_params(&spec);
        let mut state = seeded_state(&spec, 1.0, -2.0);
        let pi = compute_pi(&state).unwrap();
        assert_eq!(pi, -2.0);
        let (theta, next) = apply_update(&spec, &mut state, &params, pi).unwrap();
        assert_eq!(theta, Some(-0.5));
        assert_eq!(next.x, vec![vec![1.0]]);
        assert_eq!(state.n, 1);
    }

    #[test]
    fn zero_pi_leaves_state_unchanged() {
        let spec = scalar_player_without_duals();
        let params = unit_params(&spec);
        let mut state = seeded_state(&spec, 0.0, 0.0);
        let pi = compute_pi(&state).unwrap();
        assert_eq!(pi, 0.0);
        let before = state.current().clone();
        let (theta, next) = apply_update(&spec, &mut state, &params, pi).unwrap();
        assert_eq!((theta, next), (None, before));
        assert_eq!(state.retained_ticks(), vec![1]);
    }

    #[test]
    fn non_finite_pi_aborts() {
        let spec = scalar_player_without_duals();
        let params = unit_params(&spec);
        let mut state = seeded_state(&spec, 1.0, f64::NAN);
        let pi = compute_pi(&state).unwrap();
        assert!(matches!(apply_update(&spec, &mut state, &params, pi), Err(SolverError::NumericalAbort { .. })));
    }

    #[test]
    fn duals_with_single_identity_coupling() {
        let mut spec = free_player_with_coupling();
        spec.players[0] = PlayerBlock::simple(2, NonsmoothTerm::Zero, 1.0);
        spec.q = CouplingGradient::zero(vec![2]);
        spec.couplings[0].dim_g = 2;
        spec.couplings[0].l.insert(0, LinOp::identity(2));
        let mut state = IterState::new(&spec, Tuple::zeros(&spec), 0);
        state.players[0] = Some(PlayerCandidate {
            q: vec![0.0; 2],
            c_star: vec![0.5, 0.0],
            a: vec![0.0; 2],
            s_star: vec![2.0, 3.0],
            c: vec![0.0; 2],
        });
        state.couplings[0] = Some(CouplingCandidate {
            d_star: vec![0.0; 2],
            b: vec![4.0, 0.0],
            e_star: vec![1.0, 0.0],
            b_star: vec![0.0; 2],
            e: vec![],
        });
        refresh_e(&spec, &mut state).unwrap();
        assert_eq!(state.couplings[0].as_ref().unwrap().e, vec![4.0, 0.0]);
        assert_eq!(state.candidate_direction().unwrap().v_star, vec![vec![4.0, 0.0]]);
        assemble_duals(&spec, &mut state).unwrap();
        assert_eq!(state.a_star, vec![vec![3.0, 3.0]]);
        assert_eq!(state.q_star, vec![vec![-0.5, 0.0]]);
    }

    #[test]
    fn equilibrium_tuple_is_frozen() {
        let (spec, meta) = crate::problems::shared_constraint_pair::<f64>(5.0);
        let params = SolverParams::for_problem(&spec);
        let zbar = meta.known.unwrap().solution_tuple(&spec);
        let mut solver = Solver::new(&spec, &params, &Schedule::synchronous(), Some(zbar.clone())).unwrap();
        for _ in 0..20 {
            let r = solver.tick().unwrap();
            assert_eq!(r.pi, 0.0);
            assert_eq!(r.theta, None);
            let p = solver.state().players[0].as_ref().unwrap();
            assert_eq!(p.c, vec![0.0]);
            assert_eq!(solver.state().couplings[0].as_ref().unwrap().b_star, vec![0.0]);
        }
        assert_eq!(solver.state().current(), &zbar);
        assert_eq!(solver.state().candidate_point().unwrap().x, zbar.x);
    }

    #[test]
    fn empty_couplings_reduce_to_player_sums() {
        let (spec, _) = crate::problems::consensus_two_boxes::<f64>();
        let params = SolverParams::for_problem(&spec);
        let mut solver = Solver::new(&spec, &params, &Schedule::synchronous(), None).unwrap();
        let r = solver.tick().unwrap();
        assert!(r.pi < 0.0 && r.theta.unwrap() < 0.0);
        assert!(solver.state().couplings.is_empty());
    }

    #[test]
    fn solve_reaches_consensus_equilibrium() {
        let (spec, _) = crate::problems::consensus_two_boxes::<f64>();
        let params = SolverParams::for_problem(&spec);
        let r = solve(&spec, &params, &Schedule::synchronous(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.x()[0][0] - 2.0).abs() < 1e-6 && (r.x()[1][0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn parallel_tick_matches_serial() {
        let (spec, _) = crate::problems::consensus_ring::<f64>();
        let mut params = SolverParams::for_problem(&spec);
        params.max_iters = 200;
        let schedule = Schedule::random(7, 0.5, 3, 4);
        let serial = solve(&spec, &params, &schedule, None).unwrap();
        params.parallel = true;
        let parallel = solve(&spec, &params, &schedule, None).unwrap();
        assert_eq!(serial.reports, parallel.reports);
        assert_eq!(serial.tuple, parallel.tuple);
    }

    #[test]
    fn single_precision_run_converges() {
        let (spec, _) = crate::problems::consensus_two_boxes::<f32>();
        let mut params = SolverParams::for_problem(&spec);
        params.tol = 1e-5;
        let r = solve(&spec, &params, &Schedule::synchronous(), None).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.x()[0][0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn stagnation_is_flagged_without_stopping() {
        let (spec, meta) = crate::problems::shared_constraint_pair::<f64>(5.0);
        let mut params = SolverParams::for_problem(&spec);
        params.stagnation_window = Some(3);
        params.tol = -1.0;
        params.max_iters = 10;
        let zbar = meta.known.unwrap().solution_tuple(&spec);
        let r = solve(&spec, &params, &Schedule::synchronous(), Some(zbar)).unwrap();
        assert!(r.stagnated);
        assert_eq!((r.status, r.iterations()), (SolveStatus::MaxIters, 10));
    }
}
