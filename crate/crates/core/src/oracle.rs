//! Reference computations independent of the main iteration: the equilibrium
//! certificate, a Gauss–Seidel best-response oracle, and an exact active-set solver
//! for quadratic games with box/orthant constraints.

use crate::model::{ProblemSpec, SolverParams};
use crate::scheduler::Schedule;
use crate::solver::{IterState, Solver, SolverError, TickReport};
use crate::tuple::Tuple;
use crate::prox::NonsmoothTerm;
use crate::scalar::{dist, lit, norm, sub, Scalar};
use crate::smooth::SmoothTerm;

/// Residuals of the first-order system at `(x̄, ū*, v̄*)`:
///
/// * `u*_i = ∂_i f_i(M x̄)` (dual consistency, per player)
/// * `v*_k ∈ (∂g_k + ∇h_k)(Σ_j L_{k,j} x̄_j)`, measured as
///   `‖w − prox_{g_k}(w + v*_k − ∇h_k(w))‖` with `w = Σ_j L_{k,j} x̄_j`
/// * `−M_i* u*_i − Σ_k L_{k,i}* v*_k ∈ ∂φ_i(x̄_i) + ∇ψ_i(x̄_i)`, measured as
///   `‖x̄_i − prox_{φ_i}(x̄_i − (∇ψ_i(x̄_i) + M_i* u*_i + Σ_k L_{k,i}* v*_k))‖`
///
/// Prox residuals use a unit step; any fixed positive step has the same zero set.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T: Scalar = f64> {
    pub player_prox: Vec<T>,
    pub player_dual: Vec<T>,
    pub coupling_inclusion: Vec<T>,
    /// Distance of `x̄_i` to `C_i` when `φ_i` is an indicator.
    pub player_feasibility: Vec<Option<T>>,
    /// Distance of `Σ_j L_{k,j} x̄_j` to the set when `g_k` is an indicator.
    pub coupling_feasibility: Vec<Option<T>>,
    pub max_residual: T,
}

pub fn check_equilibrium<T: Scalar, V: AsRef<[T]>>(
    spec: &ProblemSpec<T>,
    x: &[V],
    u_star: &[V],
    v_star: &[V],
) -> Certificate<T> {
    let offsets = spec.q.offsets();
    let qmx = spec.q.eval(&spec.apply_m(x));
    let mut player_dual = Vec::with_capacity(spec.num_players());
    let mut player_prox = Vec::with_capacity(spec.num_players());
    let mut player_feasibility = Vec::with_capacity(spec.num_players());
    for (i, p) in spec.players.iter().enumerate() {
        let xi = x[i].as_ref();
        player_dual.push(dist(u_star[i].as_ref(), &qmx[offsets[i]..offsets[i + 1]]));
        let mut g = p.psi.gradient(xi);
        p.m.adjoint_apply_add(u_star[i].as_ref(), &mut g);
        for (k, c) in spec.couplings.iter().enumerate() {
            if let Some(l) = c.l.get(&i) {
                l.adjoint_apply_add(v_star[k].as_ref(), &mut g);
            }
        }
        let probe: Vec<T> = xi.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        player_prox.push(dist(xi, &p.phi.prox_unchecked(T::one(), &probe)));
        player_feasibility.push(p.phi.distance_to_set(xi));
    }
    let mut coupling_inclusion = Vec::with_capacity(spec.num_couplings());
    let mut coupling_feasibility = Vec::with_capacity(spec.num_couplings());
    for (k, c) in spec.couplings.iter().enumerate() {
        let w = c.mix(x);
        let gh = c.h.gradient(&w);
        let probe: Vec<T> = w
            .iter()
            .zip(v_star[k].as_ref().iter().zip(&gh))
            .map(|(wv, (vv, hv))| *wv + *vv - *hv)
            .collect();
        coupling_inclusion.push(dist(&w, &c.g.prox_unchecked(T::one(), &probe)));
        coupling_feasibility.push(c.g.distance_to_set(&w));
    }
    let max_residual = player_prox
        .iter()
        .chain(&player_dual)
        .chain(&coupling_inclusion)
        .copied()
        .chain(player_feasibility.iter().chain(&coupling_feasibility).flatten().copied())
        .fold(T::zero(), T::max);
    Certificate {
        player_prox,
        player_dual,
        coupling_inclusion,
        player_feasibility,
        coupling_feasibility,
        max_residual,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("unsupported problem for this oracle: {0}")]
    Unsupported(String),
    #[error("problem too large for this oracle: {0}")]
    TooLarge(String),
    #[error("no active set yields a consistent equilibrium")]
    NoSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BestResponse<T: Scalar = f64> {
    Converged { x: Vec<Vec<T>>, sweeps: usize },
    /// Sweeps kept moving by more than the tolerance.
    Diverged { x: Vec<Vec<T>>, sweeps: usize },
}

impl<T: Scalar> BestResponse<T> {
    pub fn is_converged(&self) -> bool {
        matches!(self, BestResponse::Converged { .. })
    }

    pub fn x(&self) -> &[Vec<T>] {
        match self {
            BestResponse::Converged { x, .. } | BestResponse::Diverged { x, .. } => x,
        }
    }
}

const INNER_ITERS: usize = 200_000;

/// Gauss–Seidel best-response sweeps. Each player's problem, with the others frozen,
/// is solved by proximal gradient on `φ_i` with the smooth part
/// `ψ_i + f_i(M_i ·; ·) + Σ_k h_k(L_{k,i} · + ·)`. Couplings with a nonsmooth `g_k`
/// acting on a player are not supported.
pub fn best_response_fixed_point<T: Scalar>(
    spec: &ProblemSpec<T>,
    x0: &[Vec<T>],
    rounds: usize,
    inner_tol: T,
) -> Result<BestResponse<T>, OracleError> {
    let total: usize = spec.dims_h().iter().sum();
    if total > 20 {
        return Err(OracleError::TooLarge(format!("{total} strategy coordinates")));
    }
    for (k, c) in spec.couplings.iter().enumerate() {
        if !c.g.is_zero() && !c.l.is_empty() {
            return Err(OracleError::Unsupported(format!("coupling {k} has a nonsmooth term")));
        }
    }
    let offsets = spec.q.offsets();
    let kappa = spec.q.lipschitz_kappa;
    let steps: Vec<T> = spec
        .players
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut lip = p.alpha + kappa * p.m.frobenius_norm().powi(2);
            for c in &spec.couplings {
                if let Some(l) = c.l.get(&i) {
                    lip += c.beta * l.frobenius_norm().powi(2);
                }
            }
            if lip > T::zero() { T::one() / lip } else { T::one() }
        })
        .collect();

    let mut x: Vec<Vec<T>> = x0.to_vec();
    for sweep in 1..=rounds {
        let mut moved = T::zero();
        for (i, p) in spec.players.iter().enumerate() {
            let step = steps[i];
            let mut xi = x[i].clone();
            let start = xi.clone();
            for _ in 0..INNER_ITERS {
                x[i].clone_from(&xi);
                let mut g = p.psi.gradient(&xi);
                let qy = spec.q.eval(&spec.apply_m(&x));
                p.m.adjoint_apply_add(&qy[offsets[i]..offsets[i + 1]], &mut g);
                for c in &spec.couplings {
                    if let Some(l) = c.l.get(&i) {
                        let w = c.mix(&x);
                        l.adjoint_apply_add(&c.h.gradient(&w), &mut g);
                    }
                }
                let probe: Vec<T> = xi.iter().zip(&g).map(|(a, b)| *a - step * *b).collect();
                let next = p.phi.prox_unchecked(step, &probe);
                let delta = dist(&next, &xi);
                xi = next;
                if delta <= inner_tol * lit(1e-3) {
                    break;
                }
            }
            moved = moved.max(dist(&xi, &start));
            x[i] = xi;
        }
        if moved <= inner_tol {
            return Ok(BestResponse::Converged { x, sweeps: sweep });
        }
    }
    Ok(BestResponse::Diverged { x, sweeps: rounds })
}

/// Exact primal-dual solution of a quadratic game.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution<T: Scalar = f64> {
    pub x: Vec<Vec<T>>,
    pub u_star: Vec<Vec<T>>,
    pub v_star: Vec<Vec<T>>,
    pub certificate: Certificate<T>,
}

/// A scalar constraint `lower ≤ ⟨row, x⟩ ≤ upper` on the stacked strategy.
struct Constraint<T> {
    row: Vec<T>,
    lower: Option<T>,
    upper: Option<T>,
    /// `(k, r)`: row `r` of coupling `k`; `None` for a strategy bound.
    coupling: Option<(usize, usize)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Active {
    Free,
    Lower,
    Upper,
}

type Bounds<T> = Vec<(Option<T>, Option<T>)>;

fn bounds_of<T: Scalar>(term: &NonsmoothTerm<T>, dim: usize) -> Result<Bounds<T>, String> {
    let fin = |v: T| v.is_finite().then_some(v);
    Ok(match term {
        NonsmoothTerm::Zero | NonsmoothTerm::Quadratic { .. } => vec![(None, None); dim],
        NonsmoothTerm::Box { lower, upper } => {
            lower.iter().zip(upper).map(|(l, u)| (fin(*l), fin(*u))).collect()
        }
        NonsmoothTerm::ShiftedOrthant { r } => r.iter().map(|v| (Some(*v), None)).collect(),
        NonsmoothTerm::Singleton(a) => a.iter().map(|v| (Some(*v), Some(*v))).collect(),
        other => return Err(format!("nonsmooth term {other:?}")),
    })
}

fn smooth_supported<T: Scalar>(term: &SmoothTerm<T>) -> bool {
    !matches!(term, SmoothTerm::Custom { .. })
}

/// Enumerates active sets of the box/orthant constraints and solves the resulting
/// linear KKT systems; returns the first candidate whose certificate is at most
/// `1e-8` (scaled by problem size for coarse scalar types).
///
/// Requires an affine `Q`, quadratic (or zero) smooth terms, `φ_i` among
/// zero/box/orthant/singleton/quadratic and `g_k` among the same kinds, with at most
/// 10 strategy coordinates.
pub fn quadratic_game_exact<T: Scalar>(spec: &ProblemSpec<T>) -> Result<ExactSolution<T>, OracleError> {
    let dims = spec.dims_h();
    let n: usize = dims.iter().sum();
    if n > 10 {
        return Err(OracleError::TooLarge(format!("{n} strategy coordinates (max 10)")));
    }
    if spec.q.affine_parts().is_none() {
        return Err(OracleError::Unsupported("Q is not affine".into()));
    }
    if !spec.players.iter().all(|p| smooth_supported(&p.psi))
        || !spec.couplings.iter().all(|c| smooth_supported(&c.h))
    {
        return Err(OracleError::Unsupported("non-quadratic smooth term".into()));
    }
    let mut x_off = vec![0];
    for d in &dims {
        x_off.push(x_off.last().unwrap() + d);
    }
    let split = |flat: &[T]| -> Vec<Vec<T>> {
        (0..dims.len()).map(|i| flat[x_off[i]..x_off[i + 1]].to_vec()).collect()
    };

    // Smooth gradients of the coupling terms: ∇h_k plus the gradient of a quadratic g_k.
    let coupling_grad = |k: usize, w: &[T]| -> Vec<T> {
        let c = &spec.couplings[k];
        let mut g = c.h.gradient(w);
        if let NonsmoothTerm::Quadratic { c: cq, b } = &c.g {
            for ((gv, wv), bv) in g.iter_mut().zip(w).zip(b) {
                *gv += *cq * *wv + *bv;
            }
        }
        g
    };
    // F(x) = ∇ψ(x) + ∇φ_quad(x) + Mᵀ Q(Mx) + Σ_k L_kᵀ ∇(h_k + g_k,quad)(L_k x): affine.
    let pseudo_gradient = |flat: &[T]| -> Vec<T> {
        let xs = split(flat);
        let qy = spec.q.eval(&spec.apply_m(&xs));
        let offsets = spec.q.offsets();
        let mut out = Vec::with_capacity(n);
        for (i, p) in spec.players.iter().enumerate() {
            let mut g = p.psi.gradient(&xs[i]);
            if let NonsmoothTerm::Quadratic { c, b } = &p.phi {
                for ((gv, xv), bv) in g.iter_mut().zip(&xs[i]).zip(b) {
                    *gv += *c * *xv + *bv;
                }
            }
            p.m.adjoint_apply_add(&qy[offsets[i]..offsets[i + 1]], &mut g);
            for (k, c) in spec.couplings.iter().enumerate() {
                if let Some(l) = c.l.get(&i) {
                    l.adjoint_apply_add(&coupling_grad(k, &c.mix(&xs)), &mut g);
                }
            }
            out.extend(g);
        }
        out
    };
    let f0 = pseudo_gradient(&vec![T::zero(); n]);
    let mut hess = vec![T::zero(); n * n];
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = sub(&pseudo_gradient(&e), &f0);
        for i in 0..n {
            hess[i * n + j] = col[i];
        }
    }

    let mut constraints: Vec<Constraint<T>> = Vec::new();
    for (i, p) in spec.players.iter().enumerate() {
        let b = bounds_of(&p.phi, p.dim_h).map_err(OracleError::Unsupported)?;
        for (j, (lower, upper)) in b.into_iter().enumerate() {
            if lower.is_none() && upper.is_none() {
                continue;
            }
            let mut row = vec![T::zero(); n];
            row[x_off[i] + j] = T::one();
            constraints.push(Constraint { row, lower, upper, coupling: None });
        }
    }
    for (k, c) in spec.couplings.iter().enumerate() {
        let b = bounds_of(&c.g, c.dim_g).map_err(OracleError::Unsupported)?;
        let mut dense_rows = vec![vec![T::zero(); n]; c.dim_g];
        for (i, l) in &c.l {
            let d = l.to_dense();
            let cols = l.in_dim();
            for (r, row) in dense_rows.iter_mut().enumerate() {
                for j in 0..cols {
                    row[x_off[*i] + j] = d[r * cols + j];
                }
            }
        }
        for (r, (lower, upper)) in b.into_iter().enumerate() {
            if lower.is_none() && upper.is_none() {
                continue;
            }
            constraints.push(Constraint {
                row: dense_rows[r].clone(),
                lower,
                upper,
                coupling: Some((k, r)),
            });
        }
    }
    let choices: Vec<Vec<Active>> = constraints
        .iter()
        .map(|c| match (c.lower, c.upper) {
            (Some(l), Some(u)) if l == u => vec![Active::Lower],
            (Some(_), Some(_)) => vec![Active::Free, Active::Lower, Active::Upper],
            (Some(_), None) => vec![Active::Free, Active::Lower],
            (None, Some(_)) => vec![Active::Free, Active::Upper],
            (None, None) => vec![Active::Free],
        })
        .collect();
    let combos: f64 = choices.iter().map(|c| c.len() as f64).product();
    if combos > 1e6 {
        return Err(OracleError::TooLarge(format!("{combos} active sets")));
    }

    let feas_tol: T = T::epsilon().sqrt() * lit(1e-2);
    let cert_tol: T = lit::<T>(1e-8).max(T::epsilon().sqrt() * lit(10.0));
    let mut pick = vec![0usize; choices.len()];
    loop {
        let active: Vec<(usize, Active)> = pick
            .iter()
            .enumerate()
            .map(|(c, &p)| (c, choices[c][p]))
            .filter(|(_, a)| *a != Active::Free)
            .collect();
        if let Some(sol) = solve_active_set(&hess, &f0, n, &constraints, &active, feas_tol) {
            let (xflat, mult) = sol;
            let xs = split(&xflat);
            let mut v_star: Vec<Vec<T>> =
                spec.couplings.iter().enumerate().map(|(k, c)| coupling_grad(k, &c.mix(&xs))).collect();
            for ((ci, _), m) in active.iter().zip(&mult) {
                if let Some((k, r)) = constraints[*ci].coupling {
                    v_star[k][r] += *m;
                }
            }
            let u_star = spec.split_k(&spec.q.eval(&spec.apply_m(&xs)));
            let certificate = check_equilibrium(spec, &xs, &u_star, &v_star);
            if certificate.max_residual <= cert_tol {
                return Ok(ExactSolution { x: xs, u_star, v_star, certificate });
            }
        }
        // Next combination (odometer).
        let mut pos = 0;
        loop {
            if pos == pick.len() {
                return Err(OracleError::NoSolution);
            }
            pick[pos] += 1;
            if pick[pos] < choices[pos].len() {
                break;
            }
            pick[pos] = 0;
            pos += 1;
        }
    }
}

/// Solves `H x + f + Σ_j ν_j a_j = 0`, `⟨a_j, x⟩ = bound_j` for the active rows and
/// checks multiplier signs and primal feasibility of the inactive rows.
fn solve_active_set<T: Scalar>(
    hess: &[T],
    f0: &[T],
    n: usize,
    constraints: &[Constraint<T>],
    active: &[(usize, Active)],
    tol: T,
) -> Option<(Vec<T>, Vec<T>)> {
    let m = active.len();
    let size = n + m;
    let mut a = vec![T::zero(); size * size];
    let mut rhs = vec![T::zero(); size];
    for i in 0..n {
        for j in 0..n {
            a[i * size + j] = hess[i * n + j];
        }
        rhs[i] = -f0[i];
    }
    for (j, (ci, which)) in active.iter().enumerate() {
        let c = &constraints[*ci];
        for i in 0..n {
            a[i * size + n + j] = c.row[i];
            a[(n + j) * size + i] = c.row[i];
        }
        rhs[n + j] = match which {
            Active::Lower => c.lower?,
            Active::Upper => c.upper?,
            Active::Free => unreachable!(),
        };
    }
    let sol = solve_linear(&a, &rhs, size)?;
    let (x, mult) = sol.split_at(n);
    for ((ci, which), mu) in active.iter().zip(mult) {
        let c = &constraints[*ci];
        let equality = c.lower.is_some() && c.lower == c.upper;
        let ok = equality
            || match which {
                Active::Lower => *mu <= tol,
                Active::Upper => *mu >= -tol,
                Active::Free => true,
            };
        if !ok {
            return None;
        }
    }
    for c in constraints {
        let v: T = c.row.iter().zip(x).map(|(r, xv)| *r * *xv).sum();
        let scale = T::one() + v.abs();
        if c.lower.is_some_and(|l| v < l - tol * scale) || c.upper.is_some_and(|u| v > u + tol * scale) {
            return None;
        }
    }
    Some((x.to_vec(), mult.to_vec()))
}

/// Gaussian elimination with partial pivoting. Rank-deficient but consistent systems
/// return the solution with free variables set to zero.
pub(crate) fn solve_linear<T: Scalar>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::one());
    let tol = scale * T::epsilon() * lit(1e3);
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == n {
            break;
        }
        let (best, val) = (row..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((row, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        if best != row {
            for j in 0..n {
                m.swap(row * n + j, best * n + j);
            }
            rhs.swap(row, best);
        }
        for r in (row + 1)..n {
            let factor = m[r * n + col] / m[row * n + col];
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[row * n + j];
                m[r * n + j] -= factor * v;
            }
            let v = rhs[row];
            rhs[r] -= factor * v;
        }
        pivot_cols.push(col);
        row += 1;
    }
    let rhs_scale = rhs.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    if rhs[row..].iter().any(|v| v.abs() > tol * rhs_scale) {
        return None;
    }
    let mut x = vec![T::zero(); n];
    for (r, &col) in pivot_cols.iter().enumerate().rev() {
        let mut acc = rhs[r];
        for j in (col + 1)..n {
            acc -= m[r * n + j] * x[j];
        }
        x[col] = acc / m[r * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Reference proximal-gradient method `x ← prox_{step·φ}(x − step·∇F(x))`, stopped once
/// successive iterates differ by at most `tol`.
pub fn proximal_gradient<T: Scalar>(
    gradient: impl Fn(&[T]) -> Vec<T>,
    prox: impl Fn(T, &[T]) -> Vec<T>,
    x0: Vec<T>,
    step: T,
    max_iters: usize,
    tol: T,
) -> (Vec<T>, bool) {
    let mut x = x0;
    for _ in 0..max_iters {
        let g = gradient(&x);
        let forward: Vec<T> = x.iter().zip(&g).map(|(a, b)| *a - step * *b).collect();
        let next = prox(step, &forward);
        let moved = dist(&next, &x);
        x = next;
        if moved <= tol {
            return (x, true);
        }
    }
    (x, false)
}

/// Per-tick checks against a known solution tuple `z̄`: growth of `‖x_n − z̄‖`, the
/// separation value `⟨z̄ − ȳ_n, ȳ*_n⟩` on ticks with `π_n < 0`, the distance of each
/// `a_{i,n}` to `C_i` for indicator `φ_i`, and `|⟨x_{n+1} − x_n, ȳ*_n⟩ − λ_n π_n|`.
#[derive(Debug, Clone)]
pub struct InvariantMonitor<T: Scalar = f64> {
    pub zbar: Tuple<T>,
    pub ticks: usize,
    pub worst_fejer_increase: T,
    pub worst_separation: T,
    pub worst_infeasibility: T,
    pub worst_descent_gap: T,
    /// Ticks with `π_n < 0` whose `θ_n` was not negative.
    pub theta_sign_failures: usize,
}

impl<T: Scalar> InvariantMonitor<T> {
    pub fn new(zbar: Tuple<T>) -> Self {
        let low = T::neg_infinity();
        Self {
            zbar,
            ticks: 0,
            worst_fejer_increase: low,
            worst_separation: low,
            worst_infeasibility: T::zero(),
            worst_descent_gap: T::zero(),
            theta_sign_failures: 0,
        }
    }

    /// `before` is `x_n`; `state` holds the candidates of tick `n` and `x_{n+1}`.
    pub fn observe(
        &mut self,
        spec: &ProblemSpec<T>,
        before: &Tuple<T>,
        state: &IterState<T>,
        report: &TickReport<T>,
        lambda: T,
    ) {
        self.ticks += 1;
        let after = state.current();
        let grow = after.dist(&self.zbar) - before.dist(&self.zbar);
        self.worst_fejer_increase = self.worst_fejer_increase.max(grow);
        for (i, p) in spec.players.iter().enumerate() {
            if let Some(cand) = &state.players[i] {
                if p.phi.is_indicator() {
                    let d = p.phi.distance_to_set(&cand.a).unwrap_or_else(T::infinity);
                    self.worst_infeasibility = self.worst_infeasibility.max(d);
                }
            }
        }
        if report.pi < T::zero() {
            if let (Some(point), Some(dir)) = (state.candidate_point(), state.candidate_direction()) {
                self.worst_separation = self.worst_separation.max(self.zbar.inner_diff(&point, &dir));
                let moved = after.inner_diff(before, &dir);
                self.worst_descent_gap = self.worst_descent_gap.max((moved - lambda * report.pi).abs());
            }
            if !report.theta.is_some_and(|t| t < T::zero()) {
                self.theta_sign_failures += 1;
            }
        }
    }
}

/// Monitor, tick reports, and the final tuple.
pub type MonitoredRun<T> = (InvariantMonitor<T>, Vec<TickReport<T>>, Tuple<T>);

/// Runs `ticks` iterations (no early stop) under an [`InvariantMonitor`].
pub fn monitored_run<T: Scalar>(
    spec: &ProblemSpec<T>,
    params: &SolverParams<T>,
    schedule: &Schedule,
    zbar: Tuple<T>,
    ticks: usize,
) -> Result<MonitoredRun<T>, SolverError> {
    let mut monitor = InvariantMonitor::new(zbar);
    let mut solver = Solver::new(spec, params, schedule, None)?;
    let mut reports = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        let before = solver.state().current().clone();
        let report = solver.tick()?;
        monitor.observe(spec, &before, solver.state(), &report, params.lambda.at(report.n));
        reports.push(report);
    }
    Ok((monitor, reports, solver.state().current().clone()))
}

/// Euclidean norm of the strategy difference, blockwise.
pub fn strategy_distance<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| dist(x, y).powi(2))
        .sum::<T>()
        .sqrt()
}

/// `‖x‖` over stacked blocks.
pub fn strategy_norm<T: Scalar>(a: &[Vec<T>]) -> T {
    a.iter().map(|x| norm(x).powi(2)).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_solver_handles_rank_deficiency() {
        let a = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(solve_linear(&a, &[0.0, 0.0], 2), Some(vec![0.0, 0.0]));
        assert_eq!(solve_linear(&a, &[1.0, 1.0], 2), None);
        let a: [f64; 4] = [2.0, 1.0, 1.0, 3.0];
        let x = solve_linear(&a, &[3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn known_equilibria_have_small_certificates() {
        use crate::problems::*;
        let instances: Vec<(ProblemSpec<f64>, InstanceMeta<f64>)> = vec![
            consensus_two_boxes(),
            consensus_ring(),
            matching_pennies(),
            shared_constraint_pair(5.0),
            box_quadratic(),
        ];
        for (spec, meta) in instances {
            let known = meta.known.unwrap();
            let z = known.solution_tuple(&spec);
            let cert = check_equilibrium(&spec, &z.x, &z.u_star, &z.v_star);
            assert!(cert.max_residual < 1e-12, "{:?}: {cert:?}", meta.family);
        }
    }

    #[test]
    fn perturbed_point_fails_certificate() {
        let (spec, meta) = crate::problems::consensus_two_boxes::<f64>();
        let mut z = meta.known.unwrap().solution_tuple(&spec);
        z.x[1][0] = 0.5;
        let cert = check_equilibrium(&spec, &z.x, &z.u_star, &z.v_star);
        assert!(cert.max_residual > 0.1);
    }

    #[test]
    fn best_response_finds_ring_equilibrium() {
        let (spec, _) = crate::problems::consensus_ring::<f64>();
        let br = best_response_fixed_point(&spec, &[vec![0.0], vec![0.0], vec![0.0]], 100, 1e-12).unwrap();
        assert!(br.is_converged());
        let x = br.x();
        assert!(strategy_distance(x, &[vec![5.0], vec![1.0], vec![4.0]]) < 1e-9, "{x:?}");
    }

    #[test]
    fn exact_solver_recovers_shared_multiplier() {
        let (spec, _) = crate::problems::shared_constraint_pair::<f64>(5.0);
        let sol = quadratic_game_exact(&spec).unwrap();
        assert!(strategy_distance(&sol.x, &[vec![2.0], vec![3.0]]) < 1e-12);
        assert!((sol.v_star[0][0] + 1.0).abs() < 1e-12);
        let (spec, _) = crate::problems::shared_constraint_pair::<f64>(-100.0);
        let sol = quadratic_game_exact(&spec).unwrap();
        assert!(strategy_distance(&sol.x, &[vec![1.0], vec![2.0]]) < 1e-12);
        assert!(sol.v_star[0][0].abs() < 1e-12);
    }

    #[test]
    fn proximal_gradient_solves_scalar_lasso() {
        // min ½(x − 3)² + |x|  ⇒  x = 2
        let (x, ok) = proximal_gradient(
            |x: &[f64]| vec![x[0] - 3.0],
            |g, v: &[f64]| vec![v[0].signum() * (v[0].abs() - g).max(0.0)],
            vec![0.0],
            0.5,
            1000,
            1e-15,
        );
        assert!(ok && (x[0] - 2.0).abs() < 1e-12);
    }
}
