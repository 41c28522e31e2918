//! Builders for the four example families: quadratic coupling (consensus),
//! minimax, shared affine constraints, and multivariate minimization.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linops::LinOp;
use crate::model::{
    check_coupling_gradient, check_structure, CouplingBlock, PlayerBlock, ProblemSpec,
    ValidationReport, Violation,
};
use crate::prox::NonsmoothTerm;
use crate::scalar::{lit, Scalar};
use crate::smooth::{CouplingGradient, GradientFn, ScalarFn, SmoothTerm};
use crate::tuple::Tuple;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("build refused:\n{0}")]
    Refused(ValidationReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    QuadraticCoupling,
    Minimax,
    SharedConstraint,
    Minimization,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::QuadraticCoupling => "quadratic_coupling",
            Family::Minimax => "minimax",
            Family::SharedConstraint => "shared_constraint",
            Family::Minimization => "minimization",
        })
    }
}

/// Which reference computation applies to an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleHint {
    BestResponse,
    QuadraticExact,
    /// Analytic solution of a zero-sum matrix game.
    ZeroSumAnalytic,
    ProximalGradient,
}

/// Primal-dual solution `(x̄, v̄*)`; `ū* = Q(M x̄)` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownEquilibrium<T: Scalar = f64> {
    pub x: Vec<Vec<T>>,
    pub v_star: Vec<Vec<T>>,
}

impl<T: Scalar> KnownEquilibrium<T> {
    /// `(x̄, M x̄, L x̄, Q(M x̄), v̄*)`
    pub fn solution_tuple(&self, spec: &ProblemSpec<T>) -> Tuple<T> {
        let u = spec.split_k(&spec.q.eval(&spec.apply_m(&self.x)));
        Tuple::lifted(spec, self.x.clone(), u, self.v_star.clone())
    }
}

pub type ObjectiveFn<T> = Arc<dyn Fn(&[Vec<T>]) -> T + Send + Sync>;

#[derive(Clone)]
pub struct InstanceMeta<T: Scalar = f64> {
    pub family: Family,
    pub oracle: OracleHint,
    pub known: Option<KnownEquilibrium<T>>,
    /// Sum objective, for minimization instances.
    pub objective: Option<ObjectiveFn<T>>,
}

impl<T: Scalar> fmt::Debug for InstanceMeta<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InstanceMeta")
            .field("family", &self.family)
            .field("oracle", &self.oracle)
            .field("known", &self.known)
            .field("objective", &self.objective.is_some())
            .finish()
    }
}

const BUILD_SAMPLES: usize = 200;
const BUILD_SEED: u64 = 0x5eed;

fn dense_abs_bound<T: Scalar>(dense: &[T], n: usize) -> T {
    // ‖A‖₂ ≤ sqrt(‖A‖₁ ‖A‖∞)
    let mut row_max = T::zero();
    let mut col_max = T::zero();
    for i in 0..n {
        let r: T = (0..n).map(|j| dense[i * n + j].abs()).sum();
        let c: T = (0..n).map(|j| dense[j * n + i].abs()).sum();
        row_max = row_max.max(r);
        col_max = col_max.max(c);
    }
    (row_max * col_max).sqrt()
}

fn blockwise_row_sums<T: Scalar>(dense: &[T], n: usize, offsets: &[usize]) -> Vec<T> {
    (0..offsets.len() - 1)
        .map(|i| {
            (offsets[i]..offsets[i + 1])
                .map(|r| (0..n).map(|c| dense[r * n + c].abs()).sum::<T>())
                .fold(T::zero(), T::max)
        })
        .collect()
}

fn finish<T: Scalar>(spec: ProblemSpec<T>) -> Result<ProblemSpec<T>, BuildError> {
    let report = check_structure(&spec);
    if !report.is_empty() {
        return Err(BuildError::Dimension(report.to_string()));
    }
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Quadratic coupling

/// One term `(κ/2)‖y_i − Σ_j ω_j y_j‖²` of a player's joint loss.
#[derive(Debug, Clone)]
pub struct QuadraticTerm<T: Scalar = f64> {
    pub kappa: T,
    /// Indexed by player; the player's own entry must be zero.
    pub omega: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct QuadraticPlayer<T: Scalar = f64> {
    pub phi: NonsmoothTerm<T>,
    pub psi: SmoothTerm<T>,
    pub alpha: T,
    /// `M_i: H_i → K` (common space).
    pub m: LinOp<T>,
    pub terms: Vec<QuadraticTerm<T>>,
}

/// Players minimize `φ_i + ψ_i + Σ_ℓ (κ_{i,ℓ}/2)‖M_i x_i − Σ_j ω_{i,ℓ,j} M_j x_j‖²`
/// over a common space `K` of dimension `dim_k`. `Q` is affine with
/// `∂_i f_i(y) = Σ_ℓ κ_{i,ℓ}(y_i − Σ_j ω_{i,ℓ,j} y_j)` and
/// `χ_i = Σ_ℓ κ_{i,ℓ}(1 + Σ_j ω_{i,ℓ,j})`. The build is refused when sampling finds `Q`
/// non-monotone.
pub fn build_quadratic_coupling<T: Scalar>(
    dim_k: usize,
    players: Vec<QuadraticPlayer<T>>,
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let np = players.len();
    let n = np * dim_k;
    let mut dense = vec![T::zero(); n * n];
    let mut blocks = Vec::with_capacity(np);
    for (i, p) in players.into_iter().enumerate() {
        if p.terms.is_empty() {
            return Err(BuildError::InvalidWeights(format!("player {i} has no coupling terms")));
        }
        let mut chi = T::zero();
        for (l, t) in p.terms.iter().enumerate() {
            if !(t.kappa > T::zero()) {
                return Err(BuildError::InvalidWeights(format!("kappa[{i}][{l}] must be positive")));
            }
            if t.omega.len() != np {
                return Err(BuildError::Dimension(format!(
                    "omega[{i}][{l}] has {} entries for {np} players",
                    t.omega.len()
                )));
            }
            if t.omega.iter().any(|w| !(*w >= T::zero())) || t.omega[i] != T::zero() {
                return Err(BuildError::InvalidWeights(format!(
                    "omega[{i}][{l}] must be nonnegative with a zero self-weight"
                )));
            }
            let wsum: T = t.omega.iter().copied().sum();
            chi += t.kappa * (T::one() + wsum);
            for r in 0..dim_k {
                let row = i * dim_k + r;
                dense[row * n + row] += t.kappa;
                for (j, w) in t.omega.iter().enumerate() {
                    dense[row * n + j * dim_k + r] -= t.kappa * *w;
                }
            }
        }
        blocks.push(PlayerBlock {
            dim_h: p.m.in_dim(),
            dim_k,
            phi: p.phi,
            psi: p.psi,
            alpha: p.alpha,
            m: p.m,
            chi,
        });
    }
    let kappa = dense_abs_bound(&dense, n);
    let q = CouplingGradient::affine(vec![dim_k; np], LinOp::dense(n, n, dense).unwrap(), vec![T::zero(); n], kappa);
    let spec = finish(ProblemSpec::new(blocks, vec![], q))?;

    let mut report = ValidationReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(BUILD_SEED);
    check_coupling_gradient(&spec, &mut rng, BUILD_SAMPLES, &mut report);
    report.violations.retain(|v| matches!(v, Violation::QNotMonotone { .. }));
    if !report.is_empty() {
        return Err(BuildError::Refused(report));
    }
    let meta = InstanceMeta {
        family: Family::QuadraticCoupling,
        oracle: OracleHint::BestResponse,
        known: None,
        objective: None,
    };
    Ok((spec, meta))
}

/// Consensus game on the real line: player `i` is confined to `sets[i]` and minimizes
/// `½ Σ_{ℓ ∈ neighbors[i]} (x_i − x_ℓ)²`.
pub fn consensus<T: Scalar>(
    sets: Vec<NonsmoothTerm<T>>,
    neighbors: &[Vec<usize>],
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let np = sets.len();
    if neighbors.len() != np {
        return Err(BuildError::Dimension(format!("{} neighbor lists for {np} players", neighbors.len())));
    }
    let players = sets
        .into_iter()
        .zip(neighbors)
        .map(|(phi, nbrs)| QuadraticPlayer {
            phi,
            psi: SmoothTerm::Zero,
            alpha: T::zero(),
            m: LinOp::identity(1),
            terms: nbrs
                .iter()
                .map(|&l| {
                    let mut omega = vec![T::zero(); np];
                    if l < np {
                        omega[l] = T::one();
                    }
                    QuadraticTerm { kappa: T::one(), omega }
                })
                .collect(),
        })
        .collect();
    build_quadratic_coupling(1, players)
}

/// Two players, `C_1 = [2, 3]`, `C_2 = [0, 1]`, each tracking the other. Equilibrium `(2, 1)`.
pub fn consensus_two_boxes<T: Scalar>() -> (ProblemSpec<T>, InstanceMeta<T>) {
    let sets = vec![
        NonsmoothTerm::interval(lit(2.0), lit(3.0)),
        NonsmoothTerm::interval(T::zero(), T::one()),
    ];
    let (spec, mut meta) = consensus(sets, &[vec![1], vec![0]]).expect("valid instance");
    meta.known = Some(KnownEquilibrium { x: vec![vec![lit(2.0)], vec![T::one()]], v_star: vec![] });
    (spec, meta)
}

/// Three players on a ring (`i` tracks `i + 1`), `C = ({5}, [0, 1], [2, 4])`.
/// Equilibrium `(5, 1, 4)`.
pub fn consensus_ring<T: Scalar>() -> (ProblemSpec<T>, InstanceMeta<T>) {
    let sets = vec![
        NonsmoothTerm::Singleton(vec![lit(5.0)]),
        NonsmoothTerm::interval(T::zero(), T::one()),
        NonsmoothTerm::interval(lit(2.0), lit(4.0)),
    ];
    let (spec, mut meta) = consensus(sets, &[vec![1], vec![2], vec![0]]).expect("valid instance");
    meta.known = Some(KnownEquilibrium {
        x: vec![vec![lit(5.0)], vec![T::one()], vec![lit(4.0)]],
        v_star: vec![],
    });
    (spec, meta)
}

// ---------------------------------------------------------------------------
// Minimax

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Minimizing block (`u`).
    Min,
    /// Maximizing block (`v`).
    Max,
}

#[derive(Debug, Clone)]
pub struct MinimaxPlayer<T: Scalar = f64> {
    pub dim: usize,
    pub side: Side,
    pub phi: NonsmoothTerm<T>,
    pub psi: SmoothTerm<T>,
    pub alpha: T,
}

/// Bilinear term `⟨L u_min, v_max⟩` with `L: H_min → H_max`.
#[derive(Debug, Clone)]
pub struct Bilinear<T: Scalar = f64> {
    pub min: usize,
    pub max: usize,
    pub op: LinOp<T>,
}

/// Smooth convex-concave saddle term, given by its stacked gradient `∇𝓛` (on all
/// blocks) and a Lipschitz constant of that gradient.
#[derive(Clone)]
pub struct SaddleTerm<T: Scalar = f64> {
    pub gradient: GradientFn<T>,
    pub lipschitz: T,
}

/// `min_u max_v Σ_{min}(φ+ψ)(u_i) − Σ_{max}(φ+ψ)(v_j) + 𝓛(u, v) + Σ ⟨L_{j,i} u_i, v_j⟩`
/// embedded with `M_i = Id`, `K_i = H_i` and no coupling blocks. `Q = R + S` where `R`
/// is the signed gradient of `𝓛` and `S` the skew bilinear part. `χ_i` is the larger of
/// `chi_floor` and the Lipschitz constant of `R`.
pub fn build_minimax<T: Scalar>(
    players: Vec<MinimaxPlayer<T>>,
    bilinear: Vec<Bilinear<T>>,
    saddle: Option<SaddleTerm<T>>,
    chi_floor: T,
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let dims: Vec<usize> = players.iter().map(|p| p.dim).collect();
    let mut offsets = vec![0];
    for d in &dims {
        offsets.push(offsets.last().unwrap() + d);
    }
    let n = *offsets.last().unwrap();
    if !players.iter().any(|p| p.side == Side::Max) {
        return Err(BuildError::Dimension("at least one maximizing block is required".into()));
    }
    let mut skew = vec![T::zero(); n * n];
    for (t, b) in bilinear.iter().enumerate() {
        let (Some(pi), Some(pj)) = (players.get(b.min), players.get(b.max)) else {
            return Err(BuildError::Dimension(format!("bilinear term {t} references unknown players")));
        };
        if pi.side != Side::Min || pj.side != Side::Max {
            return Err(BuildError::Dimension(format!("bilinear term {t} must pair a min block with a max block")));
        }
        if b.op.in_dim() != pi.dim || b.op.out_dim() != pj.dim {
            return Err(BuildError::Dimension(format!(
                "bilinear term {t} maps {} -> {}, expected {} -> {}",
                b.op.in_dim(),
                b.op.out_dim(),
                pi.dim,
                pj.dim
            )));
        }
        let d = b.op.to_dense();
        let (ri, rj) = (offsets[b.min], offsets[b.max]);
        for r in 0..pj.dim {
            for c in 0..pi.dim {
                let v = d[r * pi.dim + c];
                // min rows: + L* v ; max rows: − L u
                skew[(ri + c) * n + rj + r] += v;
                skew[(rj + r) * n + ri + c] -= v;
            }
        }
    }
    let s_norm = dense_abs_bound(&skew, n);
    let lip_r = saddle.as_ref().map_or(T::zero(), |s| s.lipschitz);
    let chi = lip_r.max(chi_floor);
    let q = match saddle {
        None => CouplingGradient::affine(dims.clone(), LinOp::dense(n, n, skew).unwrap(), vec![T::zero(); n], s_norm),
        Some(s) => {
            let signs: Vec<T> = players
                .iter()
                .flat_map(|p| {
                    let sign = if p.side == Side::Min { T::one() } else { -T::one() };
                    std::iter::repeat_n(sign, p.dim)
                })
                .collect();
            let grad = s.gradient.clone();
            CouplingGradient::custom(
                dims.clone(),
                move |y: &[T]| {
                    let g = grad(y);
                    (0..n)
                        .map(|r| {
                            let mut acc = signs[r] * g[r];
                            for c in 0..n {
                                acc += skew[r * n + c] * y[c];
                            }
                            acc
                        })
                        .collect()
                },
                None,
                s_norm + lip_r,
            )
        }
    };
    let blocks = players
        .into_iter()
        .map(|p| PlayerBlock {
            dim_h: p.dim,
            dim_k: p.dim,
            phi: p.phi,
            psi: p.psi,
            alpha: p.alpha,
            m: LinOp::identity(p.dim),
            chi,
        })
        .collect();
    let spec = finish(ProblemSpec::new(blocks, vec![], q))?;
    let meta = InstanceMeta {
        family: Family::Minimax,
        oracle: OracleHint::ZeroSumAnalytic,
        known: None,
        objective: None,
    };
    Ok((spec, meta))
}

/// Zero-sum matrix game: the row player (mixed strategy on the simplex) minimizes
/// `uᵀ A v`, the column player maximizes it.
pub fn matrix_game<T: Scalar>(payoff: &[Vec<T>], chi_floor: T) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let rows = payoff.len();
    let cols = payoff.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || payoff.iter().any(|r| r.len() != cols) {
        return Err(BuildError::Dimension("payoff matrix must be rectangular and nonempty".into()));
    }
    // ⟨L u, v⟩ = vᵀ L u = uᵀ A v  ⇒  L = Aᵀ
    let transposed: Vec<T> = (0..cols).flat_map(|c| (0..rows).map(move |r| (r, c))).map(|(r, c)| payoff[r][c]).collect();
    let op = LinOp::dense(cols, rows, transposed).unwrap();
    let player = |dim, side| MinimaxPlayer { dim, side, phi: NonsmoothTerm::Simplex, psi: SmoothTerm::Zero, alpha: T::zero() };
    build_minimax(
        vec![player(rows, Side::Min), player(cols, Side::Max)],
        vec![Bilinear { min: 0, max: 1, op }],
        None,
        chi_floor,
    )
}

/// Matching pennies, payoff `[[1, −1], [−1, 1]]`. Equilibrium `((½, ½), (½, ½))`.
pub fn matching_pennies<T: Scalar>() -> (ProblemSpec<T>, InstanceMeta<T>) {
    let one = T::one();
    let (spec, mut meta) = matrix_game(&[vec![one, -one], vec![-one, one]], one).expect("valid instance");
    let half = lit::<T>(0.5);
    meta.known = Some(KnownEquilibrium { x: vec![vec![half, half], vec![half, half]], v_star: vec![] });
    (spec, meta)
}

// ---------------------------------------------------------------------------
// Shared constraint

/// Players with strategy sets `sets[i]` (as indicators) and cost gradients given by
/// `costs`, subject to the shared constraint `Σ_i L_i x_i ∈ r + [0, ∞)^M`.
/// `χ_i` are taken from `chi`.
pub fn build_shared_constraint<T: Scalar>(
    sets: Vec<NonsmoothTerm<T>>,
    costs: CouplingGradient<T>,
    chi: Vec<T>,
    rows: Vec<LinOp<T>>,
    rhs: Vec<T>,
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let np = sets.len();
    if costs.dims().len() != np || chi.len() != np || rows.len() != np {
        return Err(BuildError::Dimension(format!(
            "{np} sets, {} cost blocks, {} chi values, {} constraint blocks",
            costs.dims().len(),
            chi.len(),
            rows.len()
        )));
    }
    let players: Vec<PlayerBlock<T>> = sets
        .into_iter()
        .zip(costs.dims().to_vec())
        .zip(chi)
        .map(|((phi, dim), chi)| PlayerBlock::simple(dim, phi, chi))
        .collect();
    let l: BTreeMap<usize, LinOp<T>> =
        rows.into_iter().enumerate().filter(|(_, op)| !op.is_zero()).collect();
    let coupling = CouplingBlock {
        dim_g: rhs.len(),
        g: NonsmoothTerm::ShiftedOrthant { r: rhs },
        h: SmoothTerm::Zero,
        beta: T::zero(),
        l,
    };
    let spec = finish(ProblemSpec::new(players, vec![coupling], costs))?;
    let meta = InstanceMeta {
        family: Family::SharedConstraint,
        oracle: OracleHint::QuadraticExact,
        known: None,
        objective: None,
    };
    Ok((spec, meta))
}

/// Costs `½‖x_i − t_i‖²`, `C_i` boxes, constraint `Σ_i rows_i x_i ≥ rhs`.
pub fn shared_constraint_targets<T: Scalar>(
    boxes: Vec<(Vec<T>, Vec<T>)>,
    targets: Vec<Vec<T>>,
    rows: Vec<LinOp<T>>,
    rhs: Vec<T>,
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let dims: Vec<usize> = targets.iter().map(Vec::len).collect();
    let n: usize = dims.iter().sum();
    let offset: Vec<T> = targets.iter().flatten().map(|t| -*t).collect();
    let costs = CouplingGradient::affine(dims, LinOp::identity(n), offset, T::one());
    let np = boxes.len();
    let sets = boxes.into_iter().map(|(l, u)| NonsmoothTerm::Box { lower: l, upper: u }).collect();
    build_shared_constraint(sets, costs, vec![T::one(); np], rows, rhs)
}

/// Two players on `[0, 10]`, targets `(1, 2)`, constraint `x_1 + x_2 ≥ rhs`.
/// With `rhs = 5` the variational equilibrium is `(2, 3)` with shared multiplier 1,
/// i.e. `v̄* = −1` (the normal cone of `5 + [0, ∞)` at 5 is `(−∞, 0]`).
pub fn shared_constraint_pair<T: Scalar>(rhs: T) -> (ProblemSpec<T>, InstanceMeta<T>) {
    let ten = lit::<T>(10.0);
    let (spec, mut meta) = shared_constraint_targets(
        vec![(vec![T::zero()], vec![ten]), (vec![T::zero()], vec![ten])],
        vec![vec![T::one()], vec![lit(2.0)]],
        vec![LinOp::identity(1), LinOp::identity(1)],
        vec![rhs],
    )
    .expect("valid instance");
    // x_i = t_i + λ with λ = max(0, (rhs − 3)/2), clipped to the boxes.
    let lambda = ((rhs - lit(3.0)) / lit(2.0)).max(T::zero());
    if lambda <= lit(8.0) {
        meta.known = Some(KnownEquilibrium {
            x: vec![vec![T::one() + lambda], vec![lit::<T>(2.0) + lambda]],
            v_star: vec![vec![-lambda]],
        });
    }
    (spec, meta)
}

// ---------------------------------------------------------------------------
// Minimization

#[derive(Debug, Clone)]
pub struct MinimizationBlock<T: Scalar = f64> {
    pub phi: NonsmoothTerm<T>,
    pub psi: SmoothTerm<T>,
    pub alpha: T,
    pub m: LinOp<T>,
}

/// Joint smooth objective `f` on `K = ⊕ K_i`.
#[derive(Clone)]
pub enum JointObjective<T: Scalar = f64> {
    Zero,
    /// `½⟨y, H y⟩ + ⟨c, y⟩` with `H` symmetric positive semidefinite.
    Quadratic { hessian: LinOp<T>, linear: Vec<T> },
    /// `½‖A y − b‖²`
    LeastSquares { a: LinOp<T>, b: Vec<T> },
    /// Arbitrary convex `f` with gradient, Lipschitz constant `kappa`, and per-block `chi`.
    Custom {
        value: ScalarFn<T>,
        gradient: GradientFn<T>,
        kappa: T,
        chi: Vec<T>,
    },
}

/// `min_x Σ_i (φ_i + ψ_i)(x_i) + f(M x) + Σ_k (g_k + h_k)(Σ_j L_{k,j} x_j)`, with every
/// `f_i = f` so that `Q = ∇f`. For quadratic `f`, `χ_i` is the largest absolute row sum
/// of the Hessian over block `i` (at least `chi_floor`).
pub fn build_minimization<T: Scalar>(
    blocks: Vec<MinimizationBlock<T>>,
    objective: JointObjective<T>,
    couplings: Vec<CouplingBlock<T>>,
    chi_floor: T,
) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let dims: Vec<usize> = blocks.iter().map(|b| b.m.out_dim()).collect();
    let n: usize = dims.iter().sum();
    let mut offsets = vec![0];
    for d in &dims {
        offsets.push(offsets.last().unwrap() + d);
    }
    let (q, chi, f_value): (CouplingGradient<T>, Vec<T>, ScalarFn<T>) = match objective {
        JointObjective::Zero => (CouplingGradient::zero(dims.clone()), vec![chi_floor; dims.len()], Arc::new(|_: &[T]| T::zero())),
        JointObjective::Quadratic { hessian, linear } => {
            if hessian.in_dim() != n || hessian.out_dim() != n || linear.len() != n {
                return Err(BuildError::Dimension(format!("quadratic objective must act on dimension {n}")));
            }
            let dense = hessian.to_dense();
            let chi = blockwise_row_sums(&dense, n, &offsets).into_iter().map(|c| c.max(chi_floor)).collect();
            let kappa = dense_abs_bound(&dense, n);
            let term = SmoothTerm::Quadratic { hessian: hessian.clone(), linear: linear.clone() };
            (CouplingGradient::affine(dims.clone(), hessian, linear, kappa), chi, Arc::new(move |y: &[T]| term.value(y)))
        }
        JointObjective::LeastSquares { a, b } => {
            if a.in_dim() != n || a.out_dim() != b.len() {
                return Err(BuildError::Dimension(format!("least-squares operator must act on dimension {n}")));
            }
            let ad = a.to_dense();
            let rows = a.out_dim();
            let mut gram = vec![T::zero(); n * n];
            let mut lin = vec![T::zero(); n];
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] = (0..rows).map(|r| ad[r * n + i] * ad[r * n + j]).sum();
                }
                lin[i] = -(0..rows).map(|r| ad[r * n + i] * b[r]).sum::<T>();
            }
            let chi = blockwise_row_sums(&gram, n, &offsets).into_iter().map(|c| c.max(chi_floor)).collect();
            let kappa = dense_abs_bound(&gram, n);
            let term = SmoothTerm::LeastSquares { a, b };
            (
                CouplingGradient::affine(dims.clone(), LinOp::dense(n, n, gram).unwrap(), lin, kappa),
                chi,
                Arc::new(move |y: &[T]| term.value(y)),
            )
        }
        JointObjective::Custom { value, gradient, kappa, chi } => {
            if chi.len() != dims.len() {
                return Err(BuildError::Dimension("one chi value per block is required".into()));
            }
            let v2 = value.clone();
            let q = CouplingGradient::custom(
                dims.clone(),
                move |y: &[T]| gradient(y),
                Some(Arc::new(move |_i: usize, y: &[T]| v2(y))),
                kappa,
            );
            (q, chi, value)
        }
    };
    let players: Vec<PlayerBlock<T>> = blocks
        .into_iter()
        .zip(chi)
        .map(|(b, chi)| PlayerBlock {
            dim_h: b.m.in_dim(),
            dim_k: b.m.out_dim(),
            phi: b.phi,
            psi: b.psi,
            alpha: b.alpha,
            m: b.m,
            chi,
        })
        .collect();
    let spec = finish(ProblemSpec::new(players, couplings, q))?;
    let objective_spec = spec.clone();
    let objective: ObjectiveFn<T> = Arc::new(move |x: &[Vec<T>]| {
        let s = &objective_spec;
        let mut total = f_value(&s.apply_m(x));
        for (i, p) in s.players.iter().enumerate() {
            total += p.phi.value(&x[i]).unwrap_or_else(T::nan) + p.psi.value(&x[i]);
        }
        for c in &s.couplings {
            let w = c.mix(x);
            total += c.g.value(&w).unwrap_or_else(T::nan) + c.h.value(&w);
        }
        total
    });
    let meta = InstanceMeta {
        family: Family::Minimization,
        oracle: OracleHint::ProximalGradient,
        known: None,
        objective: Some(objective),
    };
    Ok((spec, meta))
}

/// `½‖A x − b‖² + weight·‖x‖₁` split into one scalar player per coordinate.
pub fn lasso<T: Scalar>(a: &[Vec<T>], b: Vec<T>, weight: T) -> Result<(ProblemSpec<T>, InstanceMeta<T>), BuildError> {
    let a = LinOp::from_rows(a).map_err(|e| BuildError::Dimension(e.to_string()))?;
    let blocks = (0..a.in_dim())
        .map(|_| MinimizationBlock { phi: NonsmoothTerm::L1 { weight }, psi: SmoothTerm::Zero, alpha: T::zero(), m: LinOp::identity(1) })
        .collect();
    build_minimization(blocks, JointObjective::LeastSquares { a, b }, vec![], T::one())
}

pub const LASSO_A: [[f64; 3]; 4] = [[1.0, 0.5, 0.0], [0.2, 1.0, 0.3], [0.0, 0.4, 1.5], [0.5, 0.0, 0.5]];
pub const LASSO_B: [f64; 4] = [1.0, -2.0, 0.5, 0.3];
pub const LASSO_WEIGHT: f64 = 0.5;

/// Lasso in `R³` with data [`LASSO_A`], [`LASSO_B`], [`LASSO_WEIGHT`].
pub fn lasso_small<T: Scalar>() -> (ProblemSpec<T>, InstanceMeta<T>) {
    let a: Vec<Vec<T>> = LASSO_A.iter().map(|r| r.iter().map(|v| lit(*v)).collect()).collect();
    let b = LASSO_B.iter().map(|v| lit(*v)).collect();
    lasso(&a, b, lit(LASSO_WEIGHT)).expect("valid instance")
}

/// `½‖x‖²` over `[1, 2]²`, one player per coordinate. Minimizer `(1, 1)`.
pub fn box_quadratic<T: Scalar>() -> (ProblemSpec<T>, InstanceMeta<T>) {
    let blocks = (0..2)
        .map(|_| MinimizationBlock {
            phi: NonsmoothTerm::interval(T::one(), lit(2.0)),
            psi: SmoothTerm::Zero,
            alpha: T::zero(),
            m: LinOp::identity(1),
        })
        .collect();
    let (spec, mut meta) = build_minimization(
        blocks,
        JointObjective::Quadratic { hessian: LinOp::identity(2), linear: vec![T::zero(); 2] },
        vec![],
        T::one(),
    )
    .expect("valid instance");
    meta.known = Some(KnownEquilibrium { x: vec![vec![T::one()], vec![T::one()]], v_star: vec![] });
    (spec, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_problem;

    #[test]
    fn consensus_pseudo_gradient_and_constants() {
        let (spec, _) = consensus_two_boxes::<f64>();
        assert_eq!(spec.q.eval(&[3.0, 1.0]), vec![2.0, -2.0]);
        assert_eq!(spec.players.iter().map(|p| p.chi).collect::<Vec<_>>(), vec![2.0, 2.0]);
        assert_eq!(spec.q.lipschitz_kappa, 2.0);
    }

    #[test]
    fn shipped_instances_validate() {
        let specs: Vec<(&str, ProblemSpec<f64>)> = vec![
            ("two boxes", consensus_two_boxes().0),
            ("ring", consensus_ring().0),
            ("pennies", matching_pennies().0),
            ("shared", shared_constraint_pair(5.0).0),
            ("lasso", lasso_small().0),
            ("box quadratic", box_quadratic().0),
        ];
        for (name, spec) in specs {
            let report = validate_problem(&spec, 100, 3);
            assert!(report.is_empty(), "{name}: {report}");
        }
    }

    #[test]
    fn non_monotone_coupling_is_refused() {
        let term = |omega: Vec<f64>| QuadraticTerm { kappa: 1.0, omega };
        let player = |t| QuadraticPlayer {
            phi: NonsmoothTerm::Zero,
            psi: SmoothTerm::Zero,
            alpha: 0.0,
            m: LinOp::identity(1),
            terms: vec![t],
        };
        let err = build_quadratic_coupling(1, vec![player(term(vec![0.0, 3.0])), player(term(vec![0.0, 0.0]))]).unwrap_err();
        assert!(matches!(err, BuildError::Refused(_)), "{err}");
    }

    #[test]
    fn bad_weights_are_rejected() {
        let sets = vec![NonsmoothTerm::Zero, NonsmoothTerm::Zero];
        assert!(matches!(consensus::<f64>(sets.clone(), &[vec![0], vec![0]]), Err(BuildError::InvalidWeights(_))));
        assert!(matches!(consensus::<f64>(sets.clone(), &[vec![1]]), Err(BuildError::Dimension(_))));
        assert!(matches!(consensus::<f64>(sets, &[vec![], vec![0]]), Err(BuildError::InvalidWeights(_))));
    }

    #[test]
    fn minimax_operator_is_skew() {
        let (spec, _) = matching_pennies::<f64>();
        // Q(u, v) = (A v, −Aᵀ u)
        let q = spec.q.eval(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(q, vec![-1.0, 1.0, -1.0, 1.0]);
        let y = [0.3, -1.2, 2.0, 0.7];
        let qy = spec.q.eval(&y);
        assert!(crate::scalar::dot(&y, &qy).abs() < 1e-15);
    }

    #[test]
    fn minimax_rejects_mismatched_bilinear_term() {
        let p = |side| MinimaxPlayer { dim: 2, side, phi: NonsmoothTerm::Simplex, psi: SmoothTerm::Zero, alpha: 0.0 };
        let op = LinOp::identity(3);
        let err = build_minimax(vec![p(Side::Min), p(Side::Max)], vec![Bilinear { min: 0, max: 1, op }], None, 1.0);
        assert!(matches!(err, Err(BuildError::Dimension(_))));
    }

    #[test]
    fn saddle_term_enters_with_sign() {
        let p = |side| MinimaxPlayer { dim: 1, side, phi: NonsmoothTerm::Zero, psi: SmoothTerm::Zero, alpha: 0.0 };
        // 𝓛(u, v) = ½u² − ½v², convex-concave
        let saddle = SaddleTerm { gradient: Arc::new(|y: &[f64]| vec![y[0], -y[1]]), lipschitz: 1.0 };
        let (spec, _) = build_minimax(
            vec![p(Side::Min), p(Side::Max)],
            vec![Bilinear { min: 0, max: 1, op: LinOp::scaled(1, 2.0) }],
            Some(saddle),
            0.5,
        )
        .unwrap();
        assert_eq!(spec.q.eval(&[1.0, 1.0]), vec![3.0, -1.0]);
        assert_eq!(spec.players[0].chi, 1.0);
        assert!(validate_problem(&spec, 50, 1).is_empty());
    }

    #[test]
    fn shared_constraint_known_solution_tracks_rhs() {
        let (spec, meta) = shared_constraint_pair::<f64>(5.0);
        assert_eq!(spec.num_couplings(), 1);
        let known = meta.known.unwrap();
        assert_eq!(known.x, vec![vec![2.0], vec![3.0]]);
        assert_eq!(known.v_star, vec![vec![-1.0]]);
        let (_, meta) = shared_constraint_pair::<f64>(-100.0);
        assert_eq!(meta.known.unwrap().v_star, vec![vec![0.0]]);
    }

    #[test]
    fn least_squares_constants() {
        let (spec, meta) = lasso::<f64>(&[vec![1.0, 2.0], vec![0.0, 1.0]], vec![1.0, 1.0], 0.1).unwrap();
        // AᵀA = [[1, 2], [2, 5]]
        assert_eq!(spec.players.iter().map(|p| p.chi).collect::<Vec<_>>(), vec![3.0, 7.0]);
        assert_eq!(spec.q.eval(&[0.0, 0.0]), vec![-1.0, -3.0]);
        let f = meta.objective.unwrap();
        // A(−1, 1) = b, so only the ℓ1 term remains
        assert!((f(&[vec![-1.0], vec![1.0]]) - 0.2).abs() < 1e-15);
    }
}
