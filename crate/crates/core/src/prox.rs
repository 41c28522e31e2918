//! Proximity operators and resolvents for the nonsmooth terms of the game.
//!
//! `prox_{γf}(x)` is the unique minimizer of `f(y) + ‖y − x‖²/(2γ)`. For
//! indicator functions this is the Euclidean projection and does not depend
//! on `γ`. A [`NonsmoothTerm::Custom`] term carries an arbitrary resolvent
//! `(γ, x) ↦ J_{γA} x` of a maximally monotone operator `A`, which covers
//! set-valued terms that are not subdifferentials.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{dist, lit, norm, Scalar};

pub type ResolventFn<T> = Arc<dyn Fn(T, &[T]) -> Vec<T> + Send + Sync>;
pub type ValueFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ProxError {
    #[error("dimension mismatch: term has dimension {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible term definition: {0}")]
    Infeasible(&'static str),
    #[error("step size must be positive")]
    NonPositiveStep,
}

#[derive(Clone)]
pub struct CustomResolvent<T: Scalar> {
    pub dim: Option<usize>,
    pub resolvent: ResolventFn<T>,
    pub value: Option<ValueFn<T>>,
}

impl<T: Scalar> fmt::Debug for CustomResolvent<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomResolvent")
            .field("dim", &self.dim)
            .field("has_value", &self.value.is_some())
            .finish()
    }
}

/// Proper lower semicontinuous convex term, identified by its proximity operator.
#[derive(Debug, Clone)]
pub enum NonsmoothTerm<T: Scalar = f64> {
    Zero,
    /// Indicator of `[lower, upper]` (componentwise, bounds may be infinite).
    Box { lower: Vec<T>, upper: Vec<T> },
    /// Indicator of the closed ball `‖x − center‖ ≤ radius`.
    Ball { center: Vec<T>, radius: T },
    /// Indicator of `r + [0, ∞)^M`.
    ShiftedOrthant { r: Vec<T> },
    /// Indicator of the probability simplex `{x ≥ 0, Σ x = 1}`.
    Simplex,
    /// Indicator of `{a}`.
    Singleton(Vec<T>),
    /// `weight · ‖x‖₁`
    L1 { weight: T },
    /// `(c/2)‖x‖² + ⟨b, x⟩`
    Quadratic { c: T, b: Vec<T> },
    Custom(CustomResolvent<T>),
}

impl<T: Scalar> NonsmoothTerm<T> {
    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Self {
        NonsmoothTerm::Box { lower, upper }
    }

    pub fn interval(lower: T, upper: T) -> Self {
        NonsmoothTerm::Box { lower: vec![lower], upper: vec![upper] }
    }

    pub fn custom(
        dim: Option<usize>,
        resolvent: impl Fn(T, &[T]) -> Vec<T> + Send + Sync + 'static,
        value: Option<ValueFn<T>>,
    ) -> Self {
        NonsmoothTerm::Custom(CustomResolvent { dim, resolvent: Arc::new(resolvent), value })
    }

    /// Fixed dimension of the term, or `None` if it applies to any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NonsmoothTerm::Zero | NonsmoothTerm::Simplex | NonsmoothTerm::L1 { .. } => None,
            NonsmoothTerm::Box { lower, .. } => Some(lower.len()),
            NonsmoothTerm::Ball { center, .. } => Some(center.len()),
            NonsmoothTerm::ShiftedOrthant { r } => Some(r.len()),
            NonsmoothTerm::Singleton(a) => Some(a.len()),
            NonsmoothTerm::Quadratic { b, .. } => Some(b.len()),
            NonsmoothTerm::Custom(c) => c.dim,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            NonsmoothTerm::Box { .. }
                | NonsmoothTerm::Ball { .. }
                | NonsmoothTerm::ShiftedOrthant { .. }
                | NonsmoothTerm::Simplex
                | NonsmoothTerm::Singleton(_)
        )
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonsmoothTerm::Zero)
    }

    /// Checks that the term definition describes a proper function.
    pub fn validate(&self) -> Result<(), ProxError> {
        match self {
            NonsmoothTerm::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(ProxError::DimensionMismatch {
                        expected: lower.len(),
                        got: upper.len(),
                    });
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || l.is_nan()) {
                    return Err(ProxError::Infeasible("box with lower > upper"));
                }
                if lower.iter().any(|l| *l == T::infinity())
                    || upper.iter().any(|u| *u == T::neg_infinity())
                {
                    return Err(ProxError::Infeasible("box with empty interval at infinity"));
                }
            }
            NonsmoothTerm::Ball { radius, center } => {
                if !(*radius >= T::zero()) || !radius.is_finite() {
                    return Err(ProxError::Infeasible("ball with negative or non-finite radius"));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(ProxError::Infeasible("ball with non-finite center"));
                }
            }
            NonsmoothTerm::ShiftedOrthant { r } | NonsmoothTerm::Singleton(r) => {
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(ProxError::Infeasible("non-finite set offset"));
                }
            }
            NonsmoothTerm::L1 { weight } => {
                if !(*weight >= T::zero()) {
                    return Err(ProxError::Infeasible("negative l1 weight"));
                }
            }
            NonsmoothTerm::Quadratic { c, .. } => {
                if !(*c >= T::zero()) {
                    return Err(ProxError::Infeasible("quadratic with negative curvature"));
                }
            }
            NonsmoothTerm::Zero | NonsmoothTerm::Simplex | NonsmoothTerm::Custom(_) => {}
        }
        Ok(())
    }

    fn check_dim(&self, n: usize) -> Result<(), ProxError> {
        match self.dim() {
            Some(d) if d != n => Err(ProxError::DimensionMismatch { expected: d, got: n }),
            _ if n == 0 && matches!(self, NonsmoothTerm::Simplex) => {
                Err(ProxError::Infeasible("simplex of dimension 0"))
            }
            _ => Ok(()),
        }
    }

    /// `prox_{γ f}(x)`
    pub fn prox(&self, gamma: T, x: &[T]) -> Result<Vec<T>, ProxError> {
        if !(gamma > T::zero()) {
            return Err(ProxError::NonPositiveStep);
        }
        self.check_dim(x.len())?;
        self.validate()?;
        Ok(self.prox_unchecked(gamma, x))
    }

    /// `prox` without validation; the solver calls this after the problem was checked.
    pub fn prox_unchecked(&self, gamma: T, x: &[T]) -> Vec<T> {
        match self {
            NonsmoothTerm::Zero => x.to_vec(),
            NonsmoothTerm::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
            NonsmoothTerm::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    let s = *radius / d;
                    x.iter().zip(center).map(|(v, c)| *c + s * (*v - *c)).collect()
                }
            }
            NonsmoothTerm::ShiftedOrthant { r } => {
                x.iter().zip(r).map(|(v, ri)| v.max(*ri)).collect()
            }
            NonsmoothTerm::Simplex => project_simplex(x),
            NonsmoothTerm::Singleton(a) => a.clone(),
            NonsmoothTerm::L1 { weight } => {
                let t = gamma * *weight;
                x.iter().map(|v| v.signum() * (v.abs() - t).max(T::zero())).collect()
            }
            NonsmoothTerm::Quadratic { c, b } => {
                let denom = T::one() + gamma * *c;
                x.iter().zip(b).map(|(v, bi)| (*v - gamma * *bi) / denom).collect()
            }
            NonsmoothTerm::Custom(c) => (c.resolvent)(gamma, x),
        }
    }

    /// Function value; `+∞` outside the domain of an indicator. `None` for custom
    /// resolvents without a value callable.
    pub fn value(&self, x: &[T]) -> Option<T> {
        let inf = T::infinity();
        let tol = membership_tol::<T>();
        let v = match self {
            NonsmoothTerm::Zero => T::zero(),
            NonsmoothTerm::Box { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| {
                    *v >= *l - tol * (T::one() + l.abs()) && *v <= *u + tol * (T::one() + u.abs())
                });
                if inside { T::zero() } else { inf }
            }
            NonsmoothTerm::Ball { center, radius } => {
                if dist(x, center) <= *radius * (T::one() + tol) + tol { T::zero() } else { inf }
            }
            NonsmoothTerm::ShiftedOrthant { r } => {
                let inside = x.iter().zip(r).all(|(v, ri)| *v >= *ri - tol * (T::one() + ri.abs()));
                if inside { T::zero() } else { inf }
            }
            NonsmoothTerm::Simplex => {
                let n = T::from_usize(x.len()).unwrap_or_else(T::one);
                let sum: T = x.iter().copied().sum();
                if x.iter().all(|v| *v >= -tol) && (sum - T::one()).abs() <= tol * n {
                    T::zero()
                } else {
                    inf
                }
            }
            NonsmoothTerm::Singleton(a) => {
                if dist(x, a) <= tol * (T::one() + norm(a)) { T::zero() } else { inf }
            }
            NonsmoothTerm::L1 { weight } => *weight * x.iter().map(|v| v.abs()).sum::<T>(),
            NonsmoothTerm::Quadratic { c, b } => {
                let mut acc = T::zero();
                for (v, bi) in x.iter().zip(b) {
                    acc += *c / lit(2.0) * *v * *v + *bi * *v;
                }
                acc
            }
            NonsmoothTerm::Custom(c) => return c.value.as_ref().map(|f| f(x)),
        };
        Some(v)
    }

    /// Euclidean distance from `x` to the set, for indicator kinds.
    pub fn distance_to_set(&self, x: &[T]) -> Option<T> {
        if !self.is_indicator() {
            return None;
        }
        let p = self.prox_unchecked(T::one(), x);
        Some(dist(x, &p))
    }
}

fn membership_tol<T: Scalar>() -> T {
    T::epsilon() * lit(64.0)
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, v) in sorted.iter().enumerate() {
        cumsum += *v;
        let k = T::from_usize(j + 1).unwrap();
        let t = (cumsum - T::one()) / k;
        if *v - t > T::zero() {
            theta = t;
        }
    }
    x.iter().map(|v| (*v - theta).max(T::zero())).collect()
}

/// Largest objective improvement found over random competitors `y` of the candidate
/// `p`: `max_y [f(p) + ‖p−x‖²/(2γ)] − [f(y) + ‖y−x‖²/(2γ)]`. A correct prox yields
/// a value at most rounding error.
///
/// Competitors are perturbations of `p` at several scales plus projections of random
/// points (which lie in the domain of indicator terms).
pub fn prox_optimality_gap<T: Scalar>(
    term: &NonsmoothTerm<T>,
    gamma: T,
    x: &[T],
    candidate: &[T],
    trials: usize,
    seed: u64,
) -> T {
    let Some(fp) = term.value(candidate) else {
        return T::nan();
    };
    let two_gamma = lit::<T>(2.0) * gamma;
    let objective = |y: &[T], fy: T| fy + dist(y, x).powi(2) / two_gamma;
    let base = objective(candidate, fp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::neg_infinity();
    for t in 0..trials {
        let y: Vec<T> = if t % 4 == 3 {
            let z: Vec<T> =
                candidate.iter().map(|c| *c + lit(rng.gen_range(-3.0..3.0))).collect();
            term.prox_unchecked(gamma, &z)
        } else {
            let scale = [1e-4, 1e-2, 1.0][t % 4 % 3];
            candidate.iter().map(|c| *c + lit::<T>(scale * rng.gen_range(-1.0..1.0))).collect()
        };
        let Some(fy) = term.value(&y) else { continue };
        if fy.is_infinite() {
            continue;
        }
        let gap = base - objective(&y, fy);
        if gap > worst {
            worst = gap;
        }
    }
    if fp.is_infinite() {
        return T::infinity();
    }
    worst
}

/// [`prox_optimality_gap`] evaluated at the term's own prox output.
pub fn prox_optimality_check<T: Scalar>(
    term: &NonsmoothTerm<T>,
    gamma: T,
    x: &[T],
    trials: usize,
    seed: u64,
) -> Result<T, ProxError> {
    let p = term.prox(gamma, x)?;
    Ok(prox_optimality_gap(term, gamma, x, &p, trials, seed))
}
