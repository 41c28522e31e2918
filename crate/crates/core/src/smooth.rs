//! Smooth terms (value + gradient) and the coupling gradient operator `Q`.

use std::fmt;
use std::sync::Arc;

use crate::linops::LinOp;
use crate::scalar::{dot, lit, Scalar};

pub type GradientFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type PartialObjectiveFn<T> = Arc<dyn Fn(usize, &[T]) -> T + Send + Sync>;

/// Convex differentiable term with Lipschitz gradient.
#[derive(Clone)]
pub enum SmoothTerm<T: Scalar = f64> {
    Zero,
    /// `½⟨x, Hx⟩ + ⟨b, x⟩` with `H` symmetric positive semidefinite.
    Quadratic { hessian: LinOp<T>, linear: Vec<T> },
    /// `½‖Ax − b‖²`
    LeastSquares { a: LinOp<T>, b: Vec<T> },
    Custom { dim: usize, value: ScalarFn<T>, gradient: GradientFn<T> },
}

impl<T: Scalar> fmt::Debug for SmoothTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothTerm::Zero => write!(f, "Zero"),
            SmoothTerm::Quadratic { hessian, linear } => f
                .debug_struct("Quadratic")
                .field("hessian", hessian)
                .field("linear", linear)
                .finish(),
            SmoothTerm::LeastSquares { a, b } => {
                f.debug_struct("LeastSquares").field("a", a).field("b", b).finish()
            }
            SmoothTerm::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

impl<T: Scalar> SmoothTerm<T> {
    /// `(weight/2)‖x − center‖²` as a quadratic.
    pub fn squared_distance(weight: T, center: &[T]) -> Self {
        SmoothTerm::Quadratic {
            hessian: LinOp::scaled(center.len(), weight),
            linear: center.iter().map(|c| -weight * *c).collect(),
        }
    }

    pub fn custom(
        dim: usize,
        value: impl Fn(&[T]) -> T + Send + Sync + 'static,
        gradient: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        SmoothTerm::Custom { dim, value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            SmoothTerm::Zero => None,
            SmoothTerm::Quadratic { linear, .. } => Some(linear.len()),
            SmoothTerm::LeastSquares { a, .. } => Some(a.in_dim()),
            SmoothTerm::Custom { dim, .. } => Some(*dim),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SmoothTerm::Zero)
    }

    pub fn value(&self, x: &[T]) -> T {
        match self {
            SmoothTerm::Zero => T::zero(),
            SmoothTerm::Quadratic { hessian, linear } => {
                let mut hx = vec![T::zero(); x.len()];
                hessian.apply_add(x, &mut hx);
                dot(x, &hx) / lit(2.0) + dot(linear, x)
            }
            SmoothTerm::LeastSquares { a, b } => {
                let mut r: Vec<T> = b.iter().map(|v| -*v).collect();
                a.apply_add(x, &mut r);
                dot(&r, &r) / lit(2.0)
            }
            SmoothTerm::Custom { value, .. } => value(x),
        }
    }

    /// `out += ∇f(x)`
    pub fn gradient_add(&self, x: &[T], out: &mut [T]) {
        match self {
            SmoothTerm::Zero => {}
            SmoothTerm::Quadratic { hessian, linear } => {
                hessian.apply_add(x, out);
                for (o, b) in out.iter_mut().zip(linear) {
                    *o += *b;
                }
            }
            SmoothTerm::LeastSquares { a, b } => {
                let mut r: Vec<T> = b.iter().map(|v| -*v).collect();
                a.apply_add(x, &mut r);
                a.adjoint_apply_add(&r, out);
            }
            SmoothTerm::Custom { gradient, .. } => {
                for (o, g) in out.iter_mut().zip(gradient(x)) {
                    *o += g;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::zero(); x.len()];
        self.gradient_add(x, &mut g);
        g
    }
}

/// How `Q` is evaluated.
#[derive(Clone)]
pub enum QOperator<T: Scalar> {
    /// `Q y = A y + c`
    Affine { matrix: LinOp<T>, offset: Vec<T> },
    /// Arbitrary callable. `objective(i, y)`, when given, returns `f_i(y)` and is used
    /// for finite-difference checks of `∂_i f_i`.
    Custom { eval: GradientFn<T>, objective: Option<PartialObjectiveFn<T>> },
}

/// The operator `Q: y ↦ (∂_i f_i(y))_i` on the stacked space `K = ⊕ K_i`.
#[derive(Clone)]
pub struct CouplingGradient<T: Scalar = f64> {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    op: QOperator<T>,
    /// Global Lipschitz constant κ.
    pub lipschitz_kappa: T,
}

impl<T: Scalar> fmt::Debug for CouplingGradient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.op {
            QOperator::Affine { .. } => "affine",
            QOperator::Custom { .. } => "custom",
        };
        f.debug_struct("CouplingGradient")
            .field("dims", &self.dims)
            .field("kind", &kind)
            .field("lipschitz_kappa", &self.lipschitz_kappa)
            .finish()
    }
}

fn offsets_of(dims: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    let mut offsets = Vec::with_capacity(dims.len() + 1);
    offsets.push(0);
    for d in dims {
        acc += d;
        offsets.push(acc);
    }
    offsets
}

impl<T: Scalar> CouplingGradient<T> {
    pub fn affine(dims: Vec<usize>, matrix: LinOp<T>, offset: Vec<T>, kappa: T) -> Self {
        let offsets = offsets_of(&dims);
        Self { dims, offsets, op: QOperator::Affine { matrix, offset }, lipschitz_kappa: kappa }
    }

    /// `Q = 0` (every `f_i` constant).
    pub fn zero(dims: Vec<usize>) -> Self {
        let n = dims.iter().sum();
        Self::affine(dims, LinOp::zero(n, n), vec![T::zero(); n], T::zero())
    }

    pub fn custom(
        dims: Vec<usize>,
        eval: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        objective: Option<PartialObjectiveFn<T>>,
        kappa: T,
    ) -> Self {
        let offsets = offsets_of(&dims);
        Self {
            dims,
            offsets,
            op: QOperator::Custom { eval: Arc::new(eval), objective },
            lipschitz_kappa: kappa,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Block `i` occupies `offsets[i]..offsets[i + 1]` of the stacked vector.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn operator(&self) -> &QOperator<T> {
        &self.op
    }

    /// Dimensions of `matrix` / `offset` for affine `Q`, checked against the stacking.
    pub fn structural_dims(&self) -> (usize, usize, usize) {
        match &self.op {
            QOperator::Affine { matrix, offset } => {
                (matrix.in_dim(), matrix.out_dim(), offset.len())
            }
            QOperator::Custom { .. } => {
                let n = self.total_dim();
                (n, n, n)
            }
        }
    }

    /// Evaluates `Q y` on the stacked vector.
    pub fn eval(&self, y: &[T]) -> Vec<T> {
        match &self.op {
            QOperator::Affine { matrix, offset } => {
                let mut out = vec![T::zero(); matrix.out_dim()];
                matrix.apply_add(y, &mut out);
                for (o, c) in out.iter_mut().zip(offset) {
                    *o += *c;
                }
                out
            }
            QOperator::Custom { eval, .. } => eval(y),
        }
    }

    /// `f_i(y)`, when recoverable. For affine `Q` this is
    /// `½⟨y_i, A_ii y_i⟩ + ⟨y_i, Σ_{j≠i} A_ij y_j + c_i⟩`, valid when `A_ii` is symmetric.
    pub fn partial_objective(&self, i: usize, y: &[T]) -> Option<T> {
        match &self.op {
            QOperator::Affine { matrix, offset } => {
                let n = self.total_dim();
                let dense = matrix.to_dense();
                let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
                let mut total = T::zero();
                for r in lo..hi {
                    let mut row = offset[r];
                    let mut diag = T::zero();
                    for c in 0..n {
                        if (lo..hi).contains(&c) {
                            diag += dense[r * n + c] * y[c];
                        } else {
                            row += dense[r * n + c] * y[c];
                        }
                    }
                    total += y[r] * (diag / lit(2.0) + row);
                }
                Some(total)
            }
            QOperator::Custom { objective, .. } => objective.as_ref().map(|f| f(i, y)),
        }
    }

    /// Dense matrix and offset, for affine `Q`.
    pub fn affine_parts(&self) -> Option<(Vec<T>, &[T])> {
        match &self.op {
            QOperator::Affine { matrix, offset } => Some((matrix.to_dense(), offset.as_slice())),
            QOperator::Custom { .. } => None,
        }
    }
}
