//! The primal-dual tuple `(x, y, z, u*, v*)` the iteration runs on.

use crate::model::ProblemSpec;
use crate::scalar::{Scalar, VecBlock};

/// Blocks are indexed by player (`x`, `y`, `u_star`) or by coupling (`z`, `v_star`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple<T: Scalar = f64> {
    pub x: Vec<Vec<T>>,
    pub y: Vec<Vec<T>>,
    pub z: Vec<Vec<T>>,
    pub u_star: Vec<Vec<T>>,
    pub v_star: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TupleError {
    #[error("{field} has {got} blocks, expected {expected}")]
    BlockCount { field: &'static str, expected: usize, got: usize },
    #[error("{field}[{block}] has dimension {got}, expected {expected}")]
    BlockDim { field: &'static str, block: usize, expected: usize, got: usize },
    #[error("{field}[{block}] has a non-finite entry")]
    NonFinite { field: &'static str, block: usize },
}

impl<T: Scalar> Tuple<T> {
    pub fn zeros(spec: &ProblemSpec<T>) -> Self {
        let z = |dims: Vec<usize>| dims.into_iter().map(|d| vec![T::zero(); d]).collect();
        Self {
            x: z(spec.dims_h()),
            y: z(spec.dims_k()),
            z: z(spec.dims_g()),
            u_star: z(spec.dims_k()),
            v_star: z(spec.dims_g()),
        }
    }

    /// Tuple with the given strategies and every other component zero.
    pub fn from_strategies(spec: &ProblemSpec<T>, x: Vec<VecBlock<T>>) -> Self {
        let mut t = Self::zeros(spec);
        t.x = x.into_iter().map(VecBlock::into_inner).collect();
        t
    }

    /// `(x̄, M x̄, L x̄, u*, v*)`: the primal-dual point associated with a solution of the
    /// first-order system.
    pub fn lifted(spec: &ProblemSpec<T>, x: Vec<Vec<T>>, u_star: Vec<Vec<T>>, v_star: Vec<Vec<T>>) -> Self {
        let y = spec.split_k(&spec.apply_m(&x));
        let z = spec.couplings.iter().map(|c| c.mix(&x)).collect();
        Self { x, y, z, u_star, v_star }
    }

    pub fn check(&self, spec: &ProblemSpec<T>) -> Result<(), TupleError> {
        let fields = [
            ("x", &self.x, spec.dims_h()),
            ("y", &self.y, spec.dims_k()),
            ("z", &self.z, spec.dims_g()),
            ("u_star", &self.u_star, spec.dims_k()),
            ("v_star", &self.v_star, spec.dims_g()),
        ];
        for (field, blocks, dims) in fields {
            if blocks.len() != dims.len() {
                return Err(TupleError::BlockCount { field, expected: dims.len(), got: blocks.len() });
            }
            for (block, (b, d)) in blocks.iter().zip(&dims).enumerate() {
                if b.len() != *d {
                    return Err(TupleError::BlockDim { field, block, expected: *d, got: b.len() });
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(TupleError::NonFinite { field, block });
                }
            }
        }
        Ok(())
    }

    fn blocks(&self) -> impl Iterator<Item = &Vec<T>> {
        self.x.iter().chain(&self.y).chain(&self.z).chain(&self.u_star).chain(&self.v_star)
    }

    /// Squared norm in `H ⊕ K ⊕ G ⊕ K ⊕ G`.
    pub fn norm_sq(&self) -> T {
        self.blocks().flatten().map(|v| *v * *v).sum()
    }

    pub fn dist(&self, other: &Self) -> T {
        self.blocks()
            .zip(other.blocks())
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt()
    }

    /// `⟨self − base, dir⟩` in the product space.
    pub fn inner_diff(&self, base: &Self, dir: &Self) -> T {
        let mut acc = T::zero();
        for ((a, b), d) in self.blocks().zip(base.blocks()).zip(dir.blocks()) {
            for ((av, bv), dv) in a.iter().zip(b).zip(d) {
                acc += (*av - *bv) * *dv;
            }
        }
        acc
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks().flatten().copied().collect()
    }
}
