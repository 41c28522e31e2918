//! Linear operators between finite-dimensional blocks, with adjoints.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinOpError {
    #[error("dimension mismatch: expected input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense matrix data has {len} entries, expected {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("concatenated operators disagree on output dimension ({first} vs {other})")]
    ConcatMismatch { first: usize, other: usize },
    #[error("composition inner dimensions disagree: outer takes {outer_in}, inner yields {inner_out}")]
    ComposeMismatch { outer_in: usize, inner_out: usize },
}

/// A bounded linear map `R^in_dim -> R^out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinOp<T: Scalar = f64> {
    /// Row-major `rows x cols` matrix.
    Dense { rows: usize, cols: usize, data: Vec<T> },
    Identity(usize),
    Scaled { dim: usize, factor: T },
    Zero { in_dim: usize, out_dim: usize },
    /// `[A_1 A_2 ...]`: the input is the concatenation of the parts' inputs.
    HConcat(Vec<LinOp<T>>),
    /// `outer ∘ inner`
    Compose(Box<LinOp<T>>, Box<LinOp<T>>),
}

impl<T: Scalar> LinOp<T> {
    pub fn dense(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinOpError> {
        if data.len() != rows * cols {
            return Err(LinOpError::BadShape { rows, cols, len: data.len() });
        }
        Ok(LinOp::Dense { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinOpError> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        Self::dense(rows.len(), cols, data)
    }

    pub fn identity(dim: usize) -> Self {
        LinOp::Identity(dim)
    }

    pub fn scaled(dim: usize, factor: T) -> Self {
        LinOp::Scaled { dim, factor }
    }

    pub fn zero(in_dim: usize, out_dim: usize) -> Self {
        LinOp::Zero { in_dim, out_dim }
    }

    pub fn hconcat(parts: Vec<LinOp<T>>) -> Result<Self, LinOpError> {
        if let Some(first) = parts.first() {
            let out = first.out_dim();
            if let Some(bad) = parts.iter().find(|p| p.out_dim() != out) {
                return Err(LinOpError::ConcatMismatch { first: out, other: bad.out_dim() });
            }
        }
        Ok(LinOp::HConcat(parts))
    }

    pub fn compose(outer: LinOp<T>, inner: LinOp<T>) -> Result<Self, LinOpError> {
        if outer.in_dim() != inner.out_dim() {
            return Err(LinOpError::ComposeMismatch {
                outer_in: outer.in_dim(),
                inner_out: inner.out_dim(),
            });
        }
        Ok(LinOp::Compose(Box::new(outer), Box::new(inner)))
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LinOp::Dense { cols, .. } => *cols,
            LinOp::Identity(n) | LinOp::Scaled { dim: n, .. } => *n,
            LinOp::Zero { in_dim, .. } => *in_dim,
            LinOp::HConcat(parts) => parts.iter().map(LinOp::in_dim).sum(),
            LinOp::Compose(_, inner) => inner.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LinOp::Dense { rows, .. } => *rows,
            LinOp::Identity(n) | LinOp::Scaled { dim: n, .. } => *n,
            LinOp::Zero { out_dim, .. } => *out_dim,
            LinOp::HConcat(parts) => parts.first().map_or(0, LinOp::out_dim),
            LinOp::Compose(outer, _) => outer.out_dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, LinOp::Zero { .. })
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>, LinOpError> {
        if x.len() != self.in_dim() {
            return Err(LinOpError::DimensionMismatch { expected: self.in_dim(), got: x.len() });
        }
        let mut out = vec![T::zero(); self.out_dim()];
        self.apply_add(x, &mut out);
        Ok(out)
    }

    pub fn adjoint_apply(&self, y: &[T]) -> Result<Vec<T>, LinOpError> {
        if y.len() != self.out_dim() {
            return Err(LinOpError::DimensionMismatch { expected: self.out_dim(), got: y.len() });
        }
        let mut out = vec![T::zero(); self.in_dim()];
        self.adjoint_apply_add(y, &mut out);
        Ok(out)
    }

    /// `out += L x`. Dimensions are the caller's responsibility.
    pub fn apply_add(&self, x: &[T], out: &mut [T]) {
        match self {
            LinOp::Dense { cols, data, .. } => {
                for (o, row) in out.iter_mut().zip(data.chunks_exact((*cols).max(1))) {
                    let mut acc = T::zero();
                    for (a, v) in row.iter().zip(x) {
                        acc += *a * *v;
                    }
                    *o += acc;
                }
            }
            LinOp::Identity(_) => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += *v;
                }
            }
            LinOp::Scaled { factor, .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o += *factor * *v;
                }
            }
            LinOp::Zero { .. } => {}
            LinOp::HConcat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = p.in_dim();
                    p.apply_add(&x[offset..offset + n], out);
                    offset += n;
                }
            }
            LinOp::Compose(outer, inner) => {
                let mut mid = vec![T::zero(); inner.out_dim()];
                inner.apply_add(x, &mut mid);
                outer.apply_add(&mid, out);
            }
        }
    }

    /// `out += L* y`. Dimensions are the caller's responsibility.
    pub fn adjoint_apply_add(&self, y: &[T], out: &mut [T]) {
        match self {
            LinOp::Dense { cols, data, .. } => {
                for (row, yv) in data.chunks_exact((*cols).max(1)).zip(y) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += *a * *yv;
                    }
                }
            }
            LinOp::Identity(_) => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o += *v;
                }
            }
            LinOp::Scaled { factor, .. } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o += *factor * *v;
                }
            }
            LinOp::Zero { .. } => {}
            LinOp::HConcat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = p.in_dim();
                    p.adjoint_apply_add(y, &mut out[offset..offset + n]);
                    offset += n;
                }
            }
            LinOp::Compose(outer, inner) => {
                let mut mid = vec![T::zero(); outer.in_dim()];
                outer.adjoint_apply_add(y, &mut mid);
                inner.adjoint_apply_add(&mid, out);
            }
        }
    }

    /// Materializes the operator as a row-major dense matrix.
    pub fn to_dense(&self) -> Vec<T> {
        let (m, n) = (self.out_dim(), self.in_dim());
        let mut data = vec![T::zero(); m * n];
        let mut e = vec![T::zero(); n];
        let mut col = vec![T::zero(); m];
        for j in 0..n {
            e[j] = T::one();
            col.iter_mut().for_each(|c| *c = T::zero());
            self.apply_add(&e, &mut col);
            for i in 0..m {
                data[i * n + j] = col[i];
            }
            e[j] = T::zero();
        }
        data
    }

    /// Frobenius norm of the materialized operator; an upper bound on the spectral norm.
    pub fn frobenius_norm(&self) -> T {
        self.to_dense().iter().map(|v| *v * *v).sum::<T>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> LinOp {
        LinOp::dense(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn apply_examples() {
        assert_eq!(LinOp::identity(3).apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let a = LinOp::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(LinOp::<f64>::zero(2, 3).apply(&[5.0, 6.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(a.adjoint_apply(&[1.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            LinOp::identity(2).adjoint_apply(&[4.0, -1.0]).unwrap(),
            vec![4.0, -1.0]
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = LinOp::<f64>::zero(2, 3);
        assert_eq!(
            a.apply(&[1.0]),
            Err(LinOpError::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(a.adjoint_apply(&[1.0, 2.0]).is_err());
        assert!(LinOp::<f64>::dense(2, 2, vec![1.0; 3]).is_err());
        assert!(LinOp::compose(LinOp::<f64>::identity(2), LinOp::identity(3)).is_err());
        assert!(LinOp::hconcat(vec![LinOp::<f64>::identity(2), LinOp::identity(3)]).is_err());
    }

    #[test]
    fn random_dense_adjoint_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let l = random_dense(&mut rng, 4, 3);
            let x = random_vec(&mut rng, 3);
            let y = random_vec(&mut rng, 4);
            let lhs = dot(&l.apply(&x).unwrap(), &y);
            let rhs = dot(&x, &l.adjoint_apply(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn structured_forms_adjoint_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = random_dense(&mut rng, 3, 2);
            let b = random_dense(&mut rng, 2, 4);
            let ops = vec![
                LinOp::compose(a.clone(), b.clone()).unwrap(),
                LinOp::hconcat(vec![a.clone(), LinOp::scaled(3, -2.5), LinOp::zero(1, 3)])
                    .unwrap(),
                LinOp::compose(LinOp::scaled(3, 0.5), a.clone()).unwrap(),
            ];
            for op in ops {
                let x = random_vec(&mut rng, op.in_dim());
                let y = random_vec(&mut rng, op.out_dim());
                let lhs = dot(&op.apply(&x).unwrap(), &y);
                let rhs = dot(&x, &op.adjoint_apply(&y).unwrap());
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
            // (AB)* y = B*(A* y)
            let ab = LinOp::compose(a.clone(), b.clone()).unwrap();
            let y = random_vec(&mut rng, 3);
            let lhs = ab.adjoint_apply(&y).unwrap();
            let rhs = b.adjoint_apply(&a.adjoint_apply(&y).unwrap()).unwrap();
            for (l, r) in lhs.iter().zip(&rhs) {
                assert!((l - r).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn to_dense_round_trips() {
        let a = LinOp::from_rows(&[vec![1.0, 2.0, 0.0], vec![3.0, 4.0, -1.0]]).unwrap();
        assert_eq!(a.to_dense(), vec![1.0, 2.0, 0.0, 3.0, 4.0, -1.0]);
        assert_eq!(LinOp::<f32>::scaled(2, 3.0).to_dense(), vec![3.0, 0.0, 0.0, 3.0]);
    }
}
