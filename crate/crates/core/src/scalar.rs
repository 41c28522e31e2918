//! Scalar abstraction and small dense-vector helpers shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar the solver is generic over: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc.sqrt()
}

/// `a - b`
pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// `y += s * x`
#[inline]
pub fn axpy<T: Scalar>(s: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * *xi;
    }
}

/// `y += x`
#[inline]
pub fn add_assign<T: Scalar>(y: &mut [T], x: &[T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += *xi;
    }
}

pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// A finite-dimensional block of a product space. Entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct VecBlock<T: Scalar = f64>(Vec<T>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("vector entry {index} is not finite")]
pub struct NonFiniteEntry {
    pub index: usize,
}

impl<T: Scalar> VecBlock<T> {
    pub fn new(values: Vec<T>) -> Result<Self, NonFiniteEntry> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(NonFiniteEntry { index }),
            None => Ok(Self(values)),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T: Scalar> std::ops::Deref for VecBlock<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for VecBlock<T> {
    type Error = NonFiniteEntry;

    fn try_from(v: Vec<T>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_block_rejects_non_finite() {
        assert_eq!(
            VecBlock::new(vec![1.0, f64::NAN]).unwrap_err(),
            NonFiniteEntry { index: 1 }
        );
        assert!(VecBlock::new(vec![1.0f32, f32::INFINITY]).is_err());
        let b = VecBlock::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(&b[..], &[1.0, 2.0]);
    }

    #[test]
    fn helpers() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        let mut y = vec![1.0, 1.0];
        axpy(2.0, &[1.0, -1.0], &mut y);
        assert_eq!(y, vec![3.0, -1.0]);
    }
}
