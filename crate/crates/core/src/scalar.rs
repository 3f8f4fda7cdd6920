//! Scalar abstraction shared by the numeric modules.
//!
//! Networks, the optimizer, advantage estimation and the mixing arithmetic are
//! written against [`Scalar`] so they work for both `f32` and `f64`. Everything
//! that trains or plans in this crate instantiates them with `f64`; see the
//! aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the numeric core.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Every constant used in this crate is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable as scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product with four independent accumulators so the compiler can vectorize it.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [S::zero(); 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = S::zero();
    for (x, y) in rem_a.iter().zip(rem_b) {
        tail += *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<S: Scalar>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Numerically stable softmax of `logits` scaled by `1 / temperature`.
pub fn softmax_with_temperature<S: Scalar>(logits: &[S], temperature: S) -> Vec<S> {
    let max = logits
        .iter()
        .copied()
        .fold(S::neg_infinity(), |m, v| if v > m { v } else { m });
    let mut out: Vec<S> = logits
        .iter()
        .map(|&v| ((v - max) / temperature).exp())
        .collect();
    let total: S = out.iter().copied().sum();
    for o in &mut out {
        *o /= total;
    }
    out
}

/// True when every entry is non-negative and the entries sum to one within `tol`.
pub fn is_probability_vector<S: Scalar>(p: &[S], tol: S) -> bool {
    !p.is_empty()
        && p.iter().all(|&v| v >= S::zero() && v.is_finite())
        && (p.iter().copied().sum::<S>() - S::one()).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum_for_odd_lengths() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax_with_temperature(&[1000.0f32, 1000.0], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-6);
    }
}
