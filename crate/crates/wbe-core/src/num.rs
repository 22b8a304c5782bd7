//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

pub trait Real: Float + FromPrimitive + Sum<Self> + Debug + Display + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + Sum<Self> + Debug + Display + 'static {}

/// Shorthand for pulling an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable in scalar type")
}

/// Exact for any count below 2^53, which covers every series we handle.
#[inline]
pub fn real_of_usize<T: Real>(n: usize) -> T {
    real(n as f64)
}

/// Mean of a slice; `None` when empty.
pub fn mean<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum: T = values.iter().copied().sum();
    Some(sum / real_of_usize(values.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_slice() {
        assert_eq!(mean(&[1.0_f64, 2.0, 3.0]), Some(2.0));
        assert_eq!(mean::<f64>(&[]), None);
    }

    #[test]
    fn works_for_f32_and_f64() {
        fn takes_real<T: Real>(x: T) -> T {
            x + real(1.0)
        }
        assert_eq!(takes_real(1.0_f32), 2.0_f32);
        assert_eq!(takes_real(1.0_f64), 2.0_f64);
    }
}
