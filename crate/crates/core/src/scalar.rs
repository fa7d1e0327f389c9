//! Scalar abstraction shared by the geometry and quadrature code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar used by the spline and quadrature layers.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Solves the dense system `a x = b` for several right-hand sides by Gaussian
/// elimination with partial pivoting. `a` is row-major `n x n`, `b` is row-major
/// `n x m`. Returns `None` if a pivot vanishes.
pub(crate) fn dense_solve<T: Real>(n: usize, mut a: Vec<T>, mut b: Vec<T>, m: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= T::min_positive_value() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            for k in 0..m {
                b.swap(col * m + k, piv * m + k);
            }
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - f * v;
            }
            for k in 0..m {
                let v = b[col * m + k];
                b[row * m + k] = b[row * m + k] - f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for k in 0..m {
            let mut s = b[col * m + k];
            for j in col + 1..n {
                s = s - a[col * n + j] * b[j * m + k];
            }
            b[col * m + k] = s / d;
        }
    }
    Some(b)
}
