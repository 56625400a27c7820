//! Scalar abstractions.
//!
//! [`Scalar`] is the field-like element type every matrix kernel and the
//! gradient tape run over; it admits exact rationals. [`Real`] adds the
//! floating-point operations (square roots, transcendental activations)
//! that the normalization and trust code need.

use std::fmt::Debug;
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Strided view of a dense operand for [`Scalar::gemm`].
#[derive(Clone, Copy, Debug)]
pub struct Strided<'a, T> {
    pub data: &'a [T],
    pub row_stride: usize,
    pub col_stride: usize,
}

pub trait Scalar:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Human-readable name used in diagnostics and checkpoint metadata.
    const NAME: &'static str;

    /// Lossy conversion from `f64` (exact for rationals built from finite floats).
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::zero)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_value(&self) -> bool {
        true
    }

    fn tanh_checked(&self) -> Option<Self> {
        None
    }

    /// `c (m×n) = a (m×k) · b (k×n)`, overwriting `c` (row-major, contiguous).
    ///
    /// The default is a plain triple loop in i-k-j order; float types
    /// override it with a blocked kernel.
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: Strided<'_, Self>,
        b: Strided<'_, Self>,
        c: &mut [Self],
    ) {
        for v in c.iter_mut() {
            *v = Self::zero();
        }
        for i in 0..m {
            for p in 0..k {
                let av = &a.data[i * a.row_stride + p * a.col_stride];
                if av.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let bv = &b.data[p * b.row_stride + j * b.col_stride];
                    let prod = av.clone() * bv.clone();
                    let slot = &mut c[i * n + j];
                    *slot = slot.clone() + prod;
                }
            }
        }
    }
}

/// Floating-point scalars: what training, normalization and trust run on.
pub trait Real: Scalar + Float + Sum + Default + std::fmt::Display + std::fmt::LowerExp {}

impl<T> Real for T where T: Scalar + Float + Sum + Default + std::fmt::Display + std::fmt::LowerExp {}

macro_rules! float_scalar {
    ($t:ty, $name:expr, $kernel:path) => {
        impl Scalar for $t {
            const NAME: &'static str = $name;

            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }

            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }

            fn is_finite_value(&self) -> bool {
                self.is_finite()
            }

            fn tanh_checked(&self) -> Option<Self> {
                Some(self.tanh())
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: Strided<'_, Self>,
                b: Strided<'_, Self>,
                c: &mut [Self],
            ) {
                assert!(c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    c[..m * n].fill(0.0);
                    return;
                }
                let a_last = (m - 1) * a.row_stride + (k - 1) * a.col_stride;
                let b_last = (k - 1) * b.row_stride + (n - 1) * b.col_stride;
                assert!(a_last < a.data.len() && b_last < b.data.len());
                // SAFETY: every index touched by the kernel is bounded by
                // a_last / b_last / m*n, all checked above.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.data.as_ptr(),
                        a.row_stride as isize,
                        a.col_stride as isize,
                        b.data.as_ptr(),
                        b.row_stride as isize,
                        b.col_stride as isize,
                        0.0,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

float_scalar!(f64, "f64", matrixmultiply::dgemm);
float_scalar!(f32, "f32", matrixmultiply::sgemm);

impl Scalar for BigRational {
    const NAME: &'static str = "rational";

    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
}
