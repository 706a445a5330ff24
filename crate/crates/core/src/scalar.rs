//! Scalar abstraction shared by every numeric container in the crate.
//!
//! Everything generic is written against [`Real`], which is implemented for
//! `f32`, `f64` and [`BigRational`]. The rational instance makes lattice
//! Green functions and star-product identities checkable without rounding.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Real scalar field used for matrices, series coefficients and solutions.
pub trait Real:
    Clone + Debug + PartialOrd + Signed + NumAssign + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether arithmetic on this type is exact.
    const EXACT: bool;

    /// `num / den` in this scalar type.
    fn ratio(num: i64, den: i64) -> Self;

    /// Nearest value to `x`; exact types convert the binary value exactly.
    fn from_f64_lossy(x: f64) -> Self;

    /// Nearest `f64`.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn of_usize(n: usize) -> Self {
        Self::ratio(n as i64, 1)
    }

    fn half() -> Self {
        Self::ratio(1, 2)
    }
}

macro_rules! impl_float {
    ($t:ty) => {
        impl Real for $t {
            const EXACT: bool = false;

            fn ratio(num: i64, den: i64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);

impl Real for BigRational {
    const EXACT: bool = true;

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
}

/// Complex scalar over a [`Real`].
pub type C<R> = Complex<R>;

pub fn c_real<R: Real>(x: R) -> C<R> {
    Complex::new(x, R::zero())
}

pub fn c_imag<R: Real>(x: R) -> C<R> {
    Complex::new(R::zero(), x)
}

/// `i` in the complex scalar type.
pub fn c_i<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::one())
}

/// `|re| + |im|`, an inexpensive magnitude usable for exact types.
pub fn c_abs1<R: Real>(z: &C<R>) -> R {
    z.re.abs() + z.im.abs()
}

/// Modulus as `f64`.
pub fn c_norm_f64<R: Real>(z: &C<R>) -> f64 {
    z.re.to_f64_lossy().hypot(z.im.to_f64_lossy())
}

pub fn c_to_f64<R: Real>(z: &C<R>) -> Complex<f64> {
    Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

pub fn c_from_f64<R: Real>(z: Complex<f64>) -> C<R> {
    Complex::new(R::from_f64_lossy(z.re), R::from_f64_lossy(z.im))
}

/// `n!` as a scalar.
pub fn factorial<R: Real>(n: usize) -> R {
    let mut acc = R::one();
    for k in 2..=n {
        acc *= R::of_usize(k);
    }
    acc
}

/// Integer power of a complex scalar.
pub fn c_pow<R: Real>(z: &C<R>, n: usize) -> C<R> {
    let mut acc = c_real(R::one());
    for _ in 0..n {
        acc = acc * z.clone();
    }
    acc
}
