//! Forty-digit scalar built on `num_bigfloat::BigFloat`.
//!
//! `BigFloat`'s own ordering misreports operands stored with different digit
//! counts (for instance `1 + 1e-10` compares equal to `1`), so the wrapper
//! orders by the sign of the difference and forwards everything else.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_bigfloat::BigFloat;
use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::scalar::Real;

/// Extended-precision real (about 40 significant decimal digits).
#[derive(Clone, Copy, Default)]
pub struct Ext(pub BigFloat);

impl Ext {
    /// Parses a decimal literal.
    pub fn parse(s: &str) -> Option<Self> {
        BigFloat::parse(s).map(Ext)
    }

    fn sign_of_diff(self, other: Self) -> Option<Ordering> {
        if self.0.is_nan() || other.0.is_nan() {
            return None;
        }
        if self.0.is_inf() || other.0.is_inf() {
            return self.0.to_f64().partial_cmp(&other.0.to_f64());
        }
        let d = self.0 - other.0;
        Some(if d.is_zero() {
            Ordering::Equal
        } else if d.is_positive() {
            Ordering::Greater
        } else {
            Ordering::Less
        })
    }
}

impl PartialEq for Ext {
    fn eq(&self, other: &Self) -> bool {
        self.sign_of_diff(*other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.sign_of_diff(*other)
    }
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr for Ext {
            type Output = Ext;
            fn $m(self, rhs: Ext) -> Ext {
                Ext(self.0.$m(rhs.0))
            }
        }
    };
}
binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

/// `BigFloat` division loses digits when the dividend has a short mantissa
/// (`3 / x` is only good to about 13 digits), so the quotient is formed from
/// a Newton-refined reciprocal using multiplications only.
impl Div for Ext {
    type Output = Ext;
    fn div(self, rhs: Ext) -> Ext {
        let (a, b) = (self.0, rhs.0);
        if b.is_zero() || b.is_nan() || b.is_inf() || a.is_nan() || a.is_inf() {
            return Ext(a / b);
        }
        let approx = 1.0 / b.to_f64();
        if !approx.is_finite() || approx == 0.0 {
            return Ext(a / b);
        }
        let two = <BigFloat as From<u8>>::from(2u8);
        let mut y = <BigFloat as FromPrimitive>::from_f64(approx).expect("finite");
        for _ in 0..3 {
            y = y * (two - b * y);
        }
        let q = a * y;
        Ext(q + y * (a - q * b))
    }
}

impl Rem for Ext {
    type Output = Ext;
    fn rem(self, rhs: Ext) -> Ext {
        self - (self / rhs).trunc() * rhs
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext(-self.0)
    }
}

impl Zero for Ext {
    fn zero() -> Self {
        Ext(<BigFloat as From<u8>>::from(0u8))
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for Ext {
    fn one() -> Self {
        Ext(<BigFloat as From<u8>>::from(1u8))
    }
}

impl Num for Ext {
    type FromStrRadixErr = <BigFloat as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        <BigFloat as Num>::from_str_radix(s, radix).map(Ext)
    }
}

impl ToPrimitive for Ext {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.0.to_f64())
    }
}

impl FromPrimitive for Ext {
    fn from_i64(n: i64) -> Option<Self> {
        <BigFloat as FromPrimitive>::from_i64(n).map(Ext)
    }
    fn from_u64(n: u64) -> Option<Self> {
        <BigFloat as FromPrimitive>::from_u64(n).map(Ext)
    }
    fn from_f64(n: f64) -> Option<Self> {
        <BigFloat as FromPrimitive>::from_f64(n).map(Ext)
    }
}

impl NumCast for Ext {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        if let Some(i) = n.to_i64() {
            if let Some(f) = n.to_f64() {
                if f == i as f64 {
                    return Self::from_i64(i);
                }
            }
        }
        n.to_f64().and_then(Self::from_f64)
    }
}

impl Sum for Ext {
    fn sum<I: Iterator<Item = Ext>>(iter: I) -> Ext {
        iter.fold(Ext::zero(), |a, b| a + b)
    }
}

macro_rules! unary {
    ($($m:ident),*) => {
        $(fn $m(self) -> Self { Ext(Float::$m(self.0)) })*
    };
}

macro_rules! predicate {
    ($($m:ident),*) => {
        $(fn $m(self) -> bool { Float::$m(self.0) })*
    };
}

impl Float for Ext {
    fn nan() -> Self {
        Ext(<BigFloat as Float>::nan())
    }
    fn infinity() -> Self {
        Ext(<BigFloat as Float>::infinity())
    }
    fn neg_infinity() -> Self {
        Ext(<BigFloat as Float>::neg_infinity())
    }
    fn neg_zero() -> Self {
        Ext(<BigFloat as Float>::neg_zero())
    }
    fn min_value() -> Self {
        Ext(<BigFloat as Float>::min_value())
    }
    fn min_positive_value() -> Self {
        Ext(<BigFloat as Float>::min_positive_value())
    }
    fn max_value() -> Self {
        Ext(<BigFloat as Float>::max_value())
    }
    fn epsilon() -> Self {
        <Ext as Real>::precision()
    }
    predicate!(is_nan, is_infinite, is_finite, is_normal, is_sign_positive, is_sign_negative);
    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }
    unary!(floor, ceil, round, trunc, fract, abs, signum, recip, sqrt, exp, exp2, ln, log2, log10, cbrt);
    unary!(sin, cos, tan, asin, acos, atan, exp_m1, ln_1p, sinh, cosh, tanh, asinh, acosh, atanh);
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn powi(self, n: i32) -> Self {
        // Repeated squaring keeps integer powers exact to working precision.
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Ext::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
    fn powf(self, n: Self) -> Self {
        if self.is_zero() {
            return if n.is_zero() { Ext::one() } else { Ext::zero() };
        }
        Ext(Float::powf(self.0, n.0))
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn max(self, other: Self) -> Self {
        if self >= other || other.is_nan() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self <= other || other.is_nan() {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Ext::zero()
        }
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn atan2(self, other: Self) -> Self {
        Ext(Float::atan2(self.0, other.0))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.0)
    }
}

macro_rules! constant {
    ($($m:ident),*) => {
        $(fn $m() -> Self { Ext(<BigFloat as FloatConst>::$m()) })*
    };
}

#[allow(non_snake_case)]
impl FloatConst for Ext {
    constant!(
        E, FRAC_1_PI, FRAC_1_SQRT_2, FRAC_2_PI, FRAC_2_SQRT_PI, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6,
        FRAC_PI_8, LN_10, LN_2, LOG10_E, LOG2_E, PI, SQRT_2
    );
}

impl Real for Ext {
    fn precision() -> Self {
        Ext::parse("1e-38").expect("literal")
    }
    fn exp_cap() -> Self {
        Ext::from_i64(280).expect("literal")
    }
}
