//! Complex numbers with an extended binary exponent, plus the small
//! cancellation-free helpers used to move tiny offsets through inverse
//! branches whose derivatives are far below the double-precision range.

use serde::{Deserialize, Serialize};

use crate::C64;

/// `mant * 2^exp` with `mant` normalised so that `max(|re|, |im|)` lies in
/// `[0.5, 1)`, or zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtComplex {
    pub mant: C64,
    pub exp: i64,
}

/// `(m, e)` with `x = m * 2^e` and `0.5 <= |m| < 1`; `(0, 0)` for zero.
pub fn frexp(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i64;
    if raw == 0 {
        // subnormal: scale into the normal range first
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let e = raw - 1022;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, e)
}

/// `x * 2^e`, saturating to zero or infinity.
pub fn ldexp(x: f64, e: i64) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if !x.is_finite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl ExtComplex {
    pub const ZERO: ExtComplex = ExtComplex {
        mant: C64 { re: 0.0, im: 0.0 },
        exp: 0,
    };

    pub fn new(mant: C64, exp: i64) -> Self {
        ExtComplex { mant, exp }.normalized()
    }

    pub fn from_c64(z: C64) -> Self {
        Self::new(z, 0)
    }

    fn normalized(self) -> Self {
        let big = self.mant.re.abs().max(self.mant.im.abs());
        if big == 0.0 {
            return Self::ZERO;
        }
        let (_, e) = frexp(big);
        ExtComplex {
            mant: C64::new(ldexp(self.mant.re, -e), ldexp(self.mant.im, -e)),
            exp: self.exp + e,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    /// Nearest double-precision value; may underflow to zero or overflow.
    pub fn to_c64(&self) -> C64 {
        C64::new(ldexp(self.mant.re, self.exp), ldexp(self.mant.im, self.exp))
    }

    /// `log2 |self|`; `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mant.norm().log2() + self.exp as f64
    }

    pub fn ln_abs(&self) -> f64 {
        self.log2_abs() * std::f64::consts::LN_2
    }

    pub fn mul_c64(&self, z: C64) -> Self {
        Self::new(self.mant * z, self.exp)
    }

    pub fn div_c64(&self, z: C64) -> Self {
        // normalise the divisor first: |z|^2 may overflow
        let d = ExtComplex::from_c64(z);
        Self::new(self.mant / d.mant, self.exp - d.exp)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(self.mant * other.mant, self.exp + other.exp)
    }

    pub fn div(&self, other: &Self) -> Self {
        Self::new(self.mant / other.mant, self.exp - other.exp)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let e = self.exp.max(other.exp);
        let a = C64::new(ldexp(self.mant.re, self.exp - e), ldexp(self.mant.im, self.exp - e));
        let b = C64::new(ldexp(other.mant.re, other.exp - e), ldexp(other.mant.im, other.exp - e));
        Self::new(a + b, e)
    }

    pub fn neg(&self) -> Self {
        ExtComplex { mant: -self.mant, exp: self.exp }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Rescales a set of values by a common power of two so the largest
    /// lands near one; relative geometry is preserved exactly.
    pub fn common_scale(values: &[ExtComplex]) -> Vec<C64> {
        let e = values
            .iter()
            .filter(|v| !v.is_zero())
            .map(|v| v.exp)
            .max()
            .unwrap_or(0);
        values
            .iter()
            .map(|v| C64::new(ldexp(v.mant.re, v.exp - e), ldexp(v.mant.im, v.exp - e)))
            .collect()
    }
}

/// `log(1 + x)` accurate for tiny `x`.
pub fn log1p_c(x: C64) -> C64 {
    if x.norm() < 1e-4 {
        // alternating series, five terms give full precision below 1e-4
        let mut term = x;
        let mut sum = C64::new(0.0, 0.0);
        for k in 1..=5 {
            sum += term / k as f64;
            term *= -x;
        }
        sum
    } else {
        (C64::new(1.0, 0.0) + x).ln()
    }
}

/// `exp(x) - 1` accurate for tiny `x`.
pub fn expm1_c(x: C64) -> C64 {
    if x.norm() < 1e-4 {
        let mut term = x;
        let mut sum = C64::new(0.0, 0.0);
        for k in 1..=6 {
            sum += term;
            term *= x / (k + 1) as f64;
        }
        sum
    } else {
        x.exp() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frexp_ldexp_roundtrip() {
        for &x in &[1.0, 0.75, -3.5, 1e-310, 6.02e23, -2.2e-308] {
            let (m, e) = frexp(x);
            assert!((0.5..1.0).contains(&m.abs()), "{x}: {m}");
            assert_eq!(ldexp(m, e), x);
        }
        assert_eq!(ldexp(1.0, -5000), 0.0);
        assert_eq!(ldexp(1.0, 5000), f64::INFINITY);
    }

    #[test]
    fn tiny_values_keep_precision() {
        let a = ExtComplex::from_c64(C64::new(3.0, -4.0)).div_c64(C64::new(1e300, 0.0)).div_c64(C64::new(1e300, 0.0));
        let expected = 5.0f64.log2() - 600.0 * 10f64.log2();
        assert!((a.log2_abs() - expected).abs() < 1e-9, "{} vs {expected}", a.log2_abs());
        let back = a.mul_c64(C64::new(1e300, 0.0)).mul_c64(C64::new(1e300, 0.0)).to_c64();
        assert!((back - C64::new(3.0, -4.0)).norm() < 1e-14);
        assert_eq!(a.to_c64(), C64::new(0.0, 0.0));
    }

    #[test]
    fn add_and_scale() {
        let a = ExtComplex::new(C64::new(0.5, 0.0), -2000);
        let b = ExtComplex::new(C64::new(0.0, 0.5), -2000);
        let s = a.add(&b);
        let v = ExtComplex::common_scale(&[a, b, s]);
        assert!((v[2] - (v[0] + v[1])).norm() < 1e-16);
        assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn series_match_library() {
        let x = C64::new(3e-5, -2e-5);
        // compare against the identity exp(log1p(x)) - 1 = x
        assert!((expm1_c(log1p_c(x)) - x).norm() < 1e-20);
        let y = C64::new(0.3, 0.1);
        assert!((log1p_c(y) - (1.0 + y).ln()).norm() < 1e-16);
        assert!((expm1_c(y) - (y.exp() - 1.0)).norm() < 1e-16);
    }
}
