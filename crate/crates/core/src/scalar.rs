//! Scalar abstraction for the analytic code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the closed-form analytics are evaluated in.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_count(x: usize) -> Self {
        Self::from_usize(x).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Exact binomial coefficient, `None` on `u128` overflow.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step
        c = c.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(c)
}

/// `ln C(n, k)`; `-inf` when `k > n`.
///
/// Exact integer path for `n <= 64`, otherwise a sum of `ln((n-k+i)/i)`
/// over the shorter side.
pub fn ln_binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::neg_infinity();
    }
    if n <= 64 {
        let c = binomial_exact(n as u64, k as u64).expect("C(64, k) fits in u128");
        return T::from_u128(c).expect("binomial representable").ln();
    }
    let k = k.min(n - k);
    let mut acc = T::zero();
    for i in 1..=k {
        acc = acc + (T::from_count(n - k + i) / T::from_count(i)).ln();
    }
    acc
}

/// Numerically stable `ln(sum(exp(terms)))`.
pub fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let max = terms
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == T::neg_infinity() {
        return max;
    }
    let s = terms
        .iter()
        .fold(T::zero(), |acc, &t| acc + (t - max).exp());
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial_exact(4, 2), Some(6));
        assert_eq!(binomial_exact(64, 32), Some(1_832_624_140_942_590_534));
        assert_eq!(binomial_exact(3, 5), Some(0));
        let v: f64 = ln_binomial(100, 3);
        assert!((v - (161_700f64).ln()).abs() < 1e-12);
        let w: f64 = ln_binomial(1000, 2);
        assert!((w - (499_500f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn lse_handles_empty_and_large() {
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
