//! Small numeric helpers shared across the exact and simulated paths.

use num::{BigInt, BigRational, One, ToPrimitive};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `x^alpha` for `x >= 0`, with `0^alpha = 0`.
pub(crate) fn pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (alpha * x.ln()).exp()
    }
}

/// `(a/b)^alpha` for `0 <= a <= b`, evaluated without forming `b^alpha`.
pub(crate) fn ratio_pow(a: f64, b: f64, alpha: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if a == b {
        1.0
    } else {
        (alpha * (a / b).ln()).exp()
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_pow(base: u64, exp: u32) -> BigInt {
    num::pow(BigInt::from(base), exp as usize)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // Scale into range first so huge numerators/denominators do not overflow.
    r.to_f64().unwrap_or_else(|| {
        let num_bits = r.numer().bits() as i64;
        let den_bits = r.denom().bits() as i64;
        let shift = num_bits.max(den_bits) - 900;
        let scale = BigInt::one() << shift.max(0) as usize;
        let n = (r.numer() / &scale).to_f64().unwrap_or(0.0);
        let d = (r.denom() / &scale).to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// Formats `x` with `digits` significant digits, `%g`-style, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
