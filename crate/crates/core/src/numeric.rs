//! Small numeric helpers shared across modules: log-domain sums, logarithms of
//! big integers and conversions between the two.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

pub const LN2: f64 = std::f64::consts::LN_2;

/// `ln(e^a + e^b)`, exact for `-inf` inputs.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty or all-zero sum.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Natural logarithm of a big integer, `-inf` for zero.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).ln() + shift as f64 * LN2
}

/// Serializes a big integer as a decimal string.
pub fn ser_big<S: serde::Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(x)
}

/// Converts a big integer to `f64`, saturating at `+inf`.
pub fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `floor(e^{ln_x})` as a big integer.
///
/// Below 2^52 the floor is taken exactly on the `f64` value. Above that the
/// value carries only 53 significant bits anyway; it is shrunk by a relative
/// `1e-9` so the result never exceeds the real number it approximates.
pub fn floor_exp_big(ln_x: f64) -> BigUint {
    if ln_x == f64::NEG_INFINITY || ln_x < 0.0 {
        return BigUint::zero();
    }
    if ln_x < 52.0 * LN2 {
        let x = ln_x.exp();
        return BigUint::from(x.floor() as u64);
    }
    let shrunk = ln_x + (-1e-9f64).ln_1p();
    let e2 = shrunk / LN2;
    let shift = e2.floor() as u64 - 52;
    let mant = (2f64).powf(e2 - shift as f64);
    BigUint::from(mant.floor() as u64) << shift
}

/// Floor of `x` for finite nonnegative `x`, as a big integer.
pub fn floor_big(x: f64) -> BigUint {
    if !(x >= 1.0) {
        return BigUint::zero();
    }
    if x < 4503599627370496.0 {
        return BigUint::from(x.floor() as u64);
    }
    floor_exp_big(x.ln())
}

/// Relative closeness `|a-b| <= tol * max(|a|,|b|,floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}
