//! Fixed-precision number formatting for emitted data files.

/// Significant digits kept in every number written to CSV or JSON.
pub const SIG_DIGITS: usize = 12;

/// Rounds `x` to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal text for `x` rounded to [`SIG_DIGITS`] significant digits.
/// Infinities render as `inf` / `-inf`.
pub fn sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    if r == 0.0 {
        return "0".into();
    }
    format!("{r}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig(2.0f64.sqrt()), "1.41421356237");
        assert_eq!(sig(200.0), "200");
        assert_eq!(sig(-0.0125), "-0.0125");
        assert_eq!(sig(f64::INFINITY), "inf");
        assert_eq!(sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig(-0.0), "0");
    }
}
