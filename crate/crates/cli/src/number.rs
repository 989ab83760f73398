//! Fixed number formatting shared by both report formats.
//!
//! A value is rounded to `precision` significant digits (round-half-even on
//! the exact binary value), trailing zeros are dropped, and the result is
//! written positionally when the decimal exponent lies in `-5..precision`,
//! otherwise in scientific notation (`2.5e-9`, `1.23e+12`). Formatting a
//! parsed formatted value reproduces the same text.

pub const DEFAULT_PRECISION: usize = 9;
pub const MAX_PRECISION: usize = 17;

pub fn format_number(x: f64, precision: usize) -> String {
    let precision = precision.clamp(1, MAX_PRECISION);
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", precision - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let mut digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }

    let mut out = String::with_capacity(digits.len() + 8);
    if negative {
        out.push('-');
    }
    if (-5..precision as i32).contains(&exponent) {
        if exponent < 0 {
            out.push_str("0.");
            for _ in 0..(-exponent - 1) {
                out.push('0');
            }
            out.push_str(&digits);
        } else {
            let int_len = exponent as usize + 1;
            if digits.len() <= int_len {
                out.push_str(&digits);
                for _ in digits.len()..int_len {
                    out.push('0');
                }
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push('e');
        if exponent >= 0 {
            out.push('+');
        }
        out.push_str(&exponent.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let cases = [
            (0.4, 9, "0.4"),
            (-0.1, 9, "-0.1"),
            (10.0, 9, "10"),
            (2.5e-9, 9, "2.5e-9"),
            (5e-5, 9, "0.00005"),
            (4.9999999999999996e-5, 9, "0.00005"),
            (123456789012.0, 9, "1.23456789e+11"),
            (100000000.0, 9, "100000000"),
            (1e9, 9, "1e+9"),
            (-0.0, 9, "0"),
            (0.125, 2, "0.12"),
            (0.375, 2, "0.38"),
            (2.5, 1, "2"),
            (3.5, 1, "4"),
            (9.9999999999, 9, "10"),
            (1.0 / 3.0, 17, "0.33333333333333331"),
            (f64::INFINITY, 9, "inf"),
        ];
        for (x, p, expected) in cases {
            assert_eq!(format_number(x, p), expected, "{x} at {p}");
        }
    }
}
