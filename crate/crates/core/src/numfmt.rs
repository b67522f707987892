//! `%g`-style formatting with a fixed number of significant digits.
//!
//! Output is locale-free: '.' decimal separator, no grouping, trailing zeros
//! trimmed, scientific notation only when the exponent is below -4 or at
//! least the digit count.

pub fn sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round once in scientific form so the exponent reflects the rounding.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
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

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig(0.874032048898, 9), "0.874032049");
        assert_eq!(sig(1.0, 6), "1");
        assert_eq!(sig(-0.14384103622589045, 6), "-0.143841");
        assert_eq!(sig(1234567.0, 6), "1.23457e6");
        assert_eq!(sig(0.0001, 6), "0.0001");
        assert_eq!(sig(0.00001, 6), "1e-5");
        assert_eq!(sig(9.9999999, 6), "10");
        assert_eq!(sig(std::f64::consts::FRAC_PI_2, 6), "1.5708");
        assert_eq!(sig(-0.0, 3), "0");
    }

    #[test]
    fn reparses_within_precision() {
        for &x in &[0.123456789123, 0.987654321987, 0.5, 0.015867926, 3.0e-7] {
            let back: f64 = sig(x, 9).parse().unwrap();
            assert!((back - x).abs() <= 5e-9 * x.abs());
        }
    }
}
