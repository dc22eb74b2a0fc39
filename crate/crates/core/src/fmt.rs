//! Fixed-significance float formatting shared by the CSV and JSON writers.

use std::io;

/// Formats `x` like C's `%.{sig}g`: shortest of fixed or exponent notation
/// carrying `sig` significant digits, trailing zeros removed.
pub fn fmt_g(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent formatting");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
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

/// `serde_json` formatter that writes every float with a fixed number of
/// significant digits (17 gives a bit-exact round trip for `f64`).
#[derive(Debug, Clone, Copy)]
pub struct SigDigits(pub usize);

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let mut s = fmt_g(value, self.0);
        // keep floats recognisable as floats when re-read
        if !s.contains(['.', 'e']) {
            s.push_str(".0");
        }
        writer.write_all(s.as_bytes())
    }
}

/// Serializes `value` to JSON with 17 significant digits per float.
pub fn to_json_string<T: serde::Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(17));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_g(1.0, 6), "1");
        assert_eq!(fmt_g(0.1, 6), "0.1");
        assert_eq!(fmt_g(123456.0, 6), "123456");
        assert_eq!(fmt_g(1234567.0, 6), "1.23457e6");
        assert_eq!(fmt_g(0.0001, 6), "0.0001");
        assert_eq!(fmt_g(0.00001234, 6), "1.234e-5");
        assert_eq!(fmt_g(-2.5, 6), "-2.5");
        assert_eq!(fmt_g(0.1, 17), "0.10000000000000001");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[0.1, 1.0 / 3.0, -200.123456789, 1e-300, 6.02e23, f64::MIN_POSITIVE] {
            let s = fmt_g(x, 17);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn json_floats_round_trip() {
        let v = vec![0.1, 2.0, -1.0 / 7.0];
        let s = to_json_string(&v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
