//! Fixed-significance float rendering shared by every text format.
//!
//! Output follows C's `%.{n}g` layout without trailing-zero trimming: fixed
//! notation when the decimal exponent lies in `[-4, n)`, scientific otherwise.
//! With `n = 17` every finite `f64` survives a text round trip bit-for-bit.

use std::io;

/// Digits used by checkpoints and latent stores.
pub const LOSSLESS_DIGITS: usize = 17;
/// Digits used by metrics CSV files.
pub const METRIC_DIGITS: usize = 9;

pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".to_owned()
        } else if x > 0.0 {
            "inf".to_owned()
        } else {
            "-inf".to_owned()
        };
    }
    if x == 0.0 {
        let zero = if digits > 1 {
            format!("0.{}", "0".repeat(digits - 1))
        } else {
            "0".to_owned()
        };
        return if x.is_sign_negative() {
            format!("-{zero}")
        } else {
            zero
        };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (_, exp) = sci.split_once('e').expect("scientific rendering");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return sci;
    }
    // `exp` is taken after rounding, so the fixed rendering carries the same digits.
    let decimals = (digits as i32 - 1 - exp) as usize;
    format!("{:.*}", decimals, x)
}

/// `serde_json` formatter that renders every `f64` with [`LOSSLESS_DIGITS`].
#[derive(Debug, Default, Clone, Copy)]
pub struct LosslessFloatFormatter;

impl serde_json::ser::Formatter for LosslessFloatFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float in JSON output",
            ));
        }
        writer.write_all(format_sig(value, LOSSLESS_DIGITS).as_bytes())
    }
}

/// Serialize `value` as compact JSON with lossless float rendering.
pub fn to_lossless_json<T: serde::Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, LosslessFloatFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
