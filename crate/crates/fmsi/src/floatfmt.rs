//! Deterministic float formatting shared by every artifact writer.
//!
//! All result files (JSON and CSV) format `f64` with 17 significant digits in
//! scientific notation, which round-trips exactly and is byte-stable across
//! platforms and worker counts.

use serde::Serialize;
use std::io;

/// Format a float with 17 significant digits, e.g. `5.0000000000000000e-1`.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// JSON formatter identical to `serde_json`'s compact formatter except that
/// finite floats are written via [`fmt_f64`].
#[derive(Default)]
pub struct SigFig17Formatter;

impl serde_json::ser::Formatter for SigFig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

/// Serialize any value to a compact JSON string with 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFig17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips_exactly() {
        for &x in &[
            0.5,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            0.0,
            f64::MIN_POSITIVE,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().expect("parseable");
            assert_eq!(back.to_bits(), x.to_bits(), "round-trip failed for {s}");
        }
    }

    #[test]
    fn json_uses_sig_fig_floats() {
        #[derive(Serialize)]
        struct Row {
            p: f64,
            n: usize,
        }
        let s = to_json(&Row { p: 0.5, n: 3 }).unwrap();
        assert_eq!(s, r#"{"p":5.0000000000000000e-1,"n":3}"#);
    }

    #[test]
    fn json_nonfinite_becomes_null() {
        let s = to_json(&f64::NAN).unwrap();
        assert_eq!(s, "null");
    }
}
