//! Deterministic JSON serialization with full-precision floats.
//!
//! Every float is written with 17 significant digits, which is enough to
//! reconstruct the exact `f64` bit pattern on read. Struct fields serialize
//! in declaration order, so identical values produce byte-identical output.

use std::io;

use serde::Serialize;

use crate::error::{Error, Result};

struct FullPrecisionFormatter;

impl serde_json::ser::Formatter for FullPrecisionFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        // {:.16e} prints one digit before the point and 16 after: 17
        // significant digits, a lossless f64 round trip. serde_json turns
        // non-finite floats into null before this is called; report
        // validation rejects them earlier.
        write!(writer, "{:.16e}", value)
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serialize `value` to a compact JSON string with 17-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecisionFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidInput(format!("json serialization failed: {e}")))?;
    String::from_utf8(out).map_err(|e| Error::InvalidInput(format!("json is not utf-8: {e}")))
}
