//! Deterministic JSON: sorted keys and every float written with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};

struct Digits17<F>(F);

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn check_finite(v: &serde_json::Value) -> Result<()> {
    match v {
        serde_json::Value::Array(a) => a.iter().try_for_each(check_finite),
        serde_json::Value::Object(o) => o.values().try_for_each(check_finite),
        // serde_json turns non-finite floats into null, so nothing else can slip through
        _ => Ok(()),
    }
}

fn render<T: Serialize, F: Formatter>(value: &T, fmt: F) -> Result<String> {
    // Going through Value sorts object keys (BTreeMap-backed map).
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    check_finite(&v)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(fmt));
    v.serialize(&mut ser).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn to_canonical_string(value: &impl Serialize) -> Result<String> {
    render(value, CompactFormatter)
}

pub fn to_canonical_string_pretty(value: &impl Serialize) -> Result<String> {
    render(value, PrettyFormatter::new())
}

/// Format a real the same way the JSON writer does.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
