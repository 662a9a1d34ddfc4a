//! Atomic file output and JSON rendering.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// Writes `bytes` to `path` through a temporary sibling file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Pretty JSON with default float rendering.
pub fn to_json_pretty<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Pretty JSON where every float is printed with exactly four decimals.
///
/// Struct field order is declaration order, so output is byte-stable for
/// identical inputs.
pub fn to_json_fixed4<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloat::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Default)]
struct FixedFloat {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident : $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.pretty.$name(w $(, $arg)*)
            }
        )*
    };
}

impl serde_json::ser::Formatter for FixedFloat {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            // Avoid "-0.0000".
            let v = if value == 0.0 { 0.0 } else { value };
            write!(w, "{v:.4}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    }
}
