mod data;
mod edit;
mod eval;

pub use data::{augment, import_soba, stats, validate};
pub use edit::{edit_remove, edit_transfer, light};
use eval::load_predictions;
pub use eval::{eval, loss_check, pair};

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use serde::Serialize;
use soba_core::dataset::Dataset;
use soba_core::io::{to_json_fixed4, write_atomic};

use crate::args::ReportArgs;
use crate::error::{CliError, CliResult};

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::file(path, e))
}

fn load_manifest(path: &Path) -> CliResult<Dataset> {
    Dataset::from_slice(&read(path)?).map_err(|e| CliError::file(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    write_atomic(path, bytes).map_err(|e| CliError::file(path, format!("cannot write: {e}")))
}

fn json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = to_json_fixed4(value).map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the report where asked and prints either the JSON or `summary`.
fn emit<T: Serialize>(args: &ReportArgs, value: &T, summary: &str) -> CliResult {
    let bytes = json(value)?;
    if let Some(path) = &args.report {
        write(path, &bytes)?;
    }
    if args.json {
        print!("{}", String::from_utf8_lossy(&bytes));
    } else {
        print!("{summary}");
    }
    Ok(())
}

fn image_root(explicit: &Option<PathBuf>, manifest: &Path) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    }
}

fn load_rgb(path: &Path) -> CliResult<RgbImage> {
    let img = image::open(path).map_err(|e| CliError::file(path, e))?;
    Ok(img.to_rgb8())
}

fn png_bytes(img: &RgbImage) -> CliResult<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| CliError::Internal(format!("PNG encoding: {e}")))?;
    Ok(buf.into_inner())
}

fn save_png(path: &Path, img: &RgbImage) -> CliResult {
    write(path, &png_bytes(img)?)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}
