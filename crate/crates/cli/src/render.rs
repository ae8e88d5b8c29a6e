//! Binary PGM (P5) heatmaps. Values are min-max scaled to 0..=255 and row 0
//! (the lowest frequency bin) is drawn at the bottom.

use std::fs;
use std::path::Path;

use liewarp::tensor_io::read_tensor;
use serde_json::{json, Value};

use crate::commands::CliError;

pub fn to_pgm(rows: usize, cols: usize, data: &[f32]) -> Vec<u8> {
    let (lo, hi) = data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = hi - lo;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    for r in (0..rows).rev() {
        for v in &data[r * cols..(r + 1) * cols] {
            let x = if span > 0.0 { (v - lo) / span } else { 0.0 };
            out.push((x * 255.0).round() as u8);
        }
    }
    out
}

pub fn render(tensor: &Path, out: &Path) -> Result<Value, CliError> {
    let t = read_tensor(tensor)?;
    let (rows, cols) = match t.dims.as_slice() {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        dims => return Err(CliError::Usage(format!("can only render 1D or 2D tensors, got dims {dims:?}"))),
    };
    if rows == 0 || cols == 0 {
        return Err(CliError::Usage("cannot render an empty tensor".into()));
    }
    fs::write(out, to_pgm(rows, cols, &t.data)).map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
    let (lo, hi) = t.data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    Ok(json!({ "out": out, "width": cols, "height": rows, "min": lo, "max": hi }))
}
