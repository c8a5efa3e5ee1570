use std::io::Write;
use std::path::Path;

use gfol_core::flow::fmt12;

use crate::error::CliError;

/// Prints an `n×n` row-major block with aligned columns.
pub fn print_matrix(title: &str, n: usize, data: &[f64]) {
    println!("{title}:");
    let cells: Vec<String> = data.iter().map(|v| fmt12(clean(*v))).collect();
    let width = cells.iter().map(String::len).max().unwrap_or(1);
    for row in cells.chunks(n.max(1)) {
        let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        println!("  {}", line.join("  "));
    }
}

/// Prints `key  value` pairs with the keys padded to a common width.
pub fn print_residuals<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) {
    let rows: Vec<_> = rows.into_iter().collect();
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("  {k:<width$}  {}", fmt12(v));
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `-`.
pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{text}").map_err(|e| CliError::io(path, e))
    } else {
        std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e))
    }
}

/// Maps `-0` to `0`.
fn clean(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}
