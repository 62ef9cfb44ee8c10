//! Output formatting: decimal CSV cells with 12 significant digits and
//! `#`-prefixed metadata lines, `\n` endings, no locale dependence.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Formats with 12 significant digits in plain decimal notation, so the
/// files parse identically everywhere and diff cleanly.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.11}", 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn meta(buf: &mut String, key: &str, value: impl Display) {
    buf.push_str(&format!("# {key} = {value}\n"));
}

pub fn csv_row(buf: &mut String, cells: &[String]) {
    buf.push_str(&cells.join(","));
    buf.push('\n');
}

/// Writes to the file when a path is given, otherwise to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::fmt12;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(0.75), "0.750000000000");
        assert_eq!(fmt12(4.0), "4.00000000000");
        assert_eq!(fmt12(1234.5), "1234.50000000");
        assert_eq!(fmt12(0.0), "0.00000000000");
        assert_eq!(fmt12(-0.5), "-0.500000000000");
        assert_eq!(fmt12(1e-4), "0.000100000000000");
        assert_eq!(fmt12(f64::INFINITY), "inf");
        assert_eq!(fmt12(f64::NAN), "nan");
    }

    #[test]
    fn round_trips_through_parse() {
        for &x in &[0.75, 1.0 / 3.0, 123.456, 2.5e-3, 0.9999999999] {
            let s = fmt12(x);
            let back: f64 = s.parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs().max(1.0), "{x} -> {s}");
        }
    }
}
