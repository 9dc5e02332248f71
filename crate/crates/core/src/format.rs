//! Locale-free number formatting and CSV writing shared by every output file.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Significant digits written to CSV files.
pub const SIG_DIGITS: usize = 9;

/// `%.9g`: nine significant digits, trailing zeros trimmed, exponent form
/// outside `1e-5 ≤ |x| < 1e9`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // rounding to nine digits first fixes the exponent (9.9999999996 → 1e1)
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIG_DIGITS as i32).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Builds a CSV document: header line, then one `fmt_g` row per record.
/// `None` cells are left empty.
pub fn csv_document<'a, I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = &'a [Option<f64>]>,
{
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if let Some(x) = cell {
                let _ = write!(out, "{}", fmt_g(*x));
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
