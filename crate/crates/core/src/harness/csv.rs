//! CSV output for aggregated results.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::run::ResultRow;

pub const CSV_HEADER: &str = "method,snr_db,mean_sinr_db,std_sinr_db,mean_power_db,trials,mean_flops";

/// `x` rounded to `digits` significant digits, `%g` style: plain notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // Round first so the exponent reflects carries such as 9.999996 -> 10.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            format_significant(r.snr_db, 6),
            format_significant(r.mean_sinr_db, 6),
            format_significant(r.std_sinr_db, 6),
            format_significant(r.mean_power_db, 6),
            r.trials,
            format_significant(r.mean_flops, 6),
        );
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
