//! CSV/JSON emission with a provenance header and lossless float formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros trimmed,
/// exponent form when the decimal exponent is below -4 or at least 17.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text with the `# seed=<seed> tool-version=<semver>` header line.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(seed: u64, columns: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# seed={seed} tool-version={TOOL_VERSION}").unwrap();
        writeln!(text, "{}", columns.join(",")).unwrap();
        CsvTable { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| fmt_g17(*v)).collect();
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    /// Row whose first cell is an integer index.
    pub fn indexed_row(&mut self, index: usize, values: &[f64]) {
        let mut cells = vec![index.to_string()];
        cells.extend(values.iter().map(|v| fmt_g17(*v)));
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.text)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_examples() {
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_header() {
        let mut t = CsvTable::new(42, &["E", "rho"]);
        t.row(&[0.5, 0.25]);
        assert_eq!(
            t.as_str(),
            format!("# seed=42 tool-version={TOOL_VERSION}\nE,rho\n0.5,0.25\n")
        );
    }

    proptest! {
        #[test]
        fn g17_roundtrips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let s = fmt_g17(v);
            prop_assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
