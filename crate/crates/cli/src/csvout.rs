//! CSV emission with fixed headers, seed metadata and 9-significant-digit
//! floats so identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

/// Formats a float with 9 significant digits.
pub fn sig9(value: f64) -> String {
    if value == 0.0 {
        return "0.00000000e0".to_string();
    }
    format!("{value:.8e}")
}

pub struct CsvWriter {
    out: Box<dyn Write>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> anyhow::Result<Self> {
        Ok(Self {
            out: Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        })
    }

    pub fn stdout() -> Self {
        Self {
            out: Box::new(std::io::stdout()),
        }
    }

    /// `# key=value` metadata comment line (seeds, modes, parameters).
    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) -> anyhow::Result<()> {
        writeln!(self.out, "# {key}={value}")?;
        Ok(())
    }

    pub fn header(&mut self, columns: &[&str]) -> anyhow::Result<()> {
        writeln!(self.out, "{}", columns.join(","))?;
        Ok(())
    }

    pub fn row(&mut self, fields: &[String]) -> anyhow::Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(1.0), "1.00000000e0");
        assert_eq!(sig9(0.012345678901), "1.23456789e-2");
        assert_eq!(sig9(0.0), "0.00000000e0");
        assert_eq!(sig9(-250.0), "-2.50000000e2");
    }
}
