//! CSV and manifest writers. Reals are written with 17 significant digits
//! so files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// Formats a real with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        Self::create_with_comments(path, &[], header)
    }

    /// Like [`CsvWriter::create`] with leading `# ...` comment lines.
    pub fn create_with_comments(path: &Path, comments: &[String], header: &[String]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = CsvWriter { out: BufWriter::new(file) };
        for c in comments {
            writeln!(w.out, "# {c}")?;
        }
        writeln!(w.out, "{}", header.join(","))?;
        Ok(w)
    }

    /// Writes one row: a leading integer label followed by reals.
    pub fn row(&mut self, label: u64, values: &[f64]) -> Result<()> {
        let mut line = label.to_string();
        for v in values {
            line.push(',');
            line.push_str(&real(*v));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// `prefix_1, ..., prefix_k` column names.
pub fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

pub fn header(leading: &[&str], rest: Vec<String>) -> Vec<String> {
    leading.iter().map(|s| s.to_string()).chain(rest).collect()
}

/// Writes `run_manifest`: tool versions followed by the resolved config.
pub fn write_manifest(dir: &Path, lines: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = format!(
        "# imcmc {} (imcmc-core {})\n",
        env!("CARGO_PKG_VERSION"),
        imcmc_core::VERSION
    );
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    std::fs::write(dir.join("run_manifest"), text).context("writing run_manifest")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn writes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.csv");
        let mut w = CsvWriter::create_with_comments(&path, &["seed = 3".into()], &header(&["k"], numbered("p_", 2))).unwrap();
        w.row(0, &[0.25, 0.75]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "# seed = 3\nk,p_1,p_2\n0,2.5000000000000000e-1,7.5000000000000000e-1\n"
        );
    }
}
